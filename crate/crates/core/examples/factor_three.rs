//! Three PSD factors through the triangular split: a singular example with a
//! nonzero coupling block, a nilpotent matrix and an invertible one.

use psdfactor::linalg::c;
use psdfactor::{factor_three, verify_factorization, CMatrix, ConstructConfig};

fn main() {
    let cases = [
        ("[[-9, -9], [0, 0]]", CMatrix::from_real(2, &[-9., -9., 0., 0.]).unwrap()),
        ("[[-9, -9], [0, 0]] ⊗ I2", CMatrix::from_real(2, &[-9., -9., 0., 0.]).unwrap().kron_identity(2)),
        ("[[0, 1], [0, 0]]", CMatrix::from_real(2, &[0., 1., 0., 0.]).unwrap()),
        ("diag(1, ω, ω̄)", CMatrix::diag(&[c(1., 0.), c(-0.5, 0.75f64.sqrt()), c(-0.5, -0.75f64.sqrt())])),
    ];
    let cfg = ConstructConfig::default();
    for (name, a) in cases {
        let list = factor_three(&a, &cfg).unwrap();
        let report = verify_factorization(&a, &list.factors, 1e-6).unwrap();
        println!(
            "{name:<26} method {:<28} residual {:.2e}  min eig {:?}  verified {}",
            list.method,
            list.product_residual,
            list.min_factor_eigenvalues.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(),
            report.verdict
        );
    }
}
