//! Two PSD factors of a matrix similar to a nonnegative diagonal matrix.

use psdfactor::{factor_two, verify_factorization, CMatrix};

fn main() {
    let a = CMatrix::from_real(3, &[1.0, 1.0, 0.0, 0.0, 2.0, 5.0, 0.0, 0.0, 0.0]).unwrap();
    let list = factor_two(&a, 1e-9).unwrap();
    println!("method {}  residual {:.3e}", list.method, list.product_residual);
    for (j, p) in list.factors.iter().enumerate() {
        println!("P{} min eigenvalue {:.6}", j + 1, list.min_factor_eigenvalues[j]);
        println!("{}", p.as_block());
    }
    let report = verify_factorization(&a, &list.factors, 1e-9).unwrap();
    println!("verdict {}", report.verdict);
}
