//! `*`-congruence `A ↦ S*AS` keeps odd factor counts: a 3-factor product is
//! moved by a random invertible `S` and its factors are transported along.

use psdfactor::construct::congruence_transport;
use psdfactor::linalg::product_chain;
use psdfactor::sample;
use psdfactor::{classify, factor_three, verify_factorization, ClassifyConfig, CMatrix, ConstructConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let a = CMatrix::from_real(2, &[-9., -9., 0., 0.]).unwrap();
    let list = factor_three(&a, &ConstructConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = sample::conditioned(&mut rng, 2, 0.5, 2.0);
    let b = CMatrix::new(s.adjoint().as_block() * a.as_block() * s.as_block()).unwrap();
    let moved = congruence_transport(&list.factors, &s).unwrap();
    let report = verify_factorization(&b, &moved, 1e-6).unwrap();
    let cls = classify(&b, &ClassifyConfig::default()).unwrap();
    println!("S*AS classified k = {} via {}", cls.k, cls.rule.name());
    println!("transported factors verify: {} (residual {:.2e})", report.verdict, report.product_residual);
    println!("S*AS = {}", product_chain(&moved).unwrap().as_block());
}
