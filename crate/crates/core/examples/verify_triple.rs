//! Checks an integer factorization of `[[-9, -9], [0, 0]]` into three PSD
//! matrices; the product is exact.

use psdfactor::cli::example1_triple;
use psdfactor::linalg::product_chain;
use psdfactor::{verify_factorization, CMatrix};

fn main() {
    let a = CMatrix::from_real(2, &[-9., -9., 0., 0.]).unwrap();
    let factors = example1_triple();
    println!("product {}", product_chain(&factors).unwrap().as_block());
    let report = verify_factorization(&a, &factors, 1e-12).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
