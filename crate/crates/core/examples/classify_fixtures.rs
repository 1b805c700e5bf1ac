//! Classifies the built-in fixtures and prints the deciding rule.

use psdfactor::cli::fixtures;
use psdfactor::{classify, ClassifyConfig};

fn main() {
    let cfg = ClassifyConfig::default();
    for fx in fixtures() {
        let cls = classify(&fx.matrix, &cfg).expect("fixture classifies");
        println!(
            "{:<24} n = {}  k = {:<10} rule = {:<20} borderline = {}",
            fx.name,
            fx.matrix.n(),
            cls.k.to_string(),
            cls.rule.name(),
            cls.borderline
        );
    }
}
