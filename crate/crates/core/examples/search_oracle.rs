//! Numerical search for `k`-factor products, compared with the classifier.
//! Search never finds fewer factors than the classifier's count.

use psdfactor::{classify, search_factors, ClassifyConfig, CMatrix, SearchConfig};

fn main() {
    let cases = [
        ("[[1, 1], [0, 2]]", CMatrix::from_real(2, &[1., 1., 0., 2.]).unwrap()),
        ("[[-9, -9], [0, 0]]", CMatrix::from_real(2, &[-9., -9., 0., 0.]).unwrap()),
        ("-I2", CMatrix::from_real(2, &[-1., 0., 0., -1.]).unwrap()),
    ];
    for (name, a) in cases {
        let cls = classify(&a, &ClassifyConfig::default()).unwrap();
        print!("{name:<20} classified k = {:<3}", cls.k.to_string());
        for k in 1..=5 {
            let mut cfg = SearchConfig::new(k);
            cfg.restarts = 4;
            let res = search_factors(&a, &cfg).unwrap();
            print!("  k={k}: {} ({:.1e})", if res.found { "found" } else { "-" }, res.best_residual);
        }
        println!();
    }
}
