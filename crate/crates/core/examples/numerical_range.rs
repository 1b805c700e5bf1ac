//! Support function of a rank-one matrix `u v*` and the two range predicates.
//!
//! `W(u v*)` is a filled ellipse with foci `0` and `v*u`; the sampled support
//! function is compared with the ellipse's own.

use psdfactor::linalg::c;
use psdfactor::numrange::{contains_zero_interior, intersects_positive_axis, support_value};
use psdfactor::{range_profile, CMatrix, RangeConfig};

fn main() {
    let a = CMatrix::from_rows(&[
        vec![c(1.0, 0.0), c(2.0, 1.0)],
        vec![c(0.0, 0.0), c(0.0, 0.0)],
    ])
    .unwrap();
    // u = e1, v* = (1, 2+i): foci 0 and 1, semi-axes from ‖u‖‖v‖.
    let trace = c(1.0, 0.0);
    let uv = 6f64.sqrt();
    let profile = range_profile(&a, 256).unwrap();
    let mut worst: f64 = 0.0;
    for &t in &profile.angles {
        let center = trace / 2.0;
        let rot = num_complex::Complex64::from_polar(1.0, -t);
        let semi_major = uv / 2.0;
        let semi_minor = (uv * uv - trace.norm_sqr()).sqrt() / 2.0;
        // Support of an ellipse whose major axis points along `trace`.
        let phi = t - trace.arg();
        let ellipse = (rot * center).re + (semi_major.powi(2) * phi.cos().powi(2) + semi_minor.powi(2) * phi.sin().powi(2)).sqrt();
        worst = worst.max((support_value(&a, t).unwrap().h - ellipse).abs());
    }
    println!("max |h(θ) − ellipse support| over {} angles: {worst:.3e}", profile.samples);

    let cfg = RangeConfig::default();
    let zi = contains_zero_interior(&a, &cfg).unwrap();
    let pa = intersects_positive_axis(&a, &cfg).unwrap();
    println!("0 interior: {} (margin {:.3e})", zi.verdict, zi.margin);
    println!("meets (0, ∞): {} (margin {:.3e})", pa.verdict, pa.margin);
    for line in profile.to_csv().lines().take(5) {
        println!("{line}");
    }
}
