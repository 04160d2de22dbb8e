//! Non-private reference points: the adaptive single-item attacker whose
//! successful queries arrive every 2N rounds, and the coupon-collector
//! broadcaster throttled to one reveal per log2 N rounds.
//!
//!     cargo run --release --example baselines

use ldp_lab::harness::{baseline_adaptive_w1, baseline_coupon_bandwidth};
use ldp_lab::model::deterministic_truth_vector;
use ldp_lab::rng;

fn main() {
    println!("adaptive attacker, mean queries over 300 runs:");
    for n in [8usize, 16, 32] {
        let mut total = 0u64;
        for rep in 0..300u64 {
            let bits = deterministic_truth_vector(n, 900 + rep).unwrap();
            let mut stream = rng::indexed(17, "demo:adaptive", rep);
            total += baseline_adaptive_w1(&bits, &mut stream).unwrap();
        }
        let mean = total as f64 / 300.0;
        println!(
            "  N = {n:>2}: {mean:>8.0} queries, ratio to 2 N^2 = {:.3}",
            mean / (2.0 * (n * n) as f64)
        );
    }

    println!("coupon broadcaster, mean rounds over 300 runs:");
    for n in [64usize, 128, 256] {
        let mut total = 0u64;
        for rep in 0..300u64 {
            let mut stream = rng::indexed(18, "demo:coupon", rep);
            total += baseline_coupon_bandwidth(n, &mut stream).unwrap();
        }
        let mean = total as f64 / 300.0;
        let scale = n as f64 * (n as f64).log2().powi(2);
        println!("  N = {n:>3}: {mean:>8.0} rounds, ratio to N log2^2 N = {:.3}", mean / scale);
    }
}
