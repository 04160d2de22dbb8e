//! Finds the user count where recovery starts succeeding, across a small
//! catalogue-size grid, and fits the growth exponent. Small sizes keep this
//! under a minute; the checked-in calibration file holds the full-size runs.
//!
//!     cargo run --release --example scaling_sweep

use ldp_lab::harness::{self, Algorithm};
use ldp_lab::model::ModelParams;

fn main() {
    let grid = [24usize, 48, 96];
    let mut points = Vec::new();
    println!("maxsense threshold search, target 0.9 over 10 trials per probe:");
    for (i, &n) in grid.iter().enumerate() {
        let params = ModelParams {
            n_items: n,
            n_users: 1,
            alpha: vec![1.0],
            beta: vec![0.5, 0.5],
            affinity: vec![vec![0.9, 0.1]],
            rated_per_user: 6,
            epsilon: 1.0,
            theta: 1.0,
        };
        let found = harness::threshold_users(
            Algorithm::MaxSense,
            &params,
            0.9,
            10,
            2_000,
            5_000_000,
            (i as u64 + 1) * 100_000,
        )
        .unwrap();
        println!(
            "  N = {n:>3}: U* = {:>7} after {} probes",
            found.u_star,
            found.probes.len()
        );
        points.push((n as f64, found.u_star as f64));
    }
    let fit = harness::scaling_fit(&points).unwrap();
    let predicted: Vec<(f64, f64)> = grid
        .iter()
        .map(|&n| (n as f64, (n * n) as f64 * (n as f64).log2()))
        .collect();
    let reference = harness::scaling_fit(&predicted).unwrap();
    println!(
        "log-log slope {:.2} (r2 {:.3}); N^2 log N comes to {:.2} on this grid",
        fit.slope, fit.r2, reference.slope
    );
}
