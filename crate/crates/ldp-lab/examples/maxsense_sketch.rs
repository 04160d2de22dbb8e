//! The count-based route: each user answers one privatized disjunction
//! query over a random sensing vector, per-item counts of positive answers
//! separate the item classes, and exact 1-D clustering recovers them.
//!
//!     cargo run --release --example maxsense_sketch

use ldp_lab::harness::{self, Algorithm};
use ldp_lab::maxsense::{check_separability, expected_count, make_sensing_vector};
use ldp_lab::model::{sample_ground_truth, ModelParams};
use ldp_lab::rng;

fn main() {
    let params = ModelParams {
        n_items: 100,
        n_users: 400_000,
        alpha: vec![1.0],
        beta: vec![0.5, 0.5],
        affinity: vec![vec![0.9, 0.1]],
        rated_per_user: 10,
        epsilon: 1.0,
        theta: 1.0,
    };

    let mut stream = rng::substream(3, "demo:sense");
    let h = make_sensing_vector(params.n_items, params.theta, params.rated_per_user, &mut stream)
        .unwrap();
    println!(
        "one sensing vector: {} of {} items sensed (expected {:.0}), hex {}",
        h.ones(),
        h.len(),
        params.n_items as f64 * params.sensing_probability(),
        h.to_hex()
    );

    let report = check_separability(&params).unwrap();
    println!(
        "class separability: min separation {:.4}, separable = {}",
        report.delta_min, report.separable
    );
    for l in 0..2 {
        println!(
            "  expected positive count for a class-{l} item: {:.0}",
            expected_count(&params, l).unwrap()
        );
    }

    let truth = sample_ground_truth(&params, 3).unwrap();
    let counts = harness::maxsense_counts(&params, &truth, 3).unwrap();
    let classes = truth.item_class_usize();
    for l in 0..2 {
        let vals: Vec<u64> = (0..params.n_items)
            .filter(|&i| classes[i] == l)
            .map(|i| counts.counts[i])
            .collect();
        let mean = vals.iter().sum::<u64>() as f64 / vals.len() as f64;
        println!("  observed mean count for class {l}: {mean:.0}");
    }

    let trial = harness::run_trial(Algorithm::MaxSense, &params, 3).unwrap();
    println!(
        "recovery: {} misplaced of {} (exact = {})",
        trial.misplaced, params.n_items, trial.exact
    );
}
