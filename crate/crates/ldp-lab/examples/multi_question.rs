//! Multiple disjunction questions per user under one privacy budget. Each
//! of the Q questions senses a disjoint block of items and is released at
//! eps/Q, so the composed release still satisfies eps. More questions per
//! user buy more counts per item only if the budget split does not drown
//! the per-question signal; this demo compares Q = 1 against Q = 2 at the
//! same total budget and user count.
//!
//!     cargo run --release --example multi_question

use ldp_lab::harness::{self, Algorithm};
use ldp_lab::maxsense::default_question_count;
use ldp_lab::model::ModelParams;

fn main() {
    let params = ModelParams {
        n_items: 100,
        n_users: 400_000,
        alpha: vec![1.0],
        beta: vec![0.5, 0.5],
        affinity: vec![vec![0.9, 0.1]],
        rated_per_user: 10,
        epsilon: 2.0,
        theta: 1.0,
    };
    println!(
        "default question count at eps = {}: {}",
        params.epsilon,
        default_question_count(params.epsilon)
    );

    for q in [1usize, 2, 4] {
        let trial = harness::run_trial(
            Algorithm::MultiMaxSense { questions: q },
            &params,
            21,
        )
        .unwrap();
        println!(
            "Q = {q}: per-question eps {:.2}, misplaced {}/{} (exact = {})",
            params.epsilon / q as f64,
            trial.misplaced,
            params.n_items,
            trial.exact
        );
    }
}
