//! Randomized response on one bit: the keep probability, the effective
//! signal level, budget splitting, and a machine check that the induced
//! channel really satisfies its epsilon.
//!
//!     cargo run --example dp_mechanism

use ldp_lab::privacy::{
    hat_epsilon, keep_probability, split_budget, verify_dp_kernel, BitRelease,
    NeighborRelation, PrivacyBudget,
};
use ldp_lab::rng;

fn main() {
    let eps = (3.0f64).ln();
    let release = BitRelease::new(eps).unwrap();
    println!("epsilon = ln 3: keep probability {:.4}", release.keep());
    println!("signal level hat(eps) = {:.4}", hat_epsilon(eps).unwrap());

    let mut stream = rng::substream(7, "demo:rr");
    let flips = 100_000;
    let kept = (0..flips)
        .filter(|_| release.release(1, &mut stream) == 1)
        .count();
    println!(
        "kept {kept}/{flips} = {:.4} (expected {:.4})",
        kept as f64 / flips as f64,
        keep_probability(eps).unwrap()
    );

    let per_question = split_budget(2.0, 4).unwrap();
    let mut budget = PrivacyBudget::new(2.0).unwrap();
    for _ in 0..4 {
        budget.charge(per_question).unwrap();
    }
    println!(
        "split 2.0 across 4 questions: {per_question} each, remaining {:e}",
        budget.remaining()
    );
    assert!(budget.charge(per_question).is_err());

    let kernel = ldp_lab::privacy::randomized_response_kernel(eps).unwrap();
    let verdict = verify_dp_kernel(&kernel, eps, NeighborRelation::AllPairs).unwrap();
    println!(
        "channel verifier: max log-ratio {:.6} <= {:.6}, pass = {}",
        verdict.max_log_ratio, eps, verdict.pass
    );
    let tighter = verify_dp_kernel(&kernel, eps - 0.01, NeighborRelation::AllPairs).unwrap();
    println!("same channel at eps - 0.01: pass = {}", tighter.pass);
}
