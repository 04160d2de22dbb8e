//! The verification side of the lab: exact mutual information of small
//! release channels, the two upper bounds every eps-DP channel must obey,
//! the exhaustive one-bit sketch search, Fano conversion, and the scaling
//! floors for each regime.
//!
//!     cargo run --release --example information_bounds

use ldp_lab::bounds::{
    dp_mi_bound, exact_mutual_information, fano_bound, onebit_sketch_search,
    posterior_collision_bound, run_bound_suite, sample_complexity_floor, Regime,
};
use ldp_lab::kernel::{subset_count, ChannelKernel};
use ldp_lab::privacy::randomized_response_kernel;

fn main() {
    let eps = (3.0f64).ln();
    let rr = randomized_response_kernel(eps).unwrap();
    let inputs = subset_count(1, 1) * 2;
    let prior = vec![1.0 / inputs as f64; inputs];
    let mi = exact_mutual_information(&prior, &rr).unwrap();
    println!("randomized response at ln 3: exact MI {mi:.6} bits");
    println!("  dp bound       {:.6}", dp_mi_bound(eps).unwrap());
    println!(
        "  collision bound {:.6}",
        posterior_collision_bound(&rr).unwrap()
    );

    let lossless = ChannelKernel::identity(1, 1);
    let full = exact_mutual_information(&prior, &lossless).unwrap();
    println!("identity channel on one rated item: MI {full:.6} bits");

    println!("\nbest deterministic one-bit sketch by catalogue size:");
    for n in 1..=5 {
        let s = onebit_sketch_search(n).unwrap();
        println!(
            "  N = {n}: best MI {:.6} (<= 1/N = {:.6}) over {} sketches",
            s.best_mi,
            1.0 / n as f64,
            s.sketches_checked
        );
    }

    let mi_needed = fano_bound(2.0, 1024.0, 1.0).unwrap();
    println!("\nFano: MI 2 bits, 1024 labelings: error rate >= {mi_needed:.3}");

    println!("\nsample floors at N = 1000, w = 5, eps = 0.5:");
    for regime in [Regime::Basic, Regime::ScarceWeak, Regime::ScarceStrong] {
        let users = sample_complexity_floor(regime, 1000, 5, 0.5).unwrap();
        println!("  {regime}: {users:.0}");
    }
    let adaptive = sample_complexity_floor(Regime::AdaptiveW1, 1024, 1, 1.0).unwrap();
    println!("  {}: {adaptive:.0}", Regime::AdaptiveW1);

    println!("\nfull small-instance dominance suite:");
    let report = run_bound_suite(2, 25, 99).unwrap();
    print!("{}", report.render_table());
    println!("all pass: {}", report.all_pass());
}
