//! Regenerates `calibration.toml` by rerunning every pilot from scratch:
//! the recovery-budget constants, the threshold scaling sweeps, and the
//! disjointness-ratio bound. Expect roughly half an hour on one core.
//!
//!     cargo run --release --example calibrate [-- --out PATH]

use std::time::Instant;

use ldp_lab::bounds;
use num_traits::ToPrimitive;
use ldp_lab::harness::{
    self, Algorithm, Calibration, RecoveryPilot, ScalingPilots, ThresholdPilot,
};
use ldp_lab::model::ModelParams;
use ldp_lab::pairwise::PairMode;
use ldp_lab::{maxsense, privacy};

fn well_separated(n_items: usize, rated_per_user: usize) -> ModelParams {
    ModelParams {
        n_items,
        n_users: 1,
        alpha: vec![1.0],
        beta: vec![0.5, 0.5],
        affinity: vec![vec![0.9, 0.1]],
        rated_per_user,
        epsilon: 1.0,
        theta: 1.0,
    }
}

/// `C N^2 log2(N) / (hat(eps)^2 delta_min^2 w)` users for count-based recovery.
fn recovery_budget(c: f64, p: &ModelParams) -> usize {
    let hat = privacy::hat_epsilon(p.epsilon).unwrap();
    let delta = maxsense::delta_min(p).unwrap();
    let n = p.n_items as f64;
    let w = p.rated_per_user as f64;
    (c * n * n * n.log2() / (hat * hat * delta * delta * w)).round() as usize
}

/// `c N log2(N)` users for pairwise recovery.
fn pairwise_budget(c: f64, n_items: usize) -> usize {
    let n = n_items as f64;
    (c * n * n.log2()).round() as usize
}

fn run_recovery_pilot(constant: f64, trials: usize, seed0: u64) -> RecoveryPilot {
    let mut p = well_separated(200, 20);
    p.n_users = recovery_budget(constant, &p);
    eprintln!("recovery pilot: C = {constant}, U = {}", p.n_users);
    let start = Instant::now();
    let results = harness::run_trials(Algorithm::MaxSense, &p, trials, seed0).unwrap();
    let successes = results.iter().filter(|r| r.exact).count();
    eprintln!(
        "  {successes}/{trials} exact in {:.1} s",
        start.elapsed().as_secs_f64()
    );
    RecoveryPilot {
        constant,
        n_items: p.n_items,
        rated_per_user: p.rated_per_user,
        epsilon: p.epsilon,
        theta: p.theta,
        trials,
        seed0,
        successes,
    }
}

fn run_pairwise_pilot(constant: f64, trials: usize, seed0: u64) -> RecoveryPilot {
    let mut p = well_separated(100, 100);
    p.n_users = pairwise_budget(constant, p.n_items);
    eprintln!("pairwise pilot: c = {constant}, U = {}", p.n_users);
    let start = Instant::now();
    let algo = Algorithm::Pairwise(PairMode::RandomGlobal);
    let results = harness::run_trials(algo, &p, trials, seed0).unwrap();
    let successes = results.iter().filter(|r| r.exact).count();
    eprintln!(
        "  {successes}/{trials} exact in {:.1} s",
        start.elapsed().as_secs_f64()
    );
    RecoveryPilot {
        constant,
        n_items: p.n_items,
        rated_per_user: p.rated_per_user,
        epsilon: p.epsilon,
        theta: p.theta,
        trials,
        seed0,
        successes,
    }
}

fn run_threshold_pilot(mut pilot: ThresholdPilot, cap: usize) -> ThresholdPilot {
    let mut points = Vec::new();
    for i in 0..pilot.n_items.len() {
        let p = well_separated(pilot.n_items[i], pilot.rated_per_user[i]);
        let start = Instant::now();
        let found = harness::threshold_users(
            Algorithm::MaxSense,
            &p,
            pilot.target,
            pilot.trials,
            pilot.u0[i],
            cap,
            pilot.seed0[i],
        )
        .unwrap();
        eprintln!(
            "  N = {}, w = {}: U* = {} after {} probes in {:.1} s",
            p.n_items,
            p.rated_per_user,
            found.u_star,
            found.probes.len(),
            start.elapsed().as_secs_f64()
        );
        pilot.u_star[i] = found.u_star;
        let varying = if pilot.n_items[0] == *pilot.n_items.last().unwrap() {
            pilot.rated_per_user[i]
        } else {
            pilot.n_items[i]
        };
        points.push((varying as f64, found.u_star as f64));
    }
    let fit = harness::scaling_fit(&points).unwrap();
    eprintln!("  slope {:.3}, r2 {:.4}", fit.slope, fit.r2);
    pilot.slope = fit.slope;
    pilot
}

fn disjoint_ratio_bound() -> f64 {
    let mut worst = 0.0f64;
    for n in (50..=400).step_by(50) {
        let wmax = (n as f64).cbrt().floor() as usize;
        for w in 2..=wmax {
            let r = bounds::disjoint_subset_ratio(n, w).unwrap();
            let scaled = r.error.to_f64().unwrap_or(f64::INFINITY) * (n * n) as f64
                / (w as f64).powi(4);
            worst = worst.max(scaled);
        }
    }
    eprintln!("disjoint ratio: worst scaled error {worst:.6}");
    (worst * 10.0).ceil() / 10.0
}

fn main() {
    let mut out_path: Option<String> = None;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--out" => out_path = args.next(),
            other => {
                eprintln!("unknown argument {other}");
                std::process::exit(2);
            }
        }
    }
    let out_path = out_path
        .unwrap_or_else(|| format!("{}/calibration.toml", env!("CARGO_MANIFEST_DIR")));

    let total = Instant::now();
    let recovery = run_recovery_pilot(16.0, 20, 500);
    let pairwise = run_pairwise_pilot(120.0, 20, 700);

    eprintln!("scaling in catalogue size (w fixed at 10):");
    let items = run_threshold_pilot(
        ThresholdPilot {
            n_items: vec![100, 200, 400],
            rated_per_user: vec![10, 10, 10],
            epsilon: 1.0,
            theta: 1.0,
            target: 0.9,
            trials: 10,
            u0: vec![290_000, 1_350_000, 6_170_000],
            seed0: vec![1_000_000, 2_000_000, 3_000_000],
            u_star: vec![0, 0, 0],
            slope: 0.0,
        },
        20_000_000,
    );

    eprintln!("scaling in rated count (N fixed at 256):");
    let rated = run_threshold_pilot(
        ThresholdPilot {
            n_items: vec![256, 256, 256],
            rated_per_user: vec![8, 16, 32],
            epsilon: 1.0,
            theta: 1.0,
            target: 0.9,
            trials: 10,
            u0: vec![3_900_000, 1_960_000, 980_000],
            seed0: vec![10_000_000, 11_000_000, 12_000_000],
            u_star: vec![0, 0, 0],
            slope: 0.0,
        },
        20_000_000,
    );

    let cal = Calibration {
        disjoint_ratio_bound: disjoint_ratio_bound(),
        recovery,
        pairwise,
        scaling: ScalingPilots { items, rated },
    };
    let header = "\
# Pilot-calibrated constants, frozen together with the seeds and grids that
# produced them. Regenerate with:
#
#     cargo run --release --example calibrate
#
# Starting guesses (u0) came from a coarse earlier pilot; only the recorded
# searches matter, and reruns with the same seeds reproduce them exactly.
";
    let body = cal.to_toml();
    std::fs::write(&out_path, format!("{header}\n{body}")).unwrap();
    println!(
        "wrote {out_path} in {:.0} s total",
        total.elapsed().as_secs_f64()
    );
}
