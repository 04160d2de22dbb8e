//! End-to-end trials, success rates, threshold search, and baselines.
//!
//! A trial samples a ground truth, runs every user's private release in
//! parallel, clusters the aggregate, and scores the recovered item classes
//! against the truth. Per-user randomness comes from substreams keyed only
//! by the master seed and the user id, and aggregation is a commutative
//! merge of counters, so results are identical for any thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{match_labels, ClusterError};
use crate::maxsense::{self, ItemCounts, MaxSenseError};
use crate::model::{sample_ground_truth, sample_user, GroundTruth, ModelError, ModelParams};
use crate::pairwise::{self, PairMode, PairwiseError, PreferenceMatrix};
use crate::privacy::PrivacyError;
use crate::rng;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad harness config: {0}")]
    BadConfig(String),
    #[error("threshold not bracketable below {cap} users")]
    NotBracketable { cap: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Pairwise(#[from] PairwiseError),
    #[error(transparent)]
    MaxSense(#[from] MaxSenseError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Which estimator a trial runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Pairwise(PairMode),
    MaxSense,
    MultiMaxSense { questions: usize },
}

impl Algorithm {
    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::Pairwise(_) => "pairwise",
            Algorithm::MaxSense => "maxsense",
            Algorithm::MultiMaxSense { .. } => "mms",
        }
    }

    /// Released bits per user.
    pub fn questions(&self) -> usize {
        match self {
            Algorithm::MultiMaxSense { questions } => *questions,
            _ => 1,
        }
    }
}

const PAIRWISE_RESTARTS: usize = 10;

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub algorithm: &'static str,
    pub n_items: usize,
    pub n_users: usize,
    pub n_user_classes: usize,
    pub n_item_classes: usize,
    pub rated_per_user: usize,
    pub epsilon: f64,
    pub theta: f64,
    pub questions: usize,
    pub seed: u64,
    pub exact: bool,
    pub misplaced: usize,
    pub misclassification: f64,
    pub wall_ms: u128,
}

impl TrialResult {
    /// Everything that must be bit-identical across reruns and thread
    /// counts. Wall time is deliberately left out.
    pub fn canonical(&self) -> String {
        format!(
            "{} N={} U={} K={} L={} w={} eps={} theta={} Q={} seed={} exact={} misplaced={} misclass={}",
            self.algorithm,
            self.n_items,
            self.n_users,
            self.n_user_classes,
            self.n_item_classes,
            self.rated_per_user,
            self.epsilon,
            self.theta,
            self.questions,
            self.seed,
            self.exact,
            self.misplaced,
            self.misclassification,
        )
    }
}

/// Aggregates every user's pairwise release into a preference matrix.
pub fn pairwise_matrix(
    params: &ModelParams,
    truth: &GroundTruth,
    mode: PairMode,
    seed: u64,
) -> Result<PreferenceMatrix, HarnessError> {
    params.validate()?;
    if params.n_items < 2 {
        return Err(HarnessError::BadConfig("need at least two items".into()));
    }
    let n = params.n_items;
    let make = || PreferenceMatrix::new(n).expect("item count checked above");
    (0..params.n_users as u64)
        .into_par_iter()
        .try_fold(make, |mut acc, uid| {
            let user = sample_user(params, truth, uid, seed);
            let mut stream = rng::indexed(seed, "sketch", uid);
            let pair = pairwise::assign_pair(mode, &user, n, &mut stream)?;
            let bit = pairwise::pp_private_sketch(&user, pair, params.epsilon, &mut stream)?;
            acc.add(pair, bit);
            Ok::<_, HarnessError>(acc)
        })
        .try_reduce(make, |mut a, b| {
            a.merge(&b);
            Ok(a)
        })
}

/// Aggregates every user's single-question release into item counts.
pub fn maxsense_counts(
    params: &ModelParams,
    truth: &GroundTruth,
    seed: u64,
) -> Result<ItemCounts, HarnessError> {
    params.validate()?;
    let n = params.n_items;
    (0..params.n_users as u64)
        .into_par_iter()
        .try_fold(
            || ItemCounts::new(n),
            |mut acc, uid| {
                let user = sample_user(params, truth, uid, seed);
                let mut stream = rng::indexed(seed, "sketch", uid);
                let h = maxsense::make_sensing_vector(
                    n,
                    params.theta,
                    params.rated_per_user,
                    &mut stream,
                )?;
                let bit = maxsense::ms_private_sketch(&user, &h, params.epsilon, &mut stream)?;
                acc.add(&h, bit);
                Ok::<_, HarnessError>(acc)
            },
        )
        .try_reduce(
            || ItemCounts::new(n),
            |mut a, b| {
                a.merge(&b);
                Ok(a)
            },
        )
}

/// Aggregates every user's multi-question release into item counts.
pub fn mms_counts(
    params: &ModelParams,
    truth: &GroundTruth,
    questions: usize,
    seed: u64,
) -> Result<ItemCounts, HarnessError> {
    params.validate()?;
    let n = params.n_items;
    (0..params.n_users as u64)
        .into_par_iter()
        .try_fold(
            || ItemCounts::new(n),
            |mut acc, uid| {
                let user = sample_user(params, truth, uid, seed);
                let mut stream = rng::indexed(seed, "sketch", uid);
                for (block, bit) in maxsense::multi_maxsense(&user, params, questions, &mut stream)? {
                    acc.add_indices(&block, bit);
                }
                Ok::<_, HarnessError>(acc)
            },
        )
        .try_reduce(
            || ItemCounts::new(n),
            |mut a, b| {
                a.merge(&b);
                Ok(a)
            },
        )
}

/// Runs one full generate-release-cluster-score round trip.
pub fn run_trial(
    algo: Algorithm,
    params: &ModelParams,
    seed: u64,
) -> Result<TrialResult, HarnessError> {
    params.validate()?;
    let start = Instant::now();
    let truth = sample_ground_truth(params, seed)?;
    let l = params.n_item_classes();
    let clustered = match algo {
        Algorithm::Pairwise(mode) => {
            let matrix = pairwise_matrix(params, &truth, mode, seed)?;
            pairwise::pp_cluster(&matrix, l, PAIRWISE_RESTARTS, seed)?
        }
        Algorithm::MaxSense => {
            let counts = maxsense_counts(params, &truth, seed)?;
            maxsense::ms_cluster(&counts.counts, l)?
        }
        Algorithm::MultiMaxSense { questions } => {
            let counts = mms_counts(params, &truth, questions, seed)?;
            maxsense::ms_cluster(&counts.counts, l)?
        }
    };
    let matched = match_labels(&clustered.labels, &truth.item_class_usize(), l)?;
    Ok(TrialResult {
        algorithm: algo.id(),
        n_items: params.n_items,
        n_users: params.n_users,
        n_user_classes: params.n_user_classes(),
        n_item_classes: l,
        rated_per_user: params.rated_per_user,
        epsilon: params.epsilon,
        theta: params.theta,
        questions: algo.questions(),
        seed,
        exact: matched.misplaced == 0,
        misplaced: matched.misplaced,
        misclassification: matched.misplaced as f64 / params.n_items as f64,
        wall_ms: start.elapsed().as_millis(),
    })
}

/// Runs `n_trials` trials at consecutive seeds starting from `seed0`.
pub fn run_trials(
    algo: Algorithm,
    params: &ModelParams,
    n_trials: usize,
    seed0: u64,
) -> Result<Vec<TrialResult>, HarnessError> {
    (0..n_trials)
        .map(|t| run_trial(algo, params, seed0 + t as u64))
        .collect()
}

/// Successes needed among `trials` to demonstrate `target` success rate.
pub fn required_successes(target: f64, trials: usize) -> usize {
    (target * trials as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Like [`run_trials`], but stops as soon as the target is out of reach.
/// Returns the trials actually run and whether the target was met.
pub fn run_trials_early_stop(
    algo: Algorithm,
    params: &ModelParams,
    n_trials: usize,
    target: f64,
    seed0: u64,
) -> Result<(Vec<TrialResult>, bool), HarnessError> {
    if !(0.0..=1.0).contains(&target) {
        return Err(HarnessError::BadConfig(format!("target rate {target}")));
    }
    let need = required_successes(target, n_trials);
    let allowed_failures = n_trials - need;
    let mut results = Vec::with_capacity(n_trials);
    let mut failures = 0;
    for t in 0..n_trials {
        let r = run_trial(algo, params, seed0 + t as u64)?;
        if !r.exact {
            failures += 1;
        }
        results.push(r);
        if failures > allowed_failures {
            return Ok((results, false));
        }
    }
    let successes = results.iter().filter(|r| r.exact).count();
    Ok((results, successes >= need))
}

const WILSON_Z: f64 = 1.959963984540054;

fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Exact-recovery rate with a 95% Wilson score interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSummary {
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_misclass: f64,
}

pub fn success_rate(results: &[TrialResult]) -> RateSummary {
    let trials = results.len();
    let successes = results.iter().filter(|r| r.exact).count();
    let (ci_low, ci_high) = wilson_interval(successes, trials);
    let mean_misclass = if trials == 0 {
        0.0
    } else {
        results.iter().map(|r| r.misclassification).sum::<f64>() / trials as f64
    };
    RateSummary {
        trials,
        successes,
        rate: if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        },
        ci_low,
        ci_high,
        mean_misclass,
    }
}

/// One probe of the threshold search at a fixed user count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeRecord {
    pub users: usize,
    pub successes: usize,
    pub trials: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdResult {
    /// Smallest probed user count that met the target.
    pub u_star: usize,
    pub probes: Vec<ProbeRecord>,
}

const THRESHOLD_REL_WIDTH: f64 = 1.1;

/// Finds the user count where `probe` starts passing: doubles up from `u0`
/// until a pass brackets the threshold, then bisects geometrically until
/// the bracket is within 10% relative width. The probe is called with the
/// user count and a running probe index (for seed bookkeeping).
pub fn threshold_search<F>(
    mut probe: F,
    u0: usize,
    cap: usize,
) -> Result<ThresholdResult, HarnessError>
where
    F: FnMut(usize, usize) -> Result<ProbeRecord, HarnessError>,
{
    if u0 == 0 || cap < u0 {
        return Err(HarnessError::BadConfig(format!(
            "need 1 <= u0 <= cap, got u0 = {u0}, cap = {cap}"
        )));
    }
    let mut probes: Vec<ProbeRecord> = Vec::new();
    let mut run = |u: usize, probes: &mut Vec<ProbeRecord>| -> Result<bool, HarnessError> {
        let idx = probes.len();
        let rec = probe(u, idx)?;
        let passed = rec.passed;
        probes.push(rec);
        Ok(passed)
    };

    let mut lo;
    let mut hi;
    if run(u0, &mut probes)? {
        hi = u0;
        lo = 0;
        let mut u = u0;
        while u > 1 {
            u /= 2;
            if run(u, &mut probes)? {
                hi = u;
            } else {
                lo = u;
                break;
            }
        }
        if lo == 0 {
            return Ok(ThresholdResult { u_star: hi, probes });
        }
    } else {
        lo = u0;
        let mut u = u0;
        loop {
            u = u.saturating_mul(2);
            if u > cap {
                return Err(HarnessError::NotBracketable { cap });
            }
            if run(u, &mut probes)? {
                hi = u;
                break;
            }
            lo = u;
        }
    }

    while hi as f64 / lo as f64 > THRESHOLD_REL_WIDTH {
        let mid = (lo as f64 * hi as f64).sqrt().round() as usize;
        if mid <= lo || mid >= hi {
            break;
        }
        if run(mid, &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdResult { u_star: hi, probes })
}

/// [`threshold_search`] against real trials: each probe reruns
/// `n_trials` early-stopped trials at a disjoint block of seeds.
pub fn threshold_users(
    algo: Algorithm,
    params: &ModelParams,
    target: f64,
    n_trials: usize,
    u0: usize,
    cap: usize,
    seed0: u64,
) -> Result<ThresholdResult, HarnessError> {
    if n_trials == 0 {
        return Err(HarnessError::BadConfig("zero trials per probe".into()));
    }
    let mut p = params.clone();
    threshold_search(
        |users, probe_idx| {
            p.n_users = users;
            let probe_seed0 = seed0 + (probe_idx * n_trials) as u64;
            let (results, passed) = run_trials_early_stop(algo, &p, n_trials, target, probe_seed0)?;
            Ok(ProbeRecord {
                users,
                successes: results.iter().filter(|r| r.exact).count(),
                trials: results.len(),
                passed,
            })
        },
        u0,
        cap,
    )
}

/// Least-squares fit of `log2 y` against `log2 x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn scaling_fit(points: &[(f64, f64)]) -> Result<PowerFit, HarnessError> {
    if points.len() < 3 {
        return Err(HarnessError::BadConfig(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(HarnessError::BadConfig(
            "log-log fit needs positive coordinates".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log2(), y.log2())).collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::BadConfig(
            "log-log fit needs at least two distinct x values".into(),
        ));
    }
    let sxy: f64 = logs
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(PowerFit {
        slope,
        intercept,
        r2,
    })
}

/// Queries an adaptive attacker needs to learn all of `bits` when each
/// query hits a uniformly random coordinate and guesses a uniform bit,
/// succeeding only on the coordinate it is currently after.
pub fn baseline_adaptive_w1(
    bits: &[u8],
    rng: &mut impl rand::Rng,
) -> Result<u64, HarnessError> {
    if bits.is_empty() {
        return Err(HarnessError::BadConfig("empty truth vector".into()));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(HarnessError::BadConfig("truth vector must be bits".into()));
    }
    let n = bits.len();
    let mut queries = 0u64;
    for (i, &b) in bits.iter().enumerate() {
        loop {
            queries += 1;
            let idx = rng.random_range(0..n);
            let guess = u8::from(rng.random::<bool>());
            if idx == i && guess == b {
                break;
            }
        }
    }
    Ok(queries)
}

fn coupon_rounds(n: usize, reveal: f64, rng: &mut impl rand::Rng) -> u64 {
    let mut seen = vec![false; n];
    let mut collected = 0;
    let mut rounds = 0u64;
    while collected < n {
        rounds += 1;
        let c = rng.random_range(0..n);
        if !seen[c] && rng.random::<f64>() < reveal {
            seen[c] = true;
            collected += 1;
        }
    }
    rounds
}

/// Rounds a coupon-collector style broadcaster needs when each round
/// surfaces one uniform item and reveals it with probability `1/log2 N`.
pub fn baseline_coupon_bandwidth(
    n: usize,
    rng: &mut impl rand::Rng,
) -> Result<u64, HarnessError> {
    if n < 2 {
        return Err(HarnessError::BadConfig(format!(
            "coupon baseline needs N >= 2, got {n}"
        )));
    }
    let reveal = (1.0 / (n as f64).log2()).min(1.0);
    Ok(coupon_rounds(n, reveal, rng))
}

/// One row of a sweep result table.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub algorithm: String,
    pub n_items: usize,
    pub n_users: usize,
    pub n_user_classes: usize,
    pub n_item_classes: usize,
    pub rated_per_user: usize,
    pub epsilon: f64,
    pub theta: f64,
    pub questions: usize,
    pub summary: RateSummary,
    pub seed0: u64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "algorithm,N,U,K,L,w,epsilon,theta,Q,trials,successes,mean_misclass,ci_low,ci_high,seed0\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.algorithm,
            r.n_items,
            r.n_users,
            r.n_user_classes,
            r.n_item_classes,
            r.rated_per_user,
            r.epsilon,
            r.theta,
            r.questions,
            r.summary.trials,
            r.summary.successes,
            r.summary.mean_misclass,
            r.summary.ci_low,
            r.summary.ci_high,
            r.seed0,
        ));
    }
    out
}

/// One row of a threshold result table.
#[derive(Debug, Clone)]
pub struct ThresholdRow {
    pub algorithm: String,
    pub n_items: usize,
    pub rated_per_user: usize,
    pub epsilon: f64,
    pub target: f64,
    pub u_star: usize,
    pub probes: usize,
}

pub fn threshold_csv(rows: &[ThresholdRow]) -> String {
    let mut out = String::from("algorithm,N,w,epsilon,target,U_star,probes\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algorithm, r.n_items, r.rated_per_user, r.epsilon, r.target, r.u_star, r.probes,
        ));
    }
    out
}

/// A 18-out-of-20 style recovery pilot: the budget constant, the instance
/// it was tuned on, and what that run observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPilot {
    pub constant: f64,
    pub n_items: usize,
    pub rated_per_user: usize,
    pub epsilon: f64,
    pub theta: f64,
    pub trials: usize,
    pub seed0: u64,
    pub successes: usize,
}

/// One threshold sweep: parallel arrays, one entry per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPilot {
    pub n_items: Vec<usize>,
    pub rated_per_user: Vec<usize>,
    pub epsilon: f64,
    pub theta: f64,
    pub target: f64,
    pub trials: usize,
    pub u0: Vec<usize>,
    pub seed0: Vec<u64>,
    pub u_star: Vec<usize>,
    pub slope: f64,
}

impl ThresholdPilot {
    pub fn len(&self) -> usize {
        self.n_items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_items.is_empty()
    }

    fn validate(&self, name: &str) -> Result<(), HarnessError> {
        let n = self.n_items.len();
        if n == 0
            || self.rated_per_user.len() != n
            || self.u0.len() != n
            || self.seed0.len() != n
            || self.u_star.len() != n
        {
            return Err(HarnessError::BadConfig(format!(
                "{name}: grid arrays must be nonempty and equal length"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPilots {
    /// Users needed vs catalogue size, rated count held fixed.
    pub items: ThresholdPilot,
    /// Users needed vs rated count, catalogue size held fixed.
    pub rated: ThresholdPilot,
}

/// Pilot-calibrated constants together with the seeds and grids that froze
/// them, persisted as `calibration.toml` next to the crate. Downstream runs
/// replay the recorded searches rather than re-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Largest observed `error / (w^4 / N^2)` for the disjointness ratio,
    /// rounded up.
    pub disjoint_ratio_bound: f64,
    pub recovery: RecoveryPilot,
    pub pairwise: RecoveryPilot,
    pub scaling: ScalingPilots,
}

impl Calibration {
    pub fn from_toml(s: &str) -> Result<Self, HarnessError> {
        let cal: Calibration = toml::from_str(s)
            .map_err(|e| HarnessError::BadConfig(format!("calibration: {e}")))?;
        cal.scaling.items.validate("scaling.items")?;
        cal.scaling.rated.validate("scaling.rated")?;
        Ok(cal)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("calibration serializes")
    }
}
