//! Exact information-theoretic oracles and sample-complexity floors.
//!
//! Everything here is computed by enumeration or in exact rational
//! arithmetic on instances small enough to afford it, then used to
//! cross-check the closed-form bounds the estimators rely on at scale:
//! channel mutual information by summing over every truth vector and
//! release, a posterior-collision functional that dominates it for private
//! kernels, counting bounds for the recovery-versus-bandwidth trade-off,
//! and exhaustive search over all deterministic one-bit sketches.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::kernel::{ChannelKernel, KernelError};
use crate::privacy::{self, PrivacyError};
use crate::rng;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("enumeration cap exceeded: {0}")]
    Cap(String),
    #[error("bad prior: {0}")]
    BadPrior(String),
    #[error("kernel inputs are not the canonical enumeration")]
    NonCanonical,
    #[error("invalid argument: {0}")]
    BadArgs(String),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub const MAX_EXACT_ITEMS: usize = 12;
pub const MAX_EXACT_RATED: usize = 3;

fn check_caps(n: usize, w: usize) -> Result<(), BoundsError> {
    if n > MAX_EXACT_ITEMS || w > MAX_EXACT_RATED {
        return Err(BoundsError::Cap(format!(
            "exact enumeration handles N <= {MAX_EXACT_ITEMS}, w <= {MAX_EXACT_RATED}, got N = {n}, w = {w}"
        )));
    }
    Ok(())
}

/// Mutual information, in bits, between a truth vector `Z ~ prior` on
/// `{0,1}^N` and one released output, where the releasing user holds a
/// uniform `w`-subset of the items with the ratings `Z` restricted to it.
///
/// `prior` has `2^N` entries indexed by bitmask (bit `i` is item `i`'s bit),
/// and `kernel` must cover the canonical datum enumeration.
pub fn exact_mutual_information(
    prior: &[f64],
    kernel: &ChannelKernel,
) -> Result<f64, BoundsError> {
    let n = kernel.n_items;
    let w = kernel.w;
    check_caps(n, w)?;
    if prior.len() != 1usize << n {
        return Err(BoundsError::BadPrior(format!(
            "{} entries for 2^{n} truth vectors",
            prior.len()
        )));
    }
    if prior.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(BoundsError::BadPrior("negative or non-finite mass".into()));
    }
    let total: f64 = prior.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(BoundsError::BadPrior(format!("mass sums to {total}")));
    }
    if !kernel.is_canonical() {
        return Err(BoundsError::NonCanonical);
    }

    let n_s = kernel.outputs.len();
    let combos = crate::kernel::subset_count(n, w);
    let inv_combos = 1.0 / combos as f64;
    let mut p_s = vec![0.0f64; n_s];
    let mut p_s_given_z = vec![vec![0.0f64; n_s]; 1 << n];
    for (z, row_out) in p_s_given_z.iter_mut().enumerate() {
        for rank in 0..combos {
            let items = &kernel.inputs[rank << w].items;
            let mut local = 0usize;
            for (j, &it) in items.iter().enumerate() {
                local |= ((z >> it) & 1) << j;
            }
            let row = &kernel.rows[kernel.canonical_index(rank, local)];
            for (acc, p) in row_out.iter_mut().zip(row) {
                *acc += p;
            }
        }
        for s in 0..n_s {
            row_out[s] *= inv_combos;
            p_s[s] += prior[z] * row_out[s];
        }
    }

    let mut mi = 0.0;
    for (z, row_out) in p_s_given_z.iter().enumerate() {
        if prior[z] == 0.0 {
            continue;
        }
        for s in 0..n_s {
            if row_out[s] > 0.0 {
                mi += prior[z] * row_out[s] * (row_out[s] / p_s[s]).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Posterior-collision functional that dominates the mutual information of
/// one private release:
///
/// `sum_s P[s] (E[2^{|I1 ^ I2|} 1{consistent} | s] - 1)`
///
/// where `I1, I2` are the item sets of two independent posterior draws of
/// the releasing datum given output `s`, uniform prior over data, and
/// `consistent` means the two data agree on shared items.
pub fn posterior_collision_bound(kernel: &ChannelKernel) -> Result<f64, BoundsError> {
    let n = kernel.n_items;
    let w = kernel.w;
    check_caps(n, w)?;
    if !kernel.is_canonical() {
        return Err(BoundsError::NonCanonical);
    }
    let d = kernel.inputs.len();
    let masks: Vec<(u32, u32)> = kernel
        .inputs
        .iter()
        .map(|datum| {
            let mut items = 0u32;
            let mut ones = 0u32;
            for (&it, &r) in datum.items.iter().zip(&datum.ratings) {
                items |= 1 << it;
                if r == 1 {
                    ones |= 1 << it;
                }
            }
            (items, ones)
        })
        .collect();

    let mut rhs = 0.0;
    for s in 0..kernel.outputs.len() {
        let mass: f64 = (0..d).map(|x| kernel.rows[x][s]).sum::<f64>() / d as f64;
        if mass == 0.0 {
            continue;
        }
        let posterior: Vec<f64> = (0..d)
            .map(|x| kernel.rows[x][s] / (d as f64 * mass))
            .collect();
        let mut second_moment = 0.0;
        for x1 in 0..d {
            if posterior[x1] == 0.0 {
                continue;
            }
            let (i1, z1) = masks[x1];
            for x2 in 0..d {
                if posterior[x2] == 0.0 {
                    continue;
                }
                let (i2, z2) = masks[x2];
                let shared = i1 & i2;
                if (z1 ^ z2) & shared != 0 {
                    continue;
                }
                let overlap = shared.count_ones();
                second_moment += posterior[x1] * posterior[x2] * (1u64 << overlap) as f64;
            }
        }
        rhs += mass * (second_moment - 1.0);
    }
    Ok(rhs)
}

/// Mutual-information cap of any `eps`-DP release: `eps * log2(e)` bits.
pub fn dp_mi_bound(eps: f64) -> Result<f64, BoundsError> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(BoundsError::BadArgs(format!("epsilon is {eps}")));
    }
    Ok(eps * std::f64::consts::LOG2_E)
}

/// Generalized Fano lower bound on error probability when distinguishing
/// `m` candidates with `mi` bits of information, where success only needs
/// landing inside a confusion set of `m_d` candidates:
/// `max(0, 1 - (mi + 1) / (log2 m - log2 m_d))`.
pub fn fano_bound(mi: f64, m: f64, m_d: f64) -> Result<f64, BoundsError> {
    if !mi.is_finite() || mi < 0.0 {
        return Err(BoundsError::BadArgs(format!("information is {mi}")));
    }
    if !(m_d >= 1.0) || !(m > m_d) {
        return Err(BoundsError::BadArgs(format!(
            "need m > m_d >= 1, got m = {m}, m_d = {m_d}"
        )));
    }
    Ok((1.0 - (mi + 1.0) / (m.log2() - m_d.log2())).max(0.0))
}

fn big_binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

fn big_factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Exact count of `K`-labelings of `N` items within Hamming distance `d`
/// of a fixed labeling, divided by `K!` to quotient out label permutations:
/// `(1/K!) sum_{i<=d} C(N,i) (K-1)^i`.
pub fn labeling_ball_size(n: usize, k: usize, d: usize) -> Result<Ratio<BigInt>, BoundsError> {
    if k < 2 {
        return Err(BoundsError::BadArgs(format!("need K >= 2, got {k}")));
    }
    if d > n {
        return Err(BoundsError::BadArgs(format!("distance {d} exceeds N = {n}")));
    }
    let mut sum = BigInt::zero();
    let km1 = BigInt::from(k - 1);
    let mut pow = BigInt::one();
    for i in 0..=d {
        sum += big_binomial(n, i) * &pow;
        pow *= &km1;
    }
    Ok(Ratio::new(sum, big_factorial(k)))
}

/// Exact probability that two independent uniform `w`-subsets of `[N]` are
/// disjoint, `C(N-w,w)/C(N,w) = prod_k (1 - w/(N-k))`, next to its
/// first-order approximation `1 - w^2/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisjointSubsetRatio {
    pub exact: Ratio<BigInt>,
    pub approx: Ratio<BigInt>,
    pub error: Ratio<BigInt>,
}

pub fn disjoint_subset_ratio(n: usize, w: usize) -> Result<DisjointSubsetRatio, BoundsError> {
    if w == 0 || 2 * w > n {
        return Err(BoundsError::BadArgs(format!(
            "need 1 <= 2w <= N, got N = {n}, w = {w}"
        )));
    }
    let mut exact = Ratio::<BigInt>::one();
    for k in 0..w {
        exact *= Ratio::new(BigInt::from(n - w - k), BigInt::from(n - k));
    }
    let approx = Ratio::one() - Ratio::new(BigInt::from(w * w), BigInt::from(n));
    let error = (exact.clone() - approx.clone()).abs();
    Ok(DisjointSubsetRatio {
        exact,
        approx,
        error,
    })
}

/// Result of exhausting every deterministic one-bit sketch on `w = 1` data.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBitSearch {
    /// Largest mutual information any sketch achieves, in bits.
    pub best_mi: f64,
    /// `(item, rating)` pairs mapped to output 1 by the best sketch.
    pub best_set: Vec<(usize, u8)>,
    pub sketches_checked: usize,
}

pub const MAX_ONEBIT_ITEMS: usize = 5;

/// Tries all `2^(2N)` deterministic maps from a single `(item, rating)`
/// datum to one bit and reports the most informative one against a uniform
/// truth vector. Ties keep the first sketch in subset order.
pub fn onebit_sketch_search(n: usize) -> Result<OneBitSearch, BoundsError> {
    if n == 0 || n > MAX_ONEBIT_ITEMS {
        return Err(BoundsError::Cap(format!(
            "one-bit search handles 1 <= N <= {MAX_ONEBIT_ITEMS}, got {n}"
        )));
    }
    let inputs = crate::kernel::enumerate_data(n, 1);
    let prior = vec![1.0 / (1usize << n) as f64; 1 << n];
    let outputs = vec!["0".to_string(), "1".to_string()];
    let mut best_mi = f64::NEG_INFINITY;
    let mut best_a = 0u32;
    let total = 1u32 << (2 * n);
    for a in 0..total {
        let rows: Vec<Vec<f64>> = inputs
            .iter()
            .map(|d| {
                let bit_index = 2 * d.items[0] + d.ratings[0] as usize;
                if (a >> bit_index) & 1 == 1 {
                    vec![0.0, 1.0]
                } else {
                    vec![1.0, 0.0]
                }
            })
            .collect();
        let kernel =
            ChannelKernel::new(n, 1, inputs.clone(), outputs.clone(), rows)?;
        let mi = exact_mutual_information(&prior, &kernel)?;
        if mi > best_mi {
            best_mi = mi;
            best_a = a;
        }
    }
    let best_set = (0..2 * n)
        .filter(|b| (best_a >> b) & 1 == 1)
        .map(|b| (b / 2, (b % 2) as u8))
        .collect();
    Ok(OneBitSearch {
        best_mi,
        best_set,
        sketches_checked: total as usize,
    })
}

/// Asymptotic regime selecting which lower bound applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Private users, each revealing one bit at budget `eps`.
    Basic,
    /// Non-private scarce raters, one bit per user, `w` of `N` items rated.
    ScarceWeak,
    /// Scarce raters under a constant budget, `w <= N^(1/3)`.
    ScarceStrong,
    /// Adaptive queries against single-item raters.
    AdaptiveW1,
}

impl std::str::FromStr for Regime {
    type Err = BoundsError;
    fn from_str(s: &str) -> Result<Self, BoundsError> {
        match s {
            "basic" => Ok(Regime::Basic),
            "scarce-weak" => Ok(Regime::ScarceWeak),
            "scarce-strong" => Ok(Regime::ScarceStrong),
            "adaptive-w1" => Ok(Regime::AdaptiveW1),
            other => Err(BoundsError::BadArgs(format!("unknown regime {other}"))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Basic => "basic",
            Regime::ScarceWeak => "scarce-weak",
            Regime::ScarceStrong => "scarce-strong",
            Regime::AdaptiveW1 => "adaptive-w1",
        };
        f.write_str(s)
    }
}

/// Minimum number of released bits below which constant-accuracy recovery
/// of an `N`-bit truth vector is impossible in the given regime.
pub fn sample_complexity_floor(
    regime: Regime,
    n: usize,
    w: usize,
    eps: f64,
) -> Result<f64, BoundsError> {
    if n == 0 {
        return Err(BoundsError::BadArgs("N is 0".into()));
    }
    let nf = n as f64;
    match regime {
        Regime::Basic => {
            if !eps.is_finite() || eps <= 0.0 {
                return Err(BoundsError::BadArgs(format!(
                    "basic regime needs eps > 0, got {eps}"
                )));
            }
            Ok(nf / (eps * std::f64::consts::LOG2_E))
        }
        Regime::ScarceWeak => {
            if w == 0 || w > n {
                return Err(BoundsError::BadArgs(format!(
                    "need 1 <= w <= N, got w = {w}"
                )));
            }
            Ok(nf * nf / (w * w) as f64)
        }
        Regime::ScarceStrong => {
            if w == 0 || w * w * w > n {
                return Err(BoundsError::BadArgs(format!(
                    "scarce-strong regime needs w <= N^(1/3), got w = {w}, N = {n}"
                )));
            }
            if !(eps < std::f64::consts::LN_2) {
                return Err(BoundsError::BadArgs(format!(
                    "scarce-strong regime needs eps < ln 2, got {eps}"
                )));
            }
            Ok(nf * nf / w as f64)
        }
        Regime::AdaptiveW1 => {
            if w != 1 {
                return Err(BoundsError::BadArgs(format!(
                    "adaptive regime is defined for w = 1, got {w}"
                )));
            }
            Ok(nf * nf.log2())
        }
    }
}

/// Extreme posterior-to-prior ratios over outputs with positive mass,
/// uniform prior over the kernel's inputs.
pub fn posterior_prior_ratio_bounds(kernel: &ChannelKernel) -> Result<(f64, f64), BoundsError> {
    kernel.validate()?;
    let d = kernel.inputs.len() as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in 0..kernel.outputs.len() {
        let mass: f64 = kernel.rows.iter().map(|r| r[s]).sum::<f64>() / d;
        if mass == 0.0 {
            continue;
        }
        for row in &kernel.rows {
            let ratio = row[s] / mass;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok((lo, hi))
}

/// One named inequality checked by the suite: `value <= bound` up to slack.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub config: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,config,value,bound,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.name, c.config, c.value, c.bound, c.pass
            ));
        }
        out
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28} {:<34} {:>14} {:>14} {:>6}\n",
            "check", "config", "value", "bound", "pass"
        ));
        for c in &self.checks {
            out.push_str(&format!(
                "{:<28} {:<34} {:>14.9} {:>14.9} {:>6}\n",
                c.name,
                c.config,
                c.value,
                c.bound,
                if c.pass { "yes" } else { "NO" }
            ));
        }
        out
    }
}

const SUITE_SLACK: f64 = 1e-9;

/// Adversarial check of every oracle inequality on freshly sampled private
/// kernels, plus the exhaustive and exact counting checks. All randomness
/// comes from substreams of `seed`.
pub fn run_bound_suite(
    max_n: usize,
    kernels_per_config: usize,
    seed: u64,
) -> Result<BoundReport, BoundsError> {
    if max_n < 2 {
        return Err(BoundsError::BadArgs(format!("max N {max_n} below 2")));
    }
    let max_n = max_n.min(MAX_EXACT_ITEMS);
    let mut checks = Vec::new();
    let mut stream = rng::substream(seed, "bounds:kernels");
    for n in 2..=max_n {
        for w in [1usize, 2] {
            if w > n || w > MAX_EXACT_RATED {
                continue;
            }
            for eps in [0.3, 0.7] {
                let config = format!("N={n} w={w} eps={eps} kernels={kernels_per_config}");
                let cap = dp_mi_bound(eps)?;
                let uniform = vec![1.0 / (1usize << n) as f64; 1 << n];
                let mut worst_cap = f64::NEG_INFINITY;
                let mut worst_dominance = f64::NEG_INFINITY;
                let mut collision_at_worst = 0.0;
                let mut worst_ratio_hi = f64::NEG_INFINITY;
                let mut worst_ratio_lo = f64::INFINITY;
                let mut worst_processing = f64::NEG_INFINITY;
                for i in 0..kernels_per_config {
                    let outputs = 2 + i % 3;
                    let kernel =
                        privacy::random_dp_kernel(n, w, outputs, eps, &mut stream)?;
                    let mi = exact_mutual_information(&uniform, &kernel)?;
                    let collision = posterior_collision_bound(&kernel)?;
                    worst_cap = worst_cap.max(mi);
                    if mi - collision > worst_dominance {
                        worst_dominance = mi - collision;
                        collision_at_worst = collision;
                    }
                    let (lo, hi) = posterior_prior_ratio_bounds(&kernel)?;
                    worst_ratio_hi = worst_ratio_hi.max(hi);
                    worst_ratio_lo = worst_ratio_lo.min(lo);
                    let map: Vec<usize> = (0..outputs).map(|s| s % 2).collect();
                    let merged = kernel.merge_outputs(&map, 2)?;
                    let merged_mi = exact_mutual_information(&uniform, &merged)?;
                    worst_processing = worst_processing.max(merged_mi - mi);
                }
                checks.push(BoundCheck {
                    name: "mi<=eps*log2(e)".into(),
                    config: config.clone(),
                    value: worst_cap,
                    bound: cap,
                    pass: worst_cap <= cap + SUITE_SLACK,
                });
                checks.push(BoundCheck {
                    name: "mi<=posterior-collision".into(),
                    config: config.clone(),
                    value: worst_dominance + collision_at_worst,
                    bound: collision_at_worst,
                    pass: worst_dominance <= SUITE_SLACK,
                });
                checks.push(BoundCheck {
                    name: "posterior-ratio<=exp(eps)".into(),
                    config: config.clone(),
                    value: worst_ratio_hi,
                    bound: eps.exp(),
                    pass: worst_ratio_hi <= eps.exp() * (1.0 + 1e-9)
                        && worst_ratio_lo >= (-eps).exp() * (1.0 - 1e-9),
                });
                checks.push(BoundCheck {
                    name: "post-processing-shrinks-mi".into(),
                    config,
                    value: worst_processing,
                    bound: 0.0,
                    pass: worst_processing <= SUITE_SLACK,
                });
            }
        }
    }

    for n in 1..=max_n.min(MAX_ONEBIT_ITEMS) {
        let search = onebit_sketch_search(n)?;
        checks.push(BoundCheck {
            name: "onebit-max-mi<=1/N".into(),
            config: format!("N={n} sketches={}", search.sketches_checked),
            value: search.best_mi,
            bound: 1.0 / n as f64,
            pass: search.best_mi <= 1.0 / n as f64 + SUITE_SLACK,
        });
    }

    let mut worst_scaled = 0.0f64;
    let mut worst_at = (0usize, 0usize);
    for n in [50usize, 100, 200, 400] {
        let mut w = 2;
        while w * w * w <= n {
            let r = disjoint_subset_ratio(n, w)?;
            let scaled = r.error.to_f64().unwrap_or(f64::INFINITY) * (n * n) as f64
                / (w * w * w * w) as f64;
            if scaled > worst_scaled {
                worst_scaled = scaled;
                worst_at = (n, w);
            }
            w += 1;
        }
    }
    checks.push(BoundCheck {
        name: "disjoint-ratio-error".into(),
        config: format!("worst at N={} w={}, scaled by N^2/w^4", worst_at.0, worst_at.1),
        value: worst_scaled,
        bound: 0.4,
        pass: worst_scaled <= 0.4,
    });

    Ok(BoundReport { checks })
}
