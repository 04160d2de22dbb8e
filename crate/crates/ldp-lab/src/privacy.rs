//! Randomized-response bit release and exact differential-privacy checking.
//!
//! The only primitive any pipeline releases is one bit through randomized
//! response: keep the true bit with probability `e^eps / (1 + e^eps)`, flip
//! it otherwise. [`verify_dp_kernel`] then checks a whole mechanism, given as
//! a [`ChannelKernel`], by maximizing the likelihood ratio over neighboring
//! data in log space. Verification is exact up to a fixed additive slack of
//! [`EPSILON_SLACK`] on epsilon, which absorbs float rounding in the kernel
//! entries without masking real violations.

use rand::Rng;
use thiserror::Error;

use crate::kernel::{ChannelKernel, KernelError, UserDatum};

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("epsilon must be finite and >= 0, got {0}")]
    BadEpsilon(f64),
    #[error("bit must be 0 or 1, got {0}")]
    BadBit(u8),
    #[error("budget must be split into at least one part")]
    ZeroSplit,
    #[error("budget exceeded: {spent} spent of {total}")]
    BudgetExceeded { spent: f64, total: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("no random kernel satisfied the target after {0} attempts")]
    GeneratorFailed(usize),
}

/// Additive slack, in units of epsilon, applied by [`verify_dp_kernel`].
pub const EPSILON_SLACK: f64 = 1e-9;

fn check_epsilon(eps: f64) -> Result<f64, PrivacyError> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(PrivacyError::BadEpsilon(eps));
    }
    Ok(eps)
}

/// Probability that randomized response keeps the true bit:
/// `e^eps / (1 + e^eps)`, evaluated as `1 / (1 + e^-eps)` so it stays exact
/// for large budgets.
pub fn keep_probability(eps: f64) -> Result<f64, PrivacyError> {
    let eps = check_epsilon(eps)?;
    Ok(1.0 / (1.0 + (-eps).exp()))
}

/// Effective signal attenuation of the bit channel:
/// `2 (e^eps - 1) / (e^eps + 1)`. The expected released bit is
/// `1/2 + hat_epsilon/2 * (b - 1/2)` for a true bit `b`.
pub fn hat_epsilon(eps: f64) -> Result<f64, PrivacyError> {
    let eps = check_epsilon(eps)?;
    Ok(2.0 - 4.0 / (1.0 + eps.exp()))
}

/// Evenly splits a budget across `parts` releases.
pub fn split_budget(eps: f64, parts: usize) -> Result<f64, PrivacyError> {
    let eps = check_epsilon(eps)?;
    if parts == 0 {
        return Err(PrivacyError::ZeroSplit);
    }
    Ok(eps / parts as f64)
}

/// Reusable bit-release mechanism with a fixed keep probability.
#[derive(Debug, Clone, Copy)]
pub struct BitRelease {
    keep: f64,
}

impl BitRelease {
    pub fn new(eps: f64) -> Result<Self, PrivacyError> {
        Ok(BitRelease {
            keep: keep_probability(eps)?,
        })
    }

    pub fn keep(&self) -> f64 {
        self.keep
    }

    pub fn release(&self, bit: u8, rng: &mut impl Rng) -> u8 {
        debug_assert!(bit <= 1);
        if rng.random::<f64>() < self.keep {
            bit
        } else {
            1 - bit
        }
    }
}

/// One-shot randomized response on `bit` at budget `eps`.
pub fn dp_bit_release(bit: u8, eps: f64, rng: &mut impl Rng) -> Result<u8, PrivacyError> {
    if bit > 1 {
        return Err(PrivacyError::BadBit(bit));
    }
    Ok(BitRelease::new(eps)?.release(bit, rng))
}

/// Tracks how much of a total budget has been spent across releases.
#[derive(Debug, Clone)]
pub struct PrivacyBudget {
    total: f64,
    spent: f64,
}

impl PrivacyBudget {
    pub fn new(total: f64) -> Result<Self, PrivacyError> {
        Ok(PrivacyBudget {
            total: check_epsilon(total)?,
            spent: 0.0,
        })
    }

    /// Records a release of `eps`; fails if the total would be exceeded
    /// beyond float tolerance.
    pub fn charge(&mut self, eps: f64) -> Result<(), PrivacyError> {
        let eps = check_epsilon(eps)?;
        if self.spent + eps > self.total + 1e-12 {
            return Err(PrivacyError::BudgetExceeded {
                spent: self.spent + eps,
                total: self.total,
            });
        }
        self.spent += eps;
        Ok(())
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        (self.total - self.spent).max(0.0)
    }
}

/// Which data count as neighbors when checking a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborRelation {
    /// Every ordered pair of distinct data.
    AllPairs,
    /// Same rated items, rating vectors differing in exactly one position.
    SingleRating,
}

impl NeighborRelation {
    fn holds(self, a: &UserDatum, b: &UserDatum) -> bool {
        match self {
            NeighborRelation::AllPairs => a != b,
            NeighborRelation::SingleRating => {
                a.items == b.items
                    && a.ratings
                        .iter()
                        .zip(&b.ratings)
                        .filter(|(x, y)| x != y)
                        .count()
                        == 1
            }
        }
    }
}

/// The likelihood-ratio witness achieving the verifier's maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpWitness {
    pub input: usize,
    pub neighbor: usize,
    pub output: usize,
    pub log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpVerdict {
    pub pass: bool,
    pub epsilon: f64,
    /// Maximum of `ln P[s|x] - ln P[s|x']` over neighbors; `-inf` when the
    /// relation pairs nothing, `+inf` when some neighbor has zero mass where
    /// another has positive mass.
    pub max_log_ratio: f64,
    pub witness: Option<DpWitness>,
}

/// Exhaustively checks `P[s|x] <= e^eps P[s|x']` for all neighbors `x, x'`
/// and outputs `s`, in log space with [`EPSILON_SLACK`] additive slack.
pub fn verify_dp_kernel(
    kernel: &ChannelKernel,
    eps: f64,
    relation: NeighborRelation,
) -> Result<DpVerdict, PrivacyError> {
    let eps = check_epsilon(eps)?;
    kernel.validate()?;
    let mut max_log_ratio = f64::NEG_INFINITY;
    let mut witness = None;
    for (x, dx) in kernel.inputs.iter().enumerate() {
        for (y, dy) in kernel.inputs.iter().enumerate() {
            if x == y || !relation.holds(dx, dy) {
                continue;
            }
            for s in 0..kernel.outputs.len() {
                let px = kernel.rows[x][s];
                let py = kernel.rows[y][s];
                if px == 0.0 {
                    continue;
                }
                let log_ratio = if py == 0.0 {
                    f64::INFINITY
                } else {
                    px.ln() - py.ln()
                };
                if log_ratio > max_log_ratio {
                    max_log_ratio = log_ratio;
                    witness = Some(DpWitness {
                        input: x,
                        neighbor: y,
                        output: s,
                        log_ratio,
                    });
                }
            }
        }
    }
    Ok(DpVerdict {
        pass: max_log_ratio <= eps + EPSILON_SLACK,
        epsilon: eps,
        max_log_ratio,
        witness,
    })
}

/// The canonical randomized-response kernel on a single rated item.
pub fn randomized_response_kernel(eps: f64) -> Result<ChannelKernel, PrivacyError> {
    let keep = keep_probability(eps)?;
    Ok(ChannelKernel::from_release(
        1,
        1,
        vec!["0".into(), "1".into()],
        |d| {
            if d.ratings[0] == 1 {
                vec![1.0 - keep, keep]
            } else {
                vec![keep, 1.0 - keep]
            }
        },
    )?)
}

/// Samples a random kernel that provably satisfies `eps`-DP under
/// [`NeighborRelation::AllPairs`].
///
/// Entries start uniform on `[0.1, 1)`; each output column is clipped to
/// `[g e^{-eps/4}, g e^{eps/4}]` around its geometric mean `g`, bounding the
/// within-column ratio by `e^{eps/2}` both before and after the row
/// normalization that follows. Every sample is re-verified before being
/// returned.
pub fn random_dp_kernel(
    n_items: usize,
    w: usize,
    n_outputs: usize,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<ChannelKernel, PrivacyError> {
    let eps = check_epsilon(eps)?;
    assert!(n_outputs >= 2, "need at least two outputs");
    let inputs = crate::kernel::enumerate_data(n_items, w);
    let d = inputs.len();
    const ATTEMPTS: usize = 8;
    for _ in 0..ATTEMPTS {
        let mut rows: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..n_outputs).map(|_| rng.random_range(0.1..1.0)).collect())
            .collect();
        for s in 0..n_outputs {
            let log_mean: f64 =
                rows.iter().map(|r| r[s].ln()).sum::<f64>() / d as f64;
            let lo = (log_mean - eps / 4.0).exp();
            let hi = (log_mean + eps / 4.0).exp();
            for row in &mut rows {
                row[s] = row[s].clamp(lo, hi);
            }
        }
        for row in &mut rows {
            let sum: f64 = row.iter().sum();
            for p in row {
                *p /= sum;
            }
        }
        let outputs = (0..n_outputs).map(|s| s.to_string()).collect();
        let kernel = ChannelKernel::new(n_items, w, inputs.clone(), outputs, rows)?;
        if verify_dp_kernel(&kernel, eps, NeighborRelation::AllPairs)?.pass {
            return Ok(kernel);
        }
    }
    Err(PrivacyError::GeneratorFailed(ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn keep_probability_matches_closed_form() {
        assert!((keep_probability(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((keep_probability(3f64.ln()).unwrap() - 0.75).abs() < 1e-12);
        assert!((keep_probability(50.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(keep_probability(-0.1).is_err());
        assert!(keep_probability(f64::NAN).is_err());
    }

    #[test]
    fn attenuation_matches_closed_form() {
        assert_eq!(hat_epsilon(0.0).unwrap(), 0.0);
        assert!((hat_epsilon(3f64.ln()).unwrap() - 1.0).abs() < 1e-12);
        assert!((hat_epsilon(1.0).unwrap() - 0.9242343145200195).abs() < 1e-12);
        assert!((hat_epsilon(1000.0).unwrap() - 2.0).abs() < 1e-12);
        let mut prev = -1.0;
        for i in 0..60 {
            let h = hat_epsilon(0.1 * i as f64).unwrap();
            assert!(h > prev);
            assert!(h <= 0.1 * i as f64 + 1e-15 || i == 0);
            assert!(h < 2.0);
            prev = h;
        }
    }

    #[test]
    fn budget_splits_and_accounts() {
        assert!(split_budget(2.0, 0).is_err());
        assert_eq!(split_budget(2.0, 2).unwrap(), 1.0);
        let mut budget = PrivacyBudget::new(1.0).unwrap();
        let part = split_budget(1.0, 4).unwrap();
        for _ in 0..4 {
            budget.charge(part).unwrap();
        }
        assert!(budget.remaining() < 1e-12);
        assert!(budget.charge(0.1).is_err());
    }

    #[test]
    fn release_frequencies_match_keep_probability() {
        let eps = 3f64.ln();
        let release = BitRelease::new(eps).unwrap();
        let mut rng = rng::substream(404, "test:release");
        let n = 100_000;
        let kept = (0..n)
            .filter(|_| release.release(1, &mut rng) == 1)
            .count() as f64;
        let sigma = (n as f64 * 0.75 * 0.25).sqrt();
        assert!((kept - 0.75 * n as f64).abs() <= 4.0 * sigma, "kept {kept}");
        assert!(dp_bit_release(2, 1.0, &mut rng).is_err());
    }

    #[test]
    fn verifier_accepts_rr_at_its_budget_and_not_below() {
        let eps = 3f64.ln();
        let k = randomized_response_kernel(eps).unwrap();
        for relation in [NeighborRelation::AllPairs, NeighborRelation::SingleRating] {
            let v = verify_dp_kernel(&k, eps, relation).unwrap();
            assert!(v.pass, "{relation:?}: max {}", v.max_log_ratio);
            assert!((v.max_log_ratio - eps).abs() < 1e-9);
            assert!(!verify_dp_kernel(&k, eps - 0.01, relation).unwrap().pass);
            assert!(!verify_dp_kernel(&k, eps - 1e-5, relation).unwrap().pass);
        }
        let v = verify_dp_kernel(&k, eps - 0.01, NeighborRelation::AllPairs).unwrap();
        let w = v.witness.unwrap();
        assert!(w.log_ratio > eps - 0.01);
    }

    #[test]
    fn verifier_rejects_identity_with_infinite_witness() {
        let k = ChannelKernel::identity(2, 1);
        let v = verify_dp_kernel(&k, 10.0, NeighborRelation::AllPairs).unwrap();
        assert!(!v.pass);
        assert_eq!(v.max_log_ratio, f64::INFINITY);
        let w = v.witness.unwrap();
        assert_eq!(w.log_ratio, f64::INFINITY);
    }

    #[test]
    fn verifier_accepts_constant_kernel_at_zero_budget() {
        let k = ChannelKernel::constant(3, 2, vec![0.2, 0.3, 0.5]).unwrap();
        assert!(
            verify_dp_kernel(&k, 0.0, NeighborRelation::AllPairs)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn verdicts_are_monotone_in_epsilon() {
        let k = randomized_response_kernel(0.8).unwrap();
        let mut passed = false;
        for i in 0..30 {
            let eps = 0.05 * i as f64;
            let v = verify_dp_kernel(&k, eps, NeighborRelation::AllPairs).unwrap();
            assert!(
                !passed || v.pass,
                "verdict flipped back to fail at eps {eps}"
            );
            passed = v.pass;
        }
        assert!(passed);
    }

    #[test]
    fn relation_choice_matters_when_items_leak() {
        let keep = keep_probability(3f64.ln()).unwrap();
        let k = ChannelKernel::from_release(
            2,
            1,
            vec!["1:0".into(), "1:1".into(), "2:0".into(), "2:1".into()],
            |d| {
                let base = 2 * d.items[0];
                let mut row = vec![0.0; 4];
                row[base + d.ratings[0] as usize] = keep;
                row[base + 1 - d.ratings[0] as usize] = 1.0 - keep;
                row
            },
        )
        .unwrap();
        let eps = 3f64.ln();
        assert!(
            verify_dp_kernel(&k, eps, NeighborRelation::SingleRating)
                .unwrap()
                .pass
        );
        let v = verify_dp_kernel(&k, eps, NeighborRelation::AllPairs).unwrap();
        assert!(!v.pass);
        assert_eq!(v.max_log_ratio, f64::INFINITY);
    }

    #[test]
    fn random_kernels_satisfy_their_target() {
        let mut rng = rng::substream(7, "test:kernels");
        for i in 0..50 {
            let eps = 0.2 + 0.1 * (i % 7) as f64;
            let n = 2 + i % 2;
            let k = random_dp_kernel(n, 1, 2 + i % 3, eps, &mut rng).unwrap();
            let v = verify_dp_kernel(&k, eps, NeighborRelation::AllPairs).unwrap();
            assert!(v.pass, "kernel {i}: max {} vs eps {eps}", v.max_log_ratio);
        }
    }

    proptest! {
        #[test]
        fn post_processing_never_raises_the_budget(
            seed in 0u64..500,
            eps in 0.05f64..2.0,
            buckets in 2usize..4,
        ) {
            let mut rng = rng::substream(seed, "test:postproc");
            let k = random_dp_kernel(2, 1, 4, eps, &mut rng).unwrap();
            let map: Vec<usize> = (0..4).map(|s| s % buckets).collect();
            let merged = k.merge_outputs(&map, buckets).unwrap();
            let v = verify_dp_kernel(&merged, eps, NeighborRelation::AllPairs).unwrap();
            prop_assert!(v.pass, "merged kernel broke the budget: {}", v.max_log_ratio);
        }
    }
}
