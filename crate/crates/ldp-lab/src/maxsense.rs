//! Disjunction sketches over random sensing vectors.
//!
//! Each user receives a sensing vector `H` with i.i.d. `theta/w` entries,
//! computes the disjunction of ratings over sensed-and-rated items, and
//! releases that single bit through randomized response. Aggregated per-item
//! counts `B_i` concentrate around class-dependent means, so exact 1-D
//! k-means on the counts recovers item classes.
//!
//! The multi-question variant partitions the items each user senses into
//! disjoint blocks and answers `Q` independent questions at budget `eps/Q`,
//! trading per-bit signal for per-user bandwidth.
//!
//! Closed-form count predictions here use the population approximation
//! `q0_k = prod_l (1 - theta b_kl / N)^{n_l}` for the probability that a
//! class-`k` user's raw sketch is 0. The approximation error is `O(w/N)`
//! relative, which the statistical tests account for.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::clustering::{self, ClusterError, ClusteringResult};
use crate::kernel::{ChannelKernel, KernelError};
use crate::model::{class_sizes, ModelError, ModelParams, UserRecord};
use crate::privacy::{self, BitRelease, PrivacyError};

#[derive(Debug, Error)]
pub enum MaxSenseError {
    #[error("invalid sensing parameters: {0}")]
    InvalidParams(String),
    #[error("{questions} blocks of {block_size} items exceed {n_items} items")]
    BlocksDontFit {
        questions: usize,
        block_size: usize,
        n_items: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("sketch log line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Dense 0/1 sensing vector over the item universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingVector {
    pub bits: Vec<u8>,
}

impl SensingVector {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_sensed(&self, item: usize) -> bool {
        self.bits[item] == 1
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// From a sorted list of sensed items.
    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut bits = vec![0u8; n];
        for &i in indices {
            bits[i] = 1;
        }
        SensingVector { bits }
    }

    /// Little-endian hex bitmap: item `i` lives in bit `i % 8` of byte
    /// `i / 8`. Two hex digits per byte, low nibble last within the byte.
    pub fn to_hex(&self) -> String {
        let n = self.bits.len();
        let mut s = String::with_capacity(n.div_ceil(8) * 2);
        for chunk_start in (0..n).step_by(8) {
            let mut byte = 0u8;
            for off in 0..8 {
                if chunk_start + off < n && self.bits[chunk_start + off] == 1 {
                    byte |= 1 << off;
                }
            }
            let _ = write!(s, "{byte:02x}");
        }
        s
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self, MaxSenseError> {
        if hex.len() != n.div_ceil(8) * 2 {
            return Err(MaxSenseError::InvalidParams(format!(
                "hex bitmap has {} digits, expected {}",
                hex.len(),
                n.div_ceil(8) * 2
            )));
        }
        let mut bits = vec![0u8; n];
        for (b, pair) in hex.as_bytes().chunks(2).enumerate() {
            let byte = u8::from_str_radix(std::str::from_utf8(pair).unwrap(), 16).map_err(
                |_| MaxSenseError::InvalidParams(format!("bad hex bitmap {hex}")),
            )?;
            for off in 0..8 {
                let i = b * 8 + off;
                let bit = (byte >> off) & 1;
                if i < n {
                    bits[i] = bit;
                } else if bit == 1 {
                    return Err(MaxSenseError::InvalidParams(
                        "hex bitmap sets bits beyond N".into(),
                    ));
                }
            }
        }
        Ok(SensingVector { bits })
    }
}

fn check_sensing(n: usize, theta: f64, w: usize) -> Result<f64, MaxSenseError> {
    if n == 0 || w == 0 {
        return Err(MaxSenseError::InvalidParams("N and w must be positive".into()));
    }
    if !theta.is_finite() || theta <= 0.0 {
        return Err(MaxSenseError::InvalidParams(format!("theta is {theta}")));
    }
    let p = theta / w as f64;
    if p > 1.0 {
        return Err(MaxSenseError::InvalidParams(format!(
            "sensing probability theta/w = {p} exceeds 1"
        )));
    }
    Ok(p)
}

/// Samples a sensing vector with i.i.d. `theta/w` entries.
///
/// Set bits are found by geometric gap jumps, so the cost is one draw per
/// sensed item rather than one per item; the bit vector is distributed
/// exactly as n independent Bernoulli(theta/w) flips either way.
pub fn make_sensing_vector(
    n: usize,
    theta: f64,
    w: usize,
    rng: &mut impl Rng,
) -> Result<SensingVector, MaxSenseError> {
    let p = check_sensing(n, theta, w)?;
    let mut bits = vec![0u8; n];
    if p == 1.0 {
        bits.fill(1);
        return Ok(SensingVector { bits });
    }
    let ln_q = (1.0 - p).ln();
    let mut next = 0usize;
    loop {
        let u: f64 = rng.random();
        let gap = ((1.0 - u).ln() / ln_q).floor();
        if !gap.is_finite() || gap >= (n - next) as f64 {
            break;
        }
        next += gap as usize;
        bits[next] = 1;
        next += 1;
        if next >= n {
            break;
        }
    }
    Ok(SensingVector { bits })
}

/// Raw sketch bit: 1 iff some item is both sensed and rated 1.
pub fn sensed_disjunction(items: &[usize], ratings: &[u8], h: &SensingVector) -> u8 {
    for (&it, &r) in items.iter().zip(ratings) {
        if r == 1 && h.bits[it] == 1 {
            return 1;
        }
    }
    0
}

/// Computes the user's raw sketch against `h` and releases it at `eps`.
pub fn ms_private_sketch(
    user: &UserRecord,
    h: &SensingVector,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<u8, MaxSenseError> {
    let s0 = sensed_disjunction(&user.items, &user.ratings, h);
    Ok(privacy::dp_bit_release(s0, eps, rng)?)
}

/// Per-item released-1 counts, mergeable across shards of users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemCounts {
    pub counts: Vec<u64>,
    pub releases: u64,
}

impl ItemCounts {
    pub fn new(n: usize) -> Self {
        ItemCounts {
            counts: vec![0; n],
            releases: 0,
        }
    }

    pub fn add(&mut self, h: &SensingVector, released: u8) {
        self.releases += 1;
        if released == 1 {
            for (c, &b) in self.counts.iter_mut().zip(&h.bits) {
                *c += u64::from(b);
            }
        }
    }

    /// Same accumulation for a sensing vector given as a sorted index set.
    pub fn add_indices(&mut self, sensed: &[usize], released: u8) {
        self.releases += 1;
        if released == 1 {
            for &i in sensed {
                self.counts[i] += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &ItemCounts) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.releases += other.releases;
    }

    /// CSV dump, items 1-indexed: `item,B_i` per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("item,B_i\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, c);
        }
        out
    }
}

/// Clusters items into `l` classes by exact 1-D k-means on their counts.
pub fn ms_cluster(counts: &[u64], l: usize) -> Result<ClusteringResult, MaxSenseError> {
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    Ok(clustering::kmeans_1d_exact(&values, l)?)
}

/// Sketch log line `user,S,<hex bitmap of H>`, user 1-indexed.
pub fn sketch_log_line(user_id: u64, released: u8, h: &SensingVector) -> String {
    format!("{},{},{}", user_id + 1, released, h.to_hex())
}

pub fn parse_sketch_log_line(
    line: &str,
    lineno: usize,
    n: usize,
) -> Result<(u64, u8, SensingVector), MaxSenseError> {
    let perr = |msg: String| MaxSenseError::Parse { line: lineno, msg };
    let mut f = line.split(',');
    let uid: u64 = f
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr("bad user id".into()))?;
    if uid == 0 {
        return Err(perr("user id 0".into()));
    }
    let s: u8 = f
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr("bad released bit".into()))?;
    if s > 1 {
        return Err(perr(format!("released bit {s}")));
    }
    let hex = f.next().ok_or_else(|| perr("missing bitmap".into()))?;
    if f.next().is_some() {
        return Err(perr("trailing fields".into()));
    }
    let h = SensingVector::from_hex(n, hex).map_err(|e| perr(e.to_string()))?;
    Ok((uid - 1, s, h))
}

/// Probability that a class-`k` user's raw sketch is 0, in the population
/// approximation: `prod_l (1 - theta b_kl / N)^{n_l}`.
fn class_quiet_probs(params: &ModelParams, sizes: &[usize]) -> Vec<f64> {
    let n = params.n_items as f64;
    params
        .affinity
        .iter()
        .map(|row| {
            let mut q0 = 1.0;
            for (l, &nl) in sizes.iter().enumerate() {
                q0 *= (1.0 - params.theta * row[l] / n).powi(nl as i32);
            }
            debug_assert!((0.0..=1.0 + 1e-12).contains(&q0));
            q0
        })
        .collect()
}

/// Expected count `B_l` for an item of class `item_class` under `params`,
/// using the population approximation for the quiet probability:
///
/// `U p [ (1 - keep) + (hat/2) (1 - sum_k alpha_k q0_k r_kl) ]`
///
/// with `p = theta/w`, `hat = hat_epsilon(eps)`, and
/// `r_kl = (1 - w b_kl / N) / (1 - theta b_kl / N)` the correction from
/// conditioning on the item being sensed.
pub fn expected_count(params: &ModelParams, item_class: usize) -> Result<f64, MaxSenseError> {
    params.validate()?;
    if item_class >= params.n_item_classes() {
        return Err(MaxSenseError::InvalidParams(format!(
            "item class {item_class} outside 0..{}",
            params.n_item_classes()
        )));
    }
    let p = check_sensing(params.n_items, params.theta, params.rated_per_user)?;
    let n = params.n_items as f64;
    let w = params.rated_per_user as f64;
    let hat = privacy::hat_epsilon(params.epsilon)?;
    let keep = privacy::keep_probability(params.epsilon)?;
    let sizes = class_sizes(&params.beta, params.n_items);
    let quiet = class_quiet_probs(params, &sizes);
    let mut conditioned = 0.0;
    for (k, &ak) in params.alpha.iter().enumerate() {
        let b = params.affinity[k][item_class];
        let denom = 1.0 - params.theta * b / n;
        let ratio = if denom == 0.0 {
            1.0
        } else {
            (1.0 - w * b / n) / denom
        };
        conditioned += ak * quiet[k] * ratio;
    }
    Ok(params.n_users as f64 * p * ((1.0 - keep) + hat / 2.0 * (1.0 - conditioned)))
}

/// Asymptotic class signals `v_k = sum_l beta_l b_kl` and the minimum
/// absolute separation `min_{l<m} |sum_k alpha_k e^{-theta v_k}(b_kl - b_km)|`
/// between expected per-class counts, in units of `U p hat/2 * (w - theta)/N`.
pub fn delta_min(params: &ModelParams) -> Result<f64, MaxSenseError> {
    Ok(separations(params)?
        .into_iter()
        .map(|(_, _, d)| d)
        .fold(f64::INFINITY, f64::min))
}

fn separations(params: &ModelParams) -> Result<Vec<(usize, usize, f64)>, MaxSenseError> {
    params.validate()?;
    let l = params.n_item_classes();
    if l < 2 {
        return Err(MaxSenseError::InvalidParams(
            "separation needs at least two item classes".into(),
        ));
    }
    let signals: Vec<f64> = params
        .affinity
        .iter()
        .map(|row| row.iter().zip(&params.beta).map(|(b, be)| b * be).sum())
        .collect();
    let mut out = Vec::new();
    for lo in 0..l {
        for hi in (lo + 1)..l {
            let mut d = 0.0;
            for (k, &ak) in params.alpha.iter().enumerate() {
                d += ak
                    * (-params.theta * signals[k]).exp()
                    * (params.affinity[k][lo] - params.affinity[k][hi]);
            }
            out.push((lo, hi, d.abs()));
        }
    }
    Ok(out)
}

/// Outcome of the separability precondition for count clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityReport {
    pub separable: bool,
    pub delta_min: f64,
    /// First item-class pair (0-based) whose expected counts coincide.
    pub failing: Option<(usize, usize)>,
}

const SEPARABILITY_TOL: f64 = 1e-9;

/// Checks that every pair of item classes has nonvanishing expected-count
/// separation; mixtures can cancel even when every class pair differs.
pub fn check_separability(params: &ModelParams) -> Result<SeparabilityReport, MaxSenseError> {
    let seps = separations(params)?;
    let mut dmin = f64::INFINITY;
    let mut failing = None;
    for (lo, hi, d) in seps {
        if d <= SEPARABILITY_TOL && failing.is_none() {
            failing = Some((lo, hi));
        }
        dmin = dmin.min(d);
    }
    Ok(SeparabilityReport {
        separable: failing.is_none(),
        delta_min: dmin,
        failing,
    })
}

/// Default question count for the multi-question variant: `max(1, ceil(eps))`
/// keeps the per-question budget at most 1.
pub fn default_question_count(eps: f64) -> usize {
    (eps.ceil() as usize).max(1)
}

/// Multi-question release for one user.
///
/// Draws `q` disjoint blocks of `ceil(N theta / w)` items from the user's own
/// stream (the blocks of a fresh uniform permutation), senses each block,
/// and releases each raw block-disjunction bit at budget `eps/q`. Returns
/// the sensed blocks as sorted index sets alongside the released bits.
pub fn multi_maxsense(
    user: &UserRecord,
    params: &ModelParams,
    q: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(Vec<usize>, u8)>, MaxSenseError> {
    let n = params.n_items;
    check_sensing(n, params.theta, params.rated_per_user)?;
    if q == 0 {
        return Err(MaxSenseError::InvalidParams("Q is 0".into()));
    }
    let block_size = (n as f64 * params.theta / params.rated_per_user as f64).ceil() as usize;
    if q * block_size > n {
        return Err(MaxSenseError::BlocksDontFit {
            questions: q,
            block_size,
            n_items: n,
        });
    }
    let release = BitRelease::new(privacy::split_budget(params.epsilon, q)?)?;
    let mut pool: Vec<usize> = (0..n).collect();
    let take = q * block_size;
    for t in 0..take {
        let j = rng.random_range(t..n);
        pool.swap(t, j);
    }
    let mut out = Vec::with_capacity(q);
    for chunk in pool[..take].chunks(block_size) {
        let mut block = chunk.to_vec();
        block.sort_unstable();
        let mut s0 = 0u8;
        for (&it, &r) in user.items.iter().zip(&user.ratings) {
            if r == 1 && block.binary_search(&it).is_ok() {
                s0 = 1;
                break;
            }
        }
        let bit = release.release(s0, rng);
        out.push((block, bit));
    }
    Ok(out)
}

/// Tabulates the single-question release against a fixed sensing vector.
pub fn ms_release_kernel(
    n: usize,
    w: usize,
    h: &SensingVector,
    eps: f64,
) -> Result<ChannelKernel, MaxSenseError> {
    let keep = privacy::keep_probability(eps)?;
    Ok(ChannelKernel::from_release(
        n,
        w,
        vec!["0".into(), "1".into()],
        |d| {
            if sensed_disjunction(&d.items, &d.ratings, h) == 1 {
                vec![1.0 - keep, keep]
            } else {
                vec![keep, 1.0 - keep]
            }
        },
    )?)
}

/// Tabulates the `q`-question release against fixed disjoint blocks, each
/// question at `eps/q`. Outputs are the `2^q` answer words, bit `j` of the
/// word holding question `j`'s answer.
pub fn mms_release_kernel(
    n: usize,
    w: usize,
    blocks: &[Vec<usize>],
    eps: f64,
) -> Result<ChannelKernel, MaxSenseError> {
    let q = blocks.len();
    if q == 0 {
        return Err(MaxSenseError::InvalidParams("no blocks".into()));
    }
    for pair in 0..q {
        for other in (pair + 1)..q {
            if blocks[pair].iter().any(|i| blocks[other].contains(i)) {
                return Err(MaxSenseError::InvalidParams(format!(
                    "blocks {pair} and {other} intersect"
                )));
            }
        }
    }
    let keep = privacy::keep_probability(privacy::split_budget(eps, q)?)?;
    let vectors: Vec<SensingVector> = blocks
        .iter()
        .map(|b| SensingVector::from_indices(n, b))
        .collect();
    let outputs: Vec<String> = (0..1usize << q)
        .map(|word| {
            (0..q)
                .map(|j| if (word >> j) & 1 == 1 { '1' } else { '0' })
                .collect()
        })
        .collect();
    Ok(ChannelKernel::from_release(n, w, outputs, |d| {
        let raw: Vec<u8> = vectors
            .iter()
            .map(|h| sensed_disjunction(&d.items, &d.ratings, h))
            .collect();
        (0..1usize << q)
            .map(|word| {
                let mut prob = 1.0;
                for (j, &s0) in raw.iter().enumerate() {
                    let answer = ((word >> j) & 1) as u8;
                    prob *= if answer == s0 { keep } else { 1.0 - keep };
                }
                prob
            })
            .collect()
    })?)
}
