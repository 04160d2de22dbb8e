//! Pair-agreement sketches and spectral recovery of item classes.
//!
//! Each user is assigned one item pair, releases through randomized response
//! the bit "I rated both items 1", and the curator accumulates released 1s
//! into a symmetric count matrix. Top eigenvectors of that matrix embed the
//! items; k-means on the embedding recovers the classes.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::clustering::{self, ClusterError, ClusteringResult};
use crate::kernel::{ChannelKernel, KernelError};
use crate::model::UserRecord;
use crate::privacy::{self, PrivacyError};

#[derive(Debug, Error)]
pub enum PairwiseError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("pair assignment needs at least two rated items per user")]
    NeedTwoRated,
    #[error("eigensolver did not converge within {0} iterations")]
    EigenNonConvergence(usize),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("matrix csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// How item pairs are assigned to users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    /// Uniform unordered pair from the whole item universe.
    RandomGlobal,
    /// Uniform unordered pair among the user's rated items.
    RandomRated,
}

impl std::fmt::Display for PairMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairMode::RandomGlobal => "random-global",
            PairMode::RandomRated => "random-rated",
        })
    }
}

impl FromStr for PairMode {
    type Err = PairwiseError;
    fn from_str(s: &str) -> Result<Self, PairwiseError> {
        match s {
            "random-global" => Ok(PairMode::RandomGlobal),
            "random-rated" => Ok(PairMode::RandomRated),
            other => Err(PairwiseError::Invalid(format!("unknown pair mode {other}"))),
        }
    }
}

fn uniform_pair(count: usize, rng: &mut impl Rng) -> (usize, usize) {
    let a = rng.random_range(0..count);
    let mut b = rng.random_range(0..count - 1);
    if b >= a {
        b += 1;
    }
    (a.min(b), a.max(b))
}

/// Draws the item pair user `user` will answer about, as an ordered
/// `(low, high)` index pair.
pub fn assign_pair(
    mode: PairMode,
    user: &UserRecord,
    n_items: usize,
    rng: &mut impl Rng,
) -> Result<(usize, usize), PairwiseError> {
    match mode {
        PairMode::RandomGlobal => {
            if n_items < 2 {
                return Err(PairwiseError::Invalid("need at least two items".into()));
            }
            Ok(uniform_pair(n_items, rng))
        }
        PairMode::RandomRated => {
            if user.items.len() < 2 {
                return Err(PairwiseError::NeedTwoRated);
            }
            let (a, b) = uniform_pair(user.items.len(), rng);
            Ok((user.items[a], user.items[b]))
        }
    }
}

/// Raw agreement bit: 1 iff the user rated both items of `pair` with 1.
pub fn pair_agreement_bit(items: &[usize], ratings: &[u8], pair: (usize, usize)) -> u8 {
    let rated_one = |item: usize| {
        items
            .binary_search(&item)
            .ok()
            .map(|pos| ratings[pos] == 1)
            .unwrap_or(false)
    };
    u8::from(rated_one(pair.0) && rated_one(pair.1))
}

/// Computes the user's agreement bit for `pair` and releases it at `eps`.
pub fn pp_private_sketch(
    user: &UserRecord,
    pair: (usize, usize),
    eps: f64,
    rng: &mut impl Rng,
) -> Result<u8, PairwiseError> {
    let s0 = pair_agreement_bit(&user.items, &user.ratings, pair);
    Ok(privacy::dp_bit_release(s0, eps, rng)?)
}

/// Symmetric released-1 counts per item pair, stored as an upper triangle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceMatrix {
    n: usize,
    counts: Vec<u64>,
    releases: u64,
}

impl PreferenceMatrix {
    pub fn new(n: usize) -> Result<Self, PairwiseError> {
        if n < 2 {
            return Err(PairwiseError::Invalid("need at least two items".into()));
        }
        Ok(PreferenceMatrix {
            n,
            counts: vec![0; n * (n - 1) / 2],
            releases: 0,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn releases(&self) -> u64 {
        self.releases
    }

    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn add(&mut self, pair: (usize, usize), released: u8) {
        let (i, j) = (pair.0.min(pair.1), pair.0.max(pair.1));
        assert!(i != j, "diagonal pair ({i},{j})");
        self.releases += 1;
        if released == 1 {
            let idx = self.index(i, j);
            self.counts[idx] += 1;
        }
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        if i == j {
            return 0;
        }
        let (i, j) = (i.min(j), i.max(j));
        self.counts[self.index(i, j)]
    }

    pub fn merge(&mut self, other: &PreferenceMatrix) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.releases += other.releases;
    }

    /// Total of the full symmetric matrix, i.e. twice the stored triangle.
    pub fn symmetric_total(&self) -> u64 {
        2 * self.counts.iter().sum::<u64>()
    }

    /// Sparse CSV of the upper triangle, 1-indexed: `i,j,count`, nonzero
    /// entries only, row-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,count\n");
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let c = self.count(i, j);
                if c > 0 {
                    let _ = writeln!(out, "{},{},{}", i + 1, j + 1, c);
                }
            }
        }
        out
    }

    /// Parses [`PreferenceMatrix::to_csv`] output. The release total is not
    /// part of the format, so it comes back as the count sum.
    pub fn from_csv(n: usize, text: &str) -> Result<Self, PairwiseError> {
        let mut m = PreferenceMatrix::new(n)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "i,j,count")) => {}
            _ => {
                return Err(PairwiseError::Csv {
                    line: 1,
                    msg: "expected header i,j,count".into(),
                })
            }
        }
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut f = line.split(',');
            let mut int = |name: &str| -> Result<u64, PairwiseError> {
                f.next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| PairwiseError::Csv {
                        line: lineno,
                        msg: format!("bad {name}"),
                    })
            };
            let i = int("i")? as usize;
            let j = int("j")? as usize;
            let c = int("count")?;
            if i == 0 || j == 0 || i > n || j > n || i >= j {
                return Err(PairwiseError::Csv {
                    line: lineno,
                    msg: format!("bad pair ({i},{j})"),
                });
            }
            let idx = m.index(i - 1, j - 1);
            m.counts[idx] += c;
            m.releases += c;
        }
        Ok(m)
    }
}

/// Folds released pair bits into a fresh matrix.
pub fn accumulate_matrix(
    n: usize,
    released: impl IntoIterator<Item = ((usize, usize), u8)>,
) -> Result<PreferenceMatrix, PairwiseError> {
    let mut m = PreferenceMatrix::new(n)?;
    for (pair, bit) in released {
        m.add(pair, bit);
    }
    Ok(m)
}

const EIGEN_MAX_ITERS: usize = 10_000;

/// Embeds items as the entries of the `l` eigenvectors with largest
/// absolute eigenvalue. Returns row-major `l`-dimensional points and the
/// chosen eigenvalues. Ordering ties prefer the larger signed eigenvalue,
/// then the smaller original index; each eigenvector's largest-magnitude
/// entry is made positive so the embedding is sign-deterministic.
pub fn spectral_embedding(
    matrix: &PreferenceMatrix,
    l: usize,
) -> Result<(Vec<f64>, Vec<f64>), PairwiseError> {
    let n = matrix.n_items();
    if l == 0 || l > n {
        return Err(PairwiseError::Invalid(format!(
            "embedding dimension {l} outside 1..={n}"
        )));
    }
    let dense = DMatrix::from_fn(n, n, |i, j| matrix.count(i, j) as f64);
    let eig = nalgebra::SymmetricEigen::try_new(dense, 1e-12, EIGEN_MAX_ITERS)
        .ok_or(PairwiseError::EigenNonConvergence(EIGEN_MAX_ITERS))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (va, vb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        vb.abs()
            .total_cmp(&va.abs())
            .then(vb.total_cmp(&va))
            .then(a.cmp(&b))
    });

    let mut points = vec![0.0; n * l];
    let mut eigenvalues = Vec::with_capacity(l);
    for (dim, &col) in order[..l].iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[col]);
        let v = eig.eigenvectors.column(col);
        let mut top = 0;
        for i in 1..n {
            if v[i].abs() > v[top].abs() {
                top = i;
            }
        }
        let sign = if v[top] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            points[i * l + dim] = sign * v[i];
        }
    }
    Ok((points, eigenvalues))
}

/// Spectral embedding followed by k-means with `restarts` restarts.
pub fn pp_cluster(
    matrix: &PreferenceMatrix,
    l: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusteringResult, PairwiseError> {
    let (points, _) = spectral_embedding(matrix, l)?;
    Ok(clustering::kmeans(&points, l, l, restarts, seed)?)
}

/// Tabulates the pair-agreement release for a fixed pair.
pub fn pp_release_kernel(
    n: usize,
    w: usize,
    pair: (usize, usize),
    eps: f64,
) -> Result<ChannelKernel, PairwiseError> {
    if pair.0 >= pair.1 || pair.1 >= n {
        return Err(PairwiseError::Invalid(format!(
            "pair ({},{}) is not an ordered item pair below {n}",
            pair.0, pair.1
        )));
    }
    let keep = privacy::keep_probability(eps)?;
    Ok(ChannelKernel::from_release(
        n,
        w,
        vec!["0".into(), "1".into()],
        |d| {
            if pair_agreement_bit(&d.items, &d.ratings, pair) == 1 {
                vec![1.0 - keep, keep]
            } else {
                vec![keep, 1.0 - keep]
            }
        },
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_ground_truth, sample_user, ModelParams};
    use crate::privacy::{verify_dp_kernel, NeighborRelation};
    use crate::rng;

    fn all_ones_params(n_items: usize, w: usize) -> ModelParams {
        ModelParams {
            n_items,
            n_users: 10,
            alpha: vec![1.0],
            beta: vec![1.0],
            affinity: vec![vec![1.0]],
            rated_per_user: w,
            epsilon: 3f64.ln(),
            theta: 1.0,
        }
    }

    #[test]
    fn two_items_always_pair_them() {
        let p = all_ones_params(2, 2);
        let truth = sample_ground_truth(&p, 1).unwrap();
        let user = sample_user(&p, &truth, 0, 1);
        let mut stream = rng::substream(1, "test:pair2");
        for _ in 0..50 {
            for mode in [PairMode::RandomGlobal, PairMode::RandomRated] {
                assert_eq!(assign_pair(mode, &user, 2, &mut stream).unwrap(), (0, 1));
            }
        }
    }

    #[test]
    fn rated_mode_requires_two_rated_items() {
        let p = all_ones_params(5, 1);
        let truth = sample_ground_truth(&p, 2).unwrap();
        let user = sample_user(&p, &truth, 0, 2);
        let mut stream = rng::substream(2, "test:pair1");
        assert!(matches!(
            assign_pair(PairMode::RandomRated, &user, 5, &mut stream),
            Err(PairwiseError::NeedTwoRated)
        ));
        assert!(assign_pair(PairMode::RandomGlobal, &user, 5, &mut stream).is_ok());
    }

    #[test]
    fn global_pairs_are_uniform() {
        let p = all_ones_params(5, 2);
        let truth = sample_ground_truth(&p, 3).unwrap();
        let user = sample_user(&p, &truth, 0, 3);
        let mut stream = rng::substream(3, "test:pairfreq");
        let mut counts = std::collections::HashMap::new();
        let draws = 100_000;
        for _ in 0..draws {
            let pair = assign_pair(PairMode::RandomGlobal, &user, 5, &mut stream).unwrap();
            *counts.entry(pair).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 10);
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        for (&pair, &c) in &counts {
            assert!(pair.0 < pair.1);
            let delta = (c as f64 - draws as f64 * 0.1).abs();
            assert!(delta <= 4.0 * sigma, "pair {pair:?}: {c}");
        }
    }

    #[test]
    fn rated_mode_stays_inside_the_rated_set() {
        let p = all_ones_params(30, 3);
        let truth = sample_ground_truth(&p, 4).unwrap();
        let user = sample_user(&p, &truth, 0, 4);
        let mut stream = rng::substream(4, "test:rated");
        for _ in 0..200 {
            let (a, b) = assign_pair(PairMode::RandomRated, &user, 30, &mut stream).unwrap();
            assert!(user.items.contains(&a) && user.items.contains(&b));
            assert!(a < b);
        }
        assert_eq!(PairMode::from_str("random-rated").unwrap(), PairMode::RandomRated);
        assert!(PairMode::from_str("rated").is_err());
    }

    #[test]
    fn agreement_needs_both_ratings_one() {
        let items = vec![2, 5, 9];
        let ratings = vec![1, 0, 1];
        assert_eq!(pair_agreement_bit(&items, &ratings, (2, 9)), 1);
        assert_eq!(pair_agreement_bit(&items, &ratings, (2, 5)), 0);
        assert_eq!(pair_agreement_bit(&items, &ratings, (2, 3)), 0);
        assert_eq!(pair_agreement_bit(&items, &ratings, (1, 4)), 0);
    }

    #[test]
    fn matrix_is_symmetric_with_zero_diagonal() {
        let mut m = PreferenceMatrix::new(4).unwrap();
        m.add((2, 0), 1);
        m.add((0, 2), 1);
        m.add((1, 3), 0);
        assert_eq!(m.count(0, 2), 2);
        assert_eq!(m.count(2, 0), 2);
        assert_eq!(m.count(1, 1), 0);
        assert_eq!(m.releases(), 3);
        assert!(m.symmetric_total() <= 2 * m.releases());

        let mut a = PreferenceMatrix::new(4).unwrap();
        a.add((0, 1), 1);
        let mut b = PreferenceMatrix::new(4).unwrap();
        b.add((0, 1), 1);
        b.add((2, 3), 1);
        a.merge(&b);
        assert_eq!(a.count(0, 1), 2);
        assert_eq!(a.count(2, 3), 1);
        assert_eq!(a.releases(), 3);
    }

    #[test]
    fn matrix_csv_round_trips() {
        let mut m = PreferenceMatrix::new(5).unwrap();
        let mut stream = rng::substream(5, "test:csv");
        for _ in 0..300 {
            let pair = uniform_pair(5, &mut stream);
            m.add(pair, u8::from(stream.random::<f64>() < 0.5));
        }
        let text = m.to_csv();
        let back = PreferenceMatrix::from_csv(5, &text).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m.count(i, j), back.count(i, j));
            }
        }
        assert!(PreferenceMatrix::from_csv(5, "i,j\n").is_err());
        assert!(PreferenceMatrix::from_csv(5, "i,j,count\n3,3,1\n").is_err());
    }

    #[test]
    fn accumulated_rate_tracks_the_keep_probability() {
        let p = all_ones_params(2, 2);
        let eps = p.epsilon;
        let truth = sample_ground_truth(&p, 6).unwrap();
        let user = sample_user(&p, &truth, 0, 6);
        let users = 10_000u64;
        let mut stream = rng::substream(6, "test:accum");
        let released = (0..users).map(|_| {
            let bit = pp_private_sketch(&user, (0, 1), eps, &mut stream).unwrap();
            ((0usize, 1usize), bit)
        });
        let m = accumulate_matrix(2, released).unwrap();
        let rate = m.count(0, 1) as f64 / users as f64;
        let sigma = (0.75 * 0.25 / users as f64).sqrt();
        assert!((rate - 0.75).abs() <= 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn pair_counts_are_binomial_under_global_assignment() {
        let mut p = all_ones_params(5, 5);
        p.n_users = 100_000;
        let truth = sample_ground_truth(&p, 7).unwrap();
        let users = p.n_users as u64;
        let keep = privacy::keep_probability(p.epsilon).unwrap();
        let mut m = PreferenceMatrix::new(5).unwrap();
        for u in 0..users {
            let user = sample_user(&p, &truth, u, 7);
            let mut stream = rng::indexed(7, "sketch", u);
            let pair = assign_pair(PairMode::RandomGlobal, &user, 5, &mut stream).unwrap();
            let bit = pp_private_sketch(&user, pair, p.epsilon, &mut stream).unwrap();
            m.add(pair, bit);
        }
        let hit = keep / 10.0;
        let sigma = (users as f64 * hit * (1.0 - hit)).sqrt();
        for i in 0..5 {
            for j in (i + 1)..5 {
                let delta = (m.count(i, j) as f64 - users as f64 * hit).abs();
                assert!(delta <= 4.0 * sigma, "pair ({i},{j}): {}", m.count(i, j));
            }
        }
    }

    #[test]
    fn block_constant_matrices_recover_exactly() {
        let mut m = PreferenceMatrix::new(6).unwrap();
        let truth = [0usize, 0, 0, 1, 1, 1];
        for i in 0..6 {
            for j in (i + 1)..6 {
                let c = if truth[i] == truth[j] { 100 } else { 10 };
                for _ in 0..c {
                    m.add((i, j), 1);
                }
            }
        }
        let r = pp_cluster(&m, 2, 4, 11).unwrap();
        let matched = clustering::match_labels(&r.labels, &truth, 2).unwrap();
        assert_eq!(matched.misplaced, 0);
    }

    #[test]
    fn zero_matrix_clusters_without_error() {
        let m = PreferenceMatrix::new(6).unwrap();
        let r = pp_cluster(&m, 2, 3, 12).unwrap();
        assert_eq!(r.labels.len(), 6);
    }

    #[test]
    fn embedding_orders_by_magnitude_then_sign() {
        let mut m = PreferenceMatrix::new(3).unwrap();
        for _ in 0..8 {
            m.add((0, 1), 1);
        }
        for _ in 0..2 {
            m.add((1, 2), 1);
        }
        let (points, eigenvalues) = spectral_embedding(&m, 3).unwrap();
        assert_eq!(points.len(), 9);
        assert_eq!(eigenvalues.len(), 3);
        for w in eigenvalues.windows(2) {
            assert!(
                w[0].abs() > w[1].abs() - 1e-12,
                "order broken: {eigenvalues:?}"
            );
        }
        let (again, _) = spectral_embedding(&m, 3).unwrap();
        assert_eq!(points, again);
    }

    #[test]
    fn release_kernel_meets_its_budget() {
        for eps in [0.5, 3f64.ln()] {
            let k = pp_release_kernel(4, 2, (0, 2), eps).unwrap();
            let v = verify_dp_kernel(&k, eps, NeighborRelation::AllPairs).unwrap();
            assert!(v.pass, "eps {eps}: {}", v.max_log_ratio);
            assert!(
                !verify_dp_kernel(&k, eps - 0.01, NeighborRelation::AllPairs)
                    .unwrap()
                    .pass
            );
        }
        assert!(pp_release_kernel(4, 2, (2, 2), 1.0).is_err());
        assert!(pp_release_kernel(4, 2, (1, 4), 1.0).is_err());
    }

    // The count matrix has a zero diagonal, so its spectrum carries a bulk
    // eigenvalue -a (a = within-class released rate) of multiplicity N-2
    // next to the class-split eigenvalue (N/2-1)a - (N/2)b. The embedding
    // only sees the split once it outranks the bulk, which needs N large
    // enough; N=16 at eps=ln 3 clears it with a 1.8x margin.
    #[test]
    fn small_pipeline_recovers_two_classes() {
        let p = ModelParams {
            n_items: 16,
            n_users: 100_000,
            alpha: vec![0.5, 0.5],
            beta: vec![0.5, 0.5],
            affinity: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            rated_per_user: 16,
            epsilon: 3f64.ln(),
            theta: 1.0,
        };
        let truth = sample_ground_truth(&p, 13).unwrap();
        let mut m = PreferenceMatrix::new(p.n_items).unwrap();
        for u in 0..p.n_users as u64 {
            let user = sample_user(&p, &truth, u, 13);
            let mut stream = rng::indexed(13, "sketch", u);
            let pair =
                assign_pair(PairMode::RandomGlobal, &user, p.n_items, &mut stream).unwrap();
            let bit = pp_private_sketch(&user, pair, p.epsilon, &mut stream).unwrap();
            m.add(pair, bit);
        }
        let r = pp_cluster(&m, 2, 8, 13).unwrap();
        let matched =
            clustering::match_labels(&r.labels, &truth.item_class_usize(), 2).unwrap();
        assert_eq!(
            matched.misplaced, 0,
            "labels {:?} truth {:?}",
            r.labels, truth.item_class
        );
    }
}
