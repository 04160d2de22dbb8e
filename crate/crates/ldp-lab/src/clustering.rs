//! k-means clustering and label alignment utilities.

use thiserror::Error;

use crate::rng;
use rand::Rng;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("no points to cluster")]
    EmptyInput,
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("k = {k} exceeds {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("{0} classes exceed the supported maximum of 8")]
    TooManyClasses(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub restarts: usize,
}

const MAX_ITERS: usize = 200;

fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    fn n(&self) -> usize {
        self.data.len() / self.dim
    }
    fn at(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn kmeanspp_init(pts: &Points, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = pts.n();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(pts.at(rng.random_range(0..n)).to_vec());
    let mut dist = vec![0.0f64; n];
    for _ in 1..k {
        let mut total = 0.0;
        for i in 0..n {
            let d = centroids
                .iter()
                .map(|c| d2(pts.at(i), c))
                .fold(f64::INFINITY, f64::min);
            dist[i] = d;
            total += d;
        }
        let next = if total == 0.0 {
            rng.random_range(0..n)
        } else {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for i in 0..n {
                acc += dist[i];
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(pts.at(next).to_vec());
    }
    centroids
}

fn lloyd(pts: &Points, k: usize, rng: &mut impl Rng) -> (Vec<usize>, f64) {
    let n = pts.n();
    let dim = pts.dim;
    let mut centroids = kmeanspp_init(pts, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut prev_obj = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        let mut obj = 0.0;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = d2(pts.at(i), centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
            obj += best_d;
        }
        assert!(
            obj <= prev_obj * (1.0 + 1e-12) + 1e-9,
            "assignment step raised the objective: {prev_obj} -> {obj}"
        );

        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        let mut moved = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far = usize::MAX;
            let mut far_d = -1.0;
            for i in 0..n {
                if moved[i] || counts[labels[i]] <= 1 {
                    continue;
                }
                let d = d2(pts.at(i), &centroids[labels[i]]);
                if d > far_d {
                    far_d = d;
                    far = i;
                }
            }
            if far != usize::MAX {
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
                moved[far] = true;
                changed = true;
            }
        }

        for c in centroids.iter_mut() {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        for i in 0..n {
            let c = &mut centroids[labels[i]];
            for (cx, px) in c.iter_mut().zip(pts.at(i)) {
                *cx += px;
            }
        }
        for (c, &count) in centroids.iter_mut().zip(&counts) {
            if count > 0 {
                c.iter_mut().for_each(|x| *x /= count as f64);
            }
        }
        let mut updated_obj = 0.0;
        for i in 0..n {
            updated_obj += d2(pts.at(i), &centroids[labels[i]]);
        }
        assert!(
            updated_obj <= obj * (1.0 + 1e-12) + 1e-9,
            "update step raised the objective: {obj} -> {updated_obj}"
        );
        prev_obj = updated_obj;
        if !changed {
            break;
        }
        let _ = dim;
    }
    (labels, prev_obj)
}

/// Lloyd's algorithm with k-means++ seeding, run `restarts` times from the
/// substreams `kmeans:0..restarts` of `seed`; the lowest-inertia run wins,
/// with ties going to the earliest restart. Points are row-major with `dim`
/// coordinates each.
pub fn kmeans(
    points: &[f64],
    dim: usize,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusteringResult, ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if dim == 0 || points.len() % dim != 0 {
        return Err(ClusterError::BadInput(format!(
            "{} coordinates do not form {dim}-dimensional points",
            points.len()
        )));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(ClusterError::BadInput("non-finite coordinate".into()));
    }
    if restarts == 0 {
        return Err(ClusterError::BadInput("restarts is 0".into()));
    }
    let pts = Points { data: points, dim };
    let n = pts.n();
    if k == 0 {
        return Err(ClusterError::BadInput("k is 0".into()));
    }
    if k > n {
        return Err(ClusterError::TooManyClusters { k, n });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..restarts {
        let mut stream = rng::indexed(seed, "kmeans", r as u64);
        let (labels, inertia) = lloyd(&pts, k, &mut stream);
        if best.as_ref().is_none_or(|(_, bi)| inertia < *bi) {
            best = Some((labels, inertia));
        }
    }
    let (labels, inertia) = best.unwrap();
    Ok(ClusteringResult {
        labels,
        inertia,
        restarts,
    })
}

/// Optimal 1-D k-means by dynamic programming over contiguous segments of
/// the sorted values. Globally minimizes inertia; clusters may come out
/// empty when fewer than `k` distinct values exist. Deterministic: ties take
/// the leftmost split.
pub fn kmeans_1d_exact(values: &[f64], k: usize) -> Result<ClusteringResult, ClusterError> {
    if values.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(ClusterError::BadInput("non-finite value".into()));
    }
    if k == 0 {
        return Err(ClusterError::BadInput("k is 0".into()));
    }
    let n = values.len();
    if k > n {
        return Err(ClusterError::TooManyClusters { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    let sse = |a: usize, b: usize| -> f64 {
        if b <= a {
            return 0.0;
        }
        let m = (b - a) as f64;
        let sum = s1[b] - s1[a];
        (s2[b] - s2[a] - sum * sum / m).max(0.0)
    };

    let mut cost = vec![vec![f64::INFINITY; n + 1]; k + 1];
    let mut cut = vec![vec![0usize; n + 1]; k + 1];
    cost[0][0] = 0.0;
    for m in 1..=k {
        for j in 0..=n {
            for t in 0..=j {
                if cost[m - 1][t].is_infinite() {
                    continue;
                }
                let c = cost[m - 1][t] + sse(t, j);
                if c < cost[m][j] {
                    cost[m][j] = c;
                    cut[m][j] = t;
                }
            }
        }
    }

    let mut labels = vec![0usize; n];
    let mut hi = n;
    for m in (1..=k).rev() {
        let lo = cut[m][hi];
        for pos in lo..hi {
            labels[order[pos]] = m - 1;
        }
        hi = lo;
    }
    Ok(ClusteringResult {
        labels,
        inertia: cost[k][n],
        restarts: 1,
    })
}

/// Best label alignment between a predicted clustering and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatch {
    /// Fraction of objects agreeing under the best permutation.
    pub accuracy: f64,
    /// Objects left disagreeing under the best permutation.
    pub misplaced: usize,
    /// `permutation[p]` is the truth label matched to predicted label `p`.
    pub permutation: Vec<usize>,
}

fn permutations_lex(l: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..l).collect();
    loop {
        out.push(perm.clone());
        let Some(i) = (0..l.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            return out;
        };
        let j = (i + 1..l).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

/// Maximizes agreement between `predicted` and `truth` over all `l!`
/// relabelings of the predicted classes; ties pick the lexicographically
/// smallest permutation. Supports at most 8 classes.
pub fn match_labels(
    predicted: &[usize],
    truth: &[usize],
    l: usize,
) -> Result<LabelMatch, ClusterError> {
    if l == 0 || l > 8 {
        return Err(ClusterError::TooManyClasses(l));
    }
    if predicted.len() != truth.len() {
        return Err(ClusterError::BadInput(format!(
            "{} predictions for {} truths",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if predicted.iter().chain(truth).any(|&c| c >= l) {
        return Err(ClusterError::BadInput(format!("label out of range 0..{l}")));
    }
    let mut confusion = vec![vec![0usize; l]; l];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[p][t] += 1;
    }
    let mut best_perm = None;
    let mut best_agree = 0usize;
    for perm in permutations_lex(l) {
        let agree: usize = (0..l).map(|p| confusion[p][perm[p]]).sum();
        if best_perm.is_none() || agree > best_agree {
            best_agree = agree;
            best_perm = Some(perm);
        }
    }
    let n = predicted.len();
    Ok(LabelMatch {
        accuracy: best_agree as f64 / n as f64,
        misplaced: n - best_agree,
        permutation: best_perm.unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_blobs_reach_zero_inertia() {
        let points = vec![0.0, 0.0, 10.0, 10.0];
        let r = kmeans(&points, 1, 2, 4, 1).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert_ne!(r.labels[0], r.labels[2]);
        assert_eq!(r.labels[0], r.labels[1]);
    }

    #[test]
    fn k_equal_n_is_exact() {
        let points = vec![1.0, 2.0, 5.0, 9.0, 3.0, 4.0];
        let r = kmeans(&points, 2, 3, 2, 9).unwrap();
        assert!(r.inertia < 1e-18);
        let mut sorted = r.labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn kmeans_is_seed_deterministic() {
        let points: Vec<f64> = (0..60).map(|i| ((i * 37) % 101) as f64).collect();
        let a = kmeans(&points, 2, 3, 5, 77).unwrap();
        let b = kmeans(&points, 2, 3, 5, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kmeans_validates_input() {
        assert!(matches!(kmeans(&[], 1, 2, 1, 0), Err(ClusterError::EmptyInput)));
        assert!(kmeans(&[1.0, 2.0, 3.0], 2, 1, 1, 0).is_err());
        assert!(kmeans(&[1.0, 2.0], 1, 3, 1, 0).is_err());
        assert!(kmeans(&[f64::NAN, 2.0], 1, 1, 1, 0).is_err());
    }

    #[test]
    fn exact_1d_splits_at_the_wide_gap() {
        let r = kmeans_1d_exact(&[1.0, 2.0, 100.0, 101.0], 2).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[2], r.labels[3]);
        assert_ne!(r.labels[0], r.labels[2]);
        assert!((r.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_1d_handles_ties_without_error() {
        let r = kmeans_1d_exact(&[5.0, 5.0, 5.0, 5.0], 2).unwrap();
        assert_eq!(r.inertia, 0.0);
        let r = kmeans_1d_exact(&[0.0, 0.0, 100.0, 100.0], 2).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert_ne!(r.labels[0], r.labels[3]);
    }

    fn brute_force_1d(values: &[f64], k: usize) -> f64 {
        fn go(sorted: &[f64], cuts_left: usize, start: usize, acc: f64, best: &mut f64) {
            let n = sorted.len();
            let sse = |a: usize, b: usize| -> f64 {
                if b <= a {
                    return 0.0;
                }
                let seg = &sorted[a..b];
                let mean: f64 = seg.iter().sum::<f64>() / seg.len() as f64;
                seg.iter().map(|v| (v - mean) * (v - mean)).sum()
            };
            if cuts_left == 0 {
                let total = acc + sse(start, n);
                if total < *best {
                    *best = total;
                }
                return;
            }
            for end in start..=n {
                go(sorted, cuts_left - 1, end, acc + sse(start, end), best);
            }
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut best = f64::INFINITY;
        go(&sorted, k - 1, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn exact_1d_matches_exhaustive_partition_search() {
        let mut stream = crate::rng::substream(3, "test:oneD");
        use rand::Rng;
        for trial in 0..40 {
            let n = 2 + (trial % 9);
            let k = 1 + (trial % 4).min(n - 1);
            let values: Vec<f64> = (0..n).map(|_| stream.random_range(-5.0..5.0)).collect();
            let dp = kmeans_1d_exact(&values, k).unwrap();
            let brute = brute_force_1d(&values, k);
            assert!(
                (dp.inertia - brute).abs() <= 1e-9 * (1.0 + brute),
                "trial {trial}: dp {} brute {brute}",
                dp.inertia
            );
        }
    }

    #[test]
    fn exact_1d_never_loses_to_lloyd() {
        let mut stream = crate::rng::substream(4, "test:oneDvsLloyd");
        use rand::Rng;
        for trial in 0..10 {
            let values: Vec<f64> = (0..20).map(|_| stream.random_range(0.0..50.0)).collect();
            let dp = kmeans_1d_exact(&values, 3).unwrap();
            let ll = kmeans(&values, 1, 3, 50, trial).unwrap();
            assert!(dp.inertia <= ll.inertia * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn label_matching_finds_the_best_permutation() {
        let m = match_labels(&[0, 0, 1, 1], &[1, 1, 0, 0], 2).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.permutation, vec![1, 0]);

        let m = match_labels(&[0, 0, 1, 1], &[1, 0, 1, 1], 2).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.misplaced, 1);

        let m = match_labels(&[2, 2, 2, 2], &[1, 1, 1, 1], 3).unwrap();
        assert_eq!(m.accuracy, 1.0);

        assert!(match_labels(&[0], &[0], 9).is_err());
        assert!(match_labels(&[3], &[0], 2).is_err());
        assert!(match_labels(&[0, 1], &[0], 2).is_err());
    }

    proptest! {
        #[test]
        fn matching_is_invariant_to_relabeling(
            labels in proptest::collection::vec(0usize..3, 1..40),
            shift in 0usize..3,
        ) {
            let truth: Vec<usize> = labels.clone();
            let relabeled: Vec<usize> = labels.iter().map(|&c| (c + shift) % 3).collect();
            let m = match_labels(&relabeled, &truth, 3).unwrap();
            prop_assert_eq!(m.accuracy, 1.0);
            prop_assert_eq!(m.misplaced, 0);
        }

        #[test]
        fn accuracy_is_a_fraction_of_agreements(
            pred in proptest::collection::vec(0usize..4, 1..30),
            truth_seed in 0u64..1000,
        ) {
            let mut stream = crate::rng::substream(truth_seed, "test:perm");
            use rand::Rng;
            let truth: Vec<usize> = pred.iter().map(|_| stream.random_range(0..4)).collect();
            let m = match_labels(&pred, &truth, 4).unwrap();
            prop_assert!(m.accuracy >= 0.0 && m.accuracy <= 1.0);
            let agree = pred.len() - m.misplaced;
            prop_assert_eq!(m.accuracy, agree as f64 / pred.len() as f64);
            let direct: usize = pred.iter().zip(&truth).filter(|(p, t)| p == t).count();
            prop_assert!(agree >= direct);
        }
    }
}
