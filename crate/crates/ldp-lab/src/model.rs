//! Bipartite blockmodel of users and items, and the dataset file format.
//!
//! Users belong to one of `K` classes drawn with weights `alpha`, items to
//! one of `L` classes drawn with weights `beta`. A user of class `k` rates a
//! uniformly random `w`-subset of the `N` items, liking an item of class `l`
//! with probability `affinity[k][l]`. Class counts are exact: `round(weight *
//! n)` per class with the rounding residue folded into the heaviest class, so
//! the same parameters always produce the same class census.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dataset line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parameters of one experiment instance.
///
/// `epsilon = 0` is accepted so that the non-private limit of the closed-form
/// predictions can be evaluated; the release mechanism itself degenerates to
/// a fair coin there.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n_items: usize,
    pub n_users: usize,
    /// User-class weights, length `K`, summing to 1.
    pub alpha: Vec<f64>,
    /// Item-class weights, length `L`, summing to 1.
    pub beta: Vec<f64>,
    /// `affinity[k][l]`: probability that a class-`k` user rates a class-`l`
    /// item 1. All entries in `[0, 1]`.
    pub affinity: Vec<Vec<f64>>,
    /// Number of items each user rates, `1 <= w <= N`.
    pub rated_per_user: usize,
    pub epsilon: f64,
    /// Sensing intensity: each sensing vector includes an item with
    /// probability `theta / w`, so `0 < theta <= w`.
    pub theta: f64,
}

const WEIGHT_TOL: f64 = 1e-9;
const MAX_CLASSES: usize = 255;

impl ModelParams {
    pub fn n_user_classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_item_classes(&self) -> usize {
        self.beta.len()
    }

    /// Per-item sensing probability `theta / w`.
    pub fn sensing_probability(&self) -> f64 {
        self.theta / self.rated_per_user as f64
    }

    /// Checks every structural invariant and reports the first violation.
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::InvalidParams(msg));
        if self.n_items == 0 {
            return err("N is 0".into());
        }
        if self.n_users == 0 {
            return err("U is 0".into());
        }
        if self.alpha.is_empty() {
            return err("alpha is empty".into());
        }
        if self.alpha.len() > MAX_CLASSES {
            return err(format!("K = {} exceeds {MAX_CLASSES}", self.alpha.len()));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return err(format!("alpha entry {a} outside [0, 1]"));
        }
        let asum: f64 = self.alpha.iter().sum();
        if (asum - 1.0).abs() > WEIGHT_TOL {
            return err(format!("alpha sums to {asum}"));
        }
        if self.beta.is_empty() {
            return err("beta is empty".into());
        }
        if self.beta.len() > MAX_CLASSES {
            return err(format!("L = {} exceeds {MAX_CLASSES}", self.beta.len()));
        }
        if let Some(b) = self.beta.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return err(format!("beta entry {b} outside [0, 1]"));
        }
        let bsum: f64 = self.beta.iter().sum();
        if (bsum - 1.0).abs() > WEIGHT_TOL {
            return err(format!("beta sums to {bsum}"));
        }
        if self.affinity.len() != self.alpha.len() {
            return err(format!(
                "affinity has {} rows for {} user classes",
                self.affinity.len(),
                self.alpha.len()
            ));
        }
        for (k, row) in self.affinity.iter().enumerate() {
            if row.len() != self.beta.len() {
                return err(format!(
                    "affinity row {k} has {} entries for {} item classes",
                    row.len(),
                    self.beta.len()
                ));
            }
            if let Some(b) = row.iter().find(|b| !(0.0..=1.0).contains(*b)) {
                return err(format!("affinity entry {b} outside [0, 1]"));
            }
        }
        if self.rated_per_user == 0 {
            return err("w is 0".into());
        }
        if self.rated_per_user > self.n_items {
            return err("w exceeds N".into());
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return err(format!("epsilon is {}", self.epsilon));
        }
        if !self.theta.is_finite() || self.theta <= 0.0 {
            return err(format!("theta is {}", self.theta));
        }
        if self.theta > self.rated_per_user as f64 {
            return err(format!(
                "theta {} exceeds w = {}",
                self.theta, self.rated_per_user
            ));
        }
        let sizes = class_sizes(&self.beta, self.n_items);
        if let Some(l) = sizes.iter().position(|&s| s == 0) {
            return err(format!("item class {} rounds to zero items", l + 1));
        }
        Ok(())
    }
}

/// Exact class census for `n` objects under `weights`: `round(weight * n)`
/// per class, rounding half away from zero, with the residue added to the
/// heaviest class (ties broken toward the largest index).
pub fn class_sizes(weights: &[f64], n: usize) -> Vec<usize> {
    assert!(!weights.is_empty());
    let mut sizes: Vec<i64> = weights
        .iter()
        .map(|w| (w * n as f64).round() as i64)
        .collect();
    let mut heaviest = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w >= weights[heaviest] {
            heaviest = i;
        }
    }
    let assigned: i64 = sizes.iter().sum();
    sizes[heaviest] += n as i64 - assigned;
    assert!(
        sizes.iter().all(|&s| s >= 0),
        "rounding residue {} cannot be absorbed by class {}",
        assigned - n as i64,
        heaviest
    );
    sizes.into_iter().map(|s| s as usize).collect()
}

/// Fixed class assignments for one instance: `item_class[i]` and
/// `user_class[u]` are 0-based class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub item_class: Vec<u8>,
    pub user_class: Vec<u8>,
}

impl GroundTruth {
    pub fn item_class_usize(&self) -> Vec<usize> {
        self.item_class.iter().map(|&c| c as usize).collect()
    }
}

fn permuted_labels(sizes: &[usize], rng: &mut impl Rng) -> Vec<u8> {
    let total: usize = sizes.iter().sum();
    let mut labels = Vec::with_capacity(total);
    for (c, &s) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat(c as u8).take(s));
    }
    labels.shuffle(rng);
    labels
}

/// Samples item and user class assignments with the exact census of
/// [`class_sizes`], uniformly permuted. Items and users draw from separate
/// substreams of `seed`.
pub fn sample_ground_truth(params: &ModelParams, seed: u64) -> Result<GroundTruth, ModelError> {
    params.validate()?;
    let item_class = permuted_labels(
        &class_sizes(&params.beta, params.n_items),
        &mut rng::substream(seed, "truth:items"),
    );
    let user_class = permuted_labels(
        &class_sizes(&params.alpha, params.n_users),
        &mut rng::substream(seed, "truth:users"),
    );
    Ok(GroundTruth {
        item_class,
        user_class,
    })
}

/// One user's private data: the rated items (0-based, strictly ascending)
/// and the corresponding ratings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: u64,
    /// 0-based user class.
    pub class: u8,
    pub items: Vec<usize>,
    pub ratings: Vec<u8>,
}

/// Draws user `user_id`'s rated subset and ratings from its own substream,
/// so any subset of users can be generated in any order or on any thread.
pub fn sample_user(
    params: &ModelParams,
    truth: &GroundTruth,
    user_id: u64,
    seed: u64,
) -> UserRecord {
    debug_assert_eq!(truth.item_class.len(), params.n_items);
    debug_assert!((user_id as usize) < truth.user_class.len());
    let mut rng = rng::indexed(seed, "user", user_id);
    let mut items =
        rand::seq::index::sample(&mut rng, params.n_items, params.rated_per_user).into_vec();
    items.sort_unstable();
    let class = truth.user_class[user_id as usize];
    let row = &params.affinity[class as usize];
    let ratings = items
        .iter()
        .map(|&it| u8::from(rng.random::<f64>() < row[truth.item_class[it] as usize]))
        .collect();
    UserRecord {
        user_id,
        class,
        items,
        ratings,
    }
}

/// Uniform truth vector in `{0,1}^n` for the one-dimensional recovery tasks.
pub fn deterministic_truth_vector(n: usize, seed: u64) -> Result<Vec<u8>, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidParams("N is 0".into()));
    }
    let mut rng = rng::substream(seed, "truth:bits");
    Ok((0..n).map(|_| u8::from(rng.random::<bool>())).collect())
}

/// A fully materialized instance: header parameters, item classes, and every
/// user record. Round-trips losslessly through the text format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub n_items: usize,
    pub n_user_classes: usize,
    pub n_item_classes: usize,
    pub rated_per_user: usize,
    pub seed: u64,
    pub item_class: Vec<u8>,
    pub users: Vec<UserRecord>,
}

/// Samples ground truth and all `U` user records for `params` under `seed`.
pub fn generate_dataset(params: &ModelParams, seed: u64) -> Result<Dataset, ModelError> {
    let truth = sample_ground_truth(params, seed)?;
    let users = (0..params.n_users as u64)
        .map(|u| sample_user(params, &truth, u, seed))
        .collect();
    Ok(Dataset {
        n_items: params.n_items,
        n_user_classes: params.n_user_classes(),
        n_item_classes: params.n_item_classes(),
        rated_per_user: params.rated_per_user,
        seed,
        item_class: truth.item_class,
        users,
    })
}

impl Dataset {
    /// Serializes to the `#ldp-dataset v1` text format. All identifiers and
    /// class labels are written 1-indexed. `comment` lines, if given, are
    /// embedded after the header and ignored by [`Dataset::from_text`].
    pub fn to_text(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "#ldp-dataset v1 N={} U={} K={} L={} w={} seed={}",
            self.n_items,
            self.users.len(),
            self.n_user_classes,
            self.n_item_classes,
            self.rated_per_user,
            self.seed
        );
        if let Some(c) = comment {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str("items");
        for &c in &self.item_class {
            let _ = write!(out, " {}", c + 1);
        }
        out.push('\n');
        for user in &self.users {
            let _ = write!(out, "{} {} ", user.user_id + 1, user.class + 1);
            for (j, (&it, &r)) in user.items.iter().zip(&user.ratings).enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}:{}", it + 1, r);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| ModelError::InvalidDataset("empty input".into()))?;
        let fields = parse_header(header)?;
        let [n_items, n_users, n_user_classes, n_item_classes, rated_per_user] =
            [fields.0, fields.1, fields.2, fields.3, fields.4];
        let seed = fields.5;
        if n_item_classes > MAX_CLASSES || n_user_classes > MAX_CLASSES {
            return Err(ModelError::InvalidDataset(format!(
                "class count exceeds {MAX_CLASSES}"
            )));
        }

        let mut item_class = None;
        let mut users: Vec<UserRecord> = Vec::with_capacity(n_users);
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("items ") {
                if item_class.is_some() {
                    return Err(ModelError::Parse {
                        line: lineno,
                        msg: "duplicate items line".into(),
                    });
                }
                let labels = parse_item_classes(rest, n_items, n_item_classes, lineno)?;
                item_class = Some(labels);
                continue;
            }
            let user = parse_user_line(
                line,
                lineno,
                users.len() as u64,
                n_items,
                n_user_classes,
                rated_per_user,
            )?;
            users.push(user);
        }
        let item_class = item_class
            .ok_or_else(|| ModelError::InvalidDataset("missing items line".into()))?;
        if users.len() != n_users {
            return Err(ModelError::InvalidDataset(format!(
                "header promises {} users, found {}",
                n_users,
                users.len()
            )));
        }
        Ok(Dataset {
            n_items,
            n_user_classes,
            n_item_classes,
            rated_per_user,
            seed,
            item_class,
            users,
        })
    }

    pub fn write_file(&self, path: &Path, comment: Option<&str>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_text(comment))?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, ModelError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_header(header: &str) -> Result<(usize, usize, usize, usize, usize, u64), ModelError> {
    let bad = |msg: &str| ModelError::Parse {
        line: 1,
        msg: msg.into(),
    };
    let mut tok = header.split_ascii_whitespace();
    if tok.next() != Some("#ldp-dataset") {
        return Err(bad("expected #ldp-dataset header"));
    }
    match tok.next() {
        Some("v1") => {}
        Some(v) => return Err(bad(&format!("unsupported version {v}"))),
        None => return Err(bad("missing version")),
    }
    let mut take = |key: &str| -> Result<u64, ModelError> {
        let t = tok
            .next()
            .ok_or_else(|| bad(&format!("missing {key}=")))?;
        let val = t
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| bad(&format!("expected {key}=, found {t}")))?;
        val.parse()
            .map_err(|_| bad(&format!("bad integer for {key}: {val}")))
    };
    let n = take("N")? as usize;
    let u = take("U")? as usize;
    let k = take("K")? as usize;
    let l = take("L")? as usize;
    let w = take("w")? as usize;
    let seed = take("seed")?;
    Ok((n, u, k, l, w, seed))
}

fn parse_item_classes(
    rest: &str,
    n_items: usize,
    n_item_classes: usize,
    lineno: usize,
) -> Result<Vec<u8>, ModelError> {
    let mut labels = Vec::with_capacity(n_items);
    for t in rest.split_ascii_whitespace() {
        let c: usize = t.parse().map_err(|_| ModelError::Parse {
            line: lineno,
            msg: format!("bad item class {t}"),
        })?;
        if c == 0 || c > n_item_classes {
            return Err(ModelError::Parse {
                line: lineno,
                msg: format!("item class {c} outside 1..={n_item_classes}"),
            });
        }
        labels.push((c - 1) as u8);
    }
    if labels.len() != n_items {
        return Err(ModelError::Parse {
            line: lineno,
            msg: format!("expected {} item classes, found {}", n_items, labels.len()),
        });
    }
    Ok(labels)
}

fn parse_user_line(
    line: &str,
    lineno: usize,
    expect_id: u64,
    n_items: usize,
    n_user_classes: usize,
    rated_per_user: usize,
) -> Result<UserRecord, ModelError> {
    let perr = |msg: String| ModelError::Parse { line: lineno, msg };
    let mut tok = line.split_ascii_whitespace();
    let uid: u64 = tok
        .next()
        .ok_or_else(|| perr("empty user line".into()))?
        .parse()
        .map_err(|_| perr("bad user id".into()))?;
    if uid != expect_id + 1 {
        return Err(perr(format!("expected user {} here, found {uid}", expect_id + 1)));
    }
    let class: usize = tok
        .next()
        .ok_or_else(|| perr("missing user class".into()))?
        .parse()
        .map_err(|_| perr("bad user class".into()))?;
    if class == 0 || class > n_user_classes {
        return Err(perr(format!("user class {class} outside 1..={n_user_classes}")));
    }
    let body = tok
        .next()
        .ok_or_else(|| perr("missing rated items".into()))?;
    if tok.next().is_some() {
        return Err(perr("trailing tokens on user line".into()));
    }
    let mut items = Vec::with_capacity(rated_per_user);
    let mut ratings = Vec::with_capacity(rated_per_user);
    for pair in body.split(',') {
        let (it, r) = pair
            .split_once(':')
            .ok_or_else(|| perr(format!("expected item:rating, found {pair}")))?;
        let it: usize = it.parse().map_err(|_| perr(format!("bad item {it}")))?;
        let r: u8 = r.parse().map_err(|_| perr(format!("bad rating {r}")))?;
        if it == 0 || it > n_items {
            return Err(perr(format!("item {it} outside 1..={n_items}")));
        }
        if r > 1 {
            return Err(perr(format!("rating {r} is not a bit")));
        }
        if let Some(&prev) = items.last() {
            if it - 1 <= prev {
                return Err(perr(format!("items not strictly ascending at {it}")));
            }
        }
        items.push(it - 1);
        ratings.push(r);
    }
    if items.len() != rated_per_user {
        return Err(perr(format!(
            "expected {rated_per_user} rated items, found {}",
            items.len()
        )));
    }
    Ok(UserRecord {
        user_id: uid - 1,
        class: (class - 1) as u8,
        items,
        ratings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    fn reference_params() -> ModelParams {
        ModelParams {
            n_items: 20,
            n_users: 100,
            alpha: vec![0.5, 0.5],
            beta: vec![0.5, 0.5],
            affinity: vec![vec![0.9, 0.1], vec![0.2, 0.7]],
            rated_per_user: 5,
            epsilon: 1.0,
            theta: 1.0,
        }
    }

    #[test]
    fn reference_params_validate() {
        reference_params().validate().unwrap();
    }

    #[test]
    fn validate_names_first_violation() {
        let mut p = reference_params();
        p.alpha = vec![0.6, 0.6];
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("alpha sums to 1.2"), "{msg}");

        let mut p = reference_params();
        p.rated_per_user = 21;
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("w exceeds N"), "{msg}");

        let mut p = reference_params();
        p.theta = 6.0;
        assert!(p.validate().is_err());

        let mut p = reference_params();
        p.epsilon = -0.5;
        assert!(p.validate().is_err());

        let mut p = reference_params();
        p.affinity = vec![vec![0.9, 0.1]];
        assert!(p.validate().is_err());

        let mut p = reference_params();
        p.beta = vec![0.02, 0.98];
        p.n_items = 10;
        p.rated_per_user = 3;
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("rounds to zero"), "{msg}");
    }

    #[test]
    fn epsilon_zero_is_accepted() {
        let mut p = reference_params();
        p.epsilon = 0.0;
        p.validate().unwrap();
    }

    #[test]
    fn class_census_is_exact() {
        let third = 1.0 / 3.0;
        assert_eq!(class_sizes(&[third, third, third], 10), vec![3, 3, 4]);
        assert_eq!(class_sizes(&[0.5, 0.5], 4), vec![2, 2]);
        assert_eq!(class_sizes(&[0.5, 0.5], 5), vec![3, 2]);
        assert_eq!(class_sizes(&[0.3, 0.3, 0.4], 3), vec![1, 1, 1]);
        assert_eq!(class_sizes(&[1.0], 7), vec![7]);
    }

    #[test]
    fn ground_truth_matches_census_and_seed() {
        let p = reference_params();
        let t1 = sample_ground_truth(&p, 9).unwrap();
        let t2 = sample_ground_truth(&p, 9).unwrap();
        assert_eq!(t1, t2);
        let t3 = sample_ground_truth(&p, 10).unwrap();
        assert_ne!(t1, t3);

        let mut counts = vec![0usize; 2];
        for &c in &t1.item_class {
            counts[c as usize] += 1;
        }
        assert_eq!(counts, class_sizes(&p.beta, p.n_items));
        let mut ucounts = vec![0usize; 2];
        for &c in &t1.user_class {
            ucounts[c as usize] += 1;
        }
        assert_eq!(ucounts, class_sizes(&p.alpha, p.n_users));
    }

    #[test]
    fn user_records_are_sorted_exact_subsets() {
        let p = reference_params();
        let truth = sample_ground_truth(&p, 3).unwrap();
        for u in 0..50 {
            let rec = sample_user(&p, &truth, u, 3);
            assert_eq!(rec.items.len(), p.rated_per_user);
            assert_eq!(rec.ratings.len(), p.rated_per_user);
            assert!(rec.items.windows(2).all(|w| w[0] < w[1]));
            assert!(rec.items.iter().all(|&i| i < p.n_items));
            assert_eq!(rec, sample_user(&p, &truth, u, 3));
        }
        assert_ne!(
            sample_user(&p, &truth, 0, 3),
            sample_user(&p, &truth, 1, 3)
        );
    }

    #[test]
    fn degenerate_affinities_force_ratings() {
        let mut p = reference_params();
        p.alpha = vec![1.0];
        p.affinity = vec![vec![1.0, 0.0]];
        let truth = sample_ground_truth(&p, 5).unwrap();
        for u in 0..40 {
            let rec = sample_user(&p, &truth, u, 5);
            for (&it, &r) in rec.items.iter().zip(&rec.ratings) {
                assert_eq!(r, u8::from(truth.item_class[it] == 0));
            }
        }
    }

    #[test]
    fn rating_marginals_match_affinity() {
        let mut p = reference_params();
        p.n_users = 100_000;
        let truth = sample_ground_truth(&p, 11).unwrap();
        let k = p.n_user_classes();
        let mut ones = vec![vec![0u64; p.n_items]; k];
        let mut class_users = vec![0u64; k];
        for u in 0..p.n_users as u64 {
            let rec = sample_user(&p, &truth, u, 11);
            class_users[rec.class as usize] += 1;
            for (&it, &r) in rec.items.iter().zip(&rec.ratings) {
                ones[rec.class as usize][it] += u64::from(r);
            }
        }
        let rate = p.rated_per_user as f64 / p.n_items as f64;
        for kk in 0..k {
            let n = class_users[kk] as f64;
            for it in 0..p.n_items {
                let prob = rate * p.affinity[kk][truth.item_class[it] as usize];
                let sigma = (n * prob * (1.0 - prob)).sqrt();
                let delta = (ones[kk][it] as f64 - n * prob).abs();
                assert!(
                    delta <= 4.0 * sigma,
                    "class {kk} item {it}: delta {delta:.1} sigma {sigma:.1}"
                );
            }
        }
    }

    #[test]
    fn rated_subsets_are_uniform() {
        let mut p = reference_params();
        p.n_items = 10;
        p.rated_per_user = 2;
        p.n_users = 100_000;
        let truth = sample_ground_truth(&p, 13).unwrap();
        let mut counts = vec![vec![0u64; 10]; 10];
        for u in 0..p.n_users as u64 {
            let rec = sample_user(&p, &truth, u, 13);
            counts[rec.items[0]][rec.items[1]] += 1;
        }
        let prob = 1.0 / 45.0;
        let sigma = (p.n_users as f64 * prob * (1.0 - prob)).sqrt();
        for i in 0..10 {
            for j in (i + 1)..10 {
                let delta = (counts[i][j] as f64 - p.n_users as f64 * prob).abs();
                assert!(delta <= 4.0 * sigma, "pair ({i},{j}): delta {delta:.1}");
            }
        }
    }

    #[test]
    fn truth_vector_is_seeded_and_balanced() {
        assert!(deterministic_truth_vector(0, 1).is_err());
        let v1 = deterministic_truth_vector(100_000, 1).unwrap();
        assert_eq!(v1, deterministic_truth_vector(100_000, 1).unwrap());
        assert_ne!(v1, deterministic_truth_vector(100_000, 2).unwrap());
        let ones: u64 = v1.iter().map(|&b| u64::from(b)).sum();
        let sigma = (100_000.0f64 * 0.25).sqrt();
        assert!((ones as f64 - 50_000.0).abs() <= 4.0 * sigma, "ones {ones}");
    }

    #[test]
    fn dataset_round_trips_losslessly() {
        let mut p = reference_params();
        p.n_items = 12;
        p.n_users = 9;
        p.beta = vec![0.25, 0.5, 0.25];
        p.affinity = vec![vec![0.9, 0.1, 0.5], vec![0.2, 0.7, 0.4]];
        p.rated_per_user = 3;
        let ds = generate_dataset(&p, 42).unwrap();
        let text = ds.to_text(Some("generated in a unit test"));
        assert!(text.starts_with("#ldp-dataset v1 N=12 U=9 K=2 L=3 w=3 seed=42\n"));
        let back = Dataset::from_text(&text).unwrap();
        assert_eq!(ds, back);
        assert_eq!(back.to_text(None), ds.to_text(None));
    }

    #[test]
    fn dataset_rejects_malformed_input() {
        let p = reference_params();
        let ds = generate_dataset(&p, 7).unwrap();
        let good = ds.to_text(None);

        assert!(Dataset::from_text("").is_err());
        assert!(Dataset::from_text(&good.replace("#ldp-dataset v1", "#ldp-dataset v2")).is_err());
        assert!(Dataset::from_text(&good.replace("items ", "item ")).is_err());

        let mut lines: Vec<&str> = good.lines().collect();
        let swapped = lines.remove(3);
        lines.push(swapped);
        assert!(
            Dataset::from_text(&(lines.join("\n") + "\n")).is_err(),
            "out-of-order user ids must be rejected"
        );

        let bad_rating = good.replacen(":1", ":2", 1);
        if bad_rating != good {
            assert!(Dataset::from_text(&bad_rating).is_err());
        }
    }

    #[test]
    fn user_generation_is_order_independent() {
        let p = reference_params();
        let truth = sample_ground_truth(&p, 21).unwrap();
        let seq: Vec<UserRecord> = (0..p.n_users as u64)
            .map(|u| sample_user(&p, &truth, u, 21))
            .collect();
        let par: Vec<UserRecord> = (0..p.n_users as u64)
            .into_par_iter()
            .map(|u| sample_user(&p, &truth, u, 21))
            .collect();
        assert_eq!(seq, par);
    }
}
