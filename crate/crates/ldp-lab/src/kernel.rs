//! Finite release channels over user data.
//!
//! A user's private datum is a `w`-subset of `[N]` together with one rating
//! bit per chosen item. A [`ChannelKernel`] tabulates, for every such datum,
//! the distribution over a finite output alphabet. The exact verifiers in
//! [`crate::privacy`] and [`crate::bounds`] all operate on this table, so a
//! mechanism is checked by materializing its kernel rather than by sampling.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel: {0}")]
    Invalid(String),
    #[error("kernel csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("kernel has {0} inputs, enumeration would need {1}")]
    NotCanonical(usize, usize),
}

/// One private datum: rated items (0-based, strictly ascending) and their
/// rating bits, aligned by position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UserDatum {
    pub items: Vec<usize>,
    pub ratings: Vec<u8>,
}

impl UserDatum {
    pub fn new(items: Vec<usize>, ratings: Vec<u8>) -> Self {
        UserDatum { items, ratings }
    }

    /// Text form used in CSV serialization: 1-indexed items joined by `-`,
    /// then `|`, then the rating bits in item order. Example: `1-3|01`.
    pub fn label(&self) -> String {
        let mut s = String::new();
        for (j, &it) in self.items.iter().enumerate() {
            if j > 0 {
                s.push('-');
            }
            let _ = write!(s, "{}", it + 1);
        }
        s.push('|');
        for &r in &self.ratings {
            s.push(if r == 1 { '1' } else { '0' });
        }
        s
    }

    pub fn parse_label(label: &str) -> Result<Self, KernelError> {
        let (items_s, bits_s) = label.split_once('|').ok_or_else(|| {
            KernelError::Invalid(format!("datum label {label} has no | separator"))
        })?;
        let mut items = Vec::new();
        for t in items_s.split('-') {
            let it: usize = t
                .parse()
                .map_err(|_| KernelError::Invalid(format!("bad item {t} in label {label}")))?;
            if it == 0 {
                return Err(KernelError::Invalid(format!("item 0 in label {label}")));
            }
            items.push(it - 1);
        }
        let ratings: Vec<u8> = bits_s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(KernelError::Invalid(format!("bad bit {c} in label {label}"))),
            })
            .collect::<Result<_, _>>()?;
        Ok(UserDatum { items, ratings })
    }

    /// Rating of `item` if this datum rated it.
    pub fn rating_of(&self, item: usize) -> Option<u8> {
        self.items
            .binary_search(&item)
            .ok()
            .map(|pos| self.ratings[pos])
    }
}

/// All `C(n, w) * 2^w` data in canonical order: `w`-subsets of `[n]` in
/// lexicographic order, and for each subset all rating words `z` in `0..2^w`
/// with bit `j` of `z` giving the rating of the subset's `j`-th item.
pub fn enumerate_data(n: usize, w: usize) -> Vec<UserDatum> {
    assert!(w >= 1 && w <= n, "need 1 <= w <= n");
    let mut out = Vec::new();
    let mut combo: Vec<usize> = (0..w).collect();
    loop {
        for z in 0..(1usize << w) {
            let ratings = (0..w).map(|j| ((z >> j) & 1) as u8).collect();
            out.push(UserDatum::new(combo.clone(), ratings));
        }
        let mut j = w;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            if combo[j] != j + n - w {
                break;
            }
        }
        combo[j] += 1;
        for i in (j + 1)..w {
            combo[i] = combo[i - 1] + 1;
        }
    }
}

/// Number of `w`-subsets of `[n]`, as usize. Callers keep `n`, `w` small.
pub fn subset_count(n: usize, w: usize) -> usize {
    let mut c = 1usize;
    for i in 0..w {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// A release mechanism tabulated as a row-stochastic matrix: `rows[x][s]` is
/// the probability that datum `inputs[x]` releases output `outputs[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelKernel {
    pub n_items: usize,
    pub w: usize,
    pub inputs: Vec<UserDatum>,
    pub outputs: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub const ROW_SUM_TOL: f64 = 1e-12;

impl ChannelKernel {
    pub fn new(
        n_items: usize,
        w: usize,
        inputs: Vec<UserDatum>,
        outputs: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, KernelError> {
        let k = ChannelKernel {
            n_items,
            w,
            inputs,
            outputs,
            rows,
        };
        k.validate()?;
        Ok(k)
    }

    /// Tabulates `release(datum)` over the full canonical input enumeration.
    pub fn from_release(
        n_items: usize,
        w: usize,
        outputs: Vec<String>,
        mut release: impl FnMut(&UserDatum) -> Vec<f64>,
    ) -> Result<Self, KernelError> {
        let inputs = enumerate_data(n_items, w);
        let rows = inputs.iter().map(|d| release(d)).collect();
        Self::new(n_items, w, inputs, outputs, rows)
    }

    /// The deterministic channel that reveals the datum itself.
    pub fn identity(n_items: usize, w: usize) -> Self {
        let inputs = enumerate_data(n_items, w);
        let outputs: Vec<String> = inputs.iter().map(|d| d.label()).collect();
        let rows = (0..inputs.len())
            .map(|x| {
                let mut row = vec![0.0; inputs.len()];
                row[x] = 1.0;
                row
            })
            .collect();
        ChannelKernel {
            n_items,
            w,
            inputs,
            outputs,
            rows,
        }
    }

    /// The channel that ignores its input and releases `dist`.
    pub fn constant(n_items: usize, w: usize, dist: Vec<f64>) -> Result<Self, KernelError> {
        let outputs = (0..dist.len()).map(|s| s.to_string()).collect();
        Self::from_release(n_items, w, outputs, |_| dist.clone())
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let err = |msg: String| Err(KernelError::Invalid(msg));
        if self.inputs.is_empty() {
            return err("no inputs".into());
        }
        if self.outputs.is_empty() {
            return err("no outputs".into());
        }
        if self.rows.len() != self.inputs.len() {
            return err(format!(
                "{} rows for {} inputs",
                self.rows.len(),
                self.inputs.len()
            ));
        }
        for (x, d) in self.inputs.iter().enumerate() {
            if d.items.len() != self.w || d.ratings.len() != self.w {
                return err(format!("input {x} does not have {} items", self.w));
            }
            if !d.items.windows(2).all(|p| p[0] < p[1]) {
                return err(format!("input {x} items not strictly ascending"));
            }
            if d.items.iter().any(|&i| i >= self.n_items) {
                return err(format!("input {x} item out of range"));
            }
            if d.ratings.iter().any(|&r| r > 1) {
                return err(format!("input {x} rating is not a bit"));
            }
        }
        for (x, row) in self.rows.iter().enumerate() {
            if row.len() != self.outputs.len() {
                return err(format!("row {x} has {} entries", row.len()));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return err(format!("row {x} has a negative or non-finite entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return err(format!("row {x} sums to {sum}"));
            }
        }
        Ok(())
    }

    /// True when `inputs` is exactly the canonical enumeration, which the
    /// exact information oracles require.
    pub fn is_canonical(&self) -> bool {
        let expect = subset_count(self.n_items, self.w) << self.w;
        self.inputs.len() == expect && self.inputs == enumerate_data(self.n_items, self.w)
    }

    /// Row index of (`combo_rank`, rating word `z`) in a canonical kernel.
    pub fn canonical_index(&self, combo_rank: usize, z: usize) -> usize {
        (combo_rank << self.w) | z
    }

    /// Applies a deterministic post-processing map on outputs: output `s` is
    /// relabeled to bucket `map[s]` and probabilities within a bucket sum.
    pub fn merge_outputs(&self, map: &[usize], n_buckets: usize) -> Result<Self, KernelError> {
        if map.len() != self.outputs.len() {
            return Err(KernelError::Invalid(format!(
                "merge map has {} entries for {} outputs",
                map.len(),
                self.outputs.len()
            )));
        }
        if map.iter().any(|&b| b >= n_buckets) {
            return Err(KernelError::Invalid("merge bucket out of range".into()));
        }
        let outputs = (0..n_buckets).map(|b| b.to_string()).collect();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut merged = vec![0.0; n_buckets];
                for (s, &p) in row.iter().enumerate() {
                    merged[map[s]] += p;
                }
                merged
            })
            .collect();
        Self::new(self.n_items, self.w, self.inputs.clone(), outputs, rows)
    }

    /// CSV form: header `input,<output labels>`, one row per input labeled
    /// by [`UserDatum::label`]. Probabilities use the shortest exact decimal
    /// representation, so parsing recovers the same bits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("input");
        for label in &self.outputs {
            debug_assert!(!label.contains(','), "output label {label} contains a comma");
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (d, row) in self.inputs.iter().zip(&self.rows) {
            out.push_str(&d.label());
            for p in row {
                let _ = write!(out, ",{p}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`ChannelKernel::to_csv`] output. The item universe size is
    /// taken as the largest item mentioned, which is exact for kernels over
    /// the full canonical enumeration.
    pub fn from_csv(text: &str) -> Result<Self, KernelError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(KernelError::Csv {
            line: 1,
            msg: "empty input".into(),
        })?;
        let mut cols = header.split(',');
        if cols.next() != Some("input") {
            return Err(KernelError::Csv {
                line: 1,
                msg: "header must start with 'input'".into(),
            });
        }
        let outputs: Vec<String> = cols.map(str::to_string).collect();
        if outputs.is_empty() {
            return Err(KernelError::Csv {
                line: 1,
                msg: "no output columns".into(),
            });
        }
        let mut inputs = Vec::new();
        let mut rows = Vec::new();
        let mut n_items = 0usize;
        let mut w = None;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let mut fields = line.split(',');
            let label = fields.next().unwrap();
            let datum = UserDatum::parse_label(label).map_err(|e| KernelError::Csv {
                line: lineno,
                msg: e.to_string(),
            })?;
            match w {
                None => w = Some(datum.items.len()),
                Some(w) if w != datum.items.len() => {
                    return Err(KernelError::Csv {
                        line: lineno,
                        msg: format!("expected {w} items per datum"),
                    })
                }
                _ => {}
            }
            n_items = n_items.max(datum.items.iter().copied().max().unwrap_or(0) + 1);
            let row: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| KernelError::Csv {
                        line: lineno,
                        msg: format!("bad probability {f}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if row.len() != outputs.len() {
                return Err(KernelError::Csv {
                    line: lineno,
                    msg: format!("{} probabilities for {} outputs", row.len(), outputs.len()),
                });
            }
            inputs.push(datum);
            rows.push(row);
        }
        let w = w.ok_or(KernelError::Csv {
            line: 1,
            msg: "no data rows".into(),
        })?;
        Self::new(n_items, w, inputs, outputs, rows)
    }
}
