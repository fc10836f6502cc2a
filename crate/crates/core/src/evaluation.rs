//! Train/test splitting, error metrics and binned structural summaries.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureRow;
use crate::regression::{predict, ModelCoefficients, ModelVariant};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRAIN_FRAC: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: DEFAULT_TRAIN_FRAC,
            seed: DEFAULT_SEED,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_frac > 0.0 && self.train_frac < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "train fraction {} must lie strictly between 0 and 1",
                self.train_frac
            )))
        }
    }

    pub(crate) fn parse(s: &str) -> Result<Self> {
        let mut spec = SplitSpec::default();
        for token in s.split_whitespace() {
            let bad = || Error::Data(format!("bad split token `{token}`"));
            match token.split_once('=').ok_or_else(bad)? {
                ("seed", v) => spec.seed = v.parse().map_err(|_| bad())?,
                ("train_frac", v) => spec.train_frac = v.parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            }
        }
        Ok(spec)
    }
}

/// Uniform random partition into `floor(n * train_frac)` training items and
/// the remainder. Both parts keep input order.
pub fn split<T: Clone>(rows: &[T], spec: SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    spec.validate()?;
    let n = rows.len();
    let n_train = (n as f64 * spec.train_frac).floor() as usize;
    if n < 2 || n_train == 0 || n_train == n {
        return Err(Error::Data(format!(
            "cannot split {n} rows at fraction {}",
            spec.train_frac
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    for (row, &t) in rows.iter().zip(&in_train) {
        if t {
            train.push(row.clone());
        } else {
            test.push(row.clone());
        }
    }
    Ok((train, test))
}

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `(rmse, mae)` of a residual sequence.
pub fn rmse_mae<I: IntoIterator<Item = f64>>(residuals: I) -> Result<(f64, f64)> {
    let mut sq = Neumaier::default();
    let mut abs = Neumaier::default();
    let mut n = 0usize;
    for r in residuals {
        sq.add(r * r);
        abs.add(r.abs());
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("test set"));
    }
    let n = n as f64;
    Ok(((sq.total() / n).sqrt(), abs.total() / n))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub variant: ModelVariant,
    pub rmse: f64,
    pub mae: f64,
    pub n_test: usize,
    pub split_seed: u64,
}

/// Scores `m` on `test_rows` in ln-popularity space.
pub fn score(m: &ModelCoefficients, test_rows: &[FeatureRow], split_seed: u64) -> Result<EvalReport> {
    let residuals = test_rows
        .iter()
        .map(|r| Ok(predict(m, r)? - r.ln_final))
        .collect::<Result<Vec<f64>>>()?;
    let (rmse, mae) = rmse_mae(residuals.iter().copied())?;
    // power-mean inequality, up to rounding
    debug_assert!(rmse >= mae * (1.0 - 1e-12), "rmse {rmse} < mae {mae}");
    Ok(EvalReport {
        variant: m.variant,
        rmse,
        mae,
        n_test: residuals.len(),
        split_seed,
    })
}

pub const REPORT_COLUMNS: &str = "variant\trmse\tmae\tn_test\tsplit_seed";

pub fn write_report_row<W: Write>(out: &mut W, r: &EvalReport) -> io::Result<()> {
    writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}",
        r.variant, r.rmse, r.mae, r.n_test, r.split_seed
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Density,
    Depth,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Density => "density",
            Axis::Depth => "depth",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density" => Ok(Axis::Density),
            "depth" => Ok(Axis::Depth),
            _ => Err(Error::Config(format!("unknown axis `{s}`"))),
        }
    }
}

impl Axis {
    /// The axis value of a row, if defined.
    pub fn value(self, row: &FeatureRow) -> Option<f64> {
        match self {
            Axis::Density => row.density,
            Axis::Depth => Some(row.depth as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    /// `None` for an empty bin.
    pub mean_final_pop: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinSummary {
    pub axis: Axis,
    pub bins: Vec<Bin>,
}

impl BinSummary {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,mean_final_pop,count")?;
        for b in &self.bins {
            let mean = b.mean_final_pop.map(|m| m.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", b.lo, b.hi, mean, b.count)?;
        }
        Ok(())
    }
}

/// Mean final popularity per axis bin.
///
/// Density uses `n_bins` equal-width bins over `[0, 1]` (the last one
/// closed); depth uses one bin per integer from 0 to the largest depth.
/// Rows without a defined axis value are skipped.
pub fn bin_summary(rows: &[FeatureRow], axis: Axis, n_bins: usize) -> Result<BinSummary> {
    if rows.is_empty() {
        return Err(Error::Empty("rows to bin"));
    }
    let values: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| axis.value(r).map(|v| (v, r.final_pop as f64)))
        .collect();

    let (edges, index): (Vec<(f64, f64)>, Box<dyn Fn(f64) -> usize>) = match axis {
        Axis::Density => {
            if n_bins < 2 {
                return Err(Error::Config("density binning needs at least 2 bins".into()));
            }
            let k = n_bins as f64;
            let edges = (0..n_bins).map(|i| (i as f64 / k, (i + 1) as f64 / k)).collect();
            (edges, Box::new(move |v: f64| ((v * k) as usize).min(n_bins - 1)))
        }
        Axis::Depth => {
            let max = values.iter().map(|&(v, _)| v as usize).max().unwrap_or(0);
            let edges = (0..=max).map(|d| (d as f64, (d + 1) as f64)).collect();
            (edges, Box::new(|v: f64| v as usize))
        }
    };

    let mut sums = vec![Neumaier::default(); edges.len()];
    let mut counts = vec![0usize; edges.len()];
    for &(v, p) in &values {
        let i = index(v);
        sums[i].add(p);
        counts[i] += 1;
    }
    let bins = edges
        .into_iter()
        .zip(sums.iter().zip(&counts))
        .map(|((lo, hi), (s, &count))| Bin {
            lo,
            hi,
            mean_final_pop: (count > 0).then(|| s.total() / count as f64),
            count,
        })
        .collect();
    Ok(BinSummary { axis, bins })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation of two paired samples.
pub fn spearman_xy(x: &[f64], y: &[f64]) -> Result<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "{} pairs, need at least 3",
            x.len()
        )));
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::UndefinedCorrelation("constant sample".into()))
}

/// Spearman correlation between an axis and final popularity.
pub fn spearman(rows: &[FeatureRow], axis: Axis) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| axis.value(r).map(|v| (v, r.final_pop as f64)))
        .unzip();
    spearman_xy(&x, &y)
}
