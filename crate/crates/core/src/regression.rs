//! Log-linear popularity models fitted by ordinary least squares.
//!
//! All three variants regress `ln p(t_r)` on `ln p(t_i)` plus an intercept:
//!
//! | variant        | predictors                        |
//! |----------------|-----------------------------------|
//! | `baseline`     | `ln p(t_i)`, 1                    |
//! | `with_density` | `ln p(t_i)`, `ln rho(t_i)`, 1     |
//! | `with_depth`   | `ln p(t_i)`, `d(t_i)`, 1          |
//!
//! Depth enters linearly, density in log form. Fits go through the normal
//! equations, which are at most 3x3 here.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::SplitSpec;
use crate::features::{FeatureConfig, FeatureRow};

pub const MAX_ARITY: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Baseline,
    WithDensity,
    WithDepth,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [
        ModelVariant::Baseline,
        ModelVariant::WithDensity,
        ModelVariant::WithDepth,
    ];

    pub fn arity(self) -> usize {
        self.columns().len()
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ModelVariant::Baseline => &["ln_early", "intercept"],
            ModelVariant::WithDensity => &["ln_early", "ln_density", "intercept"],
            ModelVariant::WithDepth => &["ln_early", "depth", "intercept"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Baseline => "baseline",
            ModelVariant::WithDensity => "with_density",
            ModelVariant::WithDepth => "with_depth",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ModelVariant::Baseline),
            "with_density" | "density" => Ok(ModelVariant::WithDensity),
            "with_depth" | "depth" => Ok(ModelVariant::WithDepth),
            _ => Err(Error::Config(format!("unknown model variant `{s}`"))),
        }
    }
}

/// Predictor vector of one row (padded to [`MAX_ARITY`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignRow {
    x: [f64; MAX_ARITY],
    len: usize,
    pub target: f64,
}

impl DesignRow {
    pub fn predictors(&self) -> &[f64] {
        &self.x[..self.len]
    }
}

pub fn design_row(variant: ModelVariant, row: &FeatureRow) -> Result<DesignRow> {
    let structural = match variant {
        ModelVariant::Baseline => None,
        ModelVariant::WithDensity => Some(row.ln_density.ok_or(Error::UndefinedDensity)?),
        ModelVariant::WithDepth => Some(row.depth as f64),
    };
    let (x, len) = match structural {
        None => ([row.ln_early, 1.0, 0.0], 2),
        Some(s) => ([row.ln_early, s, 1.0], 3),
    };
    let d = DesignRow {
        x,
        len,
        target: row.ln_final,
    };
    if d.predictors().iter().chain([&d.target]).all(|v| v.is_finite()) {
        Ok(d)
    } else {
        Err(Error::NonFinite(format!(
            "tweet {}: {variant} design row {:?} -> {}",
            row.tweet_id,
            d.predictors(),
            d.target
        )))
    }
}

/// Whether `row` can enter `variant` (included and, for density, defined).
pub fn usable(variant: ModelVariant, row: &FeatureRow) -> bool {
    row.is_included() && (variant != ModelVariant::WithDensity || row.ln_density.is_some())
}

/// Running `X^T X` and `X^T y` sums.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    k: usize,
    n: usize,
    xtx: [[f64; MAX_ARITY]; MAX_ARITY],
    xty: [f64; MAX_ARITY],
    min: [f64; MAX_ARITY],
    max: [f64; MAX_ARITY],
}

impl NormalEquations {
    pub fn new(k: usize) -> Self {
        assert!((1..=MAX_ARITY).contains(&k));
        NormalEquations {
            k,
            n: 0,
            xtx: [[0.0; MAX_ARITY]; MAX_ARITY],
            xty: [0.0; MAX_ARITY],
            min: [f64::INFINITY; MAX_ARITY],
            max: [f64::NEG_INFINITY; MAX_ARITY],
        }
    }

    pub fn add(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.k);
        for i in 0..self.k {
            for j in i..self.k {
                self.xtx[i][j] += x[i] * x[j];
            }
            self.xty[i] += x[i] * y;
            self.min[i] = self.min[i].min(x[i]);
            self.max[i] = self.max[i].max(x[i]);
        }
        self.n += 1;
    }

    /// Combines two partial accumulations.
    pub fn merge(mut self, other: &NormalEquations) -> Self {
        assert_eq!(self.k, other.k);
        for i in 0..self.k {
            for j in i..self.k {
                self.xtx[i][j] += other.xtx[i][j];
            }
            self.xty[i] += other.xty[i];
            self.min[i] = self.min[i].min(other.min[i]);
            self.max[i] = self.max[i].max(other.max[i]);
        }
        self.n += other.n;
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn matrix(&self) -> [[f64; MAX_ARITY]; MAX_ARITY] {
        let mut a = self.xtx;
        for i in 0..self.k {
            for j in 0..i {
                a[i][j] = a[j][i];
            }
        }
        a
    }

    /// Solves for the coefficient vector. The last column is taken to be
    /// the intercept; any other column that is constant is reported as
    /// degenerate by name.
    pub fn solve(&self, columns: &[&'static str]) -> Result<Vec<f64>> {
        let k = self.k;
        assert_eq!(columns.len(), k);
        if self.n < k {
            return Err(Error::Data(format!(
                "{} rows cannot determine {k} coefficients",
                self.n
            )));
        }
        for j in 0..k.saturating_sub(1) {
            if self.min[j] == self.max[j] {
                return Err(Error::SingularFit { column: columns[j] });
            }
        }

        let a = self.matrix();
        let b = self.xty;
        let mut beta = gauss_solve(k, a, b).map_err(|j| Error::SingularFit { column: columns[j] })?;

        // one round of iterative refinement
        let mut r = [0.0; MAX_ARITY];
        for i in 0..k {
            r[i] = b[i] - (0..k).map(|j| a[i][j] * beta[j]).sum::<f64>();
        }
        if let Ok(delta) = gauss_solve(k, a, r) {
            for i in 0..k {
                beta[i] += delta[i];
            }
        }

        let beta = beta[..k].to_vec();
        if beta.iter().all(|c| c.is_finite()) {
            Ok(beta)
        } else {
            Err(Error::NonFinite(format!("fitted coefficients {beta:?}")))
        }
    }
}

/// Gaussian elimination with partial pivoting. On failure returns the
/// column whose pivot vanished.
fn gauss_solve(
    k: usize,
    mut a: [[f64; MAX_ARITY]; MAX_ARITY],
    mut b: [f64; MAX_ARITY],
) -> std::result::Result<[f64; MAX_ARITY], usize> {
    let scale = (0..k).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    let tol = scale * 1e-13;
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if !(a[pivot][col].abs() > tol) {
            return Err(col);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            for c in col..k {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; MAX_ARITY];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCoefficients {
    pub variant: ModelVariant,
    /// Ordered as [`ModelVariant::columns`].
    pub coeffs: Vec<f64>,
    pub n_train: usize,
    /// Feature configuration the model was trained under.
    pub features: Option<FeatureConfig>,
    pub split: Option<SplitSpec>,
}

impl ModelCoefficients {
    pub fn new(variant: ModelVariant, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != variant.arity() {
            return Err(Error::Data(format!(
                "{variant} takes {} coefficients, got {}",
                variant.arity(),
                coeffs.len()
            )));
        }
        if !coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite(format!("coefficients {coeffs:?}")));
        }
        Ok(ModelCoefficients {
            variant,
            coeffs,
            n_train: 0,
            features: None,
            split: None,
        })
    }

    pub fn with_features(mut self, cfg: FeatureConfig) -> Self {
        self.features = Some(cfg);
        self
    }

    pub fn with_split(mut self, split: SplitSpec) -> Self {
        self.split = Some(split);
        self
    }

    /// Refuses rows produced under a different feature configuration.
    pub fn check_features(&self, cfg: &FeatureConfig) -> Result<()> {
        match &self.features {
            Some(mine) if mine != cfg => Err(Error::ConfigMismatch(format!(
                "{} model was fitted on features [{}] but given [{}]",
                self.variant,
                mine.fingerprint(),
                cfg.fingerprint()
            ))),
            _ => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        let coeffs: Vec<String> = self.coeffs.iter().map(f64::to_string).collect();
        let mut s = format!(
            "{COEFF_MAGIC}\nvariant\t{}\ncoeffs\t{}\nn_train\t{}\n",
            self.variant,
            coeffs.join("\t"),
            self.n_train
        );
        if let Some(f) = &self.features {
            s.push_str(&format!("features\t{}\n", f.fingerprint()));
        }
        if let Some(sp) = &self.split {
            s.push_str(&format!("split\tseed={} train_frac={}\n", sp.seed, sp.train_frac));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(COEFF_MAGIC) {
            return Err(Error::Data("not a coefficient file".into()));
        }
        let mut variant = None;
        let mut coeffs = None;
        let mut n_train = None;
        let mut features = None;
        let mut split = None;
        for line in lines.filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::Data(format!("bad coefficient line `{line}`")))?;
            let bad = || Error::Data(format!("bad value for `{key}`: `{value}`"));
            match key {
                "variant" => variant = Some(value.parse::<ModelVariant>()?),
                "coeffs" => {
                    coeffs = Some(
                        value
                            .split('\t')
                            .map(|c| c.parse::<f64>().map_err(|_| bad()))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "n_train" => n_train = Some(value.parse::<usize>().map_err(|_| bad())?),
                "features" => features = Some(FeatureConfig::parse_fingerprint(value)?),
                "split" => split = Some(SplitSpec::parse(value)?),
                _ => return Err(Error::Data(format!("unknown coefficient key `{key}`"))),
            }
        }
        let missing = |k: &str| Error::Data(format!("coefficient file lacks `{k}`"));
        let mut m = ModelCoefficients::new(
            variant.ok_or_else(|| missing("variant"))?,
            coeffs.ok_or_else(|| missing("coeffs"))?,
        )?;
        m.n_train = n_train.ok_or_else(|| missing("n_train"))?;
        m.features = features;
        m.split = split;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

const COEFF_MAGIC: &str = "# cascadepop-coefficients";

/// Least-squares fit of `variant` over `rows`.
pub fn fit_ols(variant: ModelVariant, rows: &[FeatureRow]) -> Result<ModelCoefficients> {
    let mut ne = NormalEquations::new(variant.arity());
    for row in rows {
        let d = design_row(variant, row)?;
        ne.add(d.predictors(), d.target);
    }
    let coeffs = ne.solve(variant.columns())?;
    let mut m = ModelCoefficients::new(variant, coeffs)?;
    m.n_train = ne.len();
    Ok(m)
}

/// Predicted `ln p(t_r)`.
pub fn predict(m: &ModelCoefficients, row: &FeatureRow) -> Result<f64> {
    let d = design_row(m.variant, row)?;
    Ok(d.predictors()
        .iter()
        .zip(&m.coeffs)
        .map(|(x, c)| x * c)
        .sum())
}

/// Predicted `ln p(t_r)`, never below the observed `ln p(t_i)`.
pub fn predict_clamped(m: &ModelCoefficients, row: &FeatureRow) -> Result<f64> {
    Ok(predict(m, row)?.max(row.ln_early))
}

/// Predicted final popularity `p(t_r)`.
pub fn predict_popularity(m: &ModelCoefficients, row: &FeatureRow) -> Result<f64> {
    Ok(predict(m, row)?.exp())
}
