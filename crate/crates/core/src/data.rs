//! Datasets with one covariate left-censored at a detection limit.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Response, one censored covariate, uncensored covariates `u` and surrogates `z`.
///
/// `x_value[i]` is only meaningful when `x_observed[i]`; censored rows may hold
/// a placeholder or NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x_value: Vec<f64>,
    pub x_observed: Vec<bool>,
    pub u: DenseMatrix,
    pub z: DenseMatrix,
    pub delta: f64,
    /// True covariate values for every row; only simulated data carry them.
    pub truth: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset, deriving the censoring flags from `x > delta`.
    pub fn from_values(
        y: Vec<f64>,
        x: Vec<f64>,
        u: DenseMatrix,
        z: DenseMatrix,
        delta: f64,
    ) -> Result<Self> {
        let x_observed = x.iter().map(|&v| v > delta).collect();
        let d = Self {
            y,
            x_value: x,
            x_observed,
            u,
            z,
            delta,
            truth: None,
        };
        d.check_shapes()?;
        Ok(d)
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.y.len();
        if self.x_value.len() != n
            || self.x_observed.len() != n
            || self.u.rows() != n
            || self.z.rows() != n
            || self.truth.as_ref().is_some_and(|t| t.len() != n)
        {
            return Err(Error::Dimension(format!(
                "dataset columns disagree on row count (y has {n})"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_obs(&self) -> usize {
        self.x_observed.iter().filter(|&&o| o).count()
    }

    pub fn p_u(&self) -> usize {
        self.u.cols()
    }

    pub fn p_z(&self) -> usize {
        self.z.cols()
    }

    /// Number of primary coefficients: intercept, x, then u.
    pub fn p_beta(&self) -> usize {
        2 + self.p_u()
    }

    pub fn censoring_fraction(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        1.0 - self.n_obs() as f64 / self.n() as f64
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.x_observed[i]).collect()
    }

    /// `(1, z_i)`
    pub fn aux_design_row(&self, i: usize) -> Vec<f64> {
        let mut r = Vec::with_capacity(1 + self.p_z());
        r.push(1.0);
        r.extend_from_slice(self.z.row(i));
        r
    }

    /// `(1, x, u_i)` for a given covariate value.
    pub fn primary_design_row(&self, i: usize, x: f64) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.p_beta());
        r.push(1.0);
        r.push(x);
        r.extend_from_slice(self.u.row(i));
        r
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let pick = |m: &DenseMatrix| {
            let mut out = DenseMatrix::zeros(idx.len(), m.cols());
            for (r, &i) in idx.iter().enumerate() {
                for j in 0..m.cols() {
                    out[(r, j)] = m[(i, j)];
                }
            }
            out
        };
        Dataset {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            x_value: idx.iter().map(|&i| self.x_value[i]).collect(),
            x_observed: idx.iter().map(|&i| self.x_observed[i]).collect(),
            u: pick(&self.u),
            z: pick(&self.z),
            delta: self.delta,
            truth: self
                .truth
                .as_ref()
                .map(|t| idx.iter().map(|&i| t[i]).collect()),
        }
    }

    /// Rows with an observed covariate only.
    pub fn observed_subset(&self) -> Dataset {
        self.subset(&self.observed_indices())
    }

    /// Returns an error carrying every violation, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else if v.iter().all(|v| v.code == ViolationCode::NoObservedX) {
            Err(Error::NoObservedX)
        } else {
            Err(Error::InvalidDataset(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    LengthMismatch,
    CensorFlagMismatch,
    NoObservedX,
    TooFewObserved,
    NonFiniteY,
    NonFiniteU,
    NonFiniteZ,
    NonFiniteDelta,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LengthMismatch => "length-mismatch",
            Self::CensorFlagMismatch => "censor-flag-mismatch",
            Self::NoObservedX => "no-observed-x",
            Self::TooFewObserved => "too-few-observed",
            Self::NonFiniteY => "non-finite-y",
            Self::NonFiniteU => "non-finite-u",
            Self::NonFiniteZ => "non-finite-z",
            Self::NonFiniteDelta => "non-finite-delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub row: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(r) => write!(f, "{} (row {r}): {}", self.code.as_str(), self.message),
            None => write!(f, "{}: {}", self.code.as_str(), self.message),
        }
    }
}

fn violation(code: ViolationCode, row: Option<usize>, message: impl Into<String>) -> Violation {
    Violation {
        code,
        row,
        message: message.into(),
    }
}

pub fn validate(d: &Dataset) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();
    let n = d.y.len();
    if d.x_value.len() != n || d.x_observed.len() != n || d.u.rows() != n || d.z.rows() != n {
        out.push(violation(
            LengthMismatch,
            None,
            "columns disagree on the number of rows",
        ));
        return out;
    }
    if !d.delta.is_finite() {
        out.push(violation(
            NonFiniteDelta,
            None,
            "detection limit is not finite",
        ));
    }
    for i in 0..n {
        if !d.y[i].is_finite() {
            out.push(violation(NonFiniteY, Some(i), "response is not finite"));
        }
        if d.u.row(i).iter().any(|v| !v.is_finite()) {
            out.push(violation(NonFiniteU, Some(i), "covariate u is not finite"));
        }
        if d.z.row(i).iter().any(|v| !v.is_finite()) {
            out.push(violation(NonFiniteZ, Some(i), "surrogate z is not finite"));
        }
        if d.x_observed[i] && !(d.x_value[i] > d.delta && d.x_value[i].is_finite()) {
            out.push(violation(
                CensorFlagMismatch,
                Some(i),
                format!(
                    "flagged observed but x = {} is not above the limit {}",
                    d.x_value[i], d.delta
                ),
            ));
        }
    }
    let n_o = d.n_obs();
    if n_o == 0 {
        out.push(violation(NoObservedX, None, "every x is censored"));
    } else if n_o < d.p_z() + 2 {
        out.push(violation(
            TooFewObserved,
            None,
            format!(
                "{n_o} observed rows; the auxiliary model needs at least {}",
                d.p_z() + 2
            ),
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Logit,
}

impl Link {
    #[inline]
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Derivative of the inverse link.
    #[inline]
    pub fn inverse_deriv(self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logit => {
                let p = self.inverse(eta);
                p * (1.0 - p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingVariance {
    Constant,
    Bernoulli,
}

impl WorkingVariance {
    pub fn value(self, mean: f64) -> f64 {
        match self {
            WorkingVariance::Constant => 1.0,
            WorkingVariance::Bernoulli => (mean * (1.0 - mean)).max(1e-12),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxKind {
    ParametricNormal,
    SemiparametricAft,
}

/// Monotone decreasing map `x = T(t)` between the censored covariate and the
/// right-censored scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// `T(t) = -t`
    Negate,
    /// `T(t) = exp(-t)`
    NegExp,
}

impl Transform {
    #[inline]
    pub fn forward(self, t: f64) -> f64 {
        match self {
            Transform::Negate => -t,
            Transform::NegExp => (-t).exp(),
        }
    }

    #[inline]
    pub fn inverse(self, x: f64) -> Result<f64> {
        match self {
            Transform::Negate => Ok(-x),
            Transform::NegExp if x > 0.0 => Ok(-x.ln()),
            Transform::NegExp => Err(Error::Domain(format!(
                "exp(-t) transform needs positive covariate values, got {x}"
            ))),
        }
    }
}

/// Scale on which the parametric auxiliary model is normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxScale {
    /// `x` itself is normal given the surrogates.
    #[default]
    Linear,
    /// `ln x` is normal given the surrogates.
    Log,
}

impl AuxScale {
    /// Working variable `w` from a covariate value.
    pub fn to_working(self, x: f64) -> Result<f64> {
        match self {
            AuxScale::Linear => Ok(x),
            AuxScale::Log if x > 0.0 => Ok(x.ln()),
            AuxScale::Log => Err(Error::Domain(format!(
                "log-scale auxiliary model needs positive covariate values and limit, got {x}"
            ))),
        }
    }

    #[inline]
    pub fn to_covariate(self, w: f64) -> f64 {
        match self {
            AuxScale::Linear => w,
            AuxScale::Log => w.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    KnownEta,
    Theorem1,
    Sscf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub link: Link,
    pub working_variance: WorkingVariance,
    pub auxiliary: AuxKind,
    #[serde(default)]
    pub aux_scale: AuxScale,
    pub transform: Option<Transform>,
    pub tau_override: Option<f64>,
    pub normalize_htilde: bool,
    pub variance: VarianceMethod,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            link: Link::Identity,
            working_variance: WorkingVariance::Constant,
            auxiliary: AuxKind::ParametricNormal,
            aux_scale: AuxScale::Linear,
            transform: None,
            tau_override: None,
            normalize_htilde: true,
            variance: VarianceMethod::Theorem1,
            seed: 0,
        }
    }
}

/// Cross-fitting always uses two folds.
pub const SSCF_FOLDS: usize = 2;

impl FitConfig {
    /// Semi-semi defaults: semiparametric auxiliary with cross-fitted variance.
    pub fn semiparametric(transform: Transform) -> Self {
        Self {
            auxiliary: AuxKind::SemiparametricAft,
            transform: Some(transform),
            variance: VarianceMethod::Sscf,
            ..Self::default()
        }
    }

    pub fn check(&self, d: &Dataset) -> Result<()> {
        if self.link == Link::Logit && d.y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Config(
                "logit link requires a binary 0/1 response".into(),
            ));
        }
        if self.auxiliary == AuxKind::SemiparametricAft && self.transform.is_none() {
            return Err(Error::Config(
                "semiparametric auxiliary model requires a transform".into(),
            ));
        }
        if self.auxiliary == AuxKind::SemiparametricAft
            && matches!(self.variance, VarianceMethod::Theorem1)
        {
            return Err(Error::Config(
                "the nuisance-corrected sandwich needs a parametric auxiliary model; use sscf"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Where the detection limit comes from in a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaSource {
    Value(f64),
    /// A column that must hold the same value on every row.
    Column(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub y: String,
    pub x: String,
    pub delta: DeltaSource,
    pub u: Vec<String>,
    pub z: Vec<String>,
    /// Optional explicit 0/1 observed flag; otherwise derived from `x > delta`.
    pub observed: Option<String>,
}

fn is_missing_token(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "na" | "NaN" | "nan" | "." | "null")
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

pub fn load_csv(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let y_idx = col(&spec.y)?;
    let x_idx = col(&spec.x)?;
    let u_idx = spec.u.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;
    let z_idx = spec.z.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;
    let obs_idx = spec.observed.as_deref().map(col).transpose()?;
    let delta_idx = match &spec.delta {
        DeltaSource::Column(c) => Some(col(c)?),
        DeltaSource::Value(_) => None,
    };

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut flags = Vec::new();
    let mut u = Vec::new();
    let mut z = Vec::new();
    let mut delta = match spec.delta {
        DeltaSource::Value(v) => Some(v),
        DeltaSource::Column(_) => None,
    };

    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |idx: usize| rec.get(idx).unwrap_or("");
        let number = |idx: usize, allow_missing: bool| -> Result<f64> {
            let s = cell(idx);
            if is_missing_token(s) {
                if allow_missing {
                    return Ok(f64::NAN);
                }
                return Err(Error::MissingValue {
                    row,
                    column: headers[idx].to_string(),
                });
            }
            s.trim().parse::<f64>().map_err(|_| Error::ParseCell {
                row,
                column: headers[idx].to_string(),
                value: s.to_string(),
            })
        };
        y.push(number(y_idx, false)?);
        x.push(number(x_idx, true)?);
        for &j in &u_idx {
            u.push(number(j, false)?);
        }
        for &j in &z_idx {
            z.push(number(j, false)?);
        }
        if let Some(j) = obs_idx {
            flags.push(number(j, false)? != 0.0);
        }
        if let Some(j) = delta_idx {
            let v = number(j, false)?;
            match delta {
                None => delta = Some(v),
                Some(d) if d != v => {
                    return Err(Error::Config(format!(
                        "row {row}: detection limit {v} differs from {d}; a single limit per dataset is required"
                    )))
                }
                Some(_) => {}
            }
        }
    }
    let n = y.len();
    let delta = delta.ok_or_else(|| Error::Config("empty file: no detection limit".into()))?;
    let x_observed = if obs_idx.is_some() {
        flags
    } else {
        x.iter().map(|&v| v > delta).collect()
    };
    let d = Dataset {
        y,
        x_value: x,
        x_observed,
        u: DenseMatrix::from_row_major(n, u_idx.len(), u)?,
        z: DenseMatrix::from_row_major(n, z_idx.len(), z)?,
        delta,
        truth: None,
    };
    d.check_shapes()?;
    Ok(d)
}

/// Writes the columns named in `spec`; censored rows get `NA` for x.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![spec.y.clone(), spec.x.clone()];
    if let DeltaSource::Column(c) = &spec.delta {
        header.push(c.clone());
    }
    header.extend(spec.u.iter().cloned());
    header.extend(spec.z.iter().cloned());
    if let Some(o) = &spec.observed {
        header.push(o.clone());
    }
    w.write_record(&header)?;
    for i in 0..d.n() {
        let mut rec = vec![format!("{}", d.y[i])];
        rec.push(if d.x_value[i].is_nan() {
            "NA".to_string()
        } else {
            format!("{}", d.x_value[i])
        });
        if let DeltaSource::Column(_) = spec.delta {
            rec.push(format!("{}", d.delta));
        }
        rec.extend(d.u.row(i).iter().map(|v| format!("{v}")));
        rec.extend(d.z.row(i).iter().map(|v| format!("{v}")));
        if spec.observed.is_some() {
            rec.push(if d.x_observed[i] { "1" } else { "0" }.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Two disjoint folds and the original row indices of each.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub folds: [Dataset; 2],
    pub index: [Vec<usize>; 2],
}

/// Random partition into folds of sizes `⌊n/2⌋` and `⌈n/2⌉`, deterministic in `seed`.
pub fn split_two_folds(d: &Dataset, seed: u64) -> Result<FoldSplit> {
    let n = d.n();
    if n < 4 {
        return Err(Error::Config(format!(
            "cross-fitting needs at least 4 rows, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let (a, b) = perm.split_at(n / 2);
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    for (k, idx) in [&a, &b].into_iter().enumerate() {
        if !idx.iter().any(|&i| d.x_observed[i]) {
            return Err(Error::DegenerateSplit { fold: k + 1 });
        }
    }
    Ok(FoldSplit {
        folds: [d.subset(&a), d.subset(&b)],
        index: [a, b],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(x: Vec<f64>, delta: f64) -> Dataset {
        let n = x.len();
        let z = DenseMatrix::from_row_major(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        Dataset::from_values(vec![1.0; n], x, DenseMatrix::zeros(n, 0), z, delta).unwrap()
    }

    #[test]
    fn flags_follow_strict_inequality() {
        let d = tiny(vec![0.2, 0.7, 0.5, 1.1, 0.3], 0.5);
        assert_eq!(d.x_observed, vec![false, true, false, true, false]);
        assert_eq!(d.n_obs(), 2);
        assert_eq!(d.censoring_fraction(), 1.0 - 2.0 / 5.0);
    }

    #[test]
    fn well_formed_has_no_violations() {
        let d = tiny(vec![0.2, 0.7, 0.9, 1.1, 0.3], 0.5);
        assert!(validate(&d).is_empty());
    }

    #[test]
    fn flag_mismatch_detected() {
        let mut d = tiny(vec![0.2, 0.7, 0.9, 1.1, 0.3], 0.5);
        d.x_observed[0] = true;
        let v = validate(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::CensorFlagMismatch);
        assert_eq!(v[0].row, Some(0));
    }

    #[test]
    fn all_censored_detected() {
        let d = tiny(vec![0.1, 0.2, 0.3], 0.5);
        let v = validate(&d);
        assert!(v.iter().any(|v| v.code == ViolationCode::NoObservedX));
        assert!(matches!(d.ensure_valid(), Err(Error::NoObservedX)));
    }

    #[test]
    fn split_is_balanced_partition() {
        let d = tiny((0..10).map(|i| i as f64).collect(), 0.5);
        let s = split_two_folds(&d, 7).unwrap();
        assert_eq!(s.index[0].len(), 5);
        assert_eq!(s.index[1].len(), 5);
        let mut all: Vec<usize> = s.index.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let again = split_two_folds(&d, 7).unwrap();
        assert_eq!(s.index, again.index);
    }

    #[test]
    fn split_with_single_observed_row_degenerates() {
        // exactly one observed row: the fold without it has no observed x
        let d = tiny(vec![0.0, 0.0, 2.0, 0.0], 0.5);
        for seed in 0..20 {
            assert!(matches!(
                split_two_folds(&d, seed),
                Err(Error::DegenerateSplit { .. })
            ));
        }
    }

    #[test]
    fn transforms_invert() {
        for t in [Transform::Negate, Transform::NegExp] {
            for x in [0.3, 1.0, 4.5] {
                let back = t.forward(t.inverse(x).unwrap());
                assert!((back - x).abs() < 1e-14);
            }
        }
        assert!(Transform::NegExp.inverse(-1.0).is_err());
    }

    #[test]
    fn logit_inverse_is_stable() {
        assert_eq!(Link::Logit.inverse(800.0), 1.0);
        assert_eq!(Link::Logit.inverse(-800.0), 0.0);
        assert!((Link::Logit.inverse(0.0) - 0.5).abs() < 1e-15);
    }
}
