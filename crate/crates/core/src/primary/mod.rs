//! Primary regression: conditional mean, estimating equations, variances and
//! Wald tests.

pub mod gee;
pub mod mean;
pub mod variance;
pub mod wald;

use serde::{Deserialize, Serialize};

pub use gee::{estimating_function, solve_gee, GeeSolution, GeeSpec};
pub use mean::{
    conditional_mean, evaluate_row, mean_jacobian_beta, mean_jacobian_eta, AuxRef, MeanModel,
    RowMean,
};
pub use variance::{
    variance_known_eta, variance_sscf, variance_theorem1, NuisanceScaling, SscfVariance,
};
pub use wald::{wald_coefficient, wald_test, WaldResult};

use crate::auxiliary::{fit_auxiliary, AuxiliaryFit};
use crate::data::{Dataset, FitConfig, VarianceMethod};
use crate::error::{Error, Result};
use crate::numerics::{chi_square_sf, DenseMatrix, RootSolveOptions};

use variance::spec_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryFit {
    pub names: Vec<String>,
    pub beta_hat: Vec<f64>,
    /// Asymptotic variance of `√n(β̂ - β)`.
    pub sigma_beta: DenseMatrix,
    pub std_errors: Vec<f64>,
    /// Two-sided p-values for `β_j = 0`.
    pub p_values: Vec<f64>,
    pub variance_method: VarianceMethod,
    pub n: usize,
    pub n_obs: usize,
    pub p_hat2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_max: f64,
    /// Censored rows whose semiparametric window was empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub window_fallback_rows: Vec<usize>,
    /// Per-fold estimates from cross-fitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_betas: Option<[Vec<f64>; 2]>,
}

/// Default coefficient labels: `intercept`, `x`, `u1`, `u2`, ...
pub fn coefficient_names(p_u: usize) -> Vec<String> {
    let mut v = vec!["intercept".to_string(), "x".to_string()];
    v.extend((1..=p_u).map(|k| format!("u{k}")));
    v
}

impl PrimaryFit {
    fn assemble(
        d: &Dataset,
        sol: GeeSolution,
        sigma_beta: DenseMatrix,
        method: VarianceMethod,
        tol: f64,
    ) -> Self {
        let n = d.n();
        let std_errors: Vec<f64> = sigma_beta
            .diag()
            .iter()
            .map(|v| (v.max(0.0) / n as f64).sqrt())
            .collect();
        let p_values = sol
            .beta
            .iter()
            .zip(&std_errors)
            .map(|(b, se)| chi_square_sf((b / se).powi(2), 1))
            .collect();
        Self {
            names: coefficient_names(d.p_u()),
            beta_hat: sol.beta,
            sigma_beta,
            std_errors,
            p_values,
            variance_method: method,
            n,
            n_obs: d.n_obs(),
            p_hat2: d.n_obs() as f64 / n as f64,
            iterations: sol.iterations,
            converged: sol.residual_max <= tol,
            residual_max: sol.residual_max,
            window_fallback_rows: sol.window_fallback_rows,
            fold_betas: None,
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.beta_hat.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} coefficients",
                names.len(),
                self.beta_hat.len()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }

    /// Coefficient table with four significant digits.
    pub fn render_table(&self) -> String {
        let header = ["term", "estimate", "std_error", "z", "p_value"];
        let mut rows: Vec<[String; 5]> = Vec::with_capacity(self.beta_hat.len());
        for j in 0..self.beta_hat.len() {
            let b = self.beta_hat[j];
            let se = self.std_errors[j];
            rows.push([
                self.names[j].clone(),
                sig4(b),
                sig4(se),
                sig4(b / se),
                sig4(self.p_values[j]),
            ]);
        }
        let mut width = header.map(str::len);
        for r in &rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |cells: [&str; 5], out: &mut String| {
            out.push_str(&format!("{:<w$}", cells[0], w = width[0]));
            for k in 1..5 {
                out.push_str(&format!("  {:>w$}", cells[k], w = width[k]));
            }
            out.push('\n');
        };
        line(header, &mut out);
        for r in &rows {
            line([&r[0], &r[1], &r[2], &r[3], &r[4]], &mut out);
        }
        let method = match self.variance_method {
            VarianceMethod::KnownEta => "known_eta",
            VarianceMethod::Theorem1 => "theorem1",
            VarianceMethod::Sscf => "sscf",
        };
        out.push_str(&format!(
            "variance: {method}  n: {}  observed: {}  iterations: {}  converged: {}\n",
            self.n, self.n_obs, self.iterations, self.converged
        ));
        out
    }
}

/// Formats with four significant digits, switching to exponent form for very
/// large or small magnitudes.
pub fn sig4(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.000".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (3 - mag).max(0) as usize, v)
    } else {
        format!("{v:.3e}")
    }
}

/// Full pipeline output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub primary: PrimaryFit,
    pub auxiliary: AuxiliaryFit,
}

/// Fits the auxiliary model, solves the primary equations and attaches the
/// configured variance.
pub fn fit(d: &Dataset, cfg: &FitConfig, opts: &RootSolveOptions) -> Result<FitOutput> {
    fit_with_scaling(d, cfg, opts, NuisanceScaling::default())
}

pub fn fit_with_scaling(
    d: &Dataset,
    cfg: &FitConfig,
    opts: &RootSolveOptions,
    scaling: NuisanceScaling,
) -> Result<FitOutput> {
    opts.validate()?;
    d.ensure_valid()?;
    cfg.check(d)?;
    let aux = fit_auxiliary(d, cfg, opts)?;
    let spec = spec_for(cfg, AuxRef::from(&aux));
    let sol = solve_gee(d, &spec, opts, None)?;
    let (sigma, folds) = match cfg.variance {
        VarianceMethod::KnownEta => (
            variance_known_eta(d, AuxRef::from(&aux), cfg, &sol.beta)?,
            None,
        ),
        VarianceMethod::Theorem1 => {
            let p = aux.as_parametric().ok_or_else(|| {
                Error::AuxKind("theorem1 variance needs the parametric auxiliary model".into())
            })?;
            (variance_theorem1(d, p, cfg, &sol.beta, scaling)?, None)
        }
        VarianceMethod::Sscf => {
            let s = variance_sscf(d, cfg, opts)?;
            (s.sigma, Some(s.fold_betas))
        }
    };
    let mut primary = PrimaryFit::assemble(d, sol, sigma, cfg.variance, opts.tol);
    primary.fold_betas = folds;
    Ok(FitOutput {
        primary,
        auxiliary: aux,
    })
}

/// GEE on the rows with observed covariate only; no auxiliary model.
pub fn complete_case_fit(
    d: &Dataset,
    cfg: &FitConfig,
    opts: &RootSolveOptions,
) -> Result<PrimaryFit> {
    let sub = d.observed_subset();
    if sub.n() < d.p_beta() {
        return Err(Error::NoObservedX);
    }
    known_eta_only(&sub, cfg, opts)
}

/// GEE on the uncensored truth of a simulated dataset.
pub fn full_data_fit(d: &Dataset, cfg: &FitConfig, opts: &RootSolveOptions) -> Result<PrimaryFit> {
    let truth = d.truth.as_ref().ok_or(Error::MissingTruth)?;
    let mut full = d.clone();
    full.x_value = truth.clone();
    full.x_observed = vec![true; d.n()];
    known_eta_only(&full, cfg, opts)
}

fn known_eta_only(d: &Dataset, cfg: &FitConfig, opts: &RootSolveOptions) -> Result<PrimaryFit> {
    opts.validate()?;
    let spec = spec_for(cfg, AuxRef::None);
    let sol = solve_gee(d, &spec, opts, None)?;
    let sigma = variance_known_eta(d, AuxRef::None, cfg, &sol.beta)?;
    Ok(PrimaryFit::assemble(
        d,
        sol,
        sigma,
        VarianceMethod::KnownEta,
        opts.tol,
    ))
}
