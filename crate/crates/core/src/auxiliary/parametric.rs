//! Normal auxiliary model fitted by maximum likelihood on the observed rows,
//! each treated as a draw from the normal left-truncated at the detection limit.

use serde::{Deserialize, Serialize};

use crate::data::{AuxScale, Dataset};
use crate::error::{Error, Result};
use crate::numerics::matrix::{cholesky, rank, solve_spd};
use crate::numerics::special::{ln_std_normal_cdf, upper_inverse_mills};
use crate::numerics::{DenseMatrix, RootSolveOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricAuxFit {
    /// `(γ₀, γ₁)`: intercept then one slope per surrogate.
    pub gamma: Vec<f64>,
    /// Residual variance on the working scale.
    pub sigma2_x: f64,
    /// Scale on which the covariate is modelled as normal.
    #[serde(default)]
    pub scale: AuxScale,
    /// Observed information per observed row, in `(γ, σx²)`.
    pub fisher_info: DenseMatrix,
    pub n_obs: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl ParametricAuxFit {
    pub fn n_params(&self) -> usize {
        self.gamma.len() + 1
    }

    pub fn location(&self, d: &Dataset, i: usize) -> f64 {
        dot(&self.gamma, &d.aux_design_row(i))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-row pieces of the left-truncated normal log-likelihood.
struct RowTerms {
    loglik: f64,
    /// d/dμ
    g_mu: f64,
    /// d/dσ²
    g_v: f64,
    h_mu_mu: f64,
    h_mu_v: f64,
    h_v_v: f64,
}

fn row_terms(x: f64, mu: f64, v: f64, delta: f64) -> RowTerms {
    let s = v.sqrt();
    let r = (x - mu) / s;
    let a = (delta - mu) / s;
    let (lambda, ln_surv) = if a == f64::NEG_INFINITY {
        (0.0, 0.0)
    } else {
        (upper_inverse_mills(a), ln_std_normal_cdf(-a))
    };
    let (a_lam, lam_prime) = if a.is_finite() {
        (a * lambda, lambda * (lambda - a))
    } else {
        (0.0, 0.0)
    };
    let a_term = if a.is_finite() { a } else { 0.0 };
    RowTerms {
        loglik: -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * r * r - ln_surv,
        g_mu: (r - lambda) / s,
        g_v: (r * r - 1.0 - a_lam) / (2.0 * v),
        h_mu_mu: (lam_prime - 1.0) / v,
        h_mu_v: (-r + 0.5 * (lam_prime * a_term + lambda)) / (v * s),
        h_v_v: (0.5 - r * r + 0.25 * a_term * (lam_prime * a_term + 3.0 * lambda)) / (v * v),
    }
}

fn check_params(gamma: &[f64], sigma2: f64, d: &Dataset) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("σx² must be positive, got {sigma2}")));
    }
    if gamma.len() != d.p_z() + 1 {
        return Err(Error::Dimension(format!(
            "gamma has {} entries, expected {}",
            gamma.len(),
            d.p_z() + 1
        )));
    }
    Ok(())
}

/// Truncated log-likelihood summed over observed rows.
pub fn truncated_normal_loglik(gamma: &[f64], sigma2: f64, d: &Dataset) -> Result<f64> {
    check_params(gamma, sigma2, d)?;
    Ok(d.observed_indices()
        .into_iter()
        .map(|i| {
            let mu = dot(gamma, &d.aux_design_row(i));
            row_terms(d.x_value[i], mu, sigma2, d.delta).loglik
        })
        .sum())
}

/// Gradient of [`truncated_normal_loglik`] in `(γ, σx²)`.
pub fn truncated_normal_score(gamma: &[f64], sigma2: f64, d: &Dataset) -> Result<Vec<f64>> {
    check_params(gamma, sigma2, d)?;
    let q = gamma.len();
    let mut g = vec![0.0; q + 1];
    for i in d.observed_indices() {
        let w = d.aux_design_row(i);
        let t = row_terms(d.x_value[i], dot(gamma, &w), sigma2, d.delta);
        for k in 0..q {
            g[k] += t.g_mu * w[k];
        }
        g[q] += t.g_v;
    }
    Ok(g)
}

/// Hessian of [`truncated_normal_loglik`] in `(γ, σx²)`.
pub fn truncated_normal_hessian(gamma: &[f64], sigma2: f64, d: &Dataset) -> Result<DenseMatrix> {
    check_params(gamma, sigma2, d)?;
    let q = gamma.len();
    let mut h = DenseMatrix::zeros(q + 1, q + 1);
    for i in d.observed_indices() {
        let w = d.aux_design_row(i);
        let t = row_terms(d.x_value[i], dot(gamma, &w), sigma2, d.delta);
        for a in 0..q {
            for b in 0..q {
                h[(a, b)] += t.h_mu_mu * w[a] * w[b];
            }
            h[(a, q)] += t.h_mu_v * w[a];
            h[(q, a)] += t.h_mu_v * w[a];
        }
        h[(q, q)] += t.h_v_v;
    }
    Ok(h)
}

/// Least squares `(X'X)⁻¹X'y` over the given rows, plus the residual sum of squares.
pub(crate) fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let p = rows.first().map_or(0, Vec::len);
    let mut xtx = DenseMatrix::zeros(p, p);
    let mut xty = vec![0.0; p];
    for (r, &yi) in rows.iter().zip(y) {
        xtx.add_outer_in_place(r, r, 1.0);
        for k in 0..p {
            xty[k] += r[k] * yi;
        }
    }
    let beta = solve_spd(&xtx, &DenseMatrix::column(&xty))
        .map_err(|_| Error::SingularSystem)?
        .into_vec();
    let ssr = rows
        .iter()
        .zip(y)
        .map(|(r, &yi)| (yi - dot(r, &beta)).powi(2))
        .sum();
    Ok((beta, ssr))
}

/// Damped Newton ascent on the truncated log-likelihood in `(γ, ln σx²)`.
///
/// Converged when the per-row score `(1/n_o)·Q` has max-norm at most `opts.tol`.
/// Steps that would lower the log-likelihood are halved.
pub fn fit_truncated_normal(d: &Dataset, opts: &RootSolveOptions) -> Result<ParametricAuxFit> {
    opts.validate()?;
    let obs = d.observed_indices();
    let n_o = obs.len();
    if n_o == 0 {
        return Err(Error::NoObservedX);
    }
    let q = d.p_z() + 1;
    if n_o < q + 1 {
        return Err(Error::SingularAuxDesign);
    }
    let rows: Vec<Vec<f64>> = obs.iter().map(|&i| d.aux_design_row(i)).collect();
    let design = DenseMatrix::from_rows(&rows)?;
    if rank(&design, 1e-10) < q {
        return Err(Error::SingularAuxDesign);
    }
    let xs: Vec<f64> = obs.iter().map(|&i| d.x_value[i]).collect();
    let (gamma0, ssr) = least_squares(&rows, &xs).map_err(|_| Error::SingularAuxDesign)?;
    let v0 = (ssr / n_o as f64).max(1e-8);

    let mut last_err = Error::AuxNotConverged;
    for scale in [1.0, 4.0, 0.25, 16.0] {
        match ascend(d, &gamma0, v0 * scale, n_o, opts) {
            Ok(fit) => return Ok(fit),
            Err(e) => last_err = e,
        }
    }
    Err(match last_err {
        Error::NoObservedX => Error::NoObservedX,
        _ => Error::AuxNotConverged,
    })
}

/// Fits the normal model for `x` or `ln x`; on the log scale the data and
/// the limit are mapped to logs and the fit proceeds as on the linear scale.
pub fn fit_truncated_normal_scaled(
    d: &Dataset,
    scale: AuxScale,
    opts: &RootSolveOptions,
) -> Result<ParametricAuxFit> {
    match scale {
        AuxScale::Linear => fit_truncated_normal(d, opts),
        AuxScale::Log => {
            let mut w = d.clone();
            w.delta = scale.to_working(d.delta)?;
            for i in 0..d.n() {
                if d.x_observed[i] {
                    w.x_value[i] = scale.to_working(d.x_value[i])?;
                }
            }
            let mut fit = fit_truncated_normal(&w, opts)?;
            fit.scale = AuxScale::Log;
            Ok(fit)
        }
    }
}

fn ascend(
    d: &Dataset,
    gamma0: &[f64],
    v0: f64,
    n_o: usize,
    opts: &RootSolveOptions,
) -> Result<ParametricAuxFit> {
    let q = gamma0.len();
    let mut gamma = gamma0.to_vec();
    let mut omega = v0.ln();
    let mut ll = truncated_normal_loglik(&gamma, omega.exp(), d)?;
    let nf = n_o as f64;
    for iter in 0..=opts.max_iter {
        let v = omega.exp();
        let g_nat = truncated_normal_score(&gamma, v, d)?;
        let smax = g_nat.iter().fold(0.0_f64, |m, x| m.max(x.abs())) / nf;
        if smax <= opts.tol {
            let h = truncated_normal_hessian(&gamma, v, d)?;
            let info = h.scale(-1.0 / nf).symmetrize();
            return Ok(ParametricAuxFit {
                gamma,
                sigma2_x: v,
                scale: AuxScale::Linear,
                fisher_info: info,
                n_obs: n_o,
                converged: true,
                log_likelihood: ll,
                iterations: iter,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        // chain rule to (γ, ω = ln σ²)
        let h_nat = truncated_normal_hessian(&gamma, v, d)?;
        let mut g = g_nat.clone();
        g[q] *= v;
        let mut h = h_nat.clone();
        for a in 0..q {
            h[(a, q)] *= v;
            h[(q, a)] *= v;
        }
        h[(q, q)] = v * v * h_nat[(q, q)] + v * g_nat[q];
        let neg_h = h.scale(-1.0 / nf).symmetrize();
        let g_scaled: Vec<f64> = g.iter().map(|x| x / nf).collect();
        let step = regularized_step(&neg_h, &g_scaled)?;

        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..=opts.step_halving_max {
            let trial_gamma: Vec<f64> = gamma.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let trial_omega = omega + t * step[q];
            if let Ok(tll) = truncated_normal_loglik(&trial_gamma, trial_omega.exp(), d) {
                // near the optimum the gain can fall below the rounding error of ll
                if tll.is_finite() && tll >= ll - 64.0 * f64::EPSILON * ll.abs() {
                    gamma = trial_gamma;
                    omega = trial_omega;
                    ll = tll;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            return Err(Error::AuxNotConverged);
        }
    }
    Err(Error::AuxNotConverged)
}

/// Solves `(A + μI) s = g`, raising μ until the matrix factors.
fn regularized_step(a: &DenseMatrix, g: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    let base = a
        .diag()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let mut mu = 0.0;
    for _ in 0..40 {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] += mu;
        }
        if cholesky(&m).is_ok() {
            return Ok(solve_spd(&m, &DenseMatrix::column(g))?.into_vec());
        }
        mu = if mu == 0.0 { 1e-6 * base } else { mu * 10.0 };
    }
    Err(Error::AuxNotConverged)
}
