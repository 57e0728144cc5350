//! The two-component conditional mean `E(y | w)`.
//!
//! Observed rows use the primary regression directly. Censored rows average
//! the inverse link over the auxiliary model's distribution of the covariate
//! below the detection limit.

use crate::auxiliary::{AuxiliaryFit, ParametricAuxFit, SemiparAuxFit};
use crate::data::{AuxScale, Dataset, Link};
use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss_legendre_64;
use crate::numerics::{lognormal_mean_below_grad, truncated_mean_below_grad};

use crate::auxiliary::parametric::dot;

/// Borrowed view of whichever auxiliary fit supplies censored-row means.
#[derive(Debug, Clone, Copy)]
pub enum AuxRef<'a> {
    /// No auxiliary model; only valid when every row is observed.
    None,
    Parametric(&'a ParametricAuxFit),
    Semiparametric(&'a SemiparAuxFit),
}

impl<'a> From<&'a AuxiliaryFit> for AuxRef<'a> {
    fn from(a: &'a AuxiliaryFit) -> Self {
        match a {
            AuxiliaryFit::Parametric(p) => AuxRef::Parametric(p),
            AuxiliaryFit::Semiparametric(s) => AuxRef::Semiparametric(s),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MeanModel<'a> {
    pub link: Link,
    pub beta: &'a [f64],
    pub aux: AuxRef<'a>,
    pub normalize_htilde: bool,
}

/// Mean, its β-gradient `D_i`, and optionally its η-gradient `M_i` for one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMean {
    pub mean: f64,
    pub d_beta: Vec<f64>,
    pub m_eta: Option<Vec<f64>>,
    /// Set when the semiparametric window held no jumps and the nearest jump was used.
    pub window_fallback: bool,
}

pub fn conditional_mean(d: &Dataset, i: usize, model: &MeanModel<'_>) -> Result<f64> {
    evaluate_row(d, i, model, false).map(|r| r.mean)
}

pub fn mean_jacobian_beta(d: &Dataset, i: usize, model: &MeanModel<'_>) -> Result<Vec<f64>> {
    evaluate_row(d, i, model, false).map(|r| r.d_beta)
}

/// `M_i = ∂g_i/∂η` in `(γ, σx²)`; parametric auxiliary only.
pub fn mean_jacobian_eta(d: &Dataset, i: usize, model: &MeanModel<'_>) -> Result<Vec<f64>> {
    if !matches!(model.aux, AuxRef::Parametric(_)) {
        return Err(Error::AuxKind(
            "the η-gradient exists only for the parametric auxiliary model".into(),
        ));
    }
    evaluate_row(d, i, model, true).map(|r| r.m_eta.expect("requested"))
}

pub fn evaluate_row(
    d: &Dataset,
    i: usize,
    model: &MeanModel<'_>,
    want_eta: bool,
) -> Result<RowMean> {
    if model.beta.len() != d.p_beta() {
        return Err(Error::Dimension(format!(
            "beta has {} entries, expected {}",
            model.beta.len(),
            d.p_beta()
        )));
    }
    let n_eta = match model.aux {
        AuxRef::Parametric(p) => p.n_params(),
        _ => 0,
    };
    let out = if d.x_observed[i] {
        let row = d.primary_design_row(i, d.x_value[i]);
        let lin = dot(model.beta, &row);
        let hp = model.link.inverse_deriv(lin);
        RowMean {
            mean: model.link.inverse(lin),
            d_beta: row.iter().map(|v| v * hp).collect(),
            m_eta: want_eta.then(|| vec![0.0; n_eta]),
            window_fallback: false,
        }
    } else {
        match model.aux {
            AuxRef::None => {
                return Err(Error::AuxKind(format!(
                    "row {i} is censored but no auxiliary model was supplied"
                )))
            }
            AuxRef::Parametric(p) => match model.link {
                Link::Identity => parametric_identity(d, i, model.beta, p, want_eta)?,
                Link::Logit => parametric_quadrature(d, i, model, p, want_eta)?,
            },
            AuxRef::Semiparametric(s) => semiparametric(d, i, model, s)?,
        }
    };
    if !out.mean.is_finite() || out.d_beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteMean { row: i });
    }
    Ok(out)
}

fn parametric_identity(
    d: &Dataset,
    i: usize,
    beta: &[f64],
    p: &ParametricAuxFit,
    want_eta: bool,
) -> Result<RowMean> {
    let w = d.aux_design_row(i);
    let mu = dot(&p.gamma, &w);
    let tm = match p.scale {
        AuxScale::Linear => truncated_mean_below_grad(mu, p.sigma2_x, d.delta)?,
        AuxScale::Log => lognormal_mean_below_grad(mu, p.sigma2_x, p.scale.to_working(d.delta)?)?,
    };
    let row = d.primary_design_row(i, tm.mean);
    let m_eta = want_eta.then(|| {
        let mut m: Vec<f64> = w.iter().map(|wk| beta[1] * tm.d_mu * wk).collect();
        m.push(beta[1] * tm.d_sigma2);
        m
    });
    Ok(RowMean {
        mean: dot(beta, &row),
        d_beta: row,
        m_eta,
        window_fallback: false,
    })
}

/// Integration range holding essentially all the mass of `N(mu, σ²)` restricted to `x ≤ delta`.
pub(crate) fn truncated_support(mu: f64, sd: f64, delta: f64) -> (f64, f64) {
    let b = (delta - mu) / sd;
    if b < -5.0 {
        // density decays at least like exp(-|b| (delta - x) / sd) below the limit
        (delta - 40.0 * sd / -b, delta)
    } else {
        (mu.min(delta) - 9.0 * sd, delta.min(mu + 9.0 * sd))
    }
}

/// Censored-row mean for a nonlinear link: 64-point Gauss-Legendre over the truncated normal.
fn parametric_quadrature(
    d: &Dataset,
    i: usize,
    model: &MeanModel<'_>,
    p: &ParametricAuxFit,
    want_eta: bool,
) -> Result<RowMean> {
    let w = d.aux_design_row(i);
    let mu = dot(&p.gamma, &w);
    let v = p.sigma2_x;
    let sd = v.sqrt();
    let (lo, hi) = truncated_support(mu, sd, p.scale.to_working(d.delta)?);
    let rule = gauss_legendre_64();
    let pb = model.beta.len();

    // log-density relative to the value at the upper end keeps weights representable
    let anchor = -(hi - mu).powi(2) / (2.0 * v);
    let mut mass = 0.0;
    let mut g = 0.0;
    let mut dg = vec![0.0; pb];
    let mut e_s = [0.0; 2];
    let mut e_hs = [0.0; 2];
    for (w_k, qw) in rule.mapped(lo, hi) {
        let wt = qw * (-(w_k - mu).powi(2) / (2.0 * v) - anchor).exp();
        let row = d.primary_design_row(i, p.scale.to_covariate(w_k));
        let lin = dot(model.beta, &row);
        let h = model.link.inverse(lin);
        let hp = model.link.inverse_deriv(lin);
        mass += wt;
        g += wt * h;
        for k in 0..pb {
            dg[k] += wt * hp * row[k];
        }
        if want_eta {
            let s_mu = (w_k - mu) / v;
            let s_v = ((w_k - mu).powi(2) / v - 1.0) / (2.0 * v);
            e_s[0] += wt * s_mu;
            e_s[1] += wt * s_v;
            e_hs[0] += wt * h * s_mu;
            e_hs[1] += wt * h * s_v;
        }
    }
    if !(mass > 0.0) {
        return Err(Error::TruncationMassZero);
    }
    let g = g / mass;
    let m_eta = want_eta.then(|| {
        let d_mu = e_hs[0] / mass - g * e_s[0] / mass;
        let d_v = e_hs[1] / mass - g * e_s[1] / mass;
        let mut m: Vec<f64> = w.iter().map(|wk| d_mu * wk).collect();
        m.push(d_v);
        m
    });
    Ok(RowMean {
        mean: g,
        d_beta: dg.into_iter().map(|v| v / mass).collect(),
        m_eta,
        window_fallback: false,
    })
}

/// Jump sum of the inverse link against the residual distribution over the
/// censored window `[ν - μ̂_i, τ]`.
fn semiparametric(
    d: &Dataset,
    i: usize,
    model: &MeanModel<'_>,
    s: &SemiparAuxFit,
) -> Result<RowMean> {
    let loc = s.location(d, i);
    let lower = s.nu - loc;
    let xi = &s.xi_hat;
    let mut range = xi.window(lower, s.tau);
    let mut fallback = false;
    if range.is_empty() {
        if xi.is_empty() {
            return Err(Error::HtildeWindowEmpty { row: i });
        }
        // nearest jump to the window
        let k = xi.jump_points.partition_point(|&p| p < lower);
        let j = if k >= xi.len() {
            xi.len() - 1
        } else if k == 0 {
            0
        } else if (xi.jump_points[k] - lower).abs() < (lower - xi.jump_points[k - 1]).abs() {
            k
        } else {
            k - 1
        };
        range = j..j + 1;
        fallback = true;
    }
    let pb = model.beta.len();
    let mut mass = 0.0;
    let mut g = 0.0;
    let mut dg = vec![0.0; pb];
    for j in range {
        let m = if fallback { 1.0 } else { xi.jump_masses[j] };
        let x = s.transform.forward(xi.jump_points[j] + loc);
        let row = d.primary_design_row(i, x);
        let lin = dot(model.beta, &row);
        let hp = model.link.inverse_deriv(lin);
        mass += m;
        g += m * model.link.inverse(lin);
        for k in 0..pb {
            dg[k] += m * hp * row[k];
        }
    }
    let norm = if model.normalize_htilde || fallback {
        if !(mass > 0.0) {
            return Err(Error::HtildeWindowEmpty { row: i });
        }
        mass
    } else {
        1.0
    };
    Ok(RowMean {
        mean: g / norm,
        d_beta: dg.into_iter().map(|v| v / norm).collect(),
        m_eta: None,
        window_fallback: fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auxiliary::StepCdf;
    use crate::data::Transform;
    use crate::numerics::DenseMatrix;

    fn one_row(x: f64, observed: bool, u: &[f64], z: &[f64], delta: f64) -> Dataset {
        let mut d = Dataset::from_values(
            vec![0.0],
            vec![x],
            DenseMatrix::from_row_major(1, u.len(), u.to_vec()).unwrap(),
            DenseMatrix::from_row_major(1, z.len(), z.to_vec()).unwrap(),
            delta,
        )
        .unwrap();
        d.x_observed[0] = observed;
        d
    }

    fn param(gamma: Vec<f64>, s2: f64) -> ParametricAuxFit {
        let q = gamma.len() + 1;
        ParametricAuxFit {
            gamma,
            sigma2_x: s2,
            scale: AuxScale::Linear,
            fisher_info: DenseMatrix::identity(q),
            n_obs: 1,
            converged: true,
            log_likelihood: 0.0,
            iterations: 0,
        }
    }

    #[test]
    fn observed_identity_row() {
        let d = one_row(2.0, true, &[0.0, 1.0], &[0.5], 0.0);
        let beta = [1.0, 1.0, 1.0, 1.0];
        let m = MeanModel {
            link: Link::Identity,
            beta: &beta,
            aux: AuxRef::None,
            normalize_htilde: true,
        };
        assert_eq!(conditional_mean(&d, 0, &m).unwrap(), 4.0);
        assert_eq!(
            mean_jacobian_beta(&d, 0, &m).unwrap(),
            vec![1.0, 2.0, 0.0, 1.0]
        );
    }

    #[test]
    fn censored_identity_row_is_truncated_mean() {
        let d = one_row(f64::NAN, false, &[], &[], 0.0);
        let aux = param(vec![0.0], 1.0);
        let beta = [0.0, 1.0];
        let m = MeanModel {
            link: Link::Identity,
            beta: &beta,
            aux: AuxRef::Parametric(&aux),
            normalize_htilde: true,
        };
        let g = conditional_mean(&d, 0, &m).unwrap();
        assert!((g + 0.797_884_560_8).abs() < 1e-8);
    }

    #[test]
    fn censored_logit_with_zero_slope_is_constant() {
        let d = one_row(f64::NAN, false, &[], &[0.3], 1.0);
        let aux = param(vec![0.5, 2.0], 0.7);
        let beta = [0.4, 0.0];
        let m = MeanModel {
            link: Link::Logit,
            beta: &beta,
            aux: AuxRef::Parametric(&aux),
            normalize_htilde: true,
        };
        let g = conditional_mean(&d, 0, &m).unwrap();
        assert!((g - Link::Logit.inverse(0.4)).abs() < 1e-14);
    }

    #[test]
    fn semiparametric_window_average() {
        // negate transform, ν = -δ = 0; location 0 so window is [0, τ]
        let d = one_row(f64::NAN, false, &[], &[0.0], 0.0);
        let xi = StepCdf::new(vec![-1.0, 0.5, 1.0, 2.0], vec![0.25; 4]).unwrap();
        let s = SemiparAuxFit {
            gamma: vec![0.0, 0.0],
            xi_hat: xi,
            transform: Transform::Negate,
            nu: 0.0,
            tau: 2.0,
            n_obs: 4,
            discarded_jumps: 0,
            discarded_mass: 0.0,
            gehan_loss: None,
        };
        let beta = [0.0, 1.0];
        let mut m = MeanModel {
            link: Link::Identity,
            beta: &beta,
            aux: AuxRef::Semiparametric(&s),
            normalize_htilde: true,
        };
        // x = -e over e in {0.5, 1, 2}
        let want = -(0.5 + 1.0 + 2.0) / 3.0;
        assert!((conditional_mean(&d, 0, &m).unwrap() - want).abs() < 1e-12);
        m.normalize_htilde = false;
        assert!((conditional_mean(&d, 0, &m).unwrap() - 0.25 * (-3.5)).abs() < 1e-12);
    }

    #[test]
    fn eta_gradient_requires_parametric() {
        let d = one_row(1.0, true, &[], &[], 0.0);
        let beta = [0.0, 1.0];
        let m = MeanModel {
            link: Link::Identity,
            beta: &beta,
            aux: AuxRef::None,
            normalize_htilde: true,
        };
        assert!(matches!(
            mean_jacobian_eta(&d, 0, &m),
            Err(Error::AuxKind(_))
        ));
    }
}
