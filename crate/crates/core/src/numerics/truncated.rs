//! Moments of a normal distribution truncated to one side of a threshold.

use super::special::{ln_std_normal_cdf, lower_inverse_mills};
use crate::error::{Error, Result};

const MIN_LN_MASS: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// Mean of a left-tail-truncated normal together with its partial derivatives
/// in the location and the variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMean {
    pub mean: f64,
    pub d_mu: f64,
    pub d_sigma2: f64,
}

fn check(sigma2: f64, mu: f64, delta: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!(
            "variance must be positive, got {sigma2}"
        )));
    }
    if !mu.is_finite() || delta.is_nan() {
        return Err(Error::Domain("non-finite location or threshold".into()));
    }
    Ok(())
}

/// `E(X | X ≤ delta)` for `X ~ N(mu, sigma2)`, with gradient.
pub fn truncated_mean_below_grad(mu: f64, sigma2: f64, delta: f64) -> Result<TruncatedMean> {
    check(sigma2, mu, delta)?;
    if delta == f64::INFINITY {
        return Ok(TruncatedMean {
            mean: mu,
            d_mu: 1.0,
            d_sigma2: 0.0,
        });
    }
    let sd = sigma2.sqrt();
    let b = (delta - mu) / sd;
    if ln_std_normal_cdf(b) < MIN_LN_MASS {
        return Err(Error::TruncationMassZero);
    }
    let rho = lower_inverse_mills(b);
    // rho'(b) = -rho (b + rho)
    let b_plus_rho = b + rho;
    let mean = mu - sd * rho;
    let d_mu = 1.0 - rho * b_plus_rho;
    let d_sigma2 = -rho * (1.0 + b * b_plus_rho) / (2.0 * sd);
    Ok(TruncatedMean {
        mean: mean.min(delta).min(mu),
        d_mu,
        d_sigma2,
    })
}

/// `E(X | X ≤ delta)` for `X ~ N(mu, sigma2)`.
pub fn truncated_mean_below(mu: f64, sigma2: f64, delta: f64) -> Result<f64> {
    truncated_mean_below_grad(mu, sigma2, delta).map(|t| t.mean)
}

/// `E(e^W | W ≤ c)` for `W ~ N(mu, sigma2)`, with gradient in `(mu, sigma2)`.
pub fn lognormal_mean_below_grad(mu: f64, sigma2: f64, c: f64) -> Result<TruncatedMean> {
    check(sigma2, mu, c)?;
    let full = (mu + 0.5 * sigma2).exp();
    if c == f64::INFINITY {
        return Ok(TruncatedMean {
            mean: full,
            d_mu: full,
            d_sigma2: 0.5 * full,
        });
    }
    let sd = sigma2.sqrt();
    let b = (c - mu) / sd;
    let ln_mass = ln_std_normal_cdf(b);
    if ln_mass < MIN_LN_MASS {
        return Err(Error::TruncationMassZero);
    }
    let ln_mean = mu + 0.5 * sigma2 + ln_std_normal_cdf(b - sd) - ln_mass;
    let mean = ln_mean.exp().min(c.exp());
    let r0 = lower_inverse_mills(b);
    let r1 = lower_inverse_mills(b - sd);
    let dl_mu = 1.0 + (r0 - r1) / sd;
    let dl_v = 0.5 - r1 / (2.0 * sd) + (r0 - r1) * b / (2.0 * sigma2);
    Ok(TruncatedMean {
        mean,
        d_mu: mean * dl_mu,
        d_sigma2: mean * dl_v,
    })
}

/// `E(X | X > delta)` for `X ~ N(mu, sigma2)`, the mirror image of the lower tail.
pub fn truncated_mean_above(mu: f64, sigma2: f64, delta: f64) -> Result<f64> {
    let m = truncated_mean_below(-mu, sigma2, -delta)?;
    Ok(-m)
}
