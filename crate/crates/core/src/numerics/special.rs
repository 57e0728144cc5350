use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this CDF value the Mills ratio switches to its continued fraction.
const MILLS_SWITCH_CDF: f64 = 1e-10;
/// |z| beyond which Φ(-|z|) < 1e-10.
const MILLS_SWITCH_Z: f64 = 6.361_340_902_404_056;

#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Mills ratio `(1 - Φ(x)) / φ(x)` for `x ≥ MILLS_SWITCH_Z`, by the Laplace continued fraction.
fn upper_mills_cf(x: f64) -> f64 {
    debug_assert!(x > 5.0);
    let mut acc = x;
    for k in (1..=60).rev() {
        acc = x + k as f64 / acc;
    }
    1.0 / acc
}

/// `φ(z) / Φ(z)`, stable for very negative `z`.
pub fn lower_inverse_mills(z: f64) -> f64 {
    if z < -MILLS_SWITCH_Z {
        1.0 / upper_mills_cf(-z)
    } else {
        let cdf = std_normal_cdf(z);
        debug_assert!(cdf >= MILLS_SWITCH_CDF * 0.99);
        std_normal_pdf(z) / cdf
    }
}

/// `φ(z) / (1 - Φ(z))`, the normal hazard.
#[inline]
pub fn upper_inverse_mills(z: f64) -> f64 {
    lower_inverse_mills(-z)
}

/// `ln Φ(z)` without underflow for very negative `z`.
pub fn ln_std_normal_cdf(z: f64) -> f64 {
    if z < -MILLS_SWITCH_Z {
        -0.5 * z * z - LN_SQRT_2PI + upper_mills_cf(-z).ln()
    } else {
        std_normal_cdf(z).ln()
    }
}

fn check_variance(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "variance must be positive, got {sigma2}"
        )))
    }
}

/// Density and cumulative probability of N(mu, sigma2) at `x`.
pub fn normal_pdf_cdf(x: f64, mu: f64, sigma2: f64) -> Result<(f64, f64)> {
    check_variance(sigma2)?;
    if x.is_nan() {
        return Err(Error::Domain("x is NaN".into()));
    }
    let sd = sigma2.sqrt();
    if x.is_infinite() {
        return Ok((0.0, if x > 0.0 { 1.0 } else { 0.0 }));
    }
    let z = (x - mu) / sd;
    Ok((std_normal_pdf(z) / sd, std_normal_cdf(z)))
}

/// Upper tail of a chi-square with `dof` degrees of freedom.
pub fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    if !stat.is_finite() {
        return 0.0;
    }
    gamma_ur(dof as f64 / 2.0, stat / 2.0).clamp(0.0, 1.0)
}
