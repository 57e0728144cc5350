use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Bernoulli, ChiSquared, Distribution, Normal};

use super::scenario::{Design, ErrorKind, ScenarioConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::special::std_normal_cdf;
use crate::numerics::DenseMatrix;

/// Stream id of the data-generating draws within a replicate.
const DATA_STREAM: u64 = 0;

/// Generator for replicate `rep` on a given stream; independent of how
/// replicates are scheduled.
pub fn replicate_rng(seed: u64, rep: usize, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((rep as u64) << 8 | stream);
    rng
}

/// Two-component normal mixture `Σ w_k N(m_k, s²)`.
struct Mixture {
    weights: [f64; 2],
    means: [f64; 2],
    sd: f64,
}

impl Mixture {
    fn cdf(&self, v: f64) -> f64 {
        (0..2)
            .map(|k| self.weights[k] * std_normal_cdf((v - self.means[k]) / self.sd))
            .sum()
    }

    fn quantile(&self, prob: f64) -> f64 {
        let mut lo = self.means[0].min(self.means[1]) - 40.0 * self.sd;
        let mut hi = self.means[0].max(self.means[1]) + 40.0 * self.sd;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < prob {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Detection limit giving `Pr(x ≤ δ)` equal to the target missing fraction
/// under the scenario's marginal distribution of `x`.
pub fn detection_limit(cfg: &ScenarioConfig) -> Result<f64> {
    let g = &cfg.gamma;
    let c = &cfg.covariates;
    let alpha = cfg.target_missing_frac;
    match cfg.design {
        Design::A => {
            // x | z2 normal, z2 binary
            let mix = Mixture {
                weights: [1.0 - c.p_z, c.p_z],
                means: [g[0] + g[1] * c.mu_z, g[0] + g[1] * c.mu_z + g[2]],
                sd: (g[1] * g[1] * c.sigma2_z + cfg.sigma2_x).sqrt(),
            };
            Ok(mix.quantile(alpha))
        }
        Design::B => {
            // t | z1 normal, z1 binary; x = T(t) is decreasing, so x ≤ δ iff t ≥ ν
            let mix = Mixture {
                weights: [1.0 - c.p_z, c.p_z],
                means: [g[0] + g[2] * c.mu_z, g[0] + g[1] + g[2] * c.mu_z],
                sd: (g[2] * g[2] * c.sigma2_z + cfg.sigma2_x).sqrt(),
            };
            let nu = mix.quantile(1.0 - alpha);
            Ok(cfg.transform.forward(nu))
        }
    }
}

fn normal(mean: f64, var: f64) -> Result<Normal<f64>> {
    Normal::new(mean, var.sqrt()).map_err(|e| Error::Config(format!("normal parameters: {e}")))
}

fn bernoulli(p: f64) -> Result<Bernoulli> {
    Bernoulli::new(p).map_err(|e| Error::Config(format!("bernoulli parameter: {e}")))
}

/// Draws replicate `rep`. Censored rows carry NaN in `x_value`; the true
/// covariate is kept in `truth`.
pub fn generate(cfg: &ScenarioConfig, rep: usize, delta: f64) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = replicate_rng(cfg.seed, rep, DATA_STREAM);
    let c = &cfg.covariates;
    let cont_z = normal(c.mu_z, c.sigma2_z)?;
    let bin_z = bernoulli(c.p_z)?;
    let cont_u = normal(c.mu_u, c.sigma2_u)?;
    let bin_u = bernoulli(c.p_u)?;
    let eps_x = normal(0.0, cfg.sigma2_x)?;
    let eps_y = normal(0.0, cfg.sigma2_y)?;
    let s = f64::from(cfg.chisq_dof);
    let chisq = ChiSquared::new(s).map_err(|e| Error::Config(format!("chisq_dof: {e}")))?;
    // (χ²_s - s) has variance 2s
    let chisq_scale = (cfg.sigma2_y / (2.0 * s)).sqrt();

    let n = cfg.n;
    let (b, g) = (&cfg.beta, &cfg.gamma);
    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(2 * n);
    let mut z = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let (z1, z2) = match cfg.design {
            Design::A => (
                cont_z.sample(&mut rng),
                f64::from(u8::from(bin_z.sample(&mut rng))),
            ),
            Design::B => (
                f64::from(u8::from(bin_z.sample(&mut rng))),
                cont_z.sample(&mut rng),
            ),
        };
        let u1 = cont_u.sample(&mut rng);
        let u2 = f64::from(u8::from(bin_u.sample(&mut rng)));
        let lin = g[0] + g[1] * z1 + g[2] * z2 + eps_x.sample(&mut rng);
        let xi = match cfg.design {
            Design::A => lin,
            Design::B => cfg.transform.forward(lin),
        };
        let e = match cfg.error_kind {
            ErrorKind::Normal => eps_y.sample(&mut rng),
            ErrorKind::CenteredChisq => (chisq.sample(&mut rng) - s) * chisq_scale,
        };
        y.push(b[0] + b[1] * xi + b[2] * u1 + b[3] * u2 + e);
        x.push(xi);
        u.extend([u1, u2]);
        z.extend([z1, z2]);
    }
    let mut d = Dataset::from_values(
        y,
        x.clone(),
        DenseMatrix::from_row_major(n, 2, u)?,
        DenseMatrix::from_row_major(n, 2, z)?,
        delta,
    )?;
    for i in 0..n {
        if !d.x_observed[i] {
            d.x_value[i] = f64::NAN;
        }
    }
    d.truth = Some(x);
    Ok(d)
}
