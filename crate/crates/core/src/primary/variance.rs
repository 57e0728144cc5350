//! Sandwich variance estimators for `√n(β̂ - β)`.

use serde::{Deserialize, Serialize};

use crate::auxiliary::{fit_auxiliary, AuxiliaryFit, ParametricAuxFit};
use crate::data::{split_two_folds, Dataset, FitConfig, FoldSplit};
use crate::error::{Error, Result};
use crate::numerics::{invert_spd, DenseMatrix, RootSolveOptions};

use super::gee::{bread, meat, row_pieces, solve_gee, GeeSpec};
use super::mean::AuxRef;

/// How the auxiliary-estimation correction is scaled by the observed fraction
/// `p̂² = n_o/n`, given the per-observed-row information `Î`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceScaling {
    /// `Ĉ Î⁻¹ Ĉᵀ / p̂²`, the delta-method variance of an MLE on `n_o` rows.
    #[default]
    InverseP2,
    /// `Ĉ Î⁻¹ Ĉᵀ / p̂⁴`.
    InverseP4,
}

pub(crate) fn spec_for<'a>(cfg: &FitConfig, aux: AuxRef<'a>) -> GeeSpec<'a> {
    GeeSpec {
        link: cfg.link,
        working_variance: cfg.working_variance,
        aux,
        normalize_htilde: cfg.normalize_htilde,
    }
}

fn sandwich(bread_m: &DenseMatrix, middle: &DenseMatrix) -> Result<DenseMatrix> {
    let binv = invert_spd(bread_m).map_err(|_| Error::RankDeficientInformation)?;
    Ok(binv.matmul(middle)?.matmul(&binv)?.symmetrize())
}

/// `B̂⁻¹ Σ̂_U B̂⁻ᵀ`, treating the auxiliary parameters as known.
pub fn variance_known_eta(
    d: &Dataset,
    aux: AuxRef<'_>,
    cfg: &FitConfig,
    beta: &[f64],
) -> Result<DenseMatrix> {
    let spec = spec_for(cfg, aux);
    let (rows, _) = row_pieces(d, &spec, beta, false)?;
    let p = beta.len();
    sandwich(&bread(&rows, p, d.n()), &meat(&rows, p, d.n()))
}

/// Known-η sandwich plus the correction for estimating the parametric
/// auxiliary model.
pub fn variance_theorem1(
    d: &Dataset,
    aux: &ParametricAuxFit,
    cfg: &FitConfig,
    beta: &[f64],
    scaling: NuisanceScaling,
) -> Result<DenseMatrix> {
    let spec = spec_for(cfg, AuxRef::Parametric(aux));
    let (rows, _) = row_pieces(d, &spec, beta, true)?;
    let n = d.n();
    let p = beta.len();
    let q = aux.n_params();

    let mut c = DenseMatrix::zeros(p, q);
    for r in &rows {
        let m = r.m_eta.as_ref().expect("requested");
        c.add_outer_in_place(&r.d_beta, m, 1.0 / (r.variance * n as f64));
    }
    let info_inv = invert_spd(&aux.fisher_info).map_err(|_| Error::AuxInfoSingular)?;
    let p2 = d.n_obs() as f64 / n as f64;
    let k = match scaling {
        NuisanceScaling::InverseP2 => 1.0 / p2,
        NuisanceScaling::InverseP4 => 1.0 / (p2 * p2),
    };
    let phi = c.matmul(&info_inv)?.matmul(&c.transpose())?.scale(k);
    let middle = meat(&rows, p, n).add(&phi)?;
    sandwich(&bread(&rows, p, n), &middle)
}

/// Result of two-fold cross-fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct SscfVariance {
    pub sigma: DenseMatrix,
    pub fold_betas: [Vec<f64>; 2],
    pub fold_sizes: [usize; 2],
    /// Seed of the split actually used after any reseeding.
    pub split_seed: u64,
}

const RESEED_ATTEMPTS: u64 = 16;

fn split_with_reseed(d: &Dataset, seed: u64) -> Result<(FoldSplit, u64)> {
    let mut last = None;
    for k in 0..RESEED_ATTEMPTS {
        let s = seed.wrapping_add(k.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        match split_two_folds(d, s) {
            Ok(split) => return Ok((split, s)),
            Err(e @ Error::DegenerateSplit { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Cross-fitted sandwich: the auxiliary model is fitted on one fold and the
/// primary equations solved on the other, in both directions. The two fold
/// variances are pooled as `(n₁Σ¹ + n₂Σ²)/n`.
pub fn variance_sscf(
    d: &Dataset,
    cfg: &FitConfig,
    opts: &RootSolveOptions,
) -> Result<SscfVariance> {
    let (split, split_seed) = split_with_reseed(d, cfg.seed)?;
    let mut sigmas = Vec::with_capacity(2);
    let mut betas = Vec::with_capacity(2);
    for k in 0..2 {
        let (est, nuis) = (&split.folds[k], &split.folds[1 - k]);
        let fold = k + 1;
        let wrap = |e: Error| Error::SscfFoldFailure {
            fold,
            source: Box::new(e),
        };
        let aux: AuxiliaryFit = fit_auxiliary(nuis, cfg, opts).map_err(wrap)?;
        let spec = spec_for(cfg, AuxRef::from(&aux));
        let sol = solve_gee(est, &spec, opts, None).map_err(wrap)?;
        let s = variance_known_eta(est, AuxRef::from(&aux), cfg, &sol.beta).map_err(wrap)?;
        sigmas.push(s);
        betas.push(sol.beta);
    }
    let n1 = split.folds[0].n();
    let n2 = split.folds[1].n();
    let n = (n1 + n2) as f64;
    let mut sigma = sigmas[0].scale(n1 as f64 / n);
    sigma.add_scaled_in_place(&sigmas[1], n2 as f64 / n);
    let b2 = betas.pop().expect("two folds");
    let b1 = betas.pop().expect("two folds");
    Ok(SscfVariance {
        sigma: sigma.symmetrize(),
        fold_betas: [b1, b2],
        fold_sizes: [n1, n2],
        split_seed,
    })
}
