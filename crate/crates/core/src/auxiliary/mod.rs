//! Nuisance models for the censored covariate given the surrogates.

pub mod km;
pub mod parametric;
pub mod semiparametric;

use serde::{Deserialize, Serialize};

pub use km::{kaplan_meier, StepCdf};
pub use parametric::{
    fit_truncated_normal, fit_truncated_normal_scaled, truncated_normal_hessian,
    truncated_normal_loglik, truncated_normal_score, ParametricAuxFit,
};
pub use semiparametric::{
    fit_aft_gehan, fit_semiparametric, km_residual_cdf, GehanFit, GehanObjective, SemiparAuxFit,
};

use crate::data::{AuxKind, Dataset, FitConfig};
use crate::error::{Error, Result};
use crate::numerics::RootSolveOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuxiliaryFit {
    Parametric(ParametricAuxFit),
    Semiparametric(SemiparAuxFit),
}

impl AuxiliaryFit {
    pub fn gamma(&self) -> &[f64] {
        match self {
            AuxiliaryFit::Parametric(f) => &f.gamma,
            AuxiliaryFit::Semiparametric(f) => &f.gamma,
        }
    }

    pub fn as_parametric(&self) -> Option<&ParametricAuxFit> {
        match self {
            AuxiliaryFit::Parametric(f) => Some(f),
            AuxiliaryFit::Semiparametric(_) => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("auxiliary fit serializes")
    }
}

/// Fits whichever auxiliary model the configuration names.
pub fn fit_auxiliary(
    d: &Dataset,
    cfg: &FitConfig,
    opts: &RootSolveOptions,
) -> Result<AuxiliaryFit> {
    match cfg.auxiliary {
        AuxKind::ParametricNormal => {
            fit_truncated_normal_scaled(d, cfg.aux_scale, opts).map(AuxiliaryFit::Parametric)
        }
        AuxKind::SemiparametricAft => {
            let t = cfg.transform.ok_or_else(|| {
                Error::Config("semiparametric auxiliary model requires a transform".into())
            })?;
            fit_semiparametric(d, t, cfg.tau_override, opts).map(AuxiliaryFit::Semiparametric)
        }
    }
}
