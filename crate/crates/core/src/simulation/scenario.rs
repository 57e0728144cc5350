use serde::{Deserialize, Serialize};

use crate::data::{AuxScale, Transform, VarianceMethod};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Normal covariate regressed on a continuous and a binary surrogate.
    A,
    /// Covariate `x = T(t)` with `t` normal given a binary and a continuous surrogate.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Normal,
    CenteredChisq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CompleteCase,
    /// Parametric auxiliary model with the nuisance-corrected sandwich.
    SemiPara,
    /// Parametric auxiliary model with the cross-fitted sandwich.
    SemiParaSscf,
    /// Semiparametric auxiliary model with the cross-fitted sandwich.
    SemiSemi,
    FullData,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::CompleteCase => "complete_case",
            Method::SemiPara => "semi_para",
            Method::SemiParaSscf => "semi_para_sscf",
            Method::SemiSemi => "semi_semi",
            Method::FullData => "full_data",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "complete_case" | "observed" => Method::CompleteCase,
            "semi_para" => Method::SemiPara,
            "semi_para_sscf" => Method::SemiParaSscf,
            "semi_semi" => Method::SemiSemi,
            "full_data" | "full" => Method::FullData,
            other => return Err(Error::Config(format!("methods: unknown method `{other}`"))),
        })
    }
}

/// Means, variances and success probabilities of the simulated covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateParams {
    pub mu_u: f64,
    pub sigma2_u: f64,
    pub p_u: f64,
    /// Mean of the continuous surrogate.
    pub mu_z: f64,
    pub sigma2_z: f64,
    /// Success probability of the binary surrogate.
    pub p_z: f64,
}

/// `H₀: β_coefficient = null_value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hypothesis {
    pub coefficient: usize,
    pub null_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub design: Design,
    pub n: usize,
    pub target_missing_frac: f64,
    pub error_kind: ErrorKind,
    pub chisq_dof: u32,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma2_y: f64,
    pub sigma2_x: f64,
    pub covariates: CovariateParams,
    /// Map from `t` to `x` in design B; also the transform used by the
    /// semiparametric auxiliary fit in either design.
    pub transform: Transform,
    pub mc_reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub hypothesis: Hypothesis,
    pub semi_para_variance: VarianceMethod,
    /// Scale of the parametric auxiliary model used by the semi-para methods.
    pub semi_para_scale: AuxScale,
}

impl ScenarioConfig {
    /// Robustness study defaults: all coefficients one, 30% missing.
    pub fn design_a() -> Self {
        Self {
            design: Design::A,
            n: 500,
            target_missing_frac: 0.3,
            error_kind: ErrorKind::Normal,
            chisq_dof: 4,
            beta: vec![1.0; 4],
            gamma: vec![1.0; 3],
            sigma2_y: 1.0,
            sigma2_x: 0.2,
            covariates: CovariateParams {
                mu_u: 0.0,
                sigma2_u: 1.0,
                p_u: 0.5,
                mu_z: 0.0,
                sigma2_z: 1.0,
                p_z: 0.5,
            },
            transform: Transform::Negate,
            mc_reps: 1000,
            seed: 20_240_601,
            methods: vec![Method::SemiPara],
            hypothesis: Hypothesis {
                coefficient: 1,
                null_value: 1.0,
            },
            semi_para_variance: VarianceMethod::Theorem1,
            semi_para_scale: AuxScale::Linear,
        }
    }

    /// Transformed-covariate design comparing the two auxiliary models.
    pub fn design_b() -> Self {
        Self {
            design: Design::B,
            n: 400,
            beta: vec![-1.0, 2.0, 0.5, -1.0],
            gamma: vec![0.25, 0.25, -0.5],
            sigma2_x: 0.01,
            covariates: CovariateParams {
                mu_u: 0.0,
                sigma2_u: 1.0,
                p_u: 0.5,
                mu_z: 1.0,
                sigma2_z: 1.0,
                p_z: 0.5,
            },
            transform: Transform::NegExp,
            // ln x = -t is normal given the surrogates
            semi_para_scale: AuxScale::Log,
            methods: vec![
                Method::FullData,
                Method::SemiSemi,
                Method::SemiPara,
                Method::CompleteCase,
            ],
            hypothesis: Hypothesis {
                coefficient: 1,
                null_value: 2.0,
            },
            ..Self::design_a()
        }
    }

    pub fn for_design(design: Design) -> Self {
        match design {
            Design::A => Self::design_a(),
            Design::B => Self::design_b(),
        }
    }

    /// Checks ranges; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::Config(format!("{field}: {msg}")));
        if self.n < 8 {
            return bad("n", "must be at least 8");
        }
        if !(self.target_missing_frac > 0.0 && self.target_missing_frac < 1.0) {
            return bad("target_missing_frac", "must lie in (0, 1)");
        }
        if self.chisq_dof == 0 {
            return bad("chisq_dof", "must be at least 1");
        }
        if self.beta.len() != 4 {
            return bad("beta", "needs 4 entries (intercept, x, u1, u2)");
        }
        if self.gamma.len() != 3 {
            return bad("gamma", "needs 3 entries (intercept, z1, z2)");
        }
        if self.beta.iter().chain(&self.gamma).any(|v| !v.is_finite()) {
            return bad("beta/gamma", "entries must be finite");
        }
        for (field, v) in [
            ("sigma2_y", self.sigma2_y),
            ("sigma2_x", self.sigma2_x),
            ("covariates.sigma2_u", self.covariates.sigma2_u),
            ("covariates.sigma2_z", self.covariates.sigma2_z),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(field, "must be positive");
            }
        }
        for (field, v) in [
            ("covariates.p_u", self.covariates.p_u),
            ("covariates.p_z", self.covariates.p_z),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(field, "must lie in (0, 1)");
            }
        }
        if !self.covariates.mu_u.is_finite() || !self.covariates.mu_z.is_finite() {
            return bad("covariates", "means must be finite");
        }
        if self.mc_reps == 0 {
            return bad("mc_reps", "must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("methods", "list at least one method");
        }
        if self.hypothesis.coefficient >= 4 {
            return bad(
                "hypothesis.coefficient",
                "must index one of the 4 coefficients",
            );
        }
        if !self.hypothesis.null_value.is_finite() {
            return bad("hypothesis.null_value", "must be finite");
        }
        Ok(())
    }

    /// One-line description used as a table heading.
    pub fn label(&self) -> String {
        let err = match self.error_kind {
            ErrorKind::Normal => "normal".to_string(),
            ErrorKind::CenteredChisq => format!("centered_chisq({})", self.chisq_dof),
        };
        format!(
            "design {} | n={} | missing={} | error={} | sigma2_x={} | H0: beta{}={} | reps={}",
            match self.design {
                Design::A => "A",
                Design::B => "B",
            },
            self.n,
            self.target_missing_frac,
            err,
            self.sigma2_x,
            self.hypothesis.coefficient,
            self.hypothesis.null_value,
            self.mc_reps
        )
    }
}

/// Scenario file contents: every field optional, filled from the chosen
/// design's defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub design: Option<Design>,
    pub n: Option<usize>,
    pub target_missing_frac: Option<f64>,
    pub error_kind: Option<ErrorKind>,
    pub chisq_dof: Option<u32>,
    pub beta: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub sigma2_y: Option<f64>,
    pub sigma2_x: Option<f64>,
    pub covariates: Option<CovariateParams>,
    pub transform: Option<Transform>,
    pub mc_reps: Option<usize>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<Method>>,
    pub hypothesis: Option<Hypothesis>,
    pub semi_para_variance: Option<VarianceMethod>,
    pub semi_para_scale: Option<AuxScale>,
}

impl ScenarioFile {
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario JSON: {e}")))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario TOML: {e}")))
        }
    }

    pub fn into_config(self) -> Result<ScenarioConfig> {
        let mut c = ScenarioConfig::for_design(self.design.unwrap_or(Design::A));
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        take!(
            n,
            target_missing_frac,
            error_kind,
            chisq_dof,
            beta,
            gamma,
            sigma2_y,
            sigma2_x,
            covariates,
            transform,
            mc_reps,
            seed,
            methods,
            hypothesis,
            semi_para_variance,
            semi_para_scale
        );
        c.validate()?;
        Ok(c)
    }
}

/// Built-in grids of published settings. Each entry is one table cell.
pub fn preset(name: &str) -> Result<Vec<ScenarioConfig>> {
    let errors = [ErrorKind::Normal, ErrorKind::CenteredChisq];
    let missing = [0.1, 0.3, 0.6];
    let mut out = Vec::new();
    match name {
        "table1" => {
            for n in [100, 200, 500] {
                for e in errors {
                    for m in missing {
                        out.push(ScenarioConfig {
                            n,
                            error_kind: e,
                            target_missing_frac: m,
                            ..ScenarioConfig::design_a()
                        });
                    }
                }
            }
        }
        "table2" => {
            for n in [200, 400] {
                out.push(ScenarioConfig {
                    n,
                    ..ScenarioConfig::design_b()
                });
            }
        }
        "table3" => {
            for s2 in [0.1, 0.5, 1.0, 5.0] {
                for e in errors {
                    for m in missing {
                        let mut c = ScenarioConfig {
                            sigma2_x: s2,
                            error_kind: e,
                            target_missing_frac: m,
                            methods: vec![Method::CompleteCase, Method::SemiPara],
                            ..ScenarioConfig::design_a()
                        };
                        c.beta[1] = 1.1;
                        // powers are computed against the unit slope; see README
                        c.hypothesis.null_value = 1.0;
                        out.push(c);
                    }
                }
            }
        }
        other => {
            return Err(Error::Config(format!(
                "preset: unknown preset `{other}` (expected table1, table2 or table3)"
            )))
        }
    }
    Ok(out)
}
