use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{detection_limit, generate};
use super::scenario::{Method, ScenarioConfig};
use crate::data::{Dataset, FitConfig, VarianceMethod};
use crate::error::{Error, Result};
use crate::numerics::RootSolveOptions;
use crate::primary::{complete_case_fit, fit, full_data_fit, sig4, wald_coefficient, PrimaryFit};

/// Fraction of failed replicates above which a method is marked degraded.
pub const DEGRADED_FAILURE_RATE: f64 = 0.02;

/// One method's result on one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

/// Missing fraction of one replicate and each method's outcome or error.
type RepResult = (f64, Vec<std::result::Result<RepOutcome, String>>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub successes: usize,
    pub failures: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub mean_asymptotic_se: f64,
    pub empirical_se: f64,
    pub rejection_rate: f64,
    pub degraded: bool,
    /// First failure message, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub scenario: ScenarioConfig,
    pub delta: f64,
    pub seed: u64,
    /// Mean realized censoring fraction over replicates.
    pub realized_missing_frac: f64,
    pub methods: Vec<MethodSummary>,
    /// Excluded from JSON so reports are byte-identical across runs.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Split seed for the cross-fitting folds of one replicate.
fn fold_seed(seed: u64, rep: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (rep as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fit_method(
    d: &Dataset,
    cfg: &ScenarioConfig,
    method: Method,
    split_seed: u64,
    opts: &RootSolveOptions,
) -> Result<PrimaryFit> {
    let base = FitConfig {
        seed: split_seed,
        aux_scale: cfg.semi_para_scale,
        ..FitConfig::default()
    };
    match method {
        Method::CompleteCase => complete_case_fit(d, &base, opts),
        Method::FullData => full_data_fit(d, &base, opts),
        Method::SemiPara => fit(
            d,
            &FitConfig {
                variance: cfg.semi_para_variance,
                ..base
            },
            opts,
        )
        .map(|o| o.primary),
        Method::SemiParaSscf => fit(
            d,
            &FitConfig {
                variance: VarianceMethod::Sscf,
                ..base
            },
            opts,
        )
        .map(|o| o.primary),
        Method::SemiSemi => fit(
            d,
            &FitConfig {
                seed: split_seed,
                ..FitConfig::semiparametric(cfg.transform)
            },
            opts,
        )
        .map(|o| o.primary),
    }
}

/// Generates and fits one replicate with every configured method.
pub fn run_replicate(
    cfg: &ScenarioConfig,
    rep: usize,
    delta: f64,
    opts: &RootSolveOptions,
) -> Result<RepResult> {
    let d = generate(cfg, rep, delta)?;
    let j = cfg.hypothesis.coefficient;
    let seed = fold_seed(cfg.seed, rep);
    let outcomes = cfg
        .methods
        .iter()
        .map(|&m| {
            let f = fit_method(&d, cfg, m, seed, opts).map_err(|e| e.to_string())?;
            let w =
                wald_coefficient(&f, j, cfg.hypothesis.null_value).map_err(|e| e.to_string())?;
            Ok(RepOutcome {
                estimate: f.beta_hat[j],
                std_error: f.std_errors[j],
                p_value: w.p_value,
            })
        })
        .collect();
    Ok((d.censoring_fraction(), outcomes))
}

fn summarize(
    method: Method,
    truth: f64,
    results: &[&std::result::Result<RepOutcome, String>],
) -> MethodSummary {
    let ok: Vec<RepOutcome> = results
        .iter()
        .filter_map(|r| r.as_ref().ok().copied())
        .collect();
    let failures = results.len() - ok.len();
    let first_error = results.iter().find_map(|r| r.as_ref().err().cloned());
    let m = ok.len() as f64;
    let (mean, mean_se, empirical_se, rejection) = if ok.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mean = ok.iter().map(|o| o.estimate).sum::<f64>() / m;
        let mean_se = ok.iter().map(|o| o.std_error).sum::<f64>() / m;
        let emp = if ok.len() > 1 {
            (ok.iter().map(|o| (o.estimate - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        let rej = ok.iter().filter(|o| o.p_value < 0.05).count() as f64 / m;
        (mean, mean_se, emp, rej)
    };
    MethodSummary {
        method,
        successes: ok.len(),
        failures,
        mean_estimate: mean,
        bias: mean - truth,
        mean_asymptotic_se: mean_se,
        empirical_se,
        rejection_rate: rejection,
        degraded: failures as f64 > DEGRADED_FAILURE_RATE * results.len() as f64,
        first_error,
    }
}

/// Runs every replicate of a scenario. `jobs` caps the worker threads;
/// `None` uses the global pool. Results do not depend on `jobs`.
pub fn run_mc(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<MCReport> {
    cfg.validate()?;
    let start = Instant::now();
    let delta = detection_limit(cfg)?;
    let opts = RootSolveOptions::default();
    let work = || -> Vec<Result<RepResult>> {
        (0..cfg.mc_reps)
            .into_par_iter()
            .map(|rep| run_replicate(cfg, rep, delta, &opts))
            .collect()
    };
    let reps = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Config(format!("jobs: {e}")))?
            .install(work),
        None => work(),
    };
    let mut missing = 0.0;
    let mut per_rep = Vec::with_capacity(reps.len());
    for r in reps {
        let (frac, outcomes) = r?;
        missing += frac;
        per_rep.push(outcomes);
    }
    let truth = cfg.beta[cfg.hypothesis.coefficient];
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let col: Vec<_> = per_rep.iter().map(|o| &o[k]).collect();
            summarize(m, truth, &col)
        })
        .collect();
    Ok(MCReport {
        scenario: cfg.clone(),
        delta,
        seed: cfg.seed,
        realized_missing_frac: missing / cfg.mc_reps as f64,
        methods,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

impl MCReport {
    pub fn summary(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned table: one row per method.
    pub fn render_table(&self) -> String {
        let header = [
            "method", "mean", "bias", "asym_se", "emp_se", "reject", "failures",
        ];
        let rows: Vec<[String; 7]> = self
            .methods
            .iter()
            .map(|s| {
                [
                    s.method.as_str().to_string(),
                    sig4(s.mean_estimate),
                    sig4(s.bias),
                    sig4(s.mean_asymptotic_se),
                    sig4(s.empirical_se),
                    sig4(s.rejection_rate),
                    if s.degraded {
                        format!("{} (degraded)", s.failures)
                    } else {
                        s.failures.to_string()
                    },
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for r in &rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = format!(
            "{}\ndelta={}  realized missing={}\n",
            self.scenario.label(),
            sig4(self.delta),
            sig4(self.realized_missing_frac)
        );
        let mut line = |cells: Vec<&str>| {
            out.push_str(&format!("{:<w$}", cells[0], w = width[0]));
            for k in 1..cells.len() {
                out.push_str(&format!("  {:>w$}", cells[k], w = width[k]));
            }
            out.push('\n');
        };
        line(header.to_vec());
        for r in &rows {
            line(r.iter().map(String::as_str).collect());
        }
        out
    }
}
