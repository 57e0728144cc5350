//! Checks shared by the acceptance harness and the ordinary test targets.
//! Each returns a verdict with a one-line detail string.

#![allow(dead_code)]

use dlreg::auxiliary::{
    fit_truncated_normal, kaplan_meier, km_residual_cdf, truncated_normal_hessian,
    truncated_normal_loglik, truncated_normal_score, ParametricAuxFit,
};
use dlreg::data::{AuxScale, Link, Transform, VarianceMethod};
use dlreg::numerics::special::std_normal_cdf;
use dlreg::numerics::{
    chi_square_sf, truncated_mean_above, truncated_mean_below, DenseMatrix, RootSolveOptions,
};
use dlreg::primary::{
    conditional_mean, evaluate_row, fit, wald_coefficient, AuxRef, MeanModel, PrimaryFit,
};
use dlreg::simulation::{
    detection_limit, generate, preset, run_mc, ErrorKind, MCReport, Method, ScenarioConfig,
};
use dlreg::{Dataset, FitConfig};
use rand::Rng;

use super::*;

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn opts() -> RootSolveOptions {
    RootSolveOptions::default()
}

fn summary(r: &MCReport, m: Method) -> &dlreg::simulation::MethodSummary {
    r.summary(m).expect("method was configured")
}

// ---------------------------------------------------------------- MC criteria

/// Design A calibration at 30% missing over n ∈ {200, 500} and both error kinds.
pub fn calibration(reps: usize) -> Verdict {
    let cells = preset("table1").unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for c in cells
        .into_iter()
        .filter(|c| (c.n == 200 || c.n == 500) && c.target_missing_frac == 0.3)
    {
        let cfg = ScenarioConfig {
            mc_reps: reps,
            methods: vec![Method::SemiPara],
            ..c
        };
        let r = run_mc(&cfg, None).unwrap();
        let s = summary(&r, Method::SemiPara);
        let ratio = s.mean_asymptotic_se / s.empirical_se;
        let ok = (s.mean_estimate - 1.0).abs() <= 0.01
            && (0.03..=0.07).contains(&s.rejection_rate)
            && (0.85..=1.15).contains(&ratio)
            && s.failures == 0;
        pass &= ok;
        parts.push(format!(
            "n={} {:?}: mean {:.4} reject {:.3} ratio {:.3}{}",
            cfg.n,
            cfg.error_kind,
            s.mean_estimate,
            s.rejection_rate,
            ratio,
            if ok { "" } else { " [x]" }
        ));
    }
    Verdict::new(pass, parts.join("; "))
}

/// Published empirical SEs at n = 400.
pub const TABLE2_SE: [(Method, f64); 4] = [
    (Method::FullData, 0.202),
    (Method::SemiSemi, 0.205),
    (Method::SemiPara, 0.204),
    (Method::CompleteCase, 0.329),
];

/// Transformed design at n = 400: returns the bias verdict and the SE verdict.
pub fn transformed_design(reps: usize) -> (Verdict, Verdict) {
    let cfg = preset("table2")
        .unwrap()
        .into_iter()
        .find(|c| c.n == 400)
        .unwrap();
    let cfg = ScenarioConfig {
        mc_reps: reps,
        ..cfg
    };
    let r = run_mc(&cfg, None).unwrap();
    let mut bias_ok = true;
    let mut bias_parts = Vec::new();
    for m in [Method::FullData, Method::SemiSemi, Method::SemiPara] {
        let s = summary(&r, m);
        let ok = s.bias.abs() <= 0.02 && s.failures == 0;
        bias_ok &= ok;
        bias_parts.push(format!("{} bias {:+.4}", m.as_str(), s.bias));
    }
    let mut se_ok = true;
    let mut se_parts = Vec::new();
    for (m, target) in TABLE2_SE {
        let s = summary(&r, m);
        let ok = (s.empirical_se / target - 1.0).abs() <= 0.15;
        se_ok &= ok;
        se_parts.push(format!(
            "{} emp SE {:.4} vs {:.3}",
            m.as_str(),
            s.empirical_se,
            target
        ));
    }
    (
        Verdict::new(bias_ok, bias_parts.join("; ")),
        Verdict::new(se_ok, se_parts.join("; ")),
    )
}

/// Power ordering at low covariate noise and its reversal at high noise.
pub fn power_ordering(reps: usize) -> Verdict {
    let cells = preset("table3").unwrap();
    let pick = |s2: f64, miss: f64| {
        let c = cells
            .iter()
            .find(|c| {
                c.sigma2_x == s2
                    && c.target_missing_frac == miss
                    && c.error_kind == ErrorKind::Normal
            })
            .unwrap()
            .clone();
        let r = run_mc(
            &ScenarioConfig {
                n: 500,
                mc_reps: reps,
                ..c
            },
            None,
        )
        .unwrap();
        (
            summary(&r, Method::SemiPara).rejection_rate,
            summary(&r, Method::CompleteCase).rejection_rate,
        )
    };
    let (sp_lo, cc_lo) = pick(0.1, 0.3);
    let (sp_hi, cc_hi) = pick(5.0, 0.6);
    let pass = sp_lo - cc_lo >= 0.15 && sp_hi < cc_hi;
    Verdict::new(
        pass,
        format!(
            "low noise: semi-para {sp_lo:.3} vs complete-case {cc_lo:.3}; high noise: semi-para {sp_hi:.3} vs complete-case {cc_hi:.3}"
        ),
    )
}

/// Cross-fitting reproducibility and its agreement with the corrected sandwich.
pub fn cross_fitting(reps: usize) -> Verdict {
    // determinism: one dataset fitted twice, and a short MC run repeated with different pool sizes
    let d = simulated(0);
    let cfg = FitConfig {
        variance: VarianceMethod::Sscf,
        seed: 99,
        ..FitConfig::default()
    };
    let a = fit(&d, &cfg, &opts()).unwrap().primary;
    let b = fit(&d, &cfg, &opts()).unwrap().primary;
    let short = ScenarioConfig {
        mc_reps: 12,
        methods: vec![Method::SemiParaSscf, Method::SemiSemi],
        ..ScenarioConfig::design_a()
    };
    let r1 = serde_json::to_string(&run_mc(&short, None).unwrap()).unwrap();
    let r2 = serde_json::to_string(&run_mc(&short, Some(1)).unwrap()).unwrap();
    let deterministic = a.to_json() == b.to_json() && r1 == r2;

    let cfg = ScenarioConfig {
        n: 500,
        target_missing_frac: 0.3,
        mc_reps: reps,
        methods: vec![Method::SemiPara, Method::SemiParaSscf],
        ..ScenarioConfig::design_a()
    };
    let r = run_mc(&cfg, None).unwrap();
    let t1 = summary(&r, Method::SemiPara).mean_asymptotic_se;
    let cf = summary(&r, Method::SemiParaSscf).mean_asymptotic_se;
    let rel = cf / t1 - 1.0;
    Verdict::new(
        deterministic && rel.abs() <= 0.2,
        format!(
            "reruns identical: {deterministic}; mean SE cross-fit {cf:.4} vs corrected sandwich {t1:.4} ({:+.1}%)",
            100.0 * rel
        ),
    )
}

// ------------------------------------------------------------- fast criteria

/// One replicate of the robustness design at its default settings.
pub fn simulated(rep: usize) -> Dataset {
    let cfg = ScenarioConfig::design_a();
    let delta = detection_limit(&cfg).unwrap();
    generate(&cfg, rep, delta).unwrap()
}

fn design_rows(d: &Dataset) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x = (0..d.n())
        .map(|i| d.primary_design_row(i, d.x_value[i]))
        .collect();
    (x, d.y.clone())
}

/// Uncensored data: the estimator reduces to least squares with the HC0 sandwich.
pub fn least_squares_equivalence() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut identical = true;
    for seed in 0..20u64 {
        let n = 40 + 23 * seed as usize;
        let d = random_linear_dataset(1000 + seed, n, true);
        assert_eq!(d.n_obs(), n);
        let known = fit(
            &d,
            &FitConfig {
                variance: VarianceMethod::KnownEta,
                ..FitConfig::default()
            },
            &opts(),
        )
        .unwrap()
        .primary;
        let t1 = fit(&d, &FitConfig::default(), &opts()).unwrap().primary;
        let (x, y) = design_rows(&d);
        let beta = qr_least_squares(&x, &y);
        let cov = hc0_sandwich(&x, &y, &beta);
        for j in 0..beta.len() {
            worst = worst.max((known.beta_hat[j] - beta[j]).abs() / beta[j].abs().max(1.0));
            let se = cov[j][j].sqrt();
            worst = worst.max((known.std_errors[j] - se).abs() / se);
            for k in 0..beta.len() {
                let s = known.sigma_beta[(j, k)] / n as f64;
                worst = worst.max((s - cov[j][k]).abs() / cov[j][j].max(cov[k][k]));
            }
        }
        identical &= known.sigma_beta == t1.sigma_beta && known.beta_hat == t1.beta_hat;
    }
    Verdict::new(
        worst <= 1e-8 && identical,
        format!("max relative deviation {worst:.2e}; corrected sandwich identical: {identical}"),
    )
}

/// Closed-form truncated means against numerical integration.
pub fn truncated_moments() -> Verdict {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for k in 0..1000 {
        let mu = -5.0 + 10.0 * r.random::<f64>();
        let s2 = 0.05 + 20.0 * r.random::<f64>();
        let sd = s2.sqrt();
        // cover the extremes explicitly
        let b = match k {
            0 => -8.0,
            1 => 8.0,
            _ => -8.0 + 16.0 * r.random::<f64>(),
        };
        let delta = mu + b * sd;
        let below = truncated_mean_below(mu, s2, delta).unwrap();
        let above = truncated_mean_above(mu, s2, delta).unwrap();
        let nb = truncated_mean_below_numeric(mu, s2, delta);
        let na = -truncated_mean_below_numeric(-mu, s2, -delta);
        worst = worst
            .max((below - nb).abs() / nb.abs().max(1.0))
            .max((above - na).abs() / na.abs().max(1.0));
        let p = std_normal_cdf(b);
        let total = p * below + (1.0 - p) * above;
        worst_identity = worst_identity.max((total - mu).abs());
    }
    Verdict::new(
        worst <= 1e-8 && worst_identity <= 1e-10,
        format!(
            "max deviation from quadrature {worst:.2e}; total expectation {worst_identity:.2e}"
        ),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

fn central<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn aux_fit(gamma: Vec<f64>, sigma2: f64, scale: AuxScale) -> ParametricAuxFit {
    let q = gamma.len() + 1;
    ParametricAuxFit {
        gamma,
        sigma2_x: sigma2,
        scale,
        fisher_info: DenseMatrix::identity(q),
        n_obs: 0,
        converged: true,
        log_likelihood: 0.0,
        iterations: 0,
    }
}

/// Analytic gradients against central differences.
pub fn derivatives() -> Verdict {
    let mut r = rng(11);
    let (mut w_d, mut w_m, mut w_s, mut w_h) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for cfg in 0..50u64 {
        let d = random_linear_dataset(500 + cfg, 60, false);
        let link = if cfg % 2 == 0 {
            Link::Identity
        } else {
            Link::Logit
        };
        let scale = if cfg % 4 < 2 {
            AuxScale::Linear
        } else {
            AuxScale::Log
        };
        let beta: Vec<f64> = (0..d.p_beta())
            .map(|_| -1.0 + 2.0 * r.random::<f64>())
            .collect();
        let gamma: Vec<f64> = (0..=d.p_z()).map(|_| -0.5 + r.random::<f64>()).collect();
        let s2 = 0.2 + r.random::<f64>();
        let aux = aux_fit(gamma.clone(), s2, scale);
        let model = MeanModel {
            link,
            beta: &beta,
            aux: AuxRef::Parametric(&aux),
            normalize_htilde: true,
        };
        let censored = (0..d.n()).find(|&i| !d.x_observed[i]).unwrap();
        let observed = (0..d.n()).find(|&i| d.x_observed[i]).unwrap();
        for i in [censored, observed] {
            let row = evaluate_row(&d, i, &model, true).unwrap();
            for j in 0..beta.len() {
                let fd = central(
                    |t| {
                        let mut b = beta.clone();
                        b[j] = t;
                        conditional_mean(&d, i, &MeanModel { beta: &b, ..model }).unwrap()
                    },
                    beta[j],
                );
                w_d = w_d.max(rel_err(row.d_beta[j], fd));
            }
            let m = row.m_eta.unwrap();
            for k in 0..=gamma.len() {
                let base = if k < gamma.len() { gamma[k] } else { s2 };
                let fd = central(
                    |t| {
                        let mut g = gamma.clone();
                        let mut v = s2;
                        if k < g.len() {
                            g[k] = t;
                        } else {
                            v = t;
                        }
                        let a = aux_fit(g, v, scale);
                        conditional_mean(
                            &d,
                            i,
                            &MeanModel {
                                aux: AuxRef::Parametric(&a),
                                ..model
                            },
                        )
                        .unwrap()
                    },
                    base,
                );
                w_m = w_m.max(rel_err(m[k], fd));
            }
        }
        // likelihood of the auxiliary model
        let score = truncated_normal_score(&gamma, s2, &d).unwrap();
        let hess = truncated_normal_hessian(&gamma, s2, &d).unwrap();
        let q = gamma.len();
        let perturbed = |k: usize, t: f64| {
            let mut g = gamma.clone();
            let mut v = s2;
            if k < q {
                g[k] = t;
            } else {
                v = t;
            }
            (g, v)
        };
        for k in 0..=q {
            let base = if k < q { gamma[k] } else { s2 };
            let fd = central(
                |t| {
                    let (g, v) = perturbed(k, t);
                    truncated_normal_loglik(&g, v, &d).unwrap()
                },
                base,
            );
            w_s = w_s.max(rel_err(score[k], fd));
            for l in 0..=q {
                let fd = central(
                    |t| {
                        let (g, v) = perturbed(k, t);
                        truncated_normal_score(&g, v, &d).unwrap()[l]
                    },
                    base,
                );
                w_h = w_h.max(rel_err(hess[(l, k)], fd));
            }
        }
    }
    let worst = w_d.max(w_m).max(w_s).max(w_h);
    Verdict::new(
        worst <= 1e-5,
        format!("max relative error: D {w_d:.1e}, M {w_m:.1e}, score {w_s:.1e}, Hessian {w_h:.1e}"),
    )
}

/// Kaplan-Meier without censoring and the four-point hand example.
pub fn kaplan_meier_cases() -> Verdict {
    let mut r = rng(3);
    let n = 37;
    let values: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let km = kaplan_meier(&values, &vec![true; n]).unwrap();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let ecdf_ok = km.jump_points == sorted
        && km.jump_masses.iter().all(|&m| m == 1.0 / n as f64)
        && sorted
            .iter()
            .enumerate()
            .all(|(k, &v)| km.eval(v) == (0..=k).map(|_| 1.0 / n as f64).sum::<f64>().min(1.0));

    // rows (x, z): (1, 8) observed, (·, 8) censored, (1, 6) observed, (·, 6) censored
    let d = Dataset::from_values(
        vec![0.0; 4],
        vec![1.0, f64::NAN, 1.0, f64::NAN],
        DenseMatrix::zeros(4, 0),
        DenseMatrix::from_row_major(4, 1, vec![8.0, 8.0, 6.0, 6.0]).unwrap(),
        0.0,
    )
    .unwrap();
    let s = km_residual_cdf(&d, &[-10.0, 1.0], Transform::Negate, None).unwrap();
    let hand_ok =
        s.xi_hat.jump_points == vec![1.0, 3.0] && s.xi_hat.jump_masses == vec![0.25, 0.375];
    Verdict::new(
        ecdf_ok && hand_ok,
        format!(
            "no-censoring equals ECDF: {ecdf_ok}; hand example masses {:?}",
            s.xi_hat.jump_masses
        ),
    )
}

fn psd(m: &DenseMatrix) -> bool {
    // LDLᵀ with a tiny relative ridge; a negative pivot means an indefinite matrix
    let p = m.rows();
    let scale = (0..p)
        .map(|i| m[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut a: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| m[(i, j)]).collect())
        .collect();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1e-10 * scale;
    }
    for k in 0..p {
        if a[k][k] < 0.0 {
            return false;
        }
        if a[k][k] == 0.0 {
            continue;
        }
        for i in k + 1..p {
            let f = a[i][k] / a[k][k];
            for j in k..p {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    true
}

/// Surrogate irrelevance, positive semidefinite variances, and the Wald tail.
pub fn properties() -> Verdict {
    // observed-row means do not depend on z
    let d = random_linear_dataset(42, 120, false);
    let aux = fit_truncated_normal(&d, &opts()).unwrap();
    let beta = vec![0.3, 1.1, -0.2, 0.5];
    let mut irrelevant = true;
    let mut r = rng(5);
    for link in [Link::Identity, Link::Logit] {
        let model = MeanModel {
            link,
            beta: &beta,
            aux: AuxRef::Parametric(&aux),
            normalize_htilde: true,
        };
        let mut moved = d.clone();
        let shifted =
            d.z.as_slice()
                .iter()
                .map(|v| v + 5.0 * normal(&mut r))
                .collect();
        moved.z = DenseMatrix::from_row_major(d.n(), d.p_z(), shifted).unwrap();
        for i in d.observed_indices() {
            irrelevant &= conditional_mean(&d, i, &model).unwrap()
                == conditional_mean(&moved, i, &model).unwrap();
        }
    }

    // every reported variance is PSD
    let mut fits: Vec<PrimaryFit> = Vec::new();
    for seed in 0..4 {
        let d = simulated(seed);
        for variance in [
            VarianceMethod::KnownEta,
            VarianceMethod::Theorem1,
            VarianceMethod::Sscf,
        ] {
            fits.push(
                fit(
                    &d,
                    &FitConfig {
                        variance,
                        ..FitConfig::default()
                    },
                    &opts(),
                )
                .unwrap()
                .primary,
            );
        }
        fits.push(
            fit(&d, &FitConfig::semiparametric(Transform::Negate), &opts())
                .unwrap()
                .primary,
        );
        let mut bin = d.clone();
        for y in bin.y.iter_mut() {
            *y = if *y > 2.5 { 1.0 } else { 0.0 };
        }
        fits.push(
            fit(
                &bin,
                &FitConfig {
                    link: Link::Logit,
                    ..FitConfig::default()
                },
                &opts(),
            )
            .unwrap()
            .primary,
        );
    }
    let all_psd = fits.iter().all(|f| psd(&f.sigma_beta));

    // Wald p-value at the 5% critical value
    let f = &fits[1];
    let j = 1;
    let null = f.beta_hat[j] - 3.841459f64.sqrt() * f.std_errors[j];
    let w = wald_coefficient(f, j, null).unwrap();
    let p_ok = (w.statistic - 3.841459).abs() < 1e-9
        && (w.p_value - 0.05).abs() <= 1e-6
        && (chi_square_sf(3.841459, 1) - chi_square_upper(3.841459, 1)).abs() <= 1e-12;
    Verdict::new(
        irrelevant && all_psd && p_ok,
        format!(
            "surrogate irrelevance: {irrelevant}; {} variances PSD: {all_psd}; p at 3.841459 = {:.8}",
            fits.len(),
            w.p_value
        ),
    )
}
