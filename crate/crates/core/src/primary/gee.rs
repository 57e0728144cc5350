use crate::auxiliary::parametric::least_squares;
use crate::data::{Dataset, Link, WorkingVariance};
use crate::error::{Error, Result};
use crate::numerics::{finite_diff_jacobian, newton_solve, DenseMatrix, RootSolveOptions};

use super::mean::{evaluate_row, AuxRef, MeanModel};

/// Per-row ingredients of the estimating function at a fixed β.
#[derive(Debug, Clone)]
pub struct RowPieces {
    pub d_beta: Vec<f64>,
    pub m_eta: Option<Vec<f64>>,
    pub variance: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GeeSpec<'a> {
    pub link: Link,
    pub working_variance: WorkingVariance,
    pub aux: AuxRef<'a>,
    pub normalize_htilde: bool,
}

/// Row pieces plus the indices of rows whose semiparametric window was empty.
pub fn row_pieces(
    d: &Dataset,
    spec: &GeeSpec<'_>,
    beta: &[f64],
    want_eta: bool,
) -> Result<(Vec<RowPieces>, Vec<usize>)> {
    let model = MeanModel {
        link: spec.link,
        beta,
        aux: spec.aux,
        normalize_htilde: spec.normalize_htilde,
    };
    let mut out = Vec::with_capacity(d.n());
    let mut fallback = Vec::new();
    for i in 0..d.n() {
        let r = evaluate_row(d, i, &model, want_eta)?;
        if r.window_fallback {
            fallback.push(i);
        }
        out.push(RowPieces {
            variance: spec.working_variance.value(r.mean),
            residual: d.y[i] - r.mean,
            d_beta: r.d_beta,
            m_eta: r.m_eta,
        });
    }
    Ok((out, fallback))
}

/// `(1/n) Σ D_i V_i⁻¹ (y_i - g_i)`.
pub fn estimating_function(d: &Dataset, spec: &GeeSpec<'_>, beta: &[f64]) -> Result<Vec<f64>> {
    let (rows, _) = row_pieces(d, spec, beta, false)?;
    Ok(score_from(&rows, beta.len(), d.n()))
}

fn score_from(rows: &[RowPieces], p: usize, n: usize) -> Vec<f64> {
    let mut u = vec![0.0; p];
    for r in rows {
        let w = r.residual / r.variance;
        for (uk, dk) in u.iter_mut().zip(&r.d_beta) {
            *uk += dk * w;
        }
    }
    u.iter().map(|v| v / n as f64).collect()
}

/// `(1/n) Σ D_i V_i⁻¹ D_iᵀ`, the Fisher-scoring bread.
pub fn bread(rows: &[RowPieces], p: usize, n: usize) -> DenseMatrix {
    let mut b = DenseMatrix::zeros(p, p);
    for r in rows {
        b.add_outer_in_place(&r.d_beta, &r.d_beta, 1.0 / (r.variance * n as f64));
    }
    b
}

/// `(1/n) Σ (D_i V_i⁻¹ S_i)(D_i V_i⁻¹ S_i)ᵀ`.
pub fn meat(rows: &[RowPieces], p: usize, n: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(p, p);
    for r in rows {
        let w = r.residual / r.variance;
        let s: Vec<f64> = r.d_beta.iter().map(|v| v * w).collect();
        m.add_outer_in_place(&s, &s, 1.0 / n as f64);
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeeSolution {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub residual_max: f64,
    pub window_fallback_rows: Vec<usize>,
}

fn starting_value(d: &Dataset, link: Link) -> Result<Vec<f64>> {
    let obs = d.observed_indices();
    let p = d.p_beta();
    match link {
        Link::Identity => {
            let rows: Vec<Vec<f64>> = obs
                .iter()
                .map(|&i| d.primary_design_row(i, d.x_value[i]))
                .collect();
            let y: Vec<f64> = obs.iter().map(|&i| d.y[i]).collect();
            if rows.len() >= p {
                if let Ok((b, _)) = least_squares(&rows, &y) {
                    return Ok(b);
                }
            }
            let mut b = vec![0.0; p];
            b[0] = d.y.iter().sum::<f64>() / d.n() as f64;
            Ok(b)
        }
        Link::Logit => {
            let ybar = (d.y.iter().sum::<f64>() / d.n() as f64).clamp(0.01, 0.99);
            let mut b = vec![0.0; p];
            b[0] = (ybar / (1.0 - ybar)).ln();
            Ok(b)
        }
    }
}

/// Solves `U(β) = 0` by Fisher scoring with step halving.
///
/// If scoring stalls, one more attempt is made with a finite-difference
/// Jacobian from the last iterate.
pub fn solve_gee(
    d: &Dataset,
    spec: &GeeSpec<'_>,
    opts: &RootSolveOptions,
    start: Option<&[f64]>,
) -> Result<GeeSolution> {
    let p = d.p_beta();
    let x0 = match start {
        Some(s) if s.len() == p => s.to_vec(),
        Some(s) => {
            return Err(Error::Dimension(format!(
                "starting value has {} entries, expected {p}",
                s.len()
            )))
        }
        None => starting_value(d, spec.link)?,
    };
    let n = d.n();
    let residual = |b: &[f64]| estimating_function(d, spec, b);
    let scoring = |b: &[f64]| -> Result<DenseMatrix> {
        let (rows, _) = row_pieces(d, spec, b, false)?;
        Ok(bread(&rows, p, n).scale(-1.0))
    };
    let outcome = match newton_solve(residual, scoring, &x0, opts) {
        Ok(o) => o,
        Err(Error::NoConvergence { last, .. }) => {
            let from = if last.iter().all(|v| v.is_finite()) {
                last
            } else {
                x0
            };
            let fd = |b: &[f64]| finite_diff_jacobian(|t| estimating_function(d, spec, t), b, 1e-6);
            newton_solve(residual, fd, &from, opts).map_err(|e| match e {
                Error::NoConvergence { .. } => Error::GeeNotConverged,
                other => other,
            })?
        }
        Err(Error::SingularSystem) => return Err(Error::RankDeficientInformation),
        Err(e) => return Err(e),
    };
    let (_, fallback) = row_pieces(d, spec, &outcome.x, false)?;
    Ok(GeeSolution {
        beta: outcome.x,
        iterations: outcome.iterations,
        residual_max: outcome.residual_max,
        window_fallback_rows: fallback,
    })
}
