use serde::{Deserialize, Serialize};

use super::matrix::{solve_general, DenseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSolveOptions {
    /// Max-norm tolerance on the residual.
    pub tol: f64,
    pub max_iter: usize,
    pub step_halving_max: usize,
}

impl Default for RootSolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
            step_halving_max: 30,
        }
    }
}

impl RootSolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config("solver tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_max: f64,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Damped Newton for `residual(x) = 0`.
///
/// A full step that does not reduce the Euclidean residual norm is halved up
/// to `step_halving_max` times.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    x0: &[f64],
    opts: &RootSolveOptions,
) -> Result<NewtonOutcome>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<DenseMatrix>,
{
    opts.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite starting point".into()));
    }
    let mut x = x0.to_vec();
    let mut r = residual(&x)?;
    if r.len() != x.len() {
        return Err(Error::Dimension(format!(
            "residual has length {} for {} unknowns",
            r.len(),
            x.len()
        )));
    }
    for iter in 0..=opts.max_iter {
        let rmax = max_norm(&r);
        if rmax <= opts.tol {
            return Ok(NewtonOutcome {
                x,
                iterations: iter,
                residual_max: rmax,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let jac = jacobian(&x)?;
        if jac.rows() != r.len() || jac.cols() != x.len() {
            return Err(Error::Dimension("jacobian shape".into()));
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_general(&jac, &neg)?;
        let base = sq_norm(&r);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.step_halving_max {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            if let Ok(rt) = residual(&trial) {
                if rt.iter().all(|v| v.is_finite()) && sq_norm(&rt) < base {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((nx, nr)) => {
                x = nx;
                r = nr;
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iter + 1,
                    residual: rmax,
                    last: x,
                })
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: max_norm(&r),
        last: x,
    })
}

/// Central-difference Jacobian, one column per coordinate of `x`.
pub fn finite_diff_jacobian<F>(mut f: F, x: &[f64], h: f64) -> Result<DenseMatrix>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::Domain(
            "finite-difference step must be positive".into(),
        ));
    }
    let mut cols = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        cols.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let m = cols.first().map_or(0, Vec::len);
    let mut jac = DenseMatrix::zeros(m, x.len());
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            jac[(i, j)] = *v;
        }
    }
    Ok(jac)
}
