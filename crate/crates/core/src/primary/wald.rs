use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::rank;
use crate::numerics::{chi_square_sf, solve_spd, DenseMatrix};

use super::PrimaryFit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub c: DenseMatrix,
    pub b: Vec<f64>,
    /// `Cβ̂ - b`.
    pub contrast: Vec<f64>,
}

/// Tests `H₀: Cβ = b` with `W = n (Cβ̂ - b)ᵀ (C Σ̂β Cᵀ)⁻¹ (Cβ̂ - b)`.
pub fn wald_test(fit: &PrimaryFit, c: &DenseMatrix, b: &[f64]) -> Result<WaldResult> {
    let p = fit.beta_hat.len();
    if c.cols() != p {
        return Err(Error::Dimension(format!(
            "constraint matrix has {} columns, expected {p}",
            c.cols()
        )));
    }
    if c.rows() != b.len() {
        return Err(Error::Dimension(format!(
            "constraint matrix has {} rows but b has {} entries",
            c.rows(),
            b.len()
        )));
    }
    if c.rows() == 0 || rank(c, 1e-10) < c.rows() {
        return Err(Error::ConstraintRankDeficient);
    }
    let contrast: Vec<f64> = c
        .matvec(&fit.beta_hat)?
        .iter()
        .zip(b)
        .map(|(a, b)| a - b)
        .collect();
    let middle = c.matmul(&fit.sigma_beta)?.matmul(&c.transpose())?;
    let sol =
        solve_spd(&middle, &DenseMatrix::column(&contrast)).map_err(|_| Error::SingularSystem)?;
    let quad: f64 = contrast
        .iter()
        .zip(sol.as_slice())
        .map(|(a, b)| a * b)
        .sum();
    let statistic = fit.n as f64 * quad;
    let dof = c.rows();
    Ok(WaldResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        c: c.clone(),
        b: b.to_vec(),
        contrast,
    })
}

/// Single-coefficient test of `β_j = value`.
pub fn wald_coefficient(fit: &PrimaryFit, j: usize, value: f64) -> Result<WaldResult> {
    let p = fit.beta_hat.len();
    if j >= p {
        return Err(Error::Dimension(format!(
            "coefficient {j} out of range for {p}"
        )));
    }
    let mut row = vec![0.0; p];
    row[j] = 1.0;
    wald_test(fit, &DenseMatrix::from_row_major(1, p, row)?, &[value])
}
