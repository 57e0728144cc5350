//! Special functions, truncated-normal moments, root finding and small dense
//! linear algebra shared by every estimator.

pub mod matrix;
pub mod newton;
pub mod quadrature;
pub mod special;
pub mod truncated;

pub use matrix::{invert_spd, is_psd, solve_spd, DenseMatrix};
pub use newton::{finite_diff_jacobian, newton_solve, NewtonOutcome, RootSolveOptions};
pub use special::{chi_square_sf, normal_pdf_cdf};
pub use truncated::{
    lognormal_mean_below_grad, truncated_mean_above, truncated_mean_below,
    truncated_mean_below_grad,
};
