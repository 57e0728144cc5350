//! Regression with a covariate left-censored at a detection limit, using
//! surrogate variables to model the censored values.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auxiliary;
pub mod cli;
pub mod data;
pub mod error;
pub mod numerics;
pub mod primary;
pub mod simulation;

pub use data::{Dataset, FitConfig};
pub use error::{Error, Result};
