//! Simulation designs and the seeded Monte Carlo harness.

pub mod generate;
pub mod runner;
pub mod scenario;

pub use generate::{detection_limit, generate, replicate_rng};
pub use runner::{fit_method, run_mc, run_replicate, MCReport, MethodSummary, RepOutcome};
pub use scenario::{
    preset, CovariateParams, Design, ErrorKind, Hypothesis, Method, ScenarioConfig, ScenarioFile,
};
