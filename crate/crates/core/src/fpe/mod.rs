//! Explicit conservative integrator for drift-diffusion equations with
//! possibly density-dependent coefficients.

pub mod coefficients;
pub mod solver;

pub use coefficients::{diffusion_at_nodes, eval_drift, eval_yardsale_diffusion, CoefficientSpec, Diffusion, Drift};
pub use solver::{
    advance, run_fpe, run_fpe_from, stability_bound, step_fpe, Boundary, FpeRun, FpeRunConfig, GridSpec,
    InitialDensity, StepReport, TimeSpec, STABILITY_FACTOR, TOL_MASS_STEP, TOL_NEG,
};
