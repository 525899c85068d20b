//! Closed-form oracles.

pub mod scaling;
pub mod solutions;
pub mod special;

pub use scaling::{
    flipped_quadratic_potential_residual, heat_time, heat_to_quadratic_map, quadratic_potential_residual,
    quadratic_to_heat_map, scaled_time, ScalingMapParams,
};
pub use solutions::{
    gaussian_lorenz, gaussian_lorenz_curve, heat_lorenz, heat_lorenz_curve, heat_std, ou_lorenz, ou_lorenz_curve,
    OuParams,
};
pub use special::{erf, erf_inv, erfc, erfc_inv, erfcx, normal_pdf, normal_quantile};
