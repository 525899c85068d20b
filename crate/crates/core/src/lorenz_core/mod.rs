//! Grids, densities, Lorenz curves, the transform between them and
//! inequality metrics.

pub mod curve;
pub mod density;
pub mod grid;
pub mod metrics;
pub mod transform;

pub use curve::{fgrid, LorenzCurve, TOL_CONVEX};
pub use density::{cdf_from_density, incomplete_first_moment, DensityField, SampledCDF};
pub use grid::{Domain, SpatialGrid};
pub use metrics::{
    gini_from_density, gini_from_lorenz, gini_rate_density, gini_rate_lorenz, hoover_from_lorenz, MetricRecord,
    MetricSeries,
};
pub use transform::{density_from_lorenz, lorenz_from_density, quantile, ReconstructedDensity};

/// Mass tolerance after explicit renormalization.
pub const TOL_MASS: f64 = 1e-6;
