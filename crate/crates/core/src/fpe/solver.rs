use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::coefficients::{diffusion_at_nodes, eval_drift, CoefficientSpec, Diffusion};
use crate::error::{Error, Result};
use crate::lorenz_core::density::gaussian_pdf;
use crate::lorenz_core::metrics::density_record;
use crate::lorenz_core::{DensityField, Domain, MetricSeries, SpatialGrid};

/// Fraction of `dx^2 / max D` an explicit step may take.
pub const STABILITY_FACTOR: f64 = 0.4;
/// Automatic steps use this share of the stability bound.
pub const AUTO_DT_SAFETY: f64 = 0.9;
pub const TOL_NEG: f64 = 1e-12;
pub const TOL_MASS_STEP: f64 = 1e-8;
/// Grid end densities above this raise a truncation warning.
pub const TAIL_THRESHOLD: f64 = 1e-8;

/// Uniform spatial grid description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub domain: Domain,
}

impl GridSpec {
    pub fn build(&self) -> Result<SpatialGrid> {
        SpatialGrid::uniform(self.lo, self.hi, self.count, self.domain)
    }

    /// Wealth grid `[0, hi]`.
    pub fn wealth(hi: f64, count: usize) -> Self {
        Self {
            lo: 0.0,
            hi,
            count,
            domain: Domain::PositiveHalfLine,
        }
    }

    /// Wealth grid `[dx, hi]` with `dx = hi / count`, one cell above zero.
    pub fn wealth_offset(hi: f64, count: usize) -> Self {
        let dx = hi / count as f64;
        Self {
            lo: dx,
            hi,
            count,
            domain: Domain::PositiveHalfLine,
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }
}

/// Initial density descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum InitialDensity {
    Gaussian {
        mean: f64,
        std: f64,
    },
    /// Point mass, regularized as a Gaussian of width `3 dx`.
    PointMass {
        at: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Gamma shape with the given mean: `w^{k-1} e^{-k w / mean}`.
    Gamma {
        shape: f64,
        mean: f64,
    },
    /// Nodal values on the run grid.
    Tabulated {
        values: Vec<f64>,
    },
}

impl InitialDensity {
    /// Samples the descriptor, sets the end nodes to zero and normalizes.
    pub fn build(&self, grid: &SpatialGrid) -> Result<DensityField> {
        let dx = grid.max_spacing();
        let values: Vec<f64> = match self {
            InitialDensity::Gaussian { mean, std } => {
                if !(*std > 0.0) {
                    return Err(Error::invalid(format!("Gaussian std {std} must be positive")));
                }
                if *std < 3.0 * dx {
                    warn!("initial Gaussian std {std} is below 3 grid cells ({})", 3.0 * dx);
                }
                grid.nodes().iter().map(|&x| gaussian_pdf(x, *mean, *std)).collect()
            }
            InitialDensity::PointMass { at } => grid.nodes().iter().map(|&x| gaussian_pdf(x, *at, 3.0 * dx)).collect(),
            InitialDensity::Uniform { lo, hi } => {
                if !(hi > lo) {
                    return Err(Error::invalid(format!("uniform bounds [{lo}, {hi}] are empty")));
                }
                grid.nodes()
                    .iter()
                    .map(|&x| if x >= *lo && x <= *hi { 1.0 / (hi - lo) } else { 0.0 })
                    .collect()
            }
            InitialDensity::Gamma { shape, mean } => {
                if !(*shape > 0.0) || !(*mean > 0.0) {
                    return Err(Error::invalid(format!(
                        "gamma shape {shape} and mean {mean} must be positive"
                    )));
                }
                if grid.domain() != Domain::PositiveHalfLine {
                    return Err(Error::RequiresPositiveDomain);
                }
                let rate = shape / mean;
                grid.nodes()
                    .iter()
                    .map(|&x| {
                        if x > 0.0 {
                            ((shape - 1.0) * x.ln() - rate * x).exp()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            InitialDensity::Tabulated { values } => values.clone(),
        };
        let mut values = values;
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "tabulated density has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let n = values.len();
        values[0] = 0.0;
        values[n - 1] = 0.0;
        DensityField::new(grid.clone(), values, 0.0)?.normalized()
    }
}

/// Time-stepping controls shared by the two integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    /// Fixed step; `None` picks the largest stable step each iteration.
    pub dt: Option<f64>,
    /// Time between recorded snapshots; `None` records only the ends.
    pub record_interval: Option<f64>,
}

impl TimeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid(format!("t_end {} must be finite and >= 0", self.t_end)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::invalid(format!("dt {dt} must be positive")));
            }
        }
        if let Some(r) = self.record_interval {
            if !(r > 0.0) {
                return Err(Error::invalid(format!("record interval {r} must be positive")));
            }
        }
        Ok(())
    }

    /// Record times: multiples of the interval below `t_end`, then `t_end`.
    pub fn record_times(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        if let Some(r) = self.record_interval {
            let mut k = 1u64;
            loop {
                let t = k as f64 * r;
                if t >= self.t_end * (1.0 - 1e-12) {
                    break;
                }
                out.push(t);
                k += 1;
            }
        }
        if self.t_end > 0.0 {
            out.push(self.t_end);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpeRunConfig {
    pub grid: GridSpec,
    pub initial: InitialDensity,
    pub time: TimeSpec,
    pub coefficients: CoefficientSpec,
    #[serde(default)]
    pub boundary: Boundary,
}

impl FpeRunConfig {
    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        self.time.validate()?;
        if matches!(self.coefficients.diffusion, Diffusion::YardSale { .. })
            && self.grid.domain != Domain::PositiveHalfLine
        {
            return Err(Error::RequiresPositiveDomain);
        }
        let grid = self.grid.build()?;
        let initial = self.initial.build(&grid)?;
        if let Some(dt) = self.time.dt {
            let bound = stability_bound(&initial, &self.coefficients)?;
            if dt > bound {
                return Err(Error::invalid(format!(
                    "dt {dt:e} exceeds the stability bound {bound:e}"
                )));
            }
        }
        Ok(())
    }
}

/// `0.4 dx^2 / max D` for the current density.
pub fn stability_bound(density: &DensityField, coeffs: &CoefficientSpec) -> Result<f64> {
    let dx = density.grid().max_spacing();
    let d = diffusion_at_nodes(coeffs, density)?;
    let max_d = d.iter().cloned().fold(0.0, f64::max);
    if max_d <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(STABILITY_FACTOR * dx * dx / max_d)
}

/// What one explicit step did besides producing the next density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Trapezoid mass minus one before renormalization.
    pub mass_defect: f64,
    /// Most negative nodal value before clipping (zero if none).
    pub min_value: f64,
    pub stability_bound: f64,
}

/// Treatment of the two grid ends.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// End nodes are held at zero; flux into them leaves the domain.
    Absorbing,
    /// End nodes own half cells and no flux crosses the grid ends, so the
    /// trapezoid mass is conserved to rounding. On a wealth grid anchored at
    /// zero, where the yard-sale coefficient vanishes, the trapezoid first
    /// moment is conserved as well.
    #[default]
    Reflecting,
}

/// One explicit step of `rho_t = -(Sigma rho)_x + (D rho)_xx` with the default ends.
pub fn step_fpe(density: &DensityField, coeffs: &CoefficientSpec, dt: f64) -> Result<DensityField> {
    advance(density, coeffs, dt, Boundary::default()).map(|(d, _)| d)
}

/// [`step_fpe`] plus its diagnostics.
pub fn advance(
    density: &DensityField,
    coeffs: &CoefficientSpec,
    dt: f64,
    boundary: Boundary,
) -> Result<(DensityField, StepReport)> {
    let grid = density.grid();
    let dx = grid
        .uniform_spacing(1e-9)
        .ok_or_else(|| Error::invalid("the density solver needs a uniform grid"))?;
    let d = diffusion_at_nodes(coeffs, density)?;
    let max_d = d.iter().cloned().fold(0.0, f64::max);
    let bound = if max_d > 0.0 {
        STABILITY_FACTOR * dx * dx / max_d
    } else {
        f64::INFINITY
    };
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, bound });
    }
    let xs = density.nodes();
    let rho = density.values();
    let t = density.time();
    let n = xs.len();
    let drift: Vec<f64> = xs
        .iter()
        .zip(rho)
        .map(|(&x, &r)| eval_drift(coeffs, x, t, Some(density)) * r)
        .collect();
    let spread: Vec<f64> = d.iter().zip(rho).map(|(d, r)| d * r).collect();
    // face fluxes G[k] between nodes k and k+1; their differences reproduce
    // the central stencil for -(Sigma rho)_x + (D rho)_xx
    let faces: Vec<f64> = (0..n - 1)
        .map(|k| 0.5 * (drift[k] + drift[k + 1]) - (spread[k + 1] - spread[k]) / dx)
        .collect();
    let c = dt / dx;
    let mut next = vec![0.0; n];
    for i in 1..n - 1 {
        next[i] = rho[i] - c * (faces[i] - faces[i - 1]);
    }
    if boundary == Boundary::Reflecting {
        // half control volumes at the ends, nothing crosses the outer faces
        next[0] = rho[0] - 2.0 * c * faces[0];
        next[n - 1] = rho[n - 1] + 2.0 * c * faces[n - 2];
    }
    let mut min_value = 0.0;
    for (i, v) in next.iter_mut().enumerate() {
        if *v < min_value {
            min_value = *v;
        }
        if *v < -TOL_NEG {
            return Err(Error::NegativeDensity { index: i, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let raw = DensityField::new(grid.clone(), next, t + dt)?;
    let mass_defect = raw.mass() - 1.0;
    if mass_defect.abs() > TOL_MASS_STEP {
        debug!("step at t={t} lost mass {mass_defect:e} through the boundary");
    }
    let normalized = raw.normalized()?;
    Ok((
        normalized,
        StepReport {
            mass_defect,
            min_value,
            stability_bound: bound,
        },
    ))
}

/// Output of [`run_fpe`].
#[derive(Debug, Clone, PartialEq)]
pub struct FpeRun {
    pub snapshots: Vec<DensityField>,
    pub metrics: MetricSeries,
    pub steps: usize,
    /// Largest per-step mass defect magnitude seen.
    pub max_mass_defect: f64,
}

/// Integrates to `t_end`, landing exactly on every record time.
///
/// The `mass_error` column holds the signed sum of per-step mass defects
/// absorbed by renormalization so far.
pub fn run_fpe(config: &FpeRunConfig) -> Result<FpeRun> {
    config.validate()?;
    let grid = config.grid.build()?;
    let initial = config.initial.build(&grid)?;
    run_fpe_from(initial, &config.coefficients, &config.time, config.boundary)
}

/// [`run_fpe`] from an explicit initial density.
pub fn run_fpe_from(
    initial: DensityField,
    coeffs: &CoefficientSpec,
    time: &TimeSpec,
    boundary: Boundary,
) -> Result<FpeRun> {
    coeffs.validate()?;
    time.validate()?;
    let record_times = time.record_times();
    let t0 = initial.time();
    let mut current = initial;
    let mut metrics = MetricSeries::default();
    let mut snapshots = Vec::with_capacity(record_times.len());
    let mut cumulative = 0.0;
    let mut max_defect: f64 = 0.0;
    let mut steps = 0;
    metrics.push(density_record(&current, 0.0));
    snapshots.push(current.clone());
    for &target in &record_times[1..] {
        let target = t0 + target;
        while current.time() < target {
            let remaining = target - current.time();
            let dt = match time.dt {
                Some(dt) => dt,
                None => AUTO_DT_SAFETY * stability_bound(&current, coeffs)?,
            };
            // land on the record time without a sliver step
            let dt = if remaining <= dt * (1.0 + 1e-9) { remaining } else { dt };
            let (next, report) = advance(&current, coeffs, dt, boundary)?;
            cumulative += report.mass_defect;
            max_defect = max_defect.max(report.mass_defect.abs());
            current = if remaining == dt { next.with_time(target) } else { next };
            steps += 1;
        }
        if current.values()[1] > TAIL_THRESHOLD || current.values()[current.values().len() - 2] > TAIL_THRESHOLD {
            debug!(
                "density near the grid ends exceeds {TAIL_THRESHOLD:e} at t={}",
                current.time()
            );
        }
        metrics.push(density_record(&current, cumulative));
        snapshots.push(current.clone());
    }
    Ok(FpeRun {
        snapshots,
        metrics,
        steps,
        max_mass_defect: max_defect,
    })
}
