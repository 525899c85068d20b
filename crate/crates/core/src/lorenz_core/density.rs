//! Sampled densities and their incomplete zeroth and first moments.
//!
//! Between nodes a density is read as the piecewise-linear interpolant of its
//! nodal values. The zeroth moment of that interpolant is exactly the
//! composite trapezoid rule; the first moment adds a per-cell correction
//! `dx^2 (rho_k - rho_{k+1}) / 6` to the trapezoid sum of `rho * x`. Using the
//! exact moments of one interpolant keeps `dL/dF = x` true node by node, which
//! the Lorenz transform relies on.

use serde::{Deserialize, Serialize};

use super::grid::{cumulative_trapezoid, trapezoid, Domain, SpatialGrid};
use crate::error::{Error, Result};

/// Probability density sampled on a spatial grid at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    grid: SpatialGrid,
    values: Vec<f64>,
    time: f64,
}

impl DensityField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "density has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "density value {} at node {i} is negative or not finite",
                values[i]
            )));
        }
        if !(time >= 0.0) {
            return Err(Error::invalid(format!("density time {time} is negative")));
        }
        Ok(Self { grid, values, time })
    }

    /// Samples `pdf` at every node of `grid`.
    pub fn from_fn(grid: SpatialGrid, time: f64, pdf: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| pdf(x)).collect();
        Self::new(grid, values, time)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn domain(&self) -> Domain {
        self.grid.domain()
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Trapezoid mass.
    pub fn mass(&self) -> f64 {
        trapezoid(self.grid.nodes(), &self.values)
    }

    /// Rescales to unit trapezoid mass.
    pub fn normalized(mut self) -> Result<Self> {
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid(format!("cannot normalize density of mass {mass}")));
        }
        self.values.iter_mut().for_each(|v| *v /= mass);
        Ok(self)
    }

    /// First moment of the piecewise-linear density.
    pub fn first_moment(&self) -> f64 {
        let xs = self.grid.nodes();
        let mut acc = 0.0;
        for k in 0..xs.len() - 1 {
            acc += cell_first_moment(xs[k], xs[k + 1], self.values[k], self.values[k + 1]);
        }
        acc
    }

    /// Second moment of the piecewise-linear density.
    pub fn second_moment(&self) -> f64 {
        let xs = self.grid.nodes();
        let rho = &self.values;
        let mut acc = 0.0;
        for k in 0..xs.len() - 1 {
            let (a, b) = (xs[k], xs[k + 1]);
            acc += (b - a) / 12.0
                * (rho[k] * (3.0 * a * a + 2.0 * a * b + b * b) + rho[k + 1] * (a * a + 2.0 * a * b + 3.0 * b * b));
        }
        acc
    }

    /// Mean of the density, dividing by its own mass.
    pub fn mean(&self) -> f64 {
        self.first_moment() / self.mass()
    }

    /// Standard deviation about [`mean`](Self::mean).
    pub fn std(&self) -> f64 {
        let mass = self.mass();
        let mean = self.first_moment() / mass;
        (self.second_moment() / mass - mean * mean).max(0.0).sqrt()
    }

    /// Checks the discrete stand-in for vanishing density at infinity.
    pub fn check_tails(&self, threshold: f64) -> Result<()> {
        let first = self.values[0];
        let last = self.values[self.values.len() - 1];
        if first > threshold || last > threshold {
            return Err(Error::invalid(format!(
                "density at grid ends ({first:e}, {last:e}) exceeds tail threshold {threshold:e}"
            )));
        }
        Ok(())
    }

    pub fn check_mass(&self, tol: f64) -> Result<()> {
        let mass = self.mass();
        if (mass - 1.0).abs() > tol {
            return Err(Error::invalid(format!(
                "density mass {mass} differs from 1 by more than {tol:e}"
            )));
        }
        Ok(())
    }
}

/// Exact first moment of the linear interpolant over one cell.
pub(crate) fn cell_first_moment(a: f64, b: f64, rho_a: f64, rho_b: f64) -> f64 {
    (b - a) / 6.0 * (rho_a * (2.0 * a + b) + rho_b * (a + 2.0 * b))
}

/// Cumulative distribution function sampled on the density's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCDF {
    grid: SpatialGrid,
    values: Vec<f64>,
    time: f64,
}

impl SampledCDF {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Value at the last node, i.e. the total trapezoid mass.
    pub fn total(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Running trapezoid integral of the density.
pub fn cdf_from_density(density: &DensityField) -> Result<SampledCDF> {
    let values = cumulative_trapezoid(density.nodes(), density.values());
    if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Numerical(format!(
            "cumulative distribution decreases at node {}; density input is corrupted",
            i + 1
        )));
    }
    Ok(SampledCDF {
        grid: density.grid().clone(),
        values,
        time: density.time(),
    })
}

/// Running first moment `L(x) = integral of y rho(y) up to x`, one entry per node.
///
/// The last entry is the first moment of the whole density.
pub fn incomplete_first_moment(density: &DensityField) -> Vec<f64> {
    let xs = density.nodes();
    let rho = density.values();
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..xs.len() - 1 {
        acc += cell_first_moment(xs[k], xs[k + 1], rho[k], rho[k + 1]);
        out.push(acc);
    }
    out
}

/// Standard normal density.
pub(crate) fn gaussian_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(lo: f64, hi: f64, n: usize, height: f64) -> DensityField {
        let grid = SpatialGrid::uniform(lo, hi, n, Domain::RealLine).unwrap();
        DensityField::from_fn(grid, 0.0, |_| height).unwrap()
    }

    #[test]
    fn rejects_negative_values() {
        let grid = SpatialGrid::uniform(0.0, 1.0, 3, Domain::RealLine).unwrap();
        assert!(DensityField::new(grid.clone(), vec![0.0, -1e-3, 0.0], 0.0).is_err());
        assert!(DensityField::new(grid, vec![0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn cdf_of_unit_uniform_is_identity() {
        let d = uniform(0.0, 1.0, 11, 1.0);
        let cdf = cdf_from_density(&d).unwrap();
        for (x, f) in d.nodes().iter().zip(cdf.values()) {
            assert!((x - f).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_of_half_uniform_on_two() {
        let d = uniform(0.0, 2.0, 21, 0.5);
        let cdf = cdf_from_density(&d).unwrap();
        // node 10 is x = 1
        assert!((cdf.values()[10] - 0.5).abs() < 1e-15);
        assert!((cdf.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cdf_of_symmetric_gaussian_is_half_at_centre() {
        let grid = SpatialGrid::uniform(-8.0, 8.0, 401, Domain::RealLine).unwrap();
        let d = DensityField::from_fn(grid, 0.0, |x| gaussian_pdf(x, 0.0, 1.0)).unwrap();
        let cdf = cdf_from_density(&d).unwrap();
        assert!((cdf.values()[200] - 0.5).abs() < 1e-12);
        assert!((cdf.total() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn first_moment_examples() {
        let d = uniform(0.0, 1.0, 11, 1.0);
        let l = incomplete_first_moment(&d);
        for (x, lx) in d.nodes().iter().zip(&l) {
            assert!((lx - x * x / 2.0).abs() < 1e-15);
        }
        let d = uniform(0.0, 2.0, 17, 0.5);
        assert!((incomplete_first_moment(&d)[16] - 1.0).abs() < 1e-15);

        let grid = SpatialGrid::uniform(-8.0, 8.0, 401, Domain::RealLine).unwrap();
        let g = DensityField::from_fn(grid, 0.0, |x| gaussian_pdf(x, 0.0, 1.0)).unwrap();
        assert!(incomplete_first_moment(&g).last().unwrap().abs() < 1e-14);
    }

    #[test]
    fn moments_of_gaussian() {
        let grid = SpatialGrid::uniform(-6.0, 10.0, 801, Domain::RealLine).unwrap();
        let g = DensityField::from_fn(grid, 0.0, |x| gaussian_pdf(x, 2.0, 1.5)).unwrap();
        assert!((g.mean() - 2.0).abs() < 1e-6);
        assert!((g.std() - 1.5).abs() < 1e-3);
    }

    #[test]
    fn tail_check() {
        let d = uniform(0.0, 1.0, 5, 1.0);
        assert!(d.check_tails(1e-8).is_err());
        let grid = SpatialGrid::uniform(-10.0, 10.0, 201, Domain::RealLine).unwrap();
        let g = DensityField::from_fn(grid, 0.0, |x| gaussian_pdf(x, 0.0, 1.0)).unwrap();
        assert!(g.check_tails(1e-12).is_ok());
    }
}
