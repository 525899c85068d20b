//! Inequality and moment diagnostics on both sides of the transform.

use serde::{Deserialize, Serialize};

use super::curve::{LorenzCurve, TOL_CONVEX};
use super::density::DensityField;
use super::grid::{trapezoid, Domain};
use crate::error::{Error, Result};
use crate::fpe::coefficients::{diffusion_at_nodes, CoefficientSpec};
use crate::lorenz_solver::transformed_diffusion_profile;

/// Mass and mean must be within this of one for the Gini formulas. Both
/// formulas normalize by the moments they actually see, so this only guards
/// against inputs that were never meant to be unit-wealth.
pub const GINI_MOMENT_TOL: f64 = 1e-2;

fn require_positive(domain: Domain) -> Result<()> {
    if domain != Domain::PositiveHalfLine {
        return Err(Error::RequiresPositiveDomain);
    }
    Ok(())
}

/// Twice the area between the diagonal and the curve, by trapezoid quadrature.
///
/// The curve must describe unit total wealth (`right_boundary` within
/// [`GINI_MOMENT_TOL`] of one). The area is taken against `L / right_boundary`
/// so a right boundary of exactly one gives the textbook value.
pub fn gini_from_lorenz(curve: &LorenzCurve) -> Result<f64> {
    require_positive(curve.domain())?;
    let rb = curve.right_boundary();
    if (rb - 1.0).abs() > GINI_MOMENT_TOL {
        return Err(Error::invalid(format!(
            "Gini needs unit total wealth, curve ends at {rb}"
        )));
    }
    let h = curve.spacing();
    let v = curve.values();
    let n = v.len();
    let mut area = 0.0;
    for (i, &l) in v.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        area += w * (curve.f(i) - l / rb);
    }
    Ok(2.0 * area)
}

/// `1 - double integral of min(w, y) rho(w) rho(y)` by nested trapezoid quadrature.
///
/// The double sum is evaluated in one pass: with trapezoid weights `t`,
/// `K_i = sum_j t_j min(w_i, w_j) rho_j` splits into the moment below `w_i`
/// and `w_i` times the mass above it. The result is divided by
/// `mass^2 * mean`, which is one under the preconditions.
pub fn gini_from_density(density: &DensityField) -> Result<f64> {
    require_positive(density.domain())?;
    let mass = density.mass();
    let mean = density.first_moment() / mass;
    if (mass - 1.0).abs() > GINI_MOMENT_TOL || (mean - 1.0).abs() > GINI_MOMENT_TOL {
        return Err(Error::invalid(format!(
            "Gini needs unit mass and unit mean, got mass {mass} and mean {mean}"
        )));
    }
    let xs = density.nodes();
    let rho = density.values();
    let n = xs.len();
    let mut t = vec![0.0; n];
    for k in 1..n {
        let half = 0.5 * (xs[k] - xs[k - 1]);
        t[k - 1] += half;
        t[k] += half;
    }
    let mut above = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        above[j] = acc;
        acc += t[j] * rho[j];
    }
    let mut below = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        below += t[i] * xs[i] * rho[i];
        let k_i = below + xs[i] * above[i];
        total += t[i] * rho[i] * k_i;
    }
    let trap_mass: f64 = t.iter().zip(rho).map(|(w, r)| w * r).sum();
    let trap_mean = t.iter().zip(rho).zip(xs).map(|((w, r), x)| w * r * x).sum::<f64>() / trap_mass;
    Ok(1.0 - total / (trap_mass * trap_mass * trap_mean))
}

/// Largest gap `f - L(f)` over the grid nodes.
pub fn hoover_from_lorenz(curve: &LorenzCurve) -> f64 {
    curve
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| curve.f(i) - v)
        .fold(0.0, f64::max)
}

/// Gini growth rate `2 * integral of D rho^2` for a drift-free problem.
pub fn gini_rate_density(density: &DensityField, coeffs: &CoefficientSpec) -> Result<f64> {
    if !coeffs.is_drift_free() {
        return Err(Error::DriftNotAllowed);
    }
    let d = diffusion_at_nodes(coeffs, density)?;
    let integrand: Vec<f64> = d.iter().zip(density.values()).map(|(d, r)| d * r * r).collect();
    Ok(2.0 * trapezoid(density.nodes(), &integrand))
}

/// Gini growth rate `2 * integral over f of D~ / L_ff` for a drift-free problem.
///
/// The integrand is `D~ * rho`, which vanishes at `f = 0` and `f = 1` where
/// the quantile runs off to the tails; the end nodes contribute zero.
pub fn gini_rate_lorenz(curve: &LorenzCurve, coeffs: &CoefficientSpec) -> Result<f64> {
    if !coeffs.is_drift_free() {
        return Err(Error::DriftNotAllowed);
    }
    curve.check_strictly_convex()?;
    let d_tilde = transformed_diffusion_profile(curve, coeffs)?;
    let h = curve.spacing();
    let v = curve.values();
    let mut acc = 0.0;
    for i in 1..v.len() - 1 {
        let l_ff = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        acc += h * d_tilde[i] / l_ff;
    }
    Ok(2.0 * acc)
}

/// Standard deviation of the underlying density read off the curve:
/// `integral of L_f^2 df - mean^2`, with cell secant slopes.
pub fn std_from_lorenz(curve: &LorenzCurve) -> f64 {
    let h = curve.spacing();
    let second: f64 = curve.cell_slopes().iter().map(|s| h * s * s).sum();
    let m = curve.right_boundary();
    (second - m * m).max(0.0).sqrt()
}

/// One row of a [`MetricSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub time: f64,
    pub gini: Option<f64>,
    pub hoover: Option<f64>,
    pub mean: f64,
    pub std: f64,
    pub mass_error: f64,
    pub convexity_margin: Option<f64>,
}

/// Time-indexed diagnostics; every column has the same length.
///
/// Gini and Hoover are only recorded for positive-support problems, and the
/// convexity margin only for runs that carry a Lorenz curve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub times: Vec<f64>,
    pub gini: Vec<Option<f64>>,
    pub hoover: Vec<Option<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub mass_error: Vec<f64>,
    pub convexity_margin: Vec<Option<f64>>,
}

impl MetricSeries {
    pub const COLUMNS: [&'static str; 7] = [
        "time",
        "gini",
        "hoover",
        "mean",
        "std",
        "mass_error",
        "convexity_margin",
    ];

    pub fn push(&mut self, r: MetricRecord) {
        self.times.push(r.time);
        self.gini.push(r.gini);
        self.hoover.push(r.hoover);
        self.mean.push(r.mean);
        self.std.push(r.std);
        self.mass_error.push(r.mass_error);
        self.convexity_margin.push(r.convexity_margin);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn record(&self, i: usize) -> MetricRecord {
        MetricRecord {
            time: self.times[i],
            gini: self.gini[i],
            hoover: self.hoover[i],
            mean: self.mean[i],
            std: self.std[i],
            mass_error: self.mass_error[i],
            convexity_margin: self.convexity_margin[i],
        }
    }

    /// Gini column with missing entries dropped.
    pub fn gini_values(&self) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.gini)
            .filter_map(|(t, g)| g.map(|g| (*t, g)))
            .collect()
    }
}

/// Diagnostics for a density snapshot.
pub fn density_record(density: &DensityField, mass_error: f64) -> MetricRecord {
    let positive = density.domain() == Domain::PositiveHalfLine;
    let gini = positive.then(|| gini_from_density(density).ok()).flatten();
    MetricRecord {
        time: density.time(),
        gini,
        hoover: None,
        mean: density.mean(),
        std: density.std(),
        mass_error,
        convexity_margin: None,
    }
}

/// Diagnostics for a Lorenz-curve snapshot.
pub fn curve_record(curve: &LorenzCurve) -> MetricRecord {
    let positive = curve.domain() == Domain::PositiveHalfLine;
    let gini = positive.then(|| gini_from_lorenz(curve).ok()).flatten();
    let hoover = positive.then(|| hoover_from_lorenz(curve));
    MetricRecord {
        time: curve.time(),
        gini,
        hoover,
        mean: curve.right_boundary(),
        std: std_from_lorenz(curve),
        mass_error: 0.0,
        convexity_margin: Some(curve.convexity_margin()),
    }
}

/// True when the curve passes the convexity monitor.
pub fn is_convex(curve: &LorenzCurve) -> bool {
    curve.convexity_margin() >= -TOL_CONVEX
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorenz_core::{lorenz_from_density, SpatialGrid};

    fn curve(count: usize, f: impl Fn(f64) -> f64) -> LorenzCurve {
        LorenzCurve::from_fn(count, 0.0, Domain::PositiveHalfLine, f).unwrap()
    }

    #[test]
    fn gini_of_reference_curves() {
        assert!(gini_from_lorenz(&curve(101, |f| f)).unwrap().abs() < 1e-15);
        let g = gini_from_lorenz(&curve(1001, |f| f * f)).unwrap();
        // trapezoid error of 2 * int (f - f^2) is h^2 / 3
        assert!((g - 1.0 / 3.0).abs() < 1e-6, "{g}");
        let consolidated = gini_from_lorenz(&curve(1001, |f| f.powi(400))).unwrap();
        assert!(consolidated > 0.99, "{consolidated}");
    }

    #[test]
    fn gini_requires_unit_wealth_and_positive_domain() {
        assert!(gini_from_lorenz(&curve(11, |f| 2.0 * f * f)).is_err());
        let real = LorenzCurve::from_fn(11, 0.0, Domain::RealLine, |f| f * f).unwrap();
        assert!(matches!(gini_from_lorenz(&real), Err(Error::RequiresPositiveDomain)));
    }

    #[test]
    fn hoover_of_reference_curves() {
        assert_eq!(hoover_from_lorenz(&curve(101, |f| f)), 0.0);
        assert!((hoover_from_lorenz(&curve(101, |f| f * f)) - 0.25).abs() < 1e-15);
        assert!(hoover_from_lorenz(&curve(1001, |f| f.powi(1000))) > 0.99);
    }

    #[test]
    fn gini_from_density_uniform_and_bump() {
        let grid = SpatialGrid::uniform(1e-9, 2.0, 1025, Domain::PositiveHalfLine).unwrap();
        let d = DensityField::from_fn(grid, 0.0, |_| 0.5).unwrap();
        let g = gini_from_density(&d).unwrap();
        assert!((g - 1.0 / 3.0).abs() < 1e-5, "{g}");

        let grid = SpatialGrid::uniform(0.5, 1.5, 2001, Domain::PositiveHalfLine).unwrap();
        let bump = DensityField::from_fn(grid, 0.0, |w| crate::lorenz_core::density::gaussian_pdf(w, 1.0, 0.01))
            .unwrap()
            .normalized()
            .unwrap();
        let g = gini_from_density(&bump).unwrap();
        assert!(g.abs() < 0.01, "{g}");
    }

    #[test]
    fn gini_from_density_rejects_off_unit_mean() {
        let grid = SpatialGrid::uniform(1e-9, 4.0, 101, Domain::PositiveHalfLine).unwrap();
        let d = DensityField::from_fn(grid, 0.0, |_| 0.25).unwrap();
        assert!(gini_from_density(&d).is_err());
    }

    #[test]
    fn gini_formulas_agree_on_gamma_density() {
        let grid = SpatialGrid::uniform(0.005, 14.0, 2048, Domain::PositiveHalfLine).unwrap();
        let d = DensityField::from_fn(grid, 0.0, |w| 4.0 * w * (-2.0 * w).exp())
            .unwrap()
            .normalized()
            .unwrap();
        let gd = gini_from_density(&d).unwrap();
        let gl = gini_from_lorenz(&lorenz_from_density(&d, 1025).unwrap()).unwrap();
        // Gamma(shape 2): G = Gamma(2.5) / (sqrt(pi) Gamma(3)) = 3/8
        assert!((gd - 0.375).abs() < 1e-4, "{gd}");
        assert!((gd - gl).abs() < 1e-4, "{gd} vs {gl}");
    }

    #[test]
    fn rates_vanish_without_diffusion_drive() {
        let ou = CoefficientSpec::ornstein_uhlenbeck(1.0, 0.0, 1.0).unwrap();
        let grid = SpatialGrid::uniform(0.1, 2.0, 11, Domain::PositiveHalfLine).unwrap();
        let d = DensityField::from_fn(grid, 0.0, |_| 0.5).unwrap();
        assert!(matches!(gini_rate_density(&d, &ou), Err(Error::DriftNotAllowed)));
        assert!(matches!(
            gini_rate_lorenz(&curve(11, |f| f * f), &ou),
            Err(Error::DriftNotAllowed)
        ));
    }

    #[test]
    fn lorenz_rate_is_nonnegative() {
        let ys = CoefficientSpec::yard_sale(0.3).unwrap();
        let r = gini_rate_lorenz(&curve(201, |f| f * f), &ys).unwrap();
        assert!(r > 0.0);
    }

    #[test]
    fn std_from_curve_of_square() {
        // uniform on [0, 2]: std = 2 / sqrt(12)
        let s = std_from_lorenz(&curve(2001, |f| f * f));
        assert!((s - 2.0 / 12f64.sqrt()).abs() < 1e-6, "{s}");
    }

    #[test]
    fn series_columns_stay_aligned() {
        let mut m = MetricSeries::default();
        let c = curve(11, |f| f * f);
        m.push(curve_record(&c));
        m.push(curve_record(&c.clone().with_time(1.0)));
        assert_eq!(m.len(), 2);
        assert_eq!(m.gini.len(), 2);
        assert_eq!(m.record(1).time, 1.0);
        assert_eq!(m.gini_values().len(), 2);
    }
}
