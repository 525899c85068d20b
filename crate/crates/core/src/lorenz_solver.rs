//! Explicit integrator for `L_t = -D~ / L_ff + integral_0^f Sigma~ dg` on a
//! uniform `f`-grid with both ends pinned.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::analytic::gaussian_lorenz_curve;
use crate::error::{Error, Result};
use crate::fpe::coefficients::{CoefficientSpec, Diffusion, Drift};
use crate::fpe::{GridSpec, InitialDensity, TimeSpec};
use crate::lorenz_core::grid::cumulative_trapezoid;
use crate::lorenz_core::metrics::curve_record;
use crate::lorenz_core::{lorenz_from_density, Domain, LorenzCurve, MetricSeries, TOL_CONVEX};

/// Share of the local linear stability limit an explicit step may take.
pub const STABILITY_FACTOR: f64 = 0.4;
pub const AUTO_DT_SAFETY: f64 = 0.9;
/// `eps_ff = EPS_FF_RELATIVE * mean |slope|`.
pub const EPS_FF_RELATIVE: f64 = 1e-8;
pub const MAX_FLOOR_FRACTION: f64 = 0.01;

fn require_convex(curve: &LorenzCurve) -> Result<()> {
    curve.check_convex(TOL_CONVEX)
}

/// Node slopes for the yard-sale quadrature. Wealth slopes are quantiles and
/// cannot be negative, so one-sided end extrapolation is clamped at zero.
fn quadrature_slopes(curve: &LorenzCurve) -> Result<Vec<f64>> {
    if curve.domain() != Domain::PositiveHalfLine {
        return Err(Error::RequiresPositiveDomain);
    }
    Ok(curve.slopes().into_iter().map(|s| s.max(0.0)).collect())
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// `D~` at node `i` by direct trapezoid quadrature over the `f`-grid.
pub fn transformed_diffusion(curve: &LorenzCurve, i: usize, coeffs: &CoefficientSpec) -> Result<f64> {
    require_convex(curve)?;
    if i >= curve.len() {
        return Err(Error::invalid(format!(
            "node {i} outside a curve of {} nodes",
            curve.len()
        )));
    }
    match coeffs.diffusion {
        Diffusion::Constant { value } => Ok(value),
        Diffusion::YardSale { gamma } => {
            let s = quadrature_slopes(curve)?;
            let w = trapezoid_weights(s.len(), curve.spacing());
            let si = s[i];
            let acc: f64 = s
                .iter()
                .zip(&w)
                .map(|(sj, wj)| {
                    let m = sj.min(si);
                    wj * m * m
                })
                .sum();
            Ok(0.5 * gamma * acc)
        }
    }
}

/// `D~` at every node. Same quadrature as [`transformed_diffusion`], in
/// `O(n log n)`: after sorting the slopes, the sum at node `i` splits into the
/// weighted squares below `s_i` plus `s_i^2` times the weight above it.
pub fn transformed_diffusion_profile(curve: &LorenzCurve, coeffs: &CoefficientSpec) -> Result<Vec<f64>> {
    require_convex(curve)?;
    diffusion_profile_unchecked(curve, coeffs)
}

fn diffusion_profile_unchecked(curve: &LorenzCurve, coeffs: &CoefficientSpec) -> Result<Vec<f64>> {
    match coeffs.diffusion {
        Diffusion::Constant { value } => Ok(vec![value; curve.len()]),
        Diffusion::YardSale { gamma } => {
            let s = quadrature_slopes(curve)?;
            let w = trapezoid_weights(s.len(), curve.spacing());
            Ok(yardsale_profile(&s, &w, gamma))
        }
    }
}

fn yardsale_profile(s: &[f64], w: &[f64], gamma: f64) -> Vec<f64> {
    let n = s.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
    let total_weight: f64 = w.iter().sum();
    let mut out = vec![0.0; n];
    let mut below_sq = 0.0;
    let mut below_w = 0.0;
    let mut k = 0;
    while k < n {
        // ties share one value
        let mut end = k;
        let v = s[order[k]];
        while end < n && s[order[end]] == v {
            below_sq += w[order[end]] * v * v;
            below_w += w[order[end]];
            end += 1;
        }
        let d = 0.5 * gamma * (below_sq + v * v * (total_weight - below_w));
        for &idx in &order[k..end] {
            out[idx] = d;
        }
        k = end;
    }
    out
}

/// `integral_0^f Sigma~ dg` at node `i`. For the OU drift this is
/// `sigma (mu f - L(f))` because `L(0) = 0`.
pub fn transformed_drift_integral(curve: &LorenzCurve, i: usize, coeffs: &CoefficientSpec) -> f64 {
    match coeffs.drift {
        Drift::Zero => 0.0,
        Drift::OrnsteinUhlenbeck { rate, target } => rate * (target * curve.f(i) - curve.values()[i]),
    }
}

/// The drift integral at every node by cumulative trapezoid quadrature of
/// `Sigma(L_g)` with node slopes, independent of the closed form.
pub fn drift_integral_quadrature(curve: &LorenzCurve, coeffs: &CoefficientSpec) -> Vec<f64> {
    let slopes = curve.slopes();
    let integrand: Vec<f64> = slopes
        .iter()
        .map(|&x| crate::fpe::eval_drift(coeffs, x, curve.time(), None))
        .collect();
    cumulative_trapezoid(&curve.fgrid(), &integrand)
}

/// Value of `L(1, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum RightBoundary {
    /// Keep the initial curve's end value.
    Conserved,
    Fixed {
        value: f64,
    },
    /// `a e^{-sigma t} + mu (1 - e^{-sigma t})`.
    OuMean {
        initial: f64,
        rate: f64,
        target: f64,
    },
}

impl RightBoundary {
    pub fn value(&self, initial: f64, t: f64) -> f64 {
        match *self {
            RightBoundary::Conserved => initial,
            RightBoundary::Fixed { value } => value,
            RightBoundary::OuMean { initial, rate, target } => {
                let decay = (-rate * t).exp();
                initial * decay + target * (1.0 - decay)
            }
        }
    }
}

/// Regularization and abort thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorenzControls {
    /// Floor on `L_ff` relative to the mean absolute slope.
    pub eps_ff_relative: f64,
    /// Abort when more than this share of interior nodes sits on the floor.
    pub max_floor_fraction: f64,
}

impl Default for LorenzControls {
    fn default() -> Self {
        Self {
            eps_ff_relative: EPS_FF_RELATIVE,
            max_floor_fraction: MAX_FLOOR_FRACTION,
        }
    }
}

impl LorenzControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_ff_relative > 0.0) {
            return Err(Error::invalid("eps_ff must be positive"));
        }
        if !(0.0..=1.0).contains(&self.max_floor_fraction) {
            return Err(Error::invalid("floor fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn eps_ff(&self, curve: &LorenzCurve) -> f64 {
        let h = curve.spacing();
        let scale: f64 = curve.cell_slopes().iter().map(|s| h * s.abs()).sum();
        self.eps_ff_relative * if scale > 0.0 { scale } else { 1.0 }
    }
}

/// Per-node right-hand side ingredients for one curve.
struct Rhs {
    rate: Vec<f64>,
    /// Smallest `L_ff^2 / D~` over interior nodes.
    min_ratio: f64,
    floored: usize,
}

fn rhs(curve: &LorenzCurve, coeffs: &CoefficientSpec, eps_ff: f64) -> Result<Rhs> {
    let d = transformed_diffusion_profile(curve, coeffs)?;
    let v = curve.values();
    let n = v.len();
    let h = curve.spacing();
    let mut rate = vec![0.0; n];
    let mut min_ratio = f64::INFINITY;
    let mut floored = 0;
    for i in 1..n - 1 {
        let raw = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        let l_ff = if raw < eps_ff {
            floored += 1;
            eps_ff
        } else {
            raw
        };
        rate[i] = -d[i] / l_ff + transformed_drift_integral(curve, i, coeffs);
        if d[i] > 0.0 {
            min_ratio = min_ratio.min(l_ff * l_ff / d[i]);
        }
    }
    Ok(Rhs {
        rate,
        min_ratio,
        floored,
    })
}

/// Largest stable explicit step: `0.4 h^2 min_i (L_ff,i^2 / D~_i)`.
///
/// Linearizing `-D~ / L_ff` about the current curve gives a diffusion
/// equation for the perturbation with local diffusivity `D~ / L_ff^2`.
pub fn lorenz_stability_bound(curve: &LorenzCurve, coeffs: &CoefficientSpec, controls: &LorenzControls) -> Result<f64> {
    let r = rhs(curve, coeffs, controls.eps_ff(curve))?;
    let h = curve.spacing();
    Ok(STABILITY_FACTOR * h * h * r.min_ratio)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzStepReport {
    pub floored_nodes: usize,
    pub stability_bound: f64,
}

/// One explicit Euler step with `L(0) = 0` and `L(1) = right_boundary`.
pub fn step_lorenz(
    curve: &LorenzCurve,
    coeffs: &CoefficientSpec,
    dt: f64,
    right_boundary: f64,
    controls: &LorenzControls,
) -> Result<(LorenzCurve, LorenzStepReport)> {
    require_convex(curve)?;
    let eps = controls.eps_ff(curve);
    let r = rhs(curve, coeffs, eps)?;
    let interior = curve.len() - 2;
    if r.floored as f64 > controls.max_floor_fraction * interior as f64 {
        return Err(Error::Numerical(format!(
            "{} of {interior} nodes hit the L_ff floor at t={}; the curve is under-resolved",
            r.floored,
            curve.time()
        )));
    }
    let h = curve.spacing();
    let bound = STABILITY_FACTOR * h * h * r.min_ratio;
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, bound });
    }
    let mut values: Vec<f64> = curve.values().iter().zip(&r.rate).map(|(v, k)| v + dt * k).collect();
    let n = values.len();
    values[0] = 0.0;
    values[n - 1] = right_boundary;
    let next = LorenzCurve::new(values, curve.time() + dt, curve.domain())?;
    next.check_convex(TOL_CONVEX)?;
    Ok((
        next,
        LorenzStepReport {
            floored_nodes: r.floored,
            stability_bound: bound,
        },
    ))
}

/// `(next - prev) / dt + D~ / L_ff - drift integral` at interior nodes, with
/// the spatial terms taken on the average of the two curves.
///
/// Entry `k` belongs to node `k + 1`.
pub fn pde_residual(prev: &LorenzCurve, next: &LorenzCurve, dt: f64, coeffs: &CoefficientSpec) -> Result<Vec<f64>> {
    if prev.len() != next.len() {
        return Err(Error::invalid("residual curves must share one f-grid"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt {dt} must be positive")));
    }
    let mid_values: Vec<f64> = prev
        .values()
        .iter()
        .zip(next.values())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mid = LorenzCurve::new(mid_values, 0.5 * (prev.time() + next.time()), prev.domain())?;
    // no convexity gate: corrupted input should show up as residual
    let d = diffusion_profile_unchecked(&mid, coeffs)?;
    let v = mid.values();
    let h = mid.spacing();
    Ok((1..v.len() - 1)
        .map(|i| {
            let l_ff = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            (next.values()[i] - prev.values()[i]) / dt + d[i] / l_ff - transformed_drift_integral(&mid, i, coeffs)
        })
        .collect())
}

/// Initial curve descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum InitialCurve {
    /// `a f`, the curve of a point mass at `a`. `1 / L_ff` is infinite there,
    /// so it is replaced by the Gaussian curve of width `regularization_std`.
    Linear {
        a: f64,
        regularization_std: f64,
    },
    /// `f^2`, the curve of the uniform density on `[0, 2]`.
    Quadratic,
    Tabulated {
        values: Vec<f64>,
    },
    /// Lorenz transform of an initial density.
    FromDensity {
        grid: GridSpec,
        density: InitialDensity,
    },
}

impl InitialCurve {
    pub fn build(&self, count: usize, domain: Domain) -> Result<LorenzCurve> {
        match self {
            InitialCurve::Linear { a, regularization_std } => {
                if !(*regularization_std > 0.0) {
                    return Err(Error::invalid(
                        "linear initial curve needs a positive regularization_std",
                    ));
                }
                gaussian_lorenz_curve(count, *a, *regularization_std, 0.0, domain)
            }
            InitialCurve::Quadratic => LorenzCurve::from_fn(count, 0.0, domain, |f| f * f),
            InitialCurve::Tabulated { values } => {
                if values.len() != count {
                    return Err(Error::invalid(format!(
                        "tabulated curve has {} values for {count} nodes",
                        values.len()
                    )));
                }
                LorenzCurve::new(values.clone(), 0.0, domain)
            }
            InitialCurve::FromDensity { grid, density } => {
                if grid.domain != domain {
                    return Err(Error::invalid(format!(
                        "density grid domain {} differs from run domain {domain}",
                        grid.domain
                    )));
                }
                let d = density.build(&grid.build()?)?;
                lorenz_from_density(&d, count)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzRunConfig {
    pub f_count: usize,
    pub domain: Domain,
    pub initial: InitialCurve,
    pub time: TimeSpec,
    pub coefficients: CoefficientSpec,
    pub right_boundary: RightBoundary,
    #[serde(default)]
    pub controls: LorenzControls,
}

impl LorenzRunConfig {
    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        self.time.validate()?;
        self.controls.validate()?;
        if matches!(self.coefficients.diffusion, Diffusion::YardSale { .. }) && self.domain != Domain::PositiveHalfLine
        {
            return Err(Error::RequiresPositiveDomain);
        }
        let curve = self.initial.build(self.f_count, self.domain)?;
        require_convex(&curve)?;
        if let Some(dt) = self.time.dt {
            let bound = lorenz_stability_bound(&curve, &self.coefficients, &self.controls)?;
            if dt > bound {
                return Err(Error::invalid(format!(
                    "dt {dt:e} exceeds the stability bound {bound:e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzRun {
    pub snapshots: Vec<LorenzCurve>,
    pub metrics: MetricSeries,
    pub steps: usize,
    /// Smallest convexity margin over every step.
    pub min_convexity_margin: f64,
    /// Every Gini value computed after each step, for monotonicity checks.
    pub step_gini: Vec<f64>,
}

pub fn run_lorenz(config: &LorenzRunConfig) -> Result<LorenzRun> {
    config.validate()?;
    let initial = config.initial.build(config.f_count, config.domain)?;
    run_lorenz_from(
        initial,
        &config.coefficients,
        &config.time,
        &config.right_boundary,
        &config.controls,
    )
}

/// [`run_lorenz`] from an explicit initial curve.
pub fn run_lorenz_from(
    initial: LorenzCurve,
    coeffs: &CoefficientSpec,
    time: &TimeSpec,
    right_boundary: &RightBoundary,
    controls: &LorenzControls,
) -> Result<LorenzRun> {
    coeffs.validate()?;
    time.validate()?;
    require_convex(&initial)?;
    let rb0 = initial.right_boundary();
    let t0 = initial.time();
    let record_times = time.record_times();
    let track_gini = initial.domain() == Domain::PositiveHalfLine;
    let mut step_gini = Vec::new();
    if track_gini {
        if let Ok(g) = crate::lorenz_core::gini_from_lorenz(&initial) {
            step_gini.push(g);
        }
    }
    let mut current = initial;
    let mut metrics = MetricSeries::default();
    let mut snapshots = Vec::with_capacity(record_times.len());
    let mut min_margin = current.convexity_margin();
    let mut steps = 0;
    metrics.push(curve_record(&current));
    snapshots.push(current.clone());
    for &target in &record_times[1..] {
        let target = t0 + target;
        while current.time() < target {
            let remaining = target - current.time();
            let dt = match time.dt {
                Some(dt) => dt,
                None => AUTO_DT_SAFETY * lorenz_stability_bound(&current, coeffs, controls)?,
            };
            let dt = if remaining <= dt * (1.0 + 1e-9) { remaining } else { dt };
            let t_next = if dt == remaining { target } else { current.time() + dt };
            let rb = right_boundary.value(rb0, t_next - t0);
            let (next, report) = step_lorenz(&current, coeffs, dt, rb, controls)?;
            if report.floored_nodes > 0 {
                debug!("{} nodes on the L_ff floor at t={t_next}", report.floored_nodes);
            }
            current = next.with_time(t_next);
            min_margin = min_margin.min(current.convexity_margin());
            if track_gini {
                if let Ok(g) = crate::lorenz_core::gini_from_lorenz(&current) {
                    step_gini.push(g);
                }
            }
            steps += 1;
        }
        metrics.push(curve_record(&current));
        snapshots.push(current.clone());
    }
    Ok(LorenzRun {
        snapshots,
        metrics,
        steps,
        min_convexity_margin: min_margin,
        step_gini,
    })
}
