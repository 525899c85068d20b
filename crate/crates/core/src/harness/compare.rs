//! Triangulation of the density solver, the Lorenz solver and, when one
//! exists, the closed-form Gaussian curve.

use serde::{Deserialize, Serialize};

use crate::analytic::gaussian_lorenz;
use crate::error::{Error, Result};
use crate::fpe::{run_fpe, CoefficientSpec, Diffusion, Drift, FpeRun, InitialDensity};
use crate::lorenz_core::{lorenz_from_density, LorenzCurve};
use crate::lorenz_solver::{run_lorenz, LorenzRun};

use super::config::{CompareSection, ExperimentConfig};

/// Mean and standard deviation of the Gaussian solution at elapsed time
/// `t`, when the setup has one: constant diffusion, at most linear drift
/// and a Gaussian start.
pub fn gaussian_oracle(coeffs: &CoefficientSpec, initial: &InitialDensity, t: f64) -> Option<(f64, f64)> {
    let (m0, s0) = match initial {
        InitialDensity::Gaussian { mean, std } => (*mean, *std),
        _ => return None,
    };
    let d = match coeffs.diffusion {
        Diffusion::Constant { value } => value,
        Diffusion::YardSale { .. } => return None,
    };
    match coeffs.drift {
        Drift::Zero => Some((m0, (s0 * s0 + 2.0 * d * t).sqrt())),
        Drift::OrnsteinUhlenbeck { rate, target } => {
            let decay = (-rate * t).exp();
            let decay2 = (-2.0 * rate * t).exp();
            let var = s0 * s0 * decay2 - (d / rate) * (-2.0 * rate * t).exp_m1();
            Some((m0 * decay + target * (1.0 - decay), var.sqrt()))
        }
    }
}

/// Distances between two sources over the `f` window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub sup: f64,
    /// `h`-weighted sum of absolute differences over window nodes.
    pub l1: f64,
}

fn window_distance(a: &[f64], b: &[f64], window: [f64; 2]) -> Distance {
    let n = a.len();
    let h = 1.0 / (n - 1) as f64;
    let mut sup: f64 = 0.0;
    let mut l1 = 0.0;
    for i in 0..n {
        let f = i as f64 * h;
        if f < window[0] - 1e-12 || f > window[1] + 1e-12 {
            continue;
        }
        let d = (a[i] - b[i]).abs();
        sup = sup.max(d);
        l1 += h * d;
    }
    Distance { sup, l1 }
}

/// Distances at one record time. The analytic fields are absent when the
/// setup has no closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub time: f64,
    pub fpe_vs_lorenz: Distance,
    pub fpe_vs_analytic: Option<Distance>,
    pub lorenz_vs_analytic: Option<Distance>,
    pub gini_fpe: Option<f64>,
    pub gini_lorenz: Option<f64>,
}

/// Pass when the largest sup distance over all times is within tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pair: String,
    pub max_sup: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub window: [f64; 2],
    pub tolerance: f64,
    pub rows: Vec<ComparisonRow>,
    pub verdicts: Vec<Verdict>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    fn build(rows: Vec<ComparisonRow>, section: &CompareSection) -> Self {
        let mut verdicts = Vec::new();
        let mut add = |pair: &str, values: Vec<f64>| {
            if values.is_empty() {
                return;
            }
            let max_sup = values.iter().cloned().fold(0.0, f64::max);
            verdicts.push(Verdict {
                pair: pair.to_string(),
                max_sup,
                tolerance: section.tolerance,
                pass: max_sup <= section.tolerance,
            });
        };
        add("fpe-lorenz", rows.iter().map(|r| r.fpe_vs_lorenz.sup).collect());
        add(
            "fpe-analytic",
            rows.iter().filter_map(|r| r.fpe_vs_analytic.map(|d| d.sup)).collect(),
        );
        add(
            "lorenz-analytic",
            rows.iter()
                .filter_map(|r| r.lorenz_vs_analytic.map(|d| d.sup))
                .collect(),
        );
        Self {
            window: section.window,
            tolerance: section.tolerance,
            rows,
            verdicts,
        }
    }
}

/// Everything a comparison produced, for the caller to serialize.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub fpe: FpeRun,
    pub lorenz: LorenzRun,
    /// FPE snapshots carried to the Lorenz grid.
    pub fpe_curves: Vec<LorenzCurve>,
    pub analytic_curves: Option<Vec<LorenzCurve>>,
    pub report: ComparisonReport,
}

/// Runs both solvers on the same setup and compares them at every record
/// time.
pub fn run_comparison(config: &ExperimentConfig) -> Result<Comparison> {
    let section = config.compare.clone().unwrap_or_default();
    let fpe_config = config.fpe_config()?;
    let lorenz_config = config.compare_lorenz_config()?;
    let fpe = run_fpe(&fpe_config)?;
    let lorenz = run_lorenz(&lorenz_config)?;
    if fpe.snapshots.len() != lorenz.snapshots.len() {
        return Err(Error::Numerical(format!(
            "solvers recorded {} and {} snapshots",
            fpe.snapshots.len(),
            lorenz.snapshots.len()
        )));
    }
    let n = lorenz_config.f_count;
    let t0 = fpe.snapshots[0].time();
    let mut rows = Vec::new();
    let mut fpe_curves = Vec::new();
    let mut analytic: Vec<LorenzCurve> = Vec::new();
    let mut has_oracle = true;
    for (k, (d, c)) in fpe.snapshots.iter().zip(&lorenz.snapshots).enumerate() {
        let from_density = lorenz_from_density(d, n)?;
        let oracle = match gaussian_oracle(&fpe_config.coefficients, &fpe_config.initial, d.time() - t0) {
            Some((m, s)) if has_oracle => Some(LorenzCurve::from_fn(n, d.time(), d.domain(), |f| {
                gaussian_lorenz(f, m, s).unwrap_or(f64::NAN)
            })?),
            _ => {
                has_oracle = false;
                None
            }
        };
        let vs = |curve: &Option<LorenzCurve>, other: &[f64]| {
            curve
                .as_ref()
                .map(|a| window_distance(other, a.values(), section.window))
        };
        rows.push(ComparisonRow {
            time: d.time(),
            fpe_vs_lorenz: window_distance(from_density.values(), c.values(), section.window),
            fpe_vs_analytic: vs(&oracle, from_density.values()),
            lorenz_vs_analytic: vs(&oracle, c.values()),
            gini_fpe: fpe.metrics.gini[k],
            gini_lorenz: lorenz.metrics.gini[k],
        });
        fpe_curves.push(from_density);
        if let Some(o) = oracle {
            analytic.push(o);
        }
    }
    Ok(Comparison {
        fpe,
        lorenz,
        fpe_curves,
        analytic_curves: has_oracle.then_some(analytic),
        report: ComparisonReport::build(rows, &section),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_moments() {
        let heat = CoefficientSpec::heat(1.0).unwrap();
        let g = InitialDensity::Gaussian { mean: 1.0, std: 0.05 };
        let (m, s) = gaussian_oracle(&heat, &g, 0.1).unwrap();
        assert_eq!(m, 1.0);
        assert!((s - (0.0025f64 + 0.2).sqrt()).abs() < 1e-15);
        let ou = CoefficientSpec::ornstein_uhlenbeck(1.0, 2.0, 1.0).unwrap();
        let (m, s) = gaussian_oracle(&ou, &InitialDensity::Gaussian { mean: 0.0, std: 0.0 }, 50.0).unwrap();
        assert!((m - 2.0).abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        assert!(gaussian_oracle(&CoefficientSpec::yard_sale(0.1).unwrap(), &g, 1.0).is_none());
        assert!(gaussian_oracle(&heat, &InitialDensity::Uniform { lo: 0.0, hi: 1.0 }, 1.0).is_none());
    }

    #[test]
    fn window_distance_weights_by_spacing() {
        let a = vec![0.0; 5];
        let b = vec![9.0, 1.0, 2.0, 1.0, 9.0];
        let d = window_distance(&a, &b, [0.2, 0.8]);
        assert_eq!(d.sup, 2.0);
        assert_eq!(d.l1, 1.0);
    }
}
