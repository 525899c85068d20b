use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorenz_core::{DensityField, Domain};

/// Drift coefficient `Sigma[x, t, rho]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum Drift {
    Zero,
    /// `sigma * (mu - x)`: relaxation toward `mu` at rate `sigma`.
    OrnsteinUhlenbeck {
        rate: f64,
        target: f64,
    },
}

/// Diffusion coefficient `D[x, t, rho]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum Diffusion {
    Constant {
        value: f64,
    },
    /// Nonlocal yard-sale coefficient `(gamma / 2) * integral of min(w, x)^2 rho(x) dx`.
    YardSale {
        gamma: f64,
    },
}

/// Drift and diffusion pair for one problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub drift: Drift,
    pub diffusion: Diffusion,
}

impl CoefficientSpec {
    pub fn new(drift: Drift, diffusion: Diffusion) -> Result<Self> {
        let spec = Self { drift, diffusion };
        spec.validate()?;
        Ok(spec)
    }

    pub fn heat(d: f64) -> Result<Self> {
        Self::new(Drift::Zero, Diffusion::Constant { value: d })
    }

    pub fn ornstein_uhlenbeck(rate: f64, target: f64, d: f64) -> Result<Self> {
        Self::new(
            Drift::OrnsteinUhlenbeck { rate, target },
            Diffusion::Constant { value: d },
        )
    }

    pub fn yard_sale(gamma: f64) -> Result<Self> {
        Self::new(Drift::Zero, Diffusion::YardSale { gamma })
    }

    pub fn validate(&self) -> Result<()> {
        if let Drift::OrnsteinUhlenbeck { rate, target } = self.drift {
            if !(rate > 0.0) || !rate.is_finite() || !target.is_finite() {
                return Err(Error::invalid(format!(
                    "OU drift needs rate > 0 and finite target (rate={rate}, target={target})"
                )));
            }
        }
        match self.diffusion {
            Diffusion::Constant { value } if !(value > 0.0) || !value.is_finite() => Err(Error::invalid(format!(
                "diffusion constant must be positive, got {value}"
            ))),
            Diffusion::YardSale { gamma } if !(gamma > 0.0 && gamma < 1.0) => Err(Error::invalid(format!(
                "yard-sale gamma must lie strictly inside (0, 1), got {gamma}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn is_drift_free(&self) -> bool {
        matches!(self.drift, Drift::Zero)
    }
}

/// `Sigma` at position `x`. The shipped drifts do not depend on time or density.
pub fn eval_drift(coeffs: &CoefficientSpec, x: f64, _t: f64, _density: Option<&DensityField>) -> f64 {
    match coeffs.drift {
        Drift::Zero => 0.0,
        Drift::OrnsteinUhlenbeck { rate, target } => rate * (target - x),
    }
}

/// Yard-sale diffusion at wealth `w`, by trapezoid quadrature over the grid.
pub fn eval_yardsale_diffusion(density: &DensityField, w: f64, gamma: f64) -> Result<f64> {
    if density.domain() != Domain::PositiveHalfLine {
        return Err(Error::RequiresPositiveDomain);
    }
    let xs = density.nodes();
    let rho = density.values();
    let mut acc = 0.0;
    for k in 1..xs.len() {
        let a = w.min(xs[k - 1]);
        let b = w.min(xs[k]);
        acc += 0.5 * (a * a * rho[k - 1] + b * b * rho[k]) * (xs[k] - xs[k - 1]);
    }
    Ok(0.5 * gamma * acc)
}

/// Diffusion coefficient at every grid node.
///
/// For the yard-sale coefficient this is the same trapezoid sum as
/// [`eval_yardsale_diffusion`] evaluated at each node, computed in one pass
/// with prefix sums: `sum_j t_j min(w_i, x_j)^2 rho_j` splits at `j = i`.
pub fn diffusion_at_nodes(coeffs: &CoefficientSpec, density: &DensityField) -> Result<Vec<f64>> {
    match coeffs.diffusion {
        Diffusion::Constant { value } => Ok(vec![value; density.nodes().len()]),
        Diffusion::YardSale { gamma } => {
            if density.domain() != Domain::PositiveHalfLine {
                return Err(Error::RequiresPositiveDomain);
            }
            Ok(yardsale_prefix(density.nodes(), density.values(), gamma))
        }
    }
}

pub(crate) fn yardsale_prefix(xs: &[f64], rho: &[f64], gamma: f64) -> Vec<f64> {
    let n = xs.len();
    // trapezoid weights
    let mut t = vec![0.0; n];
    for k in 1..n {
        let half = 0.5 * (xs[k] - xs[k - 1]);
        t[k - 1] += half;
        t[k] += half;
    }
    let mut tail = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        tail[j] = acc;
        acc += t[j] * rho[j];
    }
    let mut out = Vec::with_capacity(n);
    let mut below = 0.0;
    for i in 0..n {
        below += t[i] * xs[i] * xs[i] * rho[i];
        out.push(0.5 * gamma * (below + xs[i] * xs[i] * tail[i]));
    }
    out
}
