use serde::{Deserialize, Serialize};

use super::grid::Domain;
use crate::error::{Error, Result};

/// Absolute tolerance on raw second differences `L[i+1] - 2 L[i] + L[i-1]`.
pub const TOL_CONVEX: f64 = 1e-10;

/// Lorenz curve sampled on the uniform grid `f_i = i / (n - 1)`.
///
/// The value at `f = 0` is exactly zero and the value at `f = 1` is exactly
/// `right_boundary`, the total first moment. Convexity is not enforced on
/// construction; operations that need it check it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzCurve {
    values: Vec<f64>,
    time: f64,
    right_boundary: f64,
    domain: Domain,
}

impl LorenzCurve {
    pub const MIN_NODES: usize = 3;

    pub fn new(values: Vec<f64>, time: f64, domain: Domain) -> Result<Self> {
        if values.len() < Self::MIN_NODES {
            return Err(Error::invalid(format!(
                "Lorenz curve needs at least {} nodes, got {}",
                Self::MIN_NODES,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("Lorenz value at node {i} is not finite")));
        }
        if values[0] != 0.0 {
            return Err(Error::invalid(format!(
                "Lorenz curve must vanish at f = 0, got {}",
                values[0]
            )));
        }
        let right_boundary = values[values.len() - 1];
        Ok(Self {
            values,
            time,
            right_boundary,
            domain,
        })
    }

    /// Samples `curve` on `count` uniform nodes; the value at `f = 0` is pinned to zero.
    pub fn from_fn(count: usize, time: f64, domain: Domain, curve: impl Fn(f64) -> f64) -> Result<Self> {
        if count < Self::MIN_NODES {
            return Err(Error::invalid(format!("f-grid count {count} below 3")));
        }
        let mut values: Vec<f64> = fgrid(count).into_iter().map(curve).collect();
        values[0] = 0.0;
        Self::new(values, time, domain)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn right_boundary(&self) -> f64 {
        self.right_boundary
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid spacing `1 / (n - 1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn f(&self, i: usize) -> f64 {
        if i == self.values.len() - 1 {
            1.0
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn fgrid(&self) -> Vec<f64> {
        fgrid(self.values.len())
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Secant slopes `(L[j+1] - L[j]) / h`, one per cell.
    pub fn cell_slopes(&self) -> Vec<f64> {
        let inv_h = 1.0 / self.spacing();
        self.values.windows(2).map(|w| (w[1] - w[0]) * inv_h).collect()
    }

    /// Slope at every node: central differences inside, second-order
    /// one-sided differences at the two ends.
    pub fn slopes(&self) -> Vec<f64> {
        let v = &self.values;
        let n = v.len();
        let inv_2h = 0.5 / self.spacing();
        let mut out = Vec::with_capacity(n);
        if n == 3 {
            out.push((v[1] - v[0]) * 2.0 * inv_2h);
        } else {
            out.push((-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv_2h);
        }
        for i in 1..n - 1 {
            out.push((v[i + 1] - v[i - 1]) * inv_2h);
        }
        if n == 3 {
            out.push((v[2] - v[1]) * 2.0 * inv_2h);
        } else {
            out.push((3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv_2h);
        }
        out
    }

    /// Raw second differences at interior nodes (index `i - 1` holds node `i`).
    pub fn second_differences(&self) -> Vec<f64> {
        self.values.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect()
    }

    /// Smallest raw second difference; negative means a convexity violation.
    pub fn convexity_margin(&self) -> f64 {
        self.values
            .windows(3)
            .map(|w| w[2] - 2.0 * w[1] + w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Fails on the first interior node whose second difference is below `-tol`.
    pub fn check_convex(&self, tol: f64) -> Result<()> {
        for (k, w) in self.values.windows(3).enumerate() {
            let d2 = w[2] - 2.0 * w[1] + w[0];
            if d2 < -tol {
                return Err(Error::NonConvex {
                    index: k + 1,
                    value: d2,
                });
            }
        }
        Ok(())
    }

    /// Fails unless every interior second difference is strictly positive.
    pub fn check_strictly_convex(&self) -> Result<()> {
        for (k, w) in self.values.windows(3).enumerate() {
            let d2 = w[2] - 2.0 * w[1] + w[0];
            if !(d2 > 0.0) {
                return Err(Error::NonConvex {
                    index: k + 1,
                    value: d2,
                });
            }
        }
        Ok(())
    }

    /// Piecewise-linear evaluation at an arbitrary `f` in `[0, 1]`.
    pub fn eval_linear(&self, f: f64) -> f64 {
        let n = self.values.len();
        let pos = (f.clamp(0.0, 1.0) * (n - 1) as f64).min((n - 1) as f64);
        let k = (pos.floor() as usize).min(n - 2);
        let t = pos - k as f64;
        self.values[k] * (1.0 - t) + self.values[k + 1] * t
    }
}

/// Uniform grid on `[0, 1]` with exact endpoints.
pub fn fgrid(count: usize) -> Vec<f64> {
    let h = 1.0 / (count - 1) as f64;
    let mut out: Vec<f64> = (0..count).map(|i| i as f64 * h).collect();
    out[count - 1] = 1.0;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> LorenzCurve {
        LorenzCurve::from_fn(n, 0.0, Domain::PositiveHalfLine, |f| f * f).unwrap()
    }

    #[test]
    fn endpoints_are_pinned() {
        let c = square(11);
        assert_eq!(c.values()[0], 0.0);
        assert_eq!(c.right_boundary(), 1.0);
        assert!(LorenzCurve::new(vec![0.1, 0.5, 1.0], 0.0, Domain::RealLine).is_err());
    }

    #[test]
    fn slopes_of_square_are_exact() {
        let c = square(21);
        for (i, s) in c.slopes().iter().enumerate() {
            assert!((s - 2.0 * c.f(i)).abs() < 1e-12, "node {i}: {s}");
        }
    }

    #[test]
    fn convexity_checks() {
        let c = square(11);
        assert!(c.check_strictly_convex().is_ok());
        assert!(c.convexity_margin() > 0.0);
        let lin = LorenzCurve::from_fn(11, 0.0, Domain::RealLine, |f| 2.0 * f).unwrap();
        assert!(lin.check_convex(TOL_CONVEX).is_ok());
        assert!(lin.check_strictly_convex().is_err());
        let bent = LorenzCurve::new(vec![0.0, 0.6, 0.7, 1.0], 0.0, Domain::RealLine).unwrap();
        match bent.check_convex(TOL_CONVEX) {
            Err(Error::NonConvex { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected non-convex, got {other:?}"),
        }
    }

    #[test]
    fn linear_evaluation_hits_nodes() {
        let c = square(5);
        assert_eq!(c.eval_linear(0.25), 0.0625);
        assert!((c.eval_linear(0.125) - 0.03125).abs() < 1e-15);
        assert_eq!(c.eval_linear(1.0), 1.0);
    }
}
