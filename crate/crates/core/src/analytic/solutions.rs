//! Closed-form Lorenz curves of Gaussian densities.
//!
//! For a Gaussian with mean `m` and standard deviation `s` the incomplete
//! first moment is `m F(x) - s^2 rho(x)`, so
//! `L(f) = m f - s phi(Phi^{-1}(f))` with `phi`, `Phi` the standard normal
//! density and distribution. The curve lies below its chord and solves
//! `L_t = -D / L_ff` (heat) or `L_t = -D / L_ff + sigma (mu f - L)` (OU)
//! when `m` and `s` follow the corresponding moment equations.

use serde::{Deserialize, Serialize};

use super::special::{normal_pdf, normal_quantile};
use crate::error::{Error, Result};
use crate::lorenz_core::{Domain, LorenzCurve};

/// Lorenz curve of a Gaussian with the given mean and standard deviation.
///
/// `std = 0` is the point mass, `L(f) = mean * f`. The end points return the
/// exact limits `0` and `mean`.
pub fn gaussian_lorenz(f: f64, mean: f64, std: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Domain {
            function: "gaussian_lorenz",
            value: f,
        });
    }
    if !(std >= 0.0) {
        return Err(Error::invalid(format!("standard deviation {std} is negative")));
    }
    if f == 0.0 {
        return Ok(0.0);
    }
    if f == 1.0 {
        return Ok(mean);
    }
    if std == 0.0 {
        return Ok(mean * f);
    }
    let z = normal_quantile(f)?;
    Ok(mean * f - std * normal_pdf(z))
}

/// Samples [`gaussian_lorenz`] on `count` uniform nodes.
pub fn gaussian_lorenz_curve(count: usize, mean: f64, std: f64, time: f64, domain: Domain) -> Result<LorenzCurve> {
    if count < LorenzCurve::MIN_NODES {
        return Err(Error::invalid(format!("f-grid count {count} below 3")));
    }
    let values = crate::lorenz_core::fgrid(count)
        .into_iter()
        .map(|f| gaussian_lorenz(f, mean, std))
        .collect::<Result<Vec<_>>>()?;
    LorenzCurve::new(values, time, domain)
}

/// Standard deviation of the heat kernel started from a point mass: `sqrt(2 D t)`.
pub fn heat_std(t: f64, diffusion: f64) -> f64 {
    (2.0 * diffusion * t).sqrt()
}

fn check_heat(t: f64, diffusion: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time {t} is negative")));
    }
    if !(diffusion > 0.0) {
        return Err(Error::invalid(format!("diffusion {diffusion} must be positive")));
    }
    Ok(())
}

/// Lorenz curve of the heat equation from a point mass at `a`.
///
/// At `f = 1/2` the curve sits `sqrt(D t / pi)` below the chord `a f`.
pub fn heat_lorenz(f: f64, t: f64, diffusion: f64, a: f64) -> Result<f64> {
    check_heat(t, diffusion)?;
    gaussian_lorenz(f, a, heat_std(t, diffusion))
}

pub fn heat_lorenz_curve(count: usize, t: f64, diffusion: f64, a: f64) -> Result<LorenzCurve> {
    check_heat(t, diffusion)?;
    gaussian_lorenz_curve(count, a, heat_std(t, diffusion), t, Domain::RealLine)
}

/// Ornstein-Uhlenbeck problem started from a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub diffusion: f64,
    /// Relaxation rate `sigma`.
    pub rate: f64,
    /// Target mean `mu`.
    pub target: f64,
    /// Initial location `a`.
    pub initial: f64,
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion > 0.0) || !(self.rate > 0.0) {
            return Err(Error::invalid(format!(
                "OU parameters need diffusion > 0 and rate > 0 (D={}, sigma={})",
                self.diffusion, self.rate
            )));
        }
        if !self.target.is_finite() || !self.initial.is_finite() {
            return Err(Error::invalid("OU target and initial location must be finite"));
        }
        Ok(())
    }

    /// `a e^{-sigma t} + mu (1 - e^{-sigma t})`.
    pub fn mean_at(&self, t: f64) -> f64 {
        let decay = (-self.rate * t).exp();
        self.initial * decay + self.target * (1.0 - decay)
    }

    /// Solution of `dV/dt = 2D - 2 sigma V` from `V(0) = 0`, square-rooted.
    pub fn std_at(&self, t: f64) -> f64 {
        (self.diffusion / self.rate * -(-2.0 * self.rate * t).exp_m1()).sqrt()
    }

    /// Stationary standard deviation `sqrt(D / sigma)`.
    pub fn stationary_std(&self) -> f64 {
        (self.diffusion / self.rate).sqrt()
    }
}

/// Lorenz curve of the OU equation from a point mass.
pub fn ou_lorenz(f: f64, t: f64, params: &OuParams) -> Result<f64> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time {t} is negative")));
    }
    gaussian_lorenz(f, params.mean_at(t), params.std_at(t))
}

pub fn ou_lorenz_curve(count: usize, t: f64, params: &OuParams) -> Result<LorenzCurve> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time {t} is negative")));
    }
    gaussian_lorenz_curve(count, params.mean_at(t), params.std_at(t), t, Domain::RealLine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_lorenz_endpoints_and_centre() {
        assert_eq!(gaussian_lorenz(0.0, 3.0, 2.0).unwrap(), 0.0);
        assert_eq!(gaussian_lorenz(1.0, 3.0, 2.0).unwrap(), 3.0);
        assert_eq!(gaussian_lorenz(0.3, 3.0, 0.0).unwrap(), 3.0 * 0.3);
        let centre = gaussian_lorenz(0.5, 0.0, 1.0).unwrap();
        assert!((centre + 0.398_942_280_401_432_7).abs() < 1e-15, "{centre}");
        assert!(gaussian_lorenz(0.5, 0.0, -1.0).is_err());
        assert!(gaussian_lorenz(1.2, 0.0, 1.0).is_err());
    }

    #[test]
    fn centre_value_matches_quadrature() {
        // independent route: midpoint quadrature of y phi(y) over (-inf, 0]
        let n = 200_000;
        let lo = -12.0;
        let dy = -lo / n as f64;
        let quad: f64 = (0..n)
            .map(|k| {
                let y = lo + (k as f64 + 0.5) * dy;
                y * (-0.5 * y * y).exp() / (2.0 * PI).sqrt() * dy
            })
            .sum();
        let closed = gaussian_lorenz(0.5, 0.0, 1.0).unwrap();
        assert!((closed - quad).abs() < 1e-9, "{closed} vs {quad}");
    }

    #[test]
    fn heat_examples() {
        for i in 0..=10 {
            let f = i as f64 / 10.0;
            assert!((heat_lorenz(f, 0.0, 1.0, 2.5).unwrap() - 2.5 * f).abs() < 1e-15);
        }
        for t in [0.0, 0.1, 3.0] {
            assert_eq!(heat_lorenz(0.0, t, 0.7, -1.0).unwrap(), 0.0);
        }
        let (d, t, a) = (0.8, 1.7, 0.4);
        let gap = (heat_lorenz(0.5, t, d, a).unwrap() - a / 2.0).abs();
        assert!((gap - (d * t / PI).sqrt()).abs() < 1e-14);
        assert!(heat_lorenz(0.5, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn ou_examples() {
        let p = OuParams {
            diffusion: 0.6,
            rate: 1.0,
            target: 2.0,
            initial: -1.0,
        };
        for i in 0..=10 {
            let f = i as f64 / 10.0;
            assert!((ou_lorenz(f, 0.0, &p).unwrap() + f).abs() < 1e-15);
        }
        // slope term tends to mu f
        assert!((p.mean_at(40.0) - 2.0).abs() < 1e-15);
        assert!((p.std_at(40.0) - p.stationary_std()).abs() < 1e-15);
    }

    #[test]
    fn ou_std_matches_variance_ode() {
        // RK4 on dV/dt = 2D - 2 sigma V, V(0) = 0, sigma = 1
        let d = 0.45;
        let p = OuParams {
            diffusion: d,
            rate: 1.0,
            target: 0.0,
            initial: 0.0,
        };
        let rhs = |v: f64| 2.0 * d - 2.0 * v;
        let dt = 1e-4;
        let mut v = 0.0;
        let mut t = 0.0;
        for checkpoint in [0.25, 1.0, 3.0] {
            while t < checkpoint - 1e-12 {
                let k1 = rhs(v);
                let k2 = rhs(v + 0.5 * dt * k1);
                let k3 = rhs(v + 0.5 * dt * k2);
                let k4 = rhs(v + dt * k3);
                v += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                t += dt;
            }
            let closed = (d * (1.0 - (-2.0 * checkpoint).exp())).sqrt();
            assert!((p.std_at(checkpoint) - closed).abs() < 1e-15);
            assert!((v.sqrt() - closed).abs() < 1e-10);
        }
    }

    #[test]
    fn ou_reduces_to_heat_for_slow_relaxation() {
        let p = OuParams {
            diffusion: 1.0,
            rate: 1e-9,
            target: 0.0,
            initial: 0.5,
        };
        let t = 0.8;
        for f in [0.1, 0.5, 0.9] {
            let ou = ou_lorenz(f, t, &p).unwrap();
            let heat = heat_lorenz(f, t, 1.0, 0.5).unwrap();
            assert!((ou - heat).abs() < 1e-7);
        }
    }

    #[test]
    fn gaussian_curve_is_convex() {
        let c = gaussian_lorenz_curve(257, 1.0, 0.3, 0.0, Domain::RealLine).unwrap();
        assert!(c.check_strictly_convex().is_ok());
    }
}
