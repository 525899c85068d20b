//! Map between heat-equation Lorenz dynamics and the Lorenz dynamics of the
//! confining quadratic potential `nu_s = (y nu)_y + nu_yy`.
//!
//! Densities map as `y = x e^{-s}`, `nu(y, s) = e^s rho(e^s y, t)` with
//! `s = ln sqrt(2t + 1)`. The CDF is unchanged and the first incomplete moment
//! picks up one factor of `e^{-s}`, so `J(h, s) = e^{-s} L(h, t)` with `h = f`,
//! and `J_s + J = -1 / J_hh` whenever `L_t = -1 / L_ff`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorenz_core::LorenzCurve;

/// Source heat time `t` and the derived scaled time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingMapParams {
    pub t: f64,
}

impl ScalingMapParams {
    pub fn new(t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("heat time {t} must be finite and >= 0")));
        }
        Ok(Self { t })
    }

    pub fn s(&self) -> f64 {
        scaled_time(self.t)
    }
}

/// `s = ln sqrt(2t + 1)`.
pub fn scaled_time(t: f64) -> f64 {
    0.5 * (2.0 * t).ln_1p()
}

/// Inverse of [`scaled_time`]: `t = (e^{2s} - 1) / 2`.
pub fn heat_time(s: f64) -> f64 {
    0.5 * (2.0 * s).exp_m1()
}

/// Maps a heat Lorenz curve at time `t` to the quadratic-potential curve at
/// scaled time `s`. Returns the mapped curve and `s`.
pub fn heat_to_quadratic_map(curve: &LorenzCurve) -> Result<(LorenzCurve, f64)> {
    let params = ScalingMapParams::new(curve.time())?;
    let s = params.s();
    let factor = (-s).exp();
    let values = curve.values().iter().map(|v| v * factor).collect();
    Ok((LorenzCurve::new(values, s, curve.domain())?, s))
}

/// Inverse of [`heat_to_quadratic_map`]: `L(f, t) = e^s J(f, s)`.
pub fn quadratic_to_heat_map(curve: &LorenzCurve) -> Result<(LorenzCurve, f64)> {
    let s = curve.time();
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!("scaled time {s} must be finite and >= 0")));
    }
    let factor = s.exp();
    let values = curve.values().iter().map(|v| v * factor).collect();
    let t = heat_time(s);
    Ok((LorenzCurve::new(values, t, curve.domain())?, t))
}

/// Residual `J_s + J + 1/J_hh` at interior nodes of `mid`, with `J_s` the
/// central difference of `prev` and `next` taken `ds` apart on each side.
///
/// Entry `k` belongs to node `k + 1`.
pub fn quadratic_potential_residual(
    prev: &LorenzCurve,
    mid: &LorenzCurve,
    next: &LorenzCurve,
    ds: f64,
) -> Result<Vec<f64>> {
    check_triplet(prev, mid, next, ds)?;
    let h = mid.spacing();
    let v = mid.values();
    Ok((1..v.len() - 1)
        .map(|i| {
            let js = (next.values()[i] - prev.values()[i]) / (2.0 * ds);
            let jhh = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            js + v[i] + 1.0 / jhh
        })
        .collect())
}

/// Residual of the literal sign-flipped form `J_s - J + 1/J_hh`. Kept as a
/// negative control: the mapped heat solution does not satisfy it.
pub fn flipped_quadratic_potential_residual(
    prev: &LorenzCurve,
    mid: &LorenzCurve,
    next: &LorenzCurve,
    ds: f64,
) -> Result<Vec<f64>> {
    check_triplet(prev, mid, next, ds)?;
    let h = mid.spacing();
    let v = mid.values();
    Ok((1..v.len() - 1)
        .map(|i| {
            let js = (next.values()[i] - prev.values()[i]) / (2.0 * ds);
            let jhh = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            js - v[i] + 1.0 / jhh
        })
        .collect())
}

fn check_triplet(prev: &LorenzCurve, mid: &LorenzCurve, next: &LorenzCurve, ds: f64) -> Result<()> {
    if prev.len() != mid.len() || next.len() != mid.len() {
        return Err(Error::invalid("residual curves must share one f-grid"));
    }
    if !(ds > 0.0) {
        return Err(Error::invalid(format!("time offset {ds} must be positive")));
    }
    Ok(())
}
