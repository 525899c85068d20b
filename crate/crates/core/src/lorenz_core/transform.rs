//! Density to Lorenz curve and back.
//!
//! Forward: the parametric pairs `(F(x_k), L(x_k))` are joined by cubic
//! Hermite segments whose end slopes are the node positions `x_k`
//! (`dL/dF = x`). With exact piecewise-linear moments every segment is convex
//! whenever the density is nonnegative, so resampling onto the uniform
//! `f`-grid cannot create convexity violations.
//!
//! Backward: node positions are central slopes `x_i = L_f(f_i)` and the
//! density is the reciprocal second derivative `rho(x_i) = 1 / L_ff(f_i)`.

use log::{debug, warn};

use super::curve::LorenzCurve;
use super::density::{cdf_from_density, incomplete_first_moment, DensityField};
use super::grid::SpatialGrid;
use crate::error::{Error, Result};

/// Consecutive CDF values closer than this are merged before interpolation.
pub const DUPLICATE_F_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Segment {
    f0: f64,
    df: f64,
    l0: f64,
    l1: f64,
    m0: f64,
    m1: f64,
}

impl Segment {
    fn eval(&self, f: f64) -> f64 {
        let t = ((f - self.f0) / self.df).clamp(0.0, 1.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.l0 + h10 * self.df * self.m0 + h01 * self.l1 + h11 * self.df * self.m1
    }
}

/// Lorenz curve of `density` on `f_count` uniform nodes of `[0, 1]`.
///
/// The density is renormalized to unit mass first. `L(0) = 0` and
/// `L(1) = first moment` hold exactly.
pub fn lorenz_from_density(density: &DensityField, f_count: usize) -> Result<LorenzCurve> {
    if f_count < LorenzCurve::MIN_NODES {
        return Err(Error::invalid(format!("f-grid count {f_count} below 3")));
    }
    let density = density.clone().normalized()?;
    let cdf = cdf_from_density(&density)?;
    let big_f = cdf.values();
    let big_l = incomplete_first_moment(&density);
    let xs = density.nodes();
    let rho = density.values();

    let mut segments = Vec::with_capacity(xs.len() - 1);
    // Zero cells in the tails are routine underflow; only gaps inside the
    // support make the quantile jump.
    let mut interior_gaps = 0usize;
    let mut pending_gap = 0usize;
    let mut merged_cells = 0usize;
    for k in 0..xs.len() - 1 {
        let df = big_f[k + 1] - big_f[k];
        if df <= DUPLICATE_F_THRESHOLD {
            if rho[k] == 0.0 && rho[k + 1] == 0.0 {
                if !segments.is_empty() {
                    pending_gap += 1;
                }
            } else {
                merged_cells += 1;
            }
            continue;
        }
        interior_gaps += pending_gap;
        pending_gap = 0;
        segments.push(Segment {
            f0: big_f[k],
            df,
            l0: big_l[k],
            l1: big_l[k + 1],
            m0: xs[k],
            m1: xs[k + 1],
        });
    }
    if interior_gaps > 0 {
        warn!(
            "density has {interior_gaps} zero-density cells inside its support; their CDF \
             values were merged and the quantile jumps across them"
        );
    }
    if merged_cells > 0 {
        debug!("merged {merged_cells} cells with CDF increments below {DUPLICATE_F_THRESHOLD:e}");
    }
    if segments.is_empty() {
        return Err(Error::invalid("density has no resolvable mass"));
    }

    let total = big_l[big_l.len() - 1];
    let h = 1.0 / (f_count - 1) as f64;
    let mut values = Vec::with_capacity(f_count);
    values.push(0.0);
    let mut seg = 0usize;
    for i in 1..f_count - 1 {
        let f = i as f64 * h;
        while seg + 1 < segments.len() && segments[seg + 1].f0 <= f {
            seg += 1;
        }
        values.push(segments[seg].eval(f));
    }
    values.push(total);
    LorenzCurve::new(values, density.time(), density.domain())
}

/// Density rebuilt from a strictly convex Lorenz curve.
#[derive(Debug, Clone)]
pub struct ReconstructedDensity {
    /// Nodal values `1 / L_ff` at the interior slope positions, not rescaled.
    pub density: DensityField,
    /// Trapezoid mass minus one. The mass held in the two end cells
    /// `[0, h/2]` and `[1 - h/2, 1]` is not represented by any node.
    pub mass_error: f64,
}

/// Inverts the Lorenz transform on the interior `f` nodes.
pub fn density_from_lorenz(curve: &LorenzCurve) -> Result<ReconstructedDensity> {
    curve.check_strictly_convex()?;
    let v = curve.values();
    let h = curve.spacing();
    let n = v.len();
    let mut xs = Vec::with_capacity(n - 2);
    let mut rho = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        xs.push((v[i + 1] - v[i - 1]) / (2.0 * h));
        rho.push(h * h / (v[i + 1] - 2.0 * v[i] + v[i - 1]));
    }
    if xs.len() < SpatialGrid::MIN_NODES {
        return Err(Error::invalid(
            "curve too coarse to reconstruct a density (need at least 5 nodes)",
        ));
    }
    let grid = SpatialGrid::new(xs, curve.domain())?;
    let density = DensityField::new(grid, rho, curve.time())?;
    let mass_error = density.mass() - 1.0;
    Ok(ReconstructedDensity { density, mass_error })
}

/// Quantile `G(f)` of the piecewise-linear density, by exact inversion of
/// its piecewise-quadratic CDF. The density is normalized internally.
pub fn quantile(density: &DensityField, f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Domain {
            function: "quantile",
            value: f,
        });
    }
    let mass = density.mass();
    let xs = density.nodes();
    let rho = density.values();
    let target = f * mass;
    let mut acc = 0.0;
    for k in 0..xs.len() - 1 {
        let dx = xs[k + 1] - xs[k];
        let cell = 0.5 * dx * (rho[k] + rho[k + 1]);
        if acc + cell >= target && cell > 0.0 {
            let m = target - acc;
            let a = 0.5 * dx * (rho[k + 1] - rho[k]);
            let b = dx * rho[k];
            let disc = (b * b + 4.0 * a * m).max(0.0);
            let denom = b + disc.sqrt();
            let u = if denom > 0.0 { 2.0 * m / denom } else { 0.0 };
            return Ok(xs[k] + u.clamp(0.0, 1.0) * dx);
        }
        acc += cell;
    }
    Ok(xs[xs.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorenz_core::density::gaussian_pdf;
    use crate::lorenz_core::grid::Domain;
    use proptest::prelude::*;

    fn half_uniform(n: usize) -> DensityField {
        let grid = SpatialGrid::uniform(0.0, 2.0, n, Domain::RealLine).unwrap();
        DensityField::from_fn(grid, 0.0, |_| 0.5).unwrap()
    }

    #[test]
    fn uniform_on_two_gives_square() {
        let c = lorenz_from_density(&half_uniform(64), 101).unwrap();
        for (i, v) in c.values().iter().enumerate() {
            let f = c.f(i);
            assert!((v - f * f).abs() < 1e-14, "f={f}: {v}");
        }
    }

    #[test]
    fn endpoints_are_exact() {
        let grid = SpatialGrid::uniform(-6.0, 9.0, 301, Domain::RealLine).unwrap();
        let d = DensityField::from_fn(grid, 0.0, |x| 3.0 * gaussian_pdf(x, 1.3, 1.1)).unwrap();
        let c = lorenz_from_density(&d, 129).unwrap();
        assert_eq!(c.values()[0], 0.0);
        let mean = d.clone().normalized().unwrap().first_moment();
        assert_eq!(c.right_boundary(), mean);
        assert_eq!(c.values()[128], mean);
    }

    #[test]
    fn narrow_spike_tends_to_linear() {
        let a = 1.7;
        let mut last = f64::INFINITY;
        for width in [0.1, 0.03, 0.01] {
            let grid = SpatialGrid::uniform(a - 12.0 * width, a + 12.0 * width, 201, Domain::RealLine).unwrap();
            let d = DensityField::from_fn(grid, 0.0, |x| gaussian_pdf(x, a, width)).unwrap();
            let c = lorenz_from_density(&d, 65).unwrap();
            let dev = c
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| (v - a * c.f(i)).abs())
                .fold(0.0, f64::max);
            // max deviation is the bump height width / sqrt(2 pi)
            assert!(dev < width * 0.41, "width {width}: {dev}");
            assert!(dev < last);
            last = dev;
        }
    }

    #[test]
    fn zero_plateau_is_collapsed() {
        let grid = SpatialGrid::uniform(0.0, 10.0, 401, Domain::RealLine).unwrap();
        let d = DensityField::from_fn(grid, 0.0, |x| {
            if (1.0..=3.0).contains(&x) || (7.0..=9.0).contains(&x) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let c = lorenz_from_density(&d, 201).unwrap();
        assert!(c.check_convex(crate::lorenz_core::curve::TOL_CONVEX).is_ok());
        // mean of the two equal blocks is 5
        assert!((c.right_boundary() - 5.0).abs() < 1e-2);
        // slope jumps from about 3 to about 7 at f = 1/2
        let s = c.cell_slopes();
        assert!(s[99] < 3.1 && s[100] > 6.9, "{} {}", s[99], s[100]);
    }

    #[test]
    fn square_reconstructs_half_uniform() {
        let c = LorenzCurve::from_fn(201, 0.0, Domain::RealLine, |f| f * f).unwrap();
        let r = density_from_lorenz(&c).unwrap();
        for (i, (x, rho)) in r.density.nodes().iter().zip(r.density.values()).enumerate() {
            let f = c.f(i + 1);
            assert!((x - 2.0 * f).abs() < 1e-12);
            assert!((rho - 0.5).abs() < 1e-9);
        }
        assert!((r.mass_error + 2.0 * c.spacing()).abs() < 1e-9);
    }

    #[test]
    fn linear_curve_is_rejected() {
        let c = LorenzCurve::from_fn(21, 0.0, Domain::RealLine, |f| 0.8 * f).unwrap();
        assert!(matches!(density_from_lorenz(&c), Err(Error::NonConvex { .. })));
        let c = LorenzCurve::new(vec![0.0, 0.5, 0.4, 0.3, 1.0], 0.0, Domain::RealLine).unwrap();
        assert!(density_from_lorenz(&c).is_err());
    }

    #[test]
    fn slope_matches_quantile() {
        let grid = SpatialGrid::uniform(-7.0, 7.0, 1025, Domain::RealLine).unwrap();
        let d = DensityField::from_fn(grid, 0.0, |x| gaussian_pdf(x, 0.0, 1.0)).unwrap();
        let c = lorenz_from_density(&d, 513).unwrap();
        let slopes = c.slopes();
        for i in (26..=487).step_by(23) {
            let g = quantile(&d, c.f(i)).unwrap();
            assert!((slopes[i] - g).abs() < 1e-4, "f={}: {} vs {g}", c.f(i), slopes[i]);
        }
    }

    #[test]
    fn quantile_of_uniform() {
        let d = half_uniform(11);
        assert!((quantile(&d, 0.3).unwrap() - 0.6).abs() < 1e-14);
        assert_eq!(quantile(&d, 0.0).unwrap(), 0.0);
        assert!(quantile(&d, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn forward_transform_is_convex_with_exact_endpoints(
            raw in proptest::collection::vec(0.01f64..5.0, 8..60),
            lo in -3.0f64..3.0,
            width in 0.5f64..6.0,
            f_count in 5usize..300,
        ) {
            let grid = SpatialGrid::uniform(lo, lo + width, raw.len(), Domain::RealLine).unwrap();
            let d = DensityField::new(grid, raw, 0.0).unwrap();
            let c = lorenz_from_density(&d, f_count).unwrap();
            prop_assert_eq!(c.values()[0], 0.0);
            let mean = d.clone().normalized().unwrap().first_moment();
            prop_assert_eq!(c.right_boundary(), mean);
            prop_assert!(c.convexity_margin() >= -crate::lorenz_core::curve::TOL_CONVEX,
                "margin {}", c.convexity_margin());
        }
    }
}
