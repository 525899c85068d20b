//! Error function, its complement and their inverses in double precision.
//!
//! `erf` uses the everywhere-positive series
//! `erf(x) = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (1*3*...*(2n+1))`
//! below `CF_THRESHOLD` and the Laplace continued fraction for `erfc`
//! above it. The inverses start from Wichura's AS 241 normal quantile and
//! take two Newton steps against these functions.

// Coefficients are kept as published.
#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

use crate::error::{Error, Result};

const CF_THRESHOLD: f64 = 2.5;

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// `e^{x^2} erfc(x)` for `x >= CF_THRESHOLD` by modified Lentz evaluation of
/// `erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
fn erfcx_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    0.5 * FRAC_2_SQRT_PI / f
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let a = x.abs();
    let v = if a < CF_THRESHOLD {
        erf_series(a)
    } else if a > 6.0 {
        1.0
    } else {
        1.0 - (-a * a).exp() * erfcx_cf(a)
    };
    v.copysign(x)
}

/// Complementary error function, accurate in relative terms for large `x`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < CF_THRESHOLD {
        1.0 - erf_series(x)
    } else if x > 27.3 {
        0.0
    } else {
        (-x * x).exp() * erfcx_cf(x)
    }
}

/// Scaled complementary error function `e^{x^2} erfc(x)` for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    if x < CF_THRESHOLD {
        (x * x).exp() * erfc(x)
    } else {
        erfcx_cf(x)
    }
}

/// Wichura's AS 241 (PPND16) standard normal quantile.
fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_672_7e3 * r + 3.343_057_558_358_812_810_5e4) * r
            + 6.726_577_092_700_870_085_3e4)
            * r
            + 4.592_195_393_154_987_145_7e4)
            * r
            + 1.373_169_376_550_946_112_5e4)
            * r
            + 1.971_590_950_306_551_442_7e3)
            * r
            + 1.331_416_678_917_843_774_5e2)
            * r
            + 3.387_132_872_796_366_608_0;
        let den = ((((((5.226_495_278_852_854_561_0e3 * r + 2.872_908_573_572_194_267_4e4) * r
            + 3.930_789_580_009_271_061_0e4)
            * r
            + 2.121_379_430_158_659_586_7e4)
            * r
            + 5.394_196_021_424_751_107_7e3)
            * r
            + 6.871_870_074_920_579_083_0e2)
            * r
            + 4.231_333_070_160_091_125_2e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414_076_4e-4 * r + 2.272_384_498_926_918_458_33e-2) * r
            + 2.417_807_251_774_506_117_7e-1)
            * r
            + 1.270_458_252_452_368_382_58)
            * r
            + 3.647_848_324_763_204_605_04)
            * r
            + 5.769_497_221_460_691_405_5)
            * r
            + 4.630_337_846_156_545_295_9)
            * r
            + 1.423_437_110_749_683_577_34;
        let den = ((((((1.050_750_071_644_416_843_24e-9 * r + 5.475_938_084_995_344_946e-4) * r
            + 1.519_866_656_361_645_719_66e-2)
            * r
            + 1.481_039_764_274_800_745_9e-1)
            * r
            + 6.897_673_349_851_000_045_5e-1)
            * r
            + 1.676_384_830_183_803_849_4)
            * r
            + 2.053_191_626_637_758_821_87)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_132_65e-7 * r + 2.711_555_568_743_487_578_15e-5) * r
            + 1.242_660_947_388_078_438_6e-3)
            * r
            + 2.653_218_952_657_612_309_3e-2)
            * r
            + 2.965_605_718_285_048_912_3e-1)
            * r
            + 1.784_826_539_917_291_335_8)
            * r
            + 5.463_784_911_164_114_369_9)
            * r
            + 6.657_904_643_501_103_777_2;
        let den = ((((((2.044_263_103_389_939_785_64e-15 * r + 1.421_511_758_316_445_888_7e-7) * r
            + 1.846_318_317_510_054_681_8e-5)
            * r
            + 7.868_691_311_456_132_591e-4)
            * r
            + 1.487_536_129_085_061_485_25e-2)
            * r
            + 1.369_298_809_227_358_053_1e-1)
            * r
            + 5.998_322_065_558_879_376_9e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Inverse error function on `(-1, 1)`.
pub fn erf_inv(y: f64) -> Result<f64> {
    if !(y.abs() < 1.0) {
        return Err(Error::Domain {
            function: "erf_inv",
            value: y,
        });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y.abs() > 0.5 {
        // 1 - |y| is exact here
        let z = erfc_inv(1.0 - y.abs())?;
        return Ok(z.copysign(y));
    }
    let mut z = ppnd16(0.5 * (1.0 + y)) / SQRT_2;
    for _ in 0..2 {
        z -= (erf(z) - y) / (FRAC_2_SQRT_PI * (-z * z).exp());
    }
    Ok(z)
}

/// Inverse complementary error function on `(0, 2)`.
pub fn erfc_inv(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 2.0) {
        return Err(Error::Domain {
            function: "erfc_inv",
            value: q,
        });
    }
    if q > 1.0 {
        return Ok(-erfc_inv(2.0 - q)?);
    }
    if q >= 0.5 {
        return erf_inv(1.0 - q);
    }
    let mut z = -ppnd16(0.5 * q) / SQRT_2;
    // Newton on ln(erfc(z) / q), well scaled even when erfc(z) is tiny.
    let ln_q = q.ln();
    for _ in 0..2 {
        let scaled = erfcx(z);
        let g = -z * z + scaled.ln() - ln_q;
        z += g * scaled / FRAC_2_SQRT_PI;
    }
    Ok(z)
}

/// Standard normal quantile `Phi^{-1}(p) = -sqrt(2) erfc_inv(2p)` on `(0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            function: "normal_quantile",
            value: p,
        });
    }
    Ok(-SQRT_2 * erfc_inv(2.0 * p)?)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
