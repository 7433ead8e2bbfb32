//! Log-gamma, log-beta and the regularized incomplete beta function.
//!
//! `ln_gamma` uses a Lanczos sum (g = 7, nine terms) below 10 and the
//! Stirling series with six Bernoulli terms above; both are within a few
//! ulps of the true value over `x > 0` (absolute error below 1e-14 near the
//! zeros of ln Γ at 1 and 2, relative error below 1e-15 elsewhere).
//!
//! `ln_beta` avoids the cancellation in `lnΓ(a) + lnΓ(b) − lnΓ(a+b)` for
//! large arguments by working with the Stirling corrections directly.

use crate::error::{Error, Result};
use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const STIRLING_MIN: f64 = 10.0;

/// `1/(12x) − [lnΓ(x) − (x − ½) ln x + x − ½ ln 2π]` for `x ≥ 10`: the
/// Stirling series after its leading term, with the sign flipped.
fn stirling_deficit(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * r2
        * (1.0 / 360.0
            + r2 * (-1.0 / 1260.0
                + r2 * (1.0 / 1680.0 + r2 * (-1.0 / 1188.0 + r2 * (691.0 / 360_360.0)))))
}

/// `lnΓ(x) − [(x − ½) ln x − x + ½ ln 2π]` for `x ≥ 10`.
fn stirling_correction(x: f64) -> f64 {
    1.0 / (12.0 * x) - stirling_deficit(x)
}

fn ln_gamma_lanczos(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection; x is positive here so sin(πx) > 0.
        return (PI / (PI * x).sin()).ln() - ln_gamma_lanczos(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + a.ln()
}

/// Natural log of Γ(x) for `x > 0`. Returns NaN outside the domain.
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x >= STIRLING_MIN {
        (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_correction(x)
    } else {
        ln_gamma_lanczos(x)
    }
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `ln n! − [½ ln 2π + (n + ½) ln n − n]` for `n ≥ 1`, free of the
/// cancellation a direct subtraction suffers for large `n`.
pub fn ln_factorial_stirling_remainder(n: u64) -> f64 {
    let x = n as f64;
    if x >= STIRLING_MIN {
        // ln n! = ln n + lnΓ(n) and lnΓ(n) carries the correction directly.
        stirling_correction(x)
    } else {
        ln_factorial(n) - (LN_SQRT_2PI + (x + 0.5) * x.ln() - x)
    }
}

/// `1/(12n) − ln_factorial_stirling_remainder(n)`, evaluated without
/// cancellation so that it stays accurate when it is far below one ulp of
/// the remainder itself.
pub fn ln_factorial_stirling_deficit(n: u64) -> f64 {
    let x = n as f64;
    if x >= STIRLING_MIN {
        stirling_deficit(x)
    } else {
        1.0 / (12.0 * x) - ln_factorial_stirling_remainder(n)
    }
}

/// `ln B(a, b) = lnΓ(a) + lnΓ(b) − lnΓ(a + b)` for `a, b > 0`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, large) = if a <= b { (a, b) } else { (b, a) };
    if !(small > 0.0) {
        return f64::NAN;
    }
    let sum = small + large;
    if small >= STIRLING_MIN {
        // Both large: ½ ln 2π + (a−½) ln(a/(a+b)) + (b−½) ln(b/(a+b)) − ½ ln(a+b) + corrections.
        LN_SQRT_2PI - 0.5 * sum.ln()
            + (small - 0.5) * (small / sum).ln()
            + (large - 0.5) * (-small / sum).ln_1p()
            + stirling_correction(small)
            + stirling_correction(large)
            - stirling_correction(sum)
    } else if large >= STIRLING_MIN {
        // lnΓ(large) − lnΓ(sum) = −(large − ½) ln(1 + small/large) − small ln(sum) + small + Δcorr
        ln_gamma(small) - (large - 0.5) * (small / large).ln_1p() - small * sum.ln()
            + small
            + stirling_correction(large)
            - stirling_correction(sum)
    } else {
        ln_gamma(small) + ln_gamma(large) - ln_gamma(sum)
    }
}

/// Both sides of the regularized incomplete beta function at one point,
/// `lower = I_x(a, b)` and `upper = 1 − I_x(a, b)`, plus their logarithms.
///
/// The smaller side is always computed directly, so `ln_lower`/`ln_upper`
/// stay accurate far below the `f64` underflow threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSplit {
    pub lower: f64,
    pub upper: f64,
    pub ln_lower: f64,
    pub ln_upper: f64,
}

impl BetaSplit {
    fn from_ln_lower(ln_lower: f64) -> Self {
        let ln_upper = (-ln_lower.exp()).ln_1p();
        Self {
            lower: ln_lower.exp(),
            upper: -ln_lower.exp_m1(),
            ln_lower,
            ln_upper,
        }
    }

    fn from_ln_upper(ln_upper: f64) -> Self {
        let s = Self::from_ln_lower(ln_upper);
        Self {
            lower: s.upper,
            upper: s.lower,
            ln_lower: s.ln_upper,
            ln_upper: s.ln_lower,
        }
    }
}

/// Per-step convergence tolerance of the continued fraction.
pub const CF_TOLERANCE: f64 = 1e-15;
/// Iteration cap of the continued fraction.
pub const CF_MAX_ITER: usize = 500;

const TINY: f64 = 1e-300;

/// Continued fraction for `I_x(a, b)` by the modified Lentz scheme; returns
/// `ln` of the fraction's value (the part after the `x^a (1−x)^b / (a B)` prefix).
fn ln_beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_TOLERANCE {
            return Ok(h.ln());
        }
    }
    Err(Error::numeric(format!(
        "incomplete beta continued fraction did not converge in {CF_MAX_ITER} iterations \
         (a={a}, b={b}, x={x})"
    )))
}

/// Regularized incomplete beta function `I_x(a, b)` and its complement.
///
/// The fraction is evaluated for `I_x(a, b)` when `x` is at most the mean
/// `a/(a+b)` and for `I_{1−x}(b, a)` otherwise.
pub fn regularized_beta(a: f64, b: f64, x: f64) -> Result<BetaSplit> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!(
            "incomplete beta needs positive finite parameters, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "incomplete beta argument {x} outside [0, 1]"
        )));
    }
    if x == 0.0 {
        return Ok(BetaSplit::from_ln_lower(f64::NEG_INFINITY));
    }
    if x == 1.0 {
        return Ok(BetaSplit::from_ln_upper(f64::NEG_INFINITY));
    }
    let ln_x = x.ln();
    let ln_1mx = (-x).ln_1p();
    let ln_b = ln_beta(a, b);
    if x <= a / (a + b) {
        let ln_lower = a * ln_x + b * ln_1mx - ln_b - a.ln() + ln_beta_cf(a, b, x)?;
        Ok(BetaSplit::from_ln_lower(ln_lower.min(0.0)))
    } else {
        let ln_upper = b * ln_1mx + a * ln_x - ln_b - b.ln() + ln_beta_cf(b, a, 1.0 - x)?;
        Ok(BetaSplit::from_ln_upper(ln_upper.min(0.0)))
    }
}
