//! Exact tail probabilities of the split statistic `s`, whose density on
//! `[0, 1]` is `B·f(s)`.
//!
//! The fast path is the regularized incomplete beta function with shape
//! `(k/2, (d−k)/2)`; [`tail_quadrature`] integrates `B·f` directly and is kept
//! independent of that identity so each can check the other.

use crate::error::{Error, Result};
use crate::quadrature::{self, MAX_SUBINTERVALS};
use crate::rng::{batches, substream};
use crate::special::regularized_beta;
use crate::sphere::{log_b, sample_uniform_sphere, split, SplitParams};
use rayon::prelude::*;

/// Absolute accuracy claimed for the continued-fraction route.
pub const CLOSED_FORM_ABS_ERROR: f64 = 1e-12;
/// Absolute tolerance requested from the quadrature route.
pub const QUADRATURE_ABS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    pub params: SplitParams,
    pub eps: f64,
}

impl TailQuery {
    pub fn new(params: SplitParams, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::domain(format!("relative error eps={eps} must be > 0")));
        }
        Ok(Self { params, eps })
    }

    /// `s₀(1+ε)`, capped at 1.
    pub fn upper_threshold(&self) -> f64 {
        (self.params.s0() * (1.0 + self.eps)).min(1.0)
    }

    /// `s₀(1−ε)`, floored at 0.
    pub fn lower_threshold(&self) -> f64 {
        (self.params.s0() * (1.0 - self.eps)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailMethod {
    Closed,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProbabilities {
    pub above: f64,
    pub below: f64,
    pub method: TailMethod,
    /// `Closed`: [`CLOSED_FORM_ABS_ERROR`]. `Quadrature`: the summed
    /// Gauss–Kronrod estimates of both sides. `MonteCarlo`: the larger of the
    /// two binomial standard errors.
    pub abs_error_estimate: f64,
}

/// `P[s ≤ t] = ∫₀ᵗ B f(s) ds`.
pub fn cdf(params: SplitParams, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("cdf argument t={t} outside [0, 1]")));
    }
    let (a, b) = params.beta_shape();
    Ok(regularized_beta(a, b, t)?.lower)
}

/// `ln P[s > s₀(1+ε)]`; `−∞` when the threshold reaches 1.
pub fn ln_tail_above(q: &TailQuery) -> Result<f64> {
    let t = q.upper_threshold();
    if t >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (a, b) = q.params.beta_shape();
    Ok(regularized_beta(a, b, t)?.ln_upper)
}

/// `ln P[s < s₀(1−ε)]`; `−∞` when `ε ≥ 1`.
pub fn ln_tail_below(q: &TailQuery) -> Result<f64> {
    let t = q.lower_threshold();
    if t <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (a, b) = q.params.beta_shape();
    Ok(regularized_beta(a, b, t)?.ln_lower)
}

pub fn tail_above(q: &TailQuery) -> Result<f64> {
    Ok(ln_tail_above(q)?.exp())
}

pub fn tail_below(q: &TailQuery) -> Result<f64> {
    Ok(ln_tail_below(q)?.exp())
}

/// `min(P[s > s₀(1+ε)], P[s < s₀(1−ε)])`: a failure-probability floor valid
/// for every `k×d` matrix.
pub fn certified_tail_floor(q: &TailQuery) -> Result<f64> {
    Ok(tail_above(q)?.min(tail_below(q)?))
}

pub fn ln_certified_tail_floor(q: &TailQuery) -> Result<f64> {
    Ok(ln_tail_above(q)?.min(ln_tail_below(q)?))
}

pub fn tail_probabilities(q: &TailQuery) -> Result<TailProbabilities> {
    Ok(TailProbabilities {
        above: tail_above(q)?,
        below: tail_below(q)?,
        method: TailMethod::Closed,
        abs_error_estimate: CLOSED_FORM_ABS_ERROR,
    })
}

pub fn tail_probabilities_quadrature(q: &TailQuery) -> Result<TailProbabilities> {
    let above = tail_quadrature(q, Side::Above)?;
    let below = tail_quadrature(q, Side::Below)?;
    Ok(TailProbabilities {
        above: above.value,
        below: below.value,
        method: TailMethod::Quadrature,
        abs_error_estimate: above.abs_error + below.abs_error,
    })
}

/// Tail frequencies of `s` over `n` uniform sphere points, each split with
/// the module's split map (batches of trials on seeded substreams).
pub fn tail_probabilities_monte_carlo(q: &TailQuery, n: u64, seed: u64) -> Result<TailProbabilities> {
    if n == 0 {
        return Err(Error::domain("Monte Carlo needs n >= 1"));
    }
    let hi = q.params.s0() * (1.0 + q.eps);
    let lo = q.params.s0() * (1.0 - q.eps);
    let params = q.params;
    let counts = batches(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(b, m)| -> Result<(u64, u64)> {
            let mut rng = substream(seed, b);
            let (mut above, mut below) = (0, 0);
            for _ in 0..m {
                let x = sample_uniform_sphere(params.d(), &mut rng)?;
                let s = split(&x, params)?.s();
                above += u64::from(s > hi);
                below += u64::from(s < lo);
            }
            Ok((above, below))
        })
        .collect::<Result<Vec<_>>>()?;
    let (above, below) = counts
        .iter()
        .fold((0, 0), |(a, b), &(x, y)| (a + x, b + y));
    let pa = above as f64 / n as f64;
    let pb = below as f64 / n as f64;
    let se = |p: f64| (p * (1.0 - p) / n as f64).sqrt();
    Ok(TailProbabilities {
        above: pa,
        below: pb,
        method: TailMethod::MonteCarlo,
        abs_error_estimate: se(pa).max(se(pb)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureTail {
    pub value: f64,
    pub ln_value: f64,
    pub abs_error: f64,
}

/// `∫ B f(s) ds` over `[lo, hi] ⊂ [0, 1]` by adaptive Gauss–Kronrod.
///
/// Pieces inside `[0, ½]` use `s = t²` and pieces inside `[½, 1]` use
/// `1 − s = r²`, which removes the endpoint singularities at `k = 1` or
/// `d − k = 1`. The integrand is evaluated in log domain and divided by its
/// sampled maximum before exponentiation.
pub fn integrate_density(params: SplitParams, lo: f64, hi: f64) -> Result<QuadratureTail> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::domain(format!("bad integration interval [{lo}, {hi}]")));
    }
    let mut pieces = Vec::with_capacity(2);
    if lo < 0.5 {
        pieces.push(Piece::Head(lo.sqrt(), hi.min(0.5).sqrt()));
    }
    if hi > 0.5 {
        pieces.push(Piece::Tail((1.0 - hi).sqrt(), (1.0 - lo.max(0.5)).sqrt()));
    }
    let ln_b = log_b(params);
    let k = params.k() as f64;
    let m = (params.d() - params.k()) as f64;
    // ln of the transformed integrand, B·f(s)·|ds/dt|
    let ln_head = |t: f64| -> f64 {
        // s = t²: 2B t^{k−1} (1−t²)^{(d−k−2)/2}
        let a = if k == 1.0 { 0.0 } else { (k - 1.0) * t.ln() };
        let b = if m == 2.0 { 0.0 } else { 0.5 * (m - 2.0) * (-t * t).ln_1p() };
        std::f64::consts::LN_2 + ln_b + a + b
    };
    let ln_tail = |r: f64| -> f64 {
        // 1−s = r²: 2B r^{d−k−1} (1−r²)^{(k−2)/2}
        let a = if m == 1.0 { 0.0 } else { (m - 1.0) * r.ln() };
        let b = if k == 2.0 { 0.0 } else { 0.5 * (k - 2.0) * (-r * r).ln_1p() };
        std::f64::consts::LN_2 + ln_b + a + b
    };

    let mut parts = Vec::new();
    for piece in pieces {
        let (a, b, g): (f64, f64, &dyn Fn(f64) -> f64) = match piece {
            Piece::Head(a, b) => (a, b, &ln_head),
            Piece::Tail(a, b) => (a, b, &ln_tail),
        };
        if b <= a {
            continue;
        }
        const GRID: usize = 256;
        let scale = (0..=GRID)
            .map(|i| g(a + (b - a) * i as f64 / GRID as f64))
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if scale == f64::NEG_INFINITY {
            continue;
        }
        let tol = (QUADRATURE_ABS_TOL * (-scale).exp()).min(1e-15);
        let r = quadrature::integrate(
            |t| {
                let v = g(t) - scale;
                if v.is_nan() { 0.0 } else { v.exp() }
            },
            a,
            b,
            tol,
            1e-12,
            MAX_SUBINTERVALS,
        )?;
        parts.push((scale, r.value, r.abs_error));
    }
    let top = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Ok(QuadratureTail {
            value: 0.0,
            ln_value: f64::NEG_INFINITY,
            abs_error: 0.0,
        });
    }
    let scaled: f64 = parts.iter().map(|p| p.1 * (p.0 - top).exp()).sum();
    let err: f64 = parts.iter().map(|p| p.2 * p.0.exp()).sum();
    let ln_value = top + scaled.ln();
    Ok(QuadratureTail {
        value: ln_value.exp(),
        ln_value,
        abs_error: err,
    })
}

enum Piece {
    Head(f64, f64),
    Tail(f64, f64),
}

/// Tail probability by direct quadrature of `B·f` over the tail interval.
pub fn tail_quadrature(q: &TailQuery, side: Side) -> Result<QuadratureTail> {
    match side {
        Side::Above => integrate_density(q.params, q.upper_threshold(), 1.0),
        Side::Below => integrate_density(q.params, 0.0, q.lower_threshold()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(k: usize, d: usize, eps: f64) -> TailQuery {
        TailQuery::new(SplitParams::new(k, d).unwrap(), eps).unwrap()
    }

    #[test]
    fn uniform_case_values() {
        let p = SplitParams::new(2, 4).unwrap();
        assert!((cdf(p, 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(cdf(p, 1.0).unwrap(), 1.0);
        assert!(cdf(p, 1.2).is_err());
        assert!((tail_above(&q(2, 4, 0.2)).unwrap() - 0.4).abs() < 1e-15);
        assert!((tail_below(&q(2, 4, 0.2)).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(tail_above(&q(2, 4, 1.0)).unwrap(), 0.0);
        assert_eq!(tail_below(&q(2, 4, 1.0)).unwrap(), 0.0);
        assert!((certified_tail_floor(&q(2, 4, 0.2)).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(certified_tail_floor(&q(2, 4, 1.0)).unwrap(), 0.0);
        let t = tail_quadrature(&q(2, 4, 0.2), Side::Above).unwrap();
        assert!((t.value - 0.4).abs() < 1e-12);
    }

    #[test]
    fn polynomial_tail() {
        // k=4, d=10: B = 12, density 12 s (1−s)²; ∫_{0.6}^1 = 1 − 12(0.6²/2 − 2·0.6³/3 + 0.6⁴/4)
        let exact = 1.0 - 12.0 * (0.18 - 0.144 + 0.0324);
        let qq = q(4, 10, 0.5);
        assert!((tail_quadrature(&qq, Side::Above).unwrap().value - exact).abs() < 1e-12);
        assert!((tail_above(&qq).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn reference_tails() {
        // mpmath betainc at 40 digits
        let cases = [
            (100, 1000, 0.1, 0.222_533_815_455_281_01, 0.233_174_225_857_036_90),
            (16, 160, 0.25, 0.213_824_686_750_498_25, 0.239_887_987_332_079_04),
            (20, 400, 0.2, 0.239_606_131_558_475_22, 0.275_761_049_599_759_99),
        ];
        for (k, d, eps, above, below) in cases {
            let qq = q(k, d, eps);
            assert!((tail_above(&qq).unwrap() - above).abs() < 1e-13);
            assert!((tail_below(&qq).unwrap() - below).abs() < 1e-13);
            assert!((certified_tail_floor(&qq).unwrap() - above.min(below)).abs() < 1e-13);
            let qa = tail_quadrature(&qq, Side::Above).unwrap();
            let qb = tail_quadrature(&qq, Side::Below).unwrap();
            assert!((qa.value - above).abs() < 1e-10);
            assert!((qb.value - below).abs() < 1e-10);
            assert!(qa.abs_error <= 1e-10 && qb.abs_error <= 1e-10);
        }
    }

    #[test]
    fn cdf_matches_quadrature_reference() {
        let p = SplitParams::new(10, 100).unwrap();
        let c = cdf(p, 0.1).unwrap();
        let quad = integrate_density(p, 0.0, 0.1).unwrap();
        assert!((c - quad.value).abs() < 1e-10);
        assert!((c - 0.550_309_133_081_416_79).abs() < 1e-13);
    }

    #[test]
    fn singular_endpoints_integrate() {
        for (k, d) in [(1, 2), (1, 7), (6, 7), (1, 3)] {
            let p = SplitParams::new(k, d).unwrap();
            let total = integrate_density(p, 0.0, 1.0).unwrap().value;
            assert!((total - 1.0).abs() < 1e-10, "k={k}, d={d}: {total}");
            let c = cdf(p, 0.3).unwrap();
            let part = integrate_density(p, 0.0, 0.3).unwrap().value;
            assert!((c - part).abs() < 1e-10, "k={k}, d={d}");
        }
    }

    #[test]
    fn log_tails_survive_underflow() {
        let qq = q(4000, 40_000, 0.9);
        let ln = ln_tail_below(&qq).unwrap();
        assert!(ln.is_finite() && ln < -745.0);
        assert_eq!(tail_below(&qq).unwrap(), 0.0);
        let quad = tail_quadrature(&qq, Side::Below).unwrap();
        assert!((quad.ln_value - ln).abs() < 1e-8 * ln.abs());
    }

    #[test]
    fn rejects_nonpositive_eps() {
        let p = SplitParams::new(2, 4).unwrap();
        assert!(TailQuery::new(p, 0.0).is_err());
        assert!(TailQuery::new(p, -0.1).is_err());
    }
}
