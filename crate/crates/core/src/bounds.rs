//! Explicit two-sided bounds on the tails of the split statistic.
//!
//! Every bound is evaluated in log domain; the `ln_*` functions are the
//! primary entry points and the plain-valued versions exponentiate them.
//! All logarithms are natural. The bound evaluators require `k` and `d`
//! even (the `B` estimate they rest on is only established for even
//! parity); exact tails from [`crate::tail`] have no such restriction.

use crate::error::{Error, Result};
use crate::special::ln_factorial;
use crate::sphere::{log_b, log_density_f, SplitParams};
use crate::tail::{ln_tail_above, ln_tail_below, TailQuery};
use std::f64::consts::{LN_2, PI};

fn ln_sqrt_pi() -> f64 {
    0.5 * PI.ln()
}

/// `ln(e⁻²/(2√π))`: lower prefactor for `B`, lower bound of `B s₀ f(s₀)/√k`,
/// and prefactor of the lower-tail lower bound.
pub fn ln_c_b_lower() -> f64 {
    -2.0 - LN_2 - ln_sqrt_pi()
}

/// `ln(e⁻¹/(2√π))`: upper prefactor for `B`.
pub fn ln_c_b_upper() -> f64 {
    -1.0 - LN_2 - ln_sqrt_pi()
}

/// `ln(9e⁻¹/√(2π))`: upper bound of `B s₀ f(s₀)/√k`.
pub fn ln_c_bsf_upper() -> f64 {
    9f64.ln() - 1.0 - 0.5 * (2.0 * PI).ln()
}

/// `ln(e⁻²/(4√π))`: prefactor of the upper-tail lower bound.
pub fn ln_c_above_lower() -> f64 {
    -2.0 - 2.0 * LN_2 - ln_sqrt_pi()
}

/// `ln(e⁻²/(4π))`: prefactor of the δ-form upper-tail lower bound.
pub fn ln_c_above_lower_delta_form() -> f64 {
    -2.0 - 2.0 * LN_2 - PI.ln()
}

/// `ln(27e⁻¹/√(2π))`: prefactor of the upper-tail upper bound.
pub fn ln_c_above_upper() -> f64 {
    27f64.ln() - 1.0 - 0.5 * (2.0 * PI).ln()
}

/// `ln(18√2·e^{1/2}/√π)`: prefactor of the lower-tail upper bound.
pub fn ln_c_below_upper() -> f64 {
    18f64.ln() + 0.5 * LN_2 + 0.5 - ln_sqrt_pi()
}

/// One constant `C` that dominates both tail upper bounds:
/// `max(27e⁻¹/√(2π), 18√2·e^{1/2}/√π)`.
pub fn default_tail_constant() -> f64 {
    ln_c_above_upper().max(ln_c_below_upper()).exp()
}

/// Robbins' bracket `(lo, hi)` of `ln n!`:
/// `½ ln 2π + (n+½) ln n − n + 1/(12n+1) < ln n! < … + 1/(12n)`.
pub fn robbins_log_factorial_bounds(n: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::domain("Robbins bounds need n >= 1"));
    }
    let x = n as f64;
    let base = 0.5 * (2.0 * PI).ln() + (x + 0.5) * x.ln() - x;
    Ok((base + 1.0 / (12.0 * x + 1.0), base + 1.0 / (12.0 * x)))
}

fn require_even(params: SplitParams) -> Result<()> {
    if params.k() % 2 != 0 || params.d() % 2 != 0 {
        return Err(Error::domain(format!(
            "bound needs k and d even, got k={}, d={}",
            params.k(),
            params.d()
        )));
    }
    Ok(())
}

fn b_bound_core(params: SplitParams) -> Result<f64> {
    require_even(params)?;
    let (k, d) = (params.k() as f64, params.d() as f64);
    if params.k() < 4 || params.d() - params.k() < 4 {
        return Err(Error::domain(format!(
            "B bounds need k >= 4 and d - k >= 4, got k={}, d={}",
            params.k(),
            params.d()
        )));
    }
    Ok(0.5 * (d - 1.0) * (d - 2.0).ln()
        - 0.5 * (k - 1.0) * (k - 2.0).ln()
        - 0.5 * (d - k - 1.0) * (d - k - 2.0).ln())
}

/// `(ln lower, ln upper)` bracketing `ln B` for even `k ≥ 4`, `d − k ≥ 4`:
/// `C · (d−2)^{(d−1)/2} / ((k−2)^{(k−1)/2} (d−k−2)^{(d−k−1)/2})` with
/// `C = e⁻²/(2√π)` below and `e⁻¹/(2√π)` above.
pub fn b_bounds(params: SplitParams) -> Result<(f64, f64)> {
    let core = b_bound_core(params)?;
    Ok((ln_c_b_lower() + core, ln_c_b_upper() + core))
}

/// `ln(B s₀ f(s₀))`, exact.
pub fn ln_bsf(params: SplitParams) -> f64 {
    let s0 = params.s0();
    log_b(params) + s0.ln() + log_density_f(s0, params).expect("s0 lies in (0, 1)")
}

/// `(ln lower, ln upper)` bracketing `ln(B s₀ f(s₀))`:
/// `e⁻²/(2√π)·√k ≤ B s₀ f(s₀) ≤ 9e⁻¹/√(2π)·√k`.
pub fn bsf_bounds(params: SplitParams) -> Result<(f64, f64)> {
    b_bound_core(params)?;
    if !(params.s0() < 0.4) {
        return Err(Error::domain(format!("B s0 f(s0) bounds need s0 < 0.4, got {}", params.s0())));
    }
    let half_ln_k = 0.5 * (params.k() as f64).ln();
    Ok((ln_c_b_lower() + half_ln_k, ln_c_bsf_upper() + half_ln_k))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::domain(format!("bound needs 0 < eps <= 1/2, got {eps}")));
    }
    Ok(())
}

fn check_k_eps(k: usize, eps: f64) -> Result<()> {
    check_eps(eps)?;
    if !(k as f64 - 4.0 >= 1.0 / (eps * eps)) {
        return Err(Error::domain(format!(
            "bound needs k - 4 >= eps^-2, got k={k}, eps={eps}"
        )));
    }
    Ok(())
}

fn check_tail_assumptions(params: SplitParams, eps: f64) -> Result<()> {
    check_k_eps(params.k(), eps)?;
    if !(params.s0() < 0.4) {
        return Err(Error::domain(format!("bound needs s0 < 0.4, got {}", params.s0())));
    }
    require_even(params)
}

fn require_even_k(k: usize) -> Result<()> {
    if k % 2 != 0 {
        return Err(Error::domain(format!("bound needs k even, got k={k}")));
    }
    Ok(())
}

/// `ln` of `e⁻²/(4√π) · exp(−¼(√k ε + 1)² (1+s₀)/(1−s₀))`, a lower bound of
/// `P[s > s₀(1+ε)]`.
pub fn ln_upper_tail_lower_bound(params: SplitParams, eps: f64) -> Result<f64> {
    check_tail_assumptions(params, eps)?;
    let s0 = params.s0();
    let r = (params.k() as f64).sqrt() * eps + 1.0;
    Ok(ln_c_above_lower() - 0.25 * r * r * (1.0 + s0) / (1.0 - s0))
}

pub fn upper_tail_lower_bound(params: SplitParams, eps: f64) -> Result<f64> {
    Ok(ln_upper_tail_lower_bound(params, eps)?.exp())
}

/// `ln` of `27e⁻¹/√(2π) · exp(−((k−2)/4) ε² (1 − 2ε/3))`, an upper bound of
/// `P[s > s₀(1+ε)]` whenever `s₀ < 0.4`.
pub fn ln_upper_tail_upper_bound(k: usize, eps: f64) -> Result<f64> {
    check_k_eps(k, eps)?;
    require_even_k(k)?;
    let k = k as f64;
    Ok(ln_c_above_upper() - 0.25 * (k - 2.0) * eps * eps * (1.0 - 2.0 * eps / 3.0))
}

pub fn upper_tail_upper_bound(k: usize, eps: f64) -> Result<f64> {
    Ok(ln_upper_tail_upper_bound(k, eps)?.exp())
}

/// `ln` of `e⁻²/(2√π) · exp(−¼((√k ε + 1)²/(1−s₀) + 2(∛k ε + k^{−1/6})³))`,
/// a lower bound of `P[s < s₀(1−ε)]`.
pub fn ln_lower_tail_lower_bound(params: SplitParams, eps: f64) -> Result<f64> {
    check_tail_assumptions(params, eps)?;
    let s0 = params.s0();
    let k = params.k() as f64;
    let r = k.sqrt() * eps + 1.0;
    let c = k.cbrt() * eps + k.powf(-1.0 / 6.0);
    Ok(ln_c_b_lower() - 0.25 * (r * r / (1.0 - s0) + 2.0 * c * c * c))
}

pub fn lower_tail_lower_bound(params: SplitParams, eps: f64) -> Result<f64> {
    Ok(ln_lower_tail_lower_bound(params, eps)?.exp())
}

/// `ln` of `18√2·e^{1/2}/√π · exp(−(k/4) ε²)`, an upper bound of
/// `P[s < s₀(1−ε)]`. Needs `k ≥ ε⁻²`.
pub fn ln_lower_tail_upper_bound(k: usize, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    require_even_k(k)?;
    if !(k as f64 >= 1.0 / (eps * eps)) {
        return Err(Error::domain(format!("bound needs k >= eps^-2, got k={k}, eps={eps}")));
    }
    Ok(ln_c_below_upper() - 0.25 * k as f64 * eps * eps)
}

pub fn lower_tail_upper_bound(k: usize, eps: f64) -> Result<f64> {
    Ok(ln_lower_tail_upper_bound(k, eps)?.exp())
}

/// The weaker form with exponent `−((k−2)/4) ε² (1 − 2ε/3)`.
pub fn ln_lower_tail_upper_bound_weak(k: usize, eps: f64) -> Result<f64> {
    ln_lower_tail_upper_bound(k, eps)?;
    let k = k as f64;
    Ok(ln_c_below_upper() - 0.25 * (k - 2.0) * eps * eps * (1.0 - 2.0 * eps / 3.0))
}

fn check_eta_delta(eta: f64, delta: f64, s0: f64) -> Result<()> {
    if !(eta > 0.0) || !(delta > 0.0 && delta < 1.0) || !(0.0..0.4).contains(&s0) {
        return Err(Error::domain(format!(
            "gamma needs eta > 0, 0 < delta < 1, 0 <= s0 < 0.4 (got eta={eta}, delta={delta}, s0={s0})"
        )));
    }
    Ok(())
}

/// `γ₁ = (1 + (η ln(1/δ))^{−1/2})² (1+s₀)/(1−s₀)`.
pub fn gamma1(eta: f64, delta: f64, s0: f64) -> Result<f64> {
    check_eta_delta(eta, delta, s0)?;
    let l = eta * (1.0 / delta).ln();
    let a = 1.0 + l.powf(-0.5);
    Ok(a * a * (1.0 + s0) / (1.0 - s0))
}

/// `γ₂ = (1 + (η ln(1/δ))^{−1/2})²/(1−s₀) + 2(ε^{1/3} + (η ln(1/δ))^{−1/3})³`.
pub fn gamma2(eta: f64, delta: f64, eps: f64, s0: f64) -> Result<f64> {
    check_eta_delta(eta, delta, s0)?;
    if !(eps >= 0.0) {
        return Err(Error::domain(format!("gamma2 needs eps >= 0, got {eps}")));
    }
    let l = eta * (1.0 / delta).ln();
    let a = 1.0 + l.powf(-0.5);
    let c = eps.cbrt() + l.powf(-1.0 / 3.0);
    Ok(a * a / (1.0 - s0) + 2.0 * c * c * c)
}

/// `ln((e⁻²/(4π)) δ^{ηγ₁/4})`, the upper-tail lower bound rewritten for
/// `k ≤ ηε⁻² ln(1/δ)`.
pub fn ln_upper_tail_lower_bound_delta_form(eta: f64, delta: f64, s0: f64) -> Result<f64> {
    let g = gamma1(eta, delta, s0)?;
    Ok(ln_c_above_lower_delta_form() + 0.25 * eta * g * delta.ln())
}

/// `ln((e⁻²/(2√π)) δ^{ηγ₂/4})`, the lower-tail lower bound rewritten for
/// `k ≤ ηε⁻² ln(1/δ)`.
pub fn ln_lower_tail_lower_bound_delta_form(eta: f64, delta: f64, eps: f64, s0: f64) -> Result<f64> {
    let g = gamma2(eta, delta, eps, s0)?;
    Ok(ln_c_b_lower() + 0.25 * eta * g * delta.ln())
}

/// Which standing assumptions hold at a parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionSet {
    pub eps: f64,
    pub delta: f64,
    pub params: SplitParams,
    pub eps_ok: bool,
    pub delta_ok: bool,
    /// `k − 4 ≥ ε⁻²`
    pub size_ok: bool,
    /// `s₀ < 0.4`
    pub s0_ok: bool,
    /// `k` and `d` both even
    pub parity_ok: bool,
}

impl AssumptionSet {
    /// `0 < ε ≤ ½`, `0 < δ ≤ ½`, `k − 4 ≥ ε⁻²` and `s₀ < 0.4`.
    pub fn holds(&self) -> bool {
        self.eps_ok && self.delta_ok && self.size_ok && self.s0_ok
    }

    /// Human-readable list of the failing conditions.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.eps_ok {
            v.push(format!("eps={} not in (0, 1/2]", self.eps));
        }
        if !self.delta_ok {
            v.push(format!("delta={} not in (0, 1/2]", self.delta));
        }
        if !self.size_ok {
            v.push(format!("k - 4 = {} < eps^-2 = {}", self.params.k() as i64 - 4, 1.0 / (self.eps * self.eps)));
        }
        if !self.s0_ok {
            v.push(format!("s0 = {} >= 0.4", self.params.s0()));
        }
        if !self.parity_ok {
            v.push(format!("k={} or d={} is odd", self.params.k(), self.params.d()));
        }
        v
    }
}

pub fn assumptions_hold(eps: f64, delta: f64, params: SplitParams) -> AssumptionSet {
    AssumptionSet {
        eps,
        delta,
        params,
        eps_ok: eps > 0.0 && eps <= 0.5,
        delta_ok: delta > 0.0 && delta <= 0.5,
        size_ok: params.k() as f64 - 4.0 >= 1.0 / (eps * eps),
        s0_ok: params.s0() < 0.4,
        parity_ok: params.k() % 2 == 0 && params.d() % 2 == 0,
    }
}

/// Relative slack allowed when comparing a bound with an exact tail.
pub const SANDWICH_SLACK: f64 = 1e-12;

/// Exact tails next to every applicable bound at one `(k, d, ε)`.
///
/// Bound fields are `None` where the bound's own preconditions fail; the
/// sandwich flags are `None` unless both bounds of that side are present.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub exact_above: f64,
    pub exact_below: f64,
    pub ln_exact_above: f64,
    pub ln_exact_below: f64,
    pub lower_of_above: Option<f64>,
    pub upper_of_above: Option<f64>,
    pub lower_of_below: Option<f64>,
    pub upper_of_below: Option<f64>,
    pub ln_lower_of_above: Option<f64>,
    pub ln_upper_of_above: Option<f64>,
    pub ln_lower_of_below: Option<f64>,
    pub ln_upper_of_below: Option<f64>,
    pub sandwich_above: Option<bool>,
    pub sandwich_below: Option<bool>,
    pub assumptions: AssumptionSet,
}

fn sandwiched(lo: f64, exact: f64, hi: f64) -> bool {
    lo <= exact + SANDWICH_SLACK && exact <= hi + SANDWICH_SLACK
}

impl BoundReport {
    pub fn compute(params: SplitParams, eps: f64, delta: f64) -> Result<Self> {
        let q = TailQuery::new(params, eps)?;
        let ln_exact_above = ln_tail_above(&q)?;
        let ln_exact_below = ln_tail_below(&q)?;
        let lla = ln_upper_tail_lower_bound(params, eps).ok();
        let lua = if params.s0() < 0.4 && params.d() % 2 == 0 {
            ln_upper_tail_upper_bound(params.k(), eps).ok()
        } else {
            None
        };
        let llb = ln_lower_tail_lower_bound(params, eps).ok();
        let lub = if params.s0() < 0.4 && params.d() % 2 == 0 {
            ln_lower_tail_upper_bound(params.k(), eps).ok()
        } else {
            None
        };
        let side = |lo: Option<f64>, exact: f64, hi: Option<f64>| match (lo, hi) {
            (Some(lo), Some(hi)) => Some(sandwiched(lo, exact, hi)),
            _ => None,
        };
        Ok(Self {
            exact_above: ln_exact_above.exp(),
            exact_below: ln_exact_below.exp(),
            ln_exact_above,
            ln_exact_below,
            lower_of_above: lla.map(f64::exp),
            upper_of_above: lua.map(f64::exp),
            lower_of_below: llb.map(f64::exp),
            upper_of_below: lub.map(f64::exp),
            ln_lower_of_above: lla,
            ln_upper_of_above: lua,
            ln_lower_of_below: llb,
            ln_upper_of_below: lub,
            sandwich_above: side(lla, ln_exact_above, lua),
            sandwich_below: side(llb, ln_exact_below, lub),
            assumptions: assumptions_hold(eps, delta, params),
        })
    }

    /// True if some present bound is violated by the exact tail.
    pub fn has_violation(&self) -> bool {
        self.sandwich_above == Some(false) || self.sandwich_below == Some(false)
    }

    pub const CSV_HEADER: &'static str =
        "k,d,eps,exact_above,lb_above,ub_above,exact_below,lb_below,ub_below,sandwich_above,sandwich_below";

    /// One CSV row; absent bounds and flags are empty fields.
    pub fn csv_row(&self) -> String {
        let num = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        let flag = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
        let p = self.assumptions.params;
        format!(
            "{},{},{},{:.17e},{},{},{:.17e},{},{},{},{}",
            p.k(),
            p.d(),
            self.assumptions.eps,
            self.exact_above,
            num(self.lower_of_above),
            num(self.upper_of_above),
            self.exact_below,
            num(self.lower_of_below),
            num(self.upper_of_below),
            flag(self.sandwich_above),
            flag(self.sandwich_below),
        )
    }
}

/// `ln n!` evaluated through log-gamma, re-exported for bracket checks.
pub fn ln_factorial_exact(n: u64) -> f64 {
    ln_factorial(n)
}
