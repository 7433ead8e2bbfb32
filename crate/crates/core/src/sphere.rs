//! Uniform points on `S^{d−1}`, the split map `x ↦ (s, u, v)` and the
//! closed-form quantities of the product decomposition
//! `dΩ_{d−1} = ½ f(s) ds dΩ_{k−1} dΩ_{d−k−1}`.

use crate::error::{Error, Result};
use crate::special::{ln_beta, ln_gamma};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{LN_2, PI};

/// Largest tolerated deviation of a unit vector's norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-12;

/// A point on the unit sphere `S^{d−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Checks the norm; fails if it is off by more than [`UNIT_NORM_TOLERANCE`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("a unit vector needs dimension d >= 1"));
        }
        let norm = norm2(&coords);
        if !((norm - 1.0).abs() <= UNIT_NORM_TOLERANCE) {
            return Err(Error::domain(format!(
                "vector of norm {norm} is not on the unit sphere"
            )));
        }
        Ok(Self { coords })
    }

    /// Rescales a nonzero vector onto the sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        let norm = norm2(&coords);
        if coords.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(Self { coords })
    }

    /// The standard basis vector `e_{index+1}` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::domain(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut coords = vec![0.0; dim];
        coords[index] = 1.0;
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

pub(crate) fn norm2(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The pair `(k, d)` with `1 ≤ k < d`; `s₀ = k/d` is always recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitParams {
    k: usize,
    d: usize,
}

impl SplitParams {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        if k == 0 || k >= d {
            return Err(Error::domain(format!(
                "split parameters need 1 <= k < d, got k={k}, d={d}"
            )));
        }
        Ok(Self { k, d })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s0(&self) -> f64 {
        self.k as f64 / self.d as f64
    }

    /// Beta shape parameters `(k/2, (d−k)/2)` of the law of `s`.
    pub(crate) fn beta_shape(&self) -> (f64, f64) {
        (0.5 * self.k as f64, 0.5 * (self.d - self.k) as f64)
    }
}

/// Image `(s, u, v)` of a sphere point under the split map.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereSplit {
    s: f64,
    u: UnitVector,
    v: UnitVector,
}

impl SphereSplit {
    pub fn new(s: f64, u: UnitVector, v: UnitVector) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::domain(format!("split statistic s={s} outside [0, 1]")));
        }
        Ok(Self { s, u, v })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn u(&self) -> &UnitVector {
        &self.u
    }

    pub fn v(&self) -> &UnitVector {
        &self.v
    }
}

/// `X/‖X‖₂` for `X` a vector of `d` independent standard normals.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<UnitVector> {
    if d == 0 {
        return Err(Error::domain("cannot sample the sphere in dimension 0"));
    }
    let mut coords = vec![0.0; d];
    loop {
        fill_standard_normal(&mut coords, rng);
        let norm = norm2(&coords);
        if norm > 0.0 {
            coords.iter_mut().for_each(|c| *c /= norm);
            return Ok(UnitVector { coords });
        }
    }
}

pub(crate) fn fill_standard_normal<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    for c in out.iter_mut() {
        *c = rng.sample(StandardNormal);
    }
}

/// Splits `x` into `s = x₁² + ⋯ + x_k²`, `u = (x₁…x_k)/√s` and
/// `v = (x_{k+1}…x_d)/√(1−s)`. At `s = 0` the `u` factor is `e₁`; at `s = 1`
/// the `v` factor is `e₁`.
pub fn split(x: &UnitVector, params: SplitParams) -> Result<SphereSplit> {
    if x.dim() != params.d() {
        return Err(Error::domain(format!(
            "vector has dimension {} but the split expects d={}",
            x.dim(),
            params.d()
        )));
    }
    let (head, tail) = x.coords().split_at(params.k());
    let s_head: f64 = head.iter().map(|c| c * c).sum();
    let s_tail: f64 = tail.iter().map(|c| c * c).sum();
    let u = if s_head > 0.0 {
        UnitVector::normalize(head.to_vec())?
    } else {
        UnitVector::basis(params.k(), 0)?
    };
    let v = if s_tail > 0.0 {
        UnitVector::normalize(tail.to_vec())?
    } else {
        UnitVector::basis(params.d() - params.k(), 0)?
    };
    let s = (s_head / (s_head + s_tail)).clamp(0.0, 1.0);
    Ok(SphereSplit { s, u, v })
}

/// Inverse of [`split`] on its image: `(√s·u, √(1−s)·v)`.
pub fn unsplit(sp: &SphereSplit) -> Result<UnitVector> {
    let a = sp.s.sqrt();
    let b = (1.0 - sp.s).sqrt();
    let coords = sp
        .u
        .coords()
        .iter()
        .map(|c| a * c)
        .chain(sp.v.coords().iter().map(|c| b * c))
        .collect();
    UnitVector::new(coords)
}

/// `ln(2π^{d/2}/Γ(d/2))`, the log surface area of `S^{d−1}`.
pub fn log_sphere_area(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("sphere area needs d >= 1"));
    }
    let half = 0.5 * d as f64;
    Ok(LN_2 + half * PI.ln() - ln_gamma(half))
}

fn power_term(exponent: f64, base: f64, ln_base: f64) -> f64 {
    if exponent == 0.0 {
        0.0
    } else if base == 0.0 {
        if exponent > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        exponent * ln_base
    }
}

/// `ln f(s) = ((k−2)/2) ln s + ((d−k−2)/2) ln(1−s)`, with `0⁰ = 1`.
pub fn log_density_f(s: f64, params: SplitParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("density argument s={s} outside [0, 1]")));
    }
    let a = 0.5 * (params.k() as f64 - 2.0);
    let b = 0.5 * (params.d() as f64 - params.k() as f64 - 2.0);
    Ok(power_term(a, s, s.ln()) + power_term(b, 1.0 - s, (-s).ln_1p()))
}

/// `ln B = lnΓ(d/2) − lnΓ(k/2) − lnΓ((d−k)/2)`.
pub fn log_b(params: SplitParams) -> f64 {
    let (a, b) = params.beta_shape();
    -ln_beta(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn uv(c: &[f64]) -> UnitVector {
        UnitVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn sphere_zero_is_two_points() {
        let mut rng = substream(1, 0);
        for _ in 0..50 {
            let x = sample_uniform_sphere(1, &mut rng).unwrap();
            assert!(x.coords() == [1.0] || x.coords() == [-1.0]);
        }
        assert!(matches!(sample_uniform_sphere(0, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn split_examples() {
        let p = SplitParams::new(2, 4).unwrap();
        let sp = split(&uv(&[1.0, 0.0, 0.0, 0.0]), p).unwrap();
        assert_eq!(sp.s(), 1.0);
        assert_eq!(sp.u().coords(), [1.0, 0.0]);
        assert_eq!(sp.v().coords(), [1.0, 0.0]);

        let sp = split(&uv(&[0.6, 0.8]), SplitParams::new(1, 2).unwrap()).unwrap();
        assert!((sp.s() - 0.36).abs() < 1e-15);
        assert!((sp.u().coords()[0] - 1.0).abs() < 1e-15);
        assert!((sp.v().coords()[0] - 1.0).abs() < 1e-15);

        let sp = split(&uv(&[0.5; 4]), p).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((sp.s() - 0.5).abs() < 1e-15);
        for c in sp.u().coords().iter().chain(sp.v().coords()) {
            assert!((c - r).abs() < 1e-15);
        }
    }

    #[test]
    fn split_s_zero_uses_e1_for_u() {
        let p = SplitParams::new(2, 4).unwrap();
        let sp = split(&uv(&[0.0, 0.0, 0.6, 0.8]), p).unwrap();
        assert_eq!(sp.s(), 0.0);
        assert_eq!(sp.u().coords(), [1.0, 0.0]);
        assert_eq!(sp.v().coords(), [0.6, 0.8]);
    }

    #[test]
    fn split_dimension_mismatch() {
        let p = SplitParams::new(2, 5).unwrap();
        assert!(matches!(split(&uv(&[1.0, 0.0]), p), Err(Error::Domain(_))));
    }

    #[test]
    fn unsplit_examples() {
        let sp = SphereSplit::new(0.5, uv(&[1.0, 0.0]), uv(&[1.0, 0.0])).unwrap();
        let x = unsplit(&sp).unwrap();
        let r = 0.5f64.sqrt();
        assert_eq!(x.coords(), [r, 0.0, r, 0.0]);
        let sp = SphereSplit::new(1.0, uv(&[0.0, 1.0]), uv(&[1.0, 0.0])).unwrap();
        assert_eq!(unsplit(&sp).unwrap().coords(), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn split_params_validation() {
        assert!(SplitParams::new(0, 3).is_err());
        assert!(SplitParams::new(3, 3).is_err());
        assert_eq!(SplitParams::new(3, 12).unwrap().s0(), 0.25);
    }

    #[test]
    fn sphere_areas() {
        assert!((log_sphere_area(1).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((log_sphere_area(2).unwrap() - (2.0 * PI).ln()).abs() < 1e-15);
        assert!((log_sphere_area(3).unwrap() - (4.0 * PI).ln()).abs() < 1e-15);
        assert!(log_sphere_area(0).is_err());
    }

    #[test]
    fn density_examples() {
        let p = SplitParams::new(2, 4).unwrap();
        assert_eq!(log_density_f(0.37, p).unwrap(), 0.0);
        let p = SplitParams::new(4, 8).unwrap();
        // exponents (k−2)/2 = 1 and (d−k−2)/2 = 1: f(½) = ¼
        assert!((log_density_f(0.5, p).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        let p = SplitParams::new(2, 6).unwrap();
        assert_eq!(log_density_f(0.0, p).unwrap(), 0.0);
        assert_eq!(log_density_f(1.0, p).unwrap(), f64::NEG_INFINITY);
        assert!(log_density_f(1.5, p).is_err());
        let p = SplitParams::new(1, 6).unwrap();
        assert_eq!(log_density_f(0.0, p).unwrap(), f64::INFINITY);
    }

    #[test]
    fn log_b_examples() {
        assert!(log_b(SplitParams::new(2, 4).unwrap()).abs() < 1e-14);
        assert!((log_b(SplitParams::new(4, 8).unwrap()) - 6f64.ln()).abs() < 1e-14);
        // mpmath: lnΓ(3.5) − lnΓ(1.5) − lnΓ(2)
        assert!((log_b(SplitParams::new(3, 7).unwrap()) - 1.321_755_839_982_319_4).abs() < 1e-14);
    }
}
