//! Certified lower bounds on the failure probability of arbitrary matrices.
//!
//! For `A = UΣVᵗ` and `w` uniform, `x = Vᵗw` is uniform too, so
//! `‖Aw‖² = Σ λᵢ² xᵢ² = s · c(u)` with `(s, u, v)` the split of `x` and
//! `c(u) = Σ λᵢ² uᵢ²`. Because `s` is independent of `u`, whichever side of
//! `1/s₀` the value `c(u)` falls on, one of the two exact tails of `s` is
//! contained in the failure event. The smaller tail is therefore a floor
//! for every `k × d` matrix.

use crate::bounds::{
    assumptions_hold, gamma1, gamma2, ln_lower_tail_lower_bound_delta_form,
    ln_upper_tail_lower_bound_delta_form,
};
use crate::error::{Error, Result};
use crate::rng::{batches, substream};
use crate::sphere::{fill_standard_normal, SplitParams};
use crate::tail::{certified_tail_floor, TailQuery};
use crate::transform::{apply, estimate_distortion_prob, DistortionEstimate, DistortionSource, ProjectionMatrix};
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

/// Off-diagonal mass, relative to the Frobenius norm, at which Jacobi stops.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_THRESHOLD: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Singular values of a `k × d` matrix, nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub k: usize,
    pub d: usize,
    pub singular_values: Vec<f64>,
    /// Left singular vectors `uᵢ`, matching `singular_values`; empty for a
    /// profile built from singular values alone.
    pub left_vectors: Vec<Vec<f64>>,
}

impl SpectralProfile {
    pub fn from_singular_values(k: usize, d: usize, singular_values: Vec<f64>) -> Self {
        Self { k, d, singular_values, left_vectors: Vec::new() }
    }

    /// Coordinates `xᵢ = vᵢ · w` of `w` along the right singular vectors,
    /// using `vᵢ = Aᵗuᵢ/λᵢ`. Zero singular values give `xᵢ = 0`.
    pub fn right_coordinates(&self, a: &ProjectionMatrix, w: &[f64]) -> Result<Vec<f64>> {
        if self.left_vectors.len() != self.k {
            return Err(Error::domain("profile carries no singular vectors"));
        }
        let aw = apply(a, w)?;
        Ok(self
            .singular_values
            .iter()
            .zip(&self.left_vectors)
            .map(|(&l, u)| {
                if l > 0.0 {
                    u.iter().zip(&aw).map(|(x, y)| x * y).sum::<f64>() / l
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// Number of singular values above the rank threshold.
    pub fn rank(&self) -> usize {
        self.singular_values.iter().filter(|&&l| l > 0.0).count()
    }

    /// `c(u) = Σ λᵢ² uᵢ²`.
    pub fn c_of_u(&self, u: &[f64]) -> f64 {
        self.singular_values.iter().zip(u).map(|(l, x)| l * l * x * x).sum()
    }
}

/// Eigenvalues and eigenvectors (columns of the second result, row-major)
/// of the symmetric `n × n` row-major `a` by cyclic Jacobi.
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v = vec![0.0; n * n];
    (0..n).for_each(|i| v[i * n + i] = 1.0);
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_TOLERANCE * frob {
            return Ok(((0..n).map(|i| a[i * n + i]).collect(), v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
            }
        }
    }
    Err(Error::numeric(format!(
        "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

/// Singular values of `A` from the eigenvalues of `AAᵗ`.
pub fn spectral_profile(a: &ProjectionMatrix) -> Result<SpectralProfile> {
    let (k, d) = (a.k(), a.d());
    if k > d {
        return Err(Error::domain(format!("need k <= d, got {k}x{d}")));
    }
    if a.entries().iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let g: f64 = a.row(i).iter().zip(a.row(j)).map(|(x, y)| x * y).sum();
            gram[i * k + j] = g;
            gram[j * k + i] = g;
        }
    }
    let (eig, vecs) = jacobi_eigen(gram, k)?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig[j].total_cmp(&eig[i]));
    let mut sv: Vec<f64> = order.iter().map(|&i| eig[i].max(0.0).sqrt()).collect();
    let cutoff = RANK_THRESHOLD * sv[0];
    sv.iter_mut().filter(|l| **l < cutoff).for_each(|l| *l = 0.0);
    let left_vectors = order
        .iter()
        .map(|&i| (0..k).map(|r| vecs[r * k + i]).collect())
        .collect();
    Ok(SpectralProfile { k, d, singular_values: sv, left_vectors })
}

/// `min(P[s > s₀(1+ε)], P[s < s₀(1−ε)])`: no `k × d` matrix fails less often.
pub fn exact_failure_floor(k: usize, d: usize, eps: f64) -> Result<f64> {
    certified_tail_floor(&TailQuery::new(SplitParams::new(k, d)?, eps)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailurePath {
    /// `w` uniform on `S^{d−1}`, `‖Aw‖²` computed directly.
    Direct,
    /// `s` from its Beta law, `u` uniform on `S^{k−1}`, `‖Aw‖² = s·c(u)`.
    Decomposed,
}

/// Monte Carlo `P[|‖Aw‖² − 1| > ε]` over uniform `w`.
pub fn empirical_failure_prob(
    a: &ProjectionMatrix,
    eps: f64,
    n: u64,
    seed: u64,
    path: FailurePath,
) -> Result<DistortionEstimate> {
    match path {
        FailurePath::Direct => estimate_distortion_prob(DistortionSource::Matrix(a), eps, n, seed),
        FailurePath::Decomposed => {
            let profile = spectral_profile(a)?;
            decomposed_failure_prob(&profile, eps, n, seed)
        }
    }
}

/// The decomposed path from a precomputed profile.
pub fn decomposed_failure_prob(
    profile: &SpectralProfile,
    eps: f64,
    n: u64,
    seed: u64,
) -> Result<DistortionEstimate> {
    if n == 0 {
        return Err(Error::domain("Monte Carlo needs n >= 1"));
    }
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    let (k, d) = (profile.k, profile.d);
    let beta = if k < d {
        Some(
            Beta::new(k as f64 / 2.0, (d - k) as f64 / 2.0)
                .map_err(|e| Error::domain(format!("Beta law: {e}")))?,
        )
    } else {
        None
    };
    // A flat spectrum makes c(u) constant, so u need not be drawn.
    let sv = &profile.singular_values;
    let flat = sv.iter().all(|&l| l == sv[0]).then(|| sv[0] * sv[0]);
    let failures: u64 = batches(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(b, m)| {
            let mut rng = substream(seed, b);
            let mut u = vec![0.0; if flat.is_some() { 0 } else { k }];
            let mut count = 0u64;
            for _ in 0..m {
                let s = beta.as_ref().map_or(1.0, |law| law.sample(&mut rng));
                let c = match flat {
                    Some(c) => c,
                    None => {
                        fill_standard_normal(&mut u, &mut rng);
                        let norm2: f64 = u.iter().map(|x| x * x).sum();
                        profile.c_of_u(&u) / norm2
                    }
                };
                count += u64::from((s * c - 1.0).abs() > eps);
            }
            count
        })
        .sum();
    Ok(DistortionEstimate::from_count(failures, n, eps))
}

/// Outcome of the impossibility certificate at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct CertVerdict {
    pub k: usize,
    pub d: usize,
    pub eps: f64,
    pub delta: f64,
    /// Exact failure floor.
    pub l: f64,
    pub margin: f64,
    /// `l > delta`: no (ε, δ)-JL distribution on `k × d` matrices exists.
    pub no_jld: bool,
    pub eta: f64,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    /// δ-form lower bound of the upper tail.
    pub analytic_above: Option<f64>,
    /// δ-form lower bound of the lower tail.
    pub analytic_below: Option<f64>,
    /// `min` of the two, hence a lower bound of `l`.
    pub analytic_floor: Option<f64>,
}

impl CertVerdict {
    pub const CSV_HEADER: &'static str =
        "k,d,eps,delta,L,margin,no_jld,eta,gamma1,gamma2,analytic_floor";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{:.17e},{:.17e},{},{:.17e},{},{},{}",
            self.k,
            self.d,
            self.eps,
            self.delta,
            self.l,
            self.margin,
            self.no_jld,
            self.eta,
            opt(self.gamma1),
            opt(self.gamma2),
            opt(self.analytic_floor),
        )
    }
}

fn check_cert_inputs(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) || !(delta > 0.0 && delta < 0.5) {
        return Err(Error::domain(format!(
            "certificate needs 0 < eps, delta < 1/2, got eps={eps}, delta={delta}"
        )));
    }
    Ok(())
}

fn verdict(params: SplitParams, eps: f64, delta: f64, eta: f64) -> Result<CertVerdict> {
    let l = exact_failure_floor(params.k(), params.d(), eps)?;
    let s0 = params.s0();
    let g1 = gamma1(eta, delta, s0).ok();
    let g2 = gamma2(eta, delta, eps, s0).ok();
    let a = assumptions_hold(eps, delta, params);
    let (above, below) = if a.holds() && a.parity_ok {
        (
            ln_upper_tail_lower_bound_delta_form(eta, delta, s0).ok().map(f64::exp),
            ln_lower_tail_lower_bound_delta_form(eta, delta, eps, s0).ok().map(f64::exp),
        )
    } else {
        (None, None)
    };
    let floor = above.zip(below).map(|(x, y)| x.min(y));
    Ok(CertVerdict {
        k: params.k(),
        d: params.d(),
        eps,
        delta,
        l,
        margin: l - delta,
        no_jld: l > delta,
        eta,
        gamma1: g1,
        gamma2: g2,
        analytic_above: above,
        analytic_below: below,
        analytic_floor: floor,
    })
}

/// Certificate at `(k, d, ε, δ)`, with `η = k ε² / ln(1/δ)`.
pub fn certify_no_jld(k: usize, d: usize, eps: f64, delta: f64) -> Result<CertVerdict> {
    check_cert_inputs(eps, delta)?;
    let params = SplitParams::new(k, d)?;
    let eta = k as f64 * eps * eps / (1.0 / delta).ln();
    verdict(params, eps, delta, eta)
}

/// `k = ⌊η ε⁻² ln(1/δ)⌋`, then the certificate at that `k`.
pub fn eta_threshold_scan(eta: f64, eps: f64, delta: f64, d: usize) -> Result<CertVerdict> {
    check_cert_inputs(eps, delta)?;
    if !(eta > 0.0) {
        return Err(Error::domain(format!("eta must be positive, got {eta}")));
    }
    let k = (eta / (eps * eps) * (1.0 / delta).ln()).floor();
    if k < 1.0 {
        return Err(Error::domain(format!("eta={eta} gives k=0")));
    }
    if k >= d as f64 {
        return Err(Error::domain(format!("k={k} >= d={d}; increase d")));
    }
    verdict(SplitParams::new(k as usize, d)?, eps, delta, eta)
}
