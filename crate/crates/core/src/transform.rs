//! JL constructions, explicit target dimensions, and Monte Carlo distortion.

use crate::bounds::default_tail_constant;
use crate::error::{Error, Result};
use crate::rng::{batches, substream, StreamRng};
use crate::sphere::{fill_standard_normal, sample_uniform_sphere, SplitParams};
use rand::Rng;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

/// Orthonormality tolerance for Haar rows before scaling.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionKind {
    Achlioptas,
    Gaussian,
    Orthogonal,
    /// Anything else: loaded from a file or built by hand.
    Custom,
}

impl ProjectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionKind::Achlioptas => "achlioptas",
            ProjectionKind::Gaussian => "gaussian",
            ProjectionKind::Orthogonal => "orthogonal",
            ProjectionKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "achlioptas" => Ok(ProjectionKind::Achlioptas),
            "gaussian" => Ok(ProjectionKind::Gaussian),
            "orthogonal" => Ok(ProjectionKind::Orthogonal),
            "custom" => Ok(ProjectionKind::Custom),
            other => Err(Error::domain(format!("unknown projection kind '{other}'"))),
        }
    }
}

/// A dense `k × d` matrix, row-major, with its scale already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    kind: ProjectionKind,
    k: usize,
    d: usize,
    entries: Vec<f64>,
    scale: f64,
}

impl ProjectionMatrix {
    /// Wraps row-major `entries`; `scale` is informational.
    pub fn from_entries(
        kind: ProjectionKind,
        k: usize,
        d: usize,
        entries: Vec<f64>,
        scale: f64,
    ) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::domain(format!("matrix needs k, d >= 1, got {k}x{d}")));
        }
        if entries.len() != k * d {
            return Err(Error::domain(format!(
                "expected {} entries for a {k}x{d} matrix, got {}",
                k * d,
                entries.len()
            )));
        }
        Ok(Self { kind, k, d, entries, scale })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::domain("rows have different lengths"));
        }
        Self::from_entries(ProjectionKind::Custom, k, d, rows.concat(), 1.0)
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    /// `A · M` for a `d × d'` row-major `m`.
    pub fn right_multiply(&self, m: &[f64], cols: usize) -> Result<Self> {
        if m.len() != self.d * cols {
            return Err(Error::domain("right factor has the wrong shape"));
        }
        let mut out = vec![0.0; self.k * cols];
        for i in 0..self.k {
            let orow = &mut out[i * cols..(i + 1) * cols];
            for (j, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    let mrow = &m[j * cols..(j + 1) * cols];
                    orow.iter_mut().zip(mrow).for_each(|(o, &b)| *o += a * b);
                }
            }
        }
        Self::from_entries(ProjectionKind::Custom, self.k, cols, out, self.scale)
    }
}

fn check_dims(k: usize, d: usize) -> Result<()> {
    if k == 0 || d == 0 {
        return Err(Error::domain(format!("construction needs k, d >= 1, got k={k}, d={d}")));
    }
    Ok(())
}

fn achlioptas_entry<R: Rng + ?Sized>(rng: &mut R, c: f64) -> f64 {
    match rng.random_range(0u8..6) {
        0 => c,
        1 => -c,
        _ => 0.0,
    }
}

/// I.i.d. entries `√(3/k)·{+1, 0, −1}` with probabilities `(1/6, 2/3, 1/6)`.
pub fn achlioptas_matrix<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Result<ProjectionMatrix> {
    check_dims(k, d)?;
    let c = (3.0 / k as f64).sqrt();
    let entries = (0..k * d).map(|_| achlioptas_entry(rng, c)).collect();
    ProjectionMatrix::from_entries(ProjectionKind::Achlioptas, k, d, entries, c)
}

/// I.i.d. `N(0, 1/k)` entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Result<ProjectionMatrix> {
    check_dims(k, d)?;
    let c = 1.0 / (k as f64).sqrt();
    let mut entries = vec![0.0; k * d];
    fill_standard_normal(&mut entries, rng);
    entries.iter_mut().for_each(|e| *e *= c);
    ProjectionMatrix::from_entries(ProjectionKind::Gaussian, k, d, entries, c)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `m` orthonormal rows of length `n` from Gaussian rows.
///
/// Gram–Schmidt on i.i.d. Gaussian rows is the `LQ` factorisation with a
/// positive diagonal on `L`, so the rows are those of a Haar matrix. Each
/// row is orthogonalised twice to keep the result orthonormal to roundoff.
fn haar_rows<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Vec<f64> {
    let mut q = vec![0.0; m * n];
    let mut i = 0;
    while i < m {
        let (done, rest) = q.split_at_mut(i * n);
        let row = &mut rest[..n];
        fill_standard_normal(row, rng);
        let initial = dot(row, row).sqrt();
        for _ in 0..2 {
            for j in 0..i {
                let prev = &done[j * n..(j + 1) * n];
                let c = dot(row, prev);
                row.iter_mut().zip(prev).for_each(|(r, p)| *r -= c * p);
            }
        }
        let norm = dot(row, row).sqrt();
        // A draw lying (numerically) in the span so far has probability 0;
        // redraw rather than normalise noise.
        if norm > 1e-8 * initial {
            row.iter_mut().for_each(|r| *r /= norm);
            i += 1;
        }
    }
    q
}

/// A Haar-distributed `d × d` orthogonal matrix, row-major.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<f64>> {
    check_dims(d, d)?;
    Ok(haar_rows(d, d, rng))
}

/// First `k` rows of a Haar orthogonal `d × d` matrix, scaled by `1/√s₀`.
pub fn orthogonal_projection_matrix<R: Rng + ?Sized>(
    k: usize,
    d: usize,
    rng: &mut R,
) -> Result<ProjectionMatrix> {
    let params = SplitParams::new(k, d)?;
    let c = 1.0 / params.s0().sqrt();
    let mut entries = haar_rows(k, d, rng);
    entries.iter_mut().for_each(|e| *e *= c);
    ProjectionMatrix::from_entries(ProjectionKind::Orthogonal, k, d, entries, c)
}

/// Builds a fresh matrix of the given construction.
pub fn construct<R: Rng + ?Sized>(
    kind: ProjectionKind,
    k: usize,
    d: usize,
    rng: &mut R,
) -> Result<ProjectionMatrix> {
    match kind {
        ProjectionKind::Achlioptas => achlioptas_matrix(k, d, rng),
        ProjectionKind::Gaussian => gaussian_matrix(k, d, rng),
        ProjectionKind::Orthogonal => orthogonal_projection_matrix(k, d, rng),
        ProjectionKind::Custom => Err(Error::domain("custom matrices have no random construction")),
    }
}

/// `A x`. Zero entries are skipped, which is what makes sparse-sign
/// matrices cheaper to apply.
pub fn apply(a: &ProjectionMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.d {
        return Err(Error::domain(format!(
            "vector has dimension {} but the matrix has d={}",
            x.len(),
            a.d
        )));
    }
    Ok((0..a.k)
        .map(|i| {
            a.row(i)
                .iter()
                .zip(x)
                .filter(|(e, _)| **e != 0.0)
                .map(|(e, v)| e * v)
                .sum()
        })
        .collect())
}

fn squared_norm_of_image(a: &ProjectionMatrix, x: &[f64]) -> f64 {
    (0..a.k)
        .map(|i| {
            let y = dot(a.row(i), x);
            y * y
        })
        .sum()
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.5) || !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::domain(format!(
            "need 0 < eps <= 1/2 and 0 < delta <= 1/2, got eps={eps}, delta={delta}"
        )));
    }
    Ok(())
}

fn smallest_integer_above(x: f64) -> Result<usize> {
    if !x.is_finite() || x >= usize::MAX as f64 {
        return Err(Error::numeric(format!("dimension {x} is not representable")));
    }
    Ok(x.floor() as usize + 1)
}

/// Smallest `k > 2 ln(2/δ) / (ε²/2 − ε³/3)`.
pub fn achlioptas_k(eps: f64, delta: f64) -> Result<usize> {
    check_eps_delta(eps, delta)?;
    smallest_integer_above(2.0 * (2.0 / delta).ln() / (eps * eps / 2.0 - eps.powi(3) / 3.0))
}

/// The bracket `1 + 2ε/(3−2ε) + ln(2C)/ln(1/δ) · 1/(1−2ε/3) + 2ε²/(4 ln(1/δ))`.
pub fn kmn_bracket(eps: f64, delta: f64, c: f64) -> Result<f64> {
    check_eps_delta(eps, delta)?;
    if !(c >= 1.0) {
        return Err(Error::domain(format!("constant C must be >= 1, got {c}")));
    }
    let l = (1.0 / delta).ln();
    Ok(1.0
        + 2.0 * eps / (3.0 - 2.0 * eps)
        + (2.0 * c).ln() / l / (1.0 - 2.0 * eps / 3.0)
        + 2.0 * eps * eps / (4.0 * l))
}

/// Smallest `k > 4ε⁻² ln(1/δ) · bracket`; `c = None` uses the default
/// tail constant.
pub fn kmn_upper_k(eps: f64, delta: f64, c: Option<f64>) -> Result<usize> {
    let c = c.unwrap_or_else(default_tail_constant);
    let bracket = kmn_bracket(eps, delta, c)?;
    smallest_integer_above(4.0 / (eps * eps) * (1.0 / delta).ln() * bracket)
}

/// Monte Carlo estimate of `P[|‖Aw‖² − 1| > ε]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionEstimate {
    pub p_hat: f64,
    pub n_samples: u64,
    pub std_error: f64,
    pub eps: f64,
}

impl DistortionEstimate {
    pub fn from_count(failures: u64, n: u64, eps: f64) -> Self {
        let p = failures as f64 / n as f64;
        Self {
            p_hat: p,
            n_samples: n,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            eps,
        }
    }

    /// `|p_hat − p| ≤ sigmas · max(std_error, √(p(1−p)/n))`.
    ///
    /// The reference standard error covers the case `p_hat ∈ {0, 1}`.
    pub fn agrees_with(&self, p: f64, sigmas: f64) -> bool {
        let se = self.std_error.max((p * (1.0 - p) / self.n_samples as f64).sqrt());
        (self.p_hat - p).abs() <= sigmas * se
    }
}

/// What a distortion trial draws.
#[derive(Debug, Clone, Copy)]
pub enum DistortionSource<'a> {
    /// One fixed matrix; `w` uniform on the sphere each trial.
    Matrix(&'a ProjectionMatrix),
    /// A fresh matrix each trial, `w = e₁`. Only `‖Ae₁‖²` is drawn, from the
    /// exact law of the first column.
    Construction { kind: ProjectionKind, k: usize, d: usize },
    /// As `Construction`, but materialising the whole matrix each trial.
    FullConstruction { kind: ProjectionKind, k: usize, d: usize },
}

struct Trial<'a> {
    source: DistortionSource<'a>,
    buf: Vec<f64>,
}

impl<'a> Trial<'a> {
    fn new(source: DistortionSource<'a>) -> Result<Self> {
        let len = match source {
            DistortionSource::Matrix(a) => a.d,
            DistortionSource::Construction { kind, k, d } => {
                if kind == ProjectionKind::Custom {
                    return Err(Error::domain("custom matrices have no random construction"));
                }
                if kind == ProjectionKind::Orthogonal {
                    SplitParams::new(k, d)?;
                    d
                } else {
                    check_dims(k, d)?;
                    k
                }
            }
            DistortionSource::FullConstruction { kind, k, d } => {
                if kind == ProjectionKind::Custom {
                    return Err(Error::domain("custom matrices have no random construction"));
                }
                check_dims(k, d)?;
                0
            }
        };
        Ok(Self { source, buf: vec![0.0; len] })
    }

    fn draw(&mut self, rng: &mut StreamRng) -> Result<f64> {
        match self.source {
            DistortionSource::Matrix(a) => {
                let w = sample_uniform_sphere(a.d, rng)?;
                Ok(squared_norm_of_image(a, w.coords()))
            }
            DistortionSource::Construction { kind, k, d } => Ok(match kind {
                ProjectionKind::Gaussian => {
                    fill_standard_normal(&mut self.buf, rng);
                    self.buf.iter().map(|x| x * x).sum::<f64>() / k as f64
                }
                ProjectionKind::Achlioptas => {
                    let c = (3.0 / k as f64).sqrt();
                    (0..k).map(|_| achlioptas_entry(rng, c).powi(2)).sum()
                }
                ProjectionKind::Orthogonal => {
                    // First column of a Haar matrix is uniform on S^{d−1}.
                    fill_standard_normal(&mut self.buf, rng);
                    let head: f64 = self.buf[..k].iter().map(|x| x * x).sum();
                    let tail: f64 = self.buf[k..].iter().map(|x| x * x).sum();
                    head / (head + tail) * d as f64 / k as f64
                }
                ProjectionKind::Custom => unreachable!(),
            }),
            DistortionSource::FullConstruction { kind, k, d } => {
                let a = construct(kind, k, d, rng)?;
                Ok((0..k).map(|i| a.get(i, 0).powi(2)).sum())
            }
        }
    }
}

/// `n` draws of `‖Aw‖²`, batched over substreams of `seed`.
pub fn squared_norm_samples(source: DistortionSource<'_>, n: u64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("Monte Carlo needs n >= 1"));
    }
    Trial::new(source)?;
    let parts = batches(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(b, m)| -> Result<Vec<f64>> {
            let mut rng = substream(seed, b);
            let mut trial = Trial::new(source)?;
            (0..m).map(|_| trial.draw(&mut rng)).collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

/// Fraction of `n` trials with `|‖Aw‖² − 1| > ε`.
pub fn estimate_distortion_prob(
    source: DistortionSource<'_>,
    eps: f64,
    n: u64,
    seed: u64,
) -> Result<DistortionEstimate> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    let samples = squared_norm_samples(source, n, seed)?;
    let failures = samples.iter().filter(|&&x| (x - 1.0).abs() > eps).count() as u64;
    Ok(DistortionEstimate::from_count(failures, n, eps))
}
