//! Certified brackets of the JL threshold `k₀(ε, δ)` and the sweep driver.
//!
//! Both ends of a bracket come from exact tails. Below `k_lo + 1` the
//! failure floor exceeds `δ`, so no distribution on `k × d` matrices works.
//! At `k_hi` the Haar projection already fails with probability at most `δ`.

use crate::cert::{certify_no_jld, decomposed_failure_prob, SpectralProfile};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_config, parse_f64_list};
use crate::rng::child_seed;
use crate::sphere::SplitParams;
use crate::tail::{certified_tail_floor, tail_above, tail_below, TailQuery};
use crate::transform::kmn_upper_k;
use rayon::prelude::*;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Target `k_hi / d` for the default dimension rule.
pub const DEFAULT_D_RATIO: f64 = 0.1;
const MAX_POWER_OF_TEN: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub eps: f64,
    pub delta: f64,
    pub d: usize,
    /// `4ε⁻² ln(1/δ)`
    pub baseline: f64,
    /// Largest certified-impossible `k`; 0 if none is.
    pub k_lo: usize,
    /// Smallest `k` at which the Haar projection fails with probability `≤ δ`.
    pub k_hi: usize,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
}

impl PhasePoint {
    pub const CSV_HEADER: &'static str = "eps,delta,d,baseline,k_lo,k_hi,ratio_lo,ratio_hi";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.eps,
            self.delta,
            self.d,
            fmt_f64(self.baseline),
            self.k_lo,
            self.k_hi,
            fmt_f64(self.ratio_lo),
            fmt_f64(self.ratio_hi)
        )
    }
}

pub fn baseline(eps: f64, delta: f64) -> f64 {
    4.0 / (eps * eps) * (1.0 / delta).ln()
}

/// Exact failure probability of the Haar projection.
pub fn orthogonal_failure(k: usize, d: usize, eps: f64) -> Result<f64> {
    let q = TailQuery::new(SplitParams::new(k, d)?, eps)?;
    Ok(tail_above(&q)? + tail_below(&q)?)
}

fn min_tail(k: usize, d: usize, eps: f64) -> Result<f64> {
    certified_tail_floor(&TailQuery::new(SplitParams::new(k, d)?, eps)?)
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) || !(delta > 0.0 && delta < 0.5) {
        return Err(Error::domain(format!(
            "need 0 < eps, delta < 1/2, got eps={eps}, delta={delta}"
        )));
    }
    Ok(())
}

/// Brackets `k₀` at fixed `d` by binary search on exact tails over
/// `1 ≤ k < d`.
///
/// Each search is followed by a short linear walk so that a non-monotone
/// stretch next to the answer cannot hide a better value.
pub fn bracket_k0(eps: f64, delta: f64, d: usize) -> Result<PhasePoint> {
    check_eps_delta(eps, delta)?;
    if d < 2 {
        return Err(Error::domain(format!("need d >= 2, got {d}")));
    }
    let k_max = d - 1;
    let works = |k: usize| -> Result<bool> { Ok(orthogonal_failure(k, d, eps)? <= delta) };
    if !works(k_max)? {
        return Err(Error::domain(format!(
            "no k < d={d} reaches failure <= {delta}; increase d"
        )));
    }
    // Smallest k that works: invariant works(hi), !works(lo) or lo = 0.
    let (mut lo, mut hi) = (0usize, k_max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if works(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut k_hi = hi;
    while k_hi > 1 && works(k_hi - 1)? {
        k_hi -= 1;
    }

    let impossible = |k: usize| -> Result<bool> { Ok(min_tail(k, d, eps)? > delta) };
    // Largest k < k_hi that is certified: invariant impossible(lo) or lo = 0,
    // !impossible(hi).
    let (mut lo, mut hi) = (0usize, k_hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if impossible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut k_lo = lo;
    while k_lo + 1 < k_hi && impossible(k_lo + 1)? {
        k_lo += 1;
    }
    let b = baseline(eps, delta);
    Ok(PhasePoint {
        eps,
        delta,
        d,
        baseline: b,
        k_lo,
        k_hi,
        ratio_lo: k_lo as f64 / b,
        ratio_hi: k_hi as f64 / b,
    })
}

/// Smallest power of ten `d` whose bracket has `k_hi / d < 0.1`.
pub fn bracket_k0_default_d(eps: f64, delta: f64) -> Result<PhasePoint> {
    check_eps_delta(eps, delta)?;
    for m in 1..=MAX_POWER_OF_TEN {
        let d = 10usize.pow(m);
        match bracket_k0(eps, delta, d) {
            Ok(p) if (p.k_hi as f64) < DEFAULT_D_RATIO * d as f64 => return Ok(p),
            Ok(_) | Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::domain(format!(
        "no d <= 1e{MAX_POWER_OF_TEN} gives k_hi/d < {DEFAULT_D_RATIO}"
    )))
}

/// How the ambient dimension of a sweep cell is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimensionRule {
    /// Smallest power of ten with `k_hi/d < 0.1`.
    Auto,
    Fixed(usize),
    /// `d = ⌈m · k_guess⌉` with `k_guess` the explicit upper dimension.
    MultipleOfGuess(f64),
}

impl DimensionRule {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auto" {
            return Ok(DimensionRule::Auto);
        }
        if let Some(m) = s.strip_suffix("*k").or_else(|| s.strip_suffix("k")) {
            let m: f64 = m
                .trim()
                .trim_end_matches('*')
                .parse()
                .map_err(|_| Error::domain(format!("bad d rule '{s}'")))?;
            if !(m > 1.0) {
                return Err(Error::domain(format!("d multiple must exceed 1, got {m}")));
            }
            return Ok(DimensionRule::MultipleOfGuess(m));
        }
        s.parse::<usize>()
            .map(DimensionRule::Fixed)
            .map_err(|_| Error::domain(format!("d must be 'auto', an integer, or '<m>*k', got '{s}'")))
    }

    pub fn describe(&self) -> String {
        match self {
            DimensionRule::Auto => "auto".into(),
            DimensionRule::Fixed(d) => d.to_string(),
            DimensionRule::MultipleOfGuess(m) => format!("{m}*k"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub eps_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub d: DimensionRule,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Monte Carlo draws per cell checking the exact failure at `k_hi`;
    /// 0 disables the check.
    pub mc_samples: u64,
}

impl SweepConfig {
    pub const DEFAULT_MC_SAMPLES: u64 = 10_000;

    pub fn new(eps_grid: Vec<f64>, delta_grid: Vec<f64>, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            eps_grid,
            delta_grid,
            d: DimensionRule::Auto,
            seed,
            output_dir: output_dir.into(),
            mc_samples: Self::DEFAULT_MC_SAMPLES,
        }
    }

    /// Reads `eps_grid`, `delta_grid`, `d`, `seed`, `out` and `mc_samples`
    /// from `key = value` text. Unknown keys are rejected.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let map = parse_config(text)?;
        let mut cfg = SweepConfig::new(Vec::new(), Vec::new(), 0, "sweep_out");
        for (key, value) in &map {
            match key.as_str() {
                "eps_grid" | "eps" => cfg.eps_grid = parse_f64_list(value)?,
                "delta_grid" | "delta" => cfg.delta_grid = parse_f64_list(value)?,
                "d" => cfg.d = DimensionRule::parse(value)?,
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| Error::domain(format!("bad seed '{value}'")))?
                }
                "out" | "output_dir" => cfg.output_dir = PathBuf::from(value),
                "mc_samples" | "n" => {
                    cfg.mc_samples = value
                        .parse()
                        .map_err(|_| Error::domain(format!("bad mc_samples '{value}'")))?
                }
                other => return Err(Error::domain(format!("unknown sweep key '{other}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() || self.delta_grid.is_empty() {
            return Err(Error::domain("sweep grids must be nonempty"));
        }
        for &e in &self.eps_grid {
            for &d in &self.delta_grid {
                check_eps_delta(e, d)?;
            }
        }
        Ok(())
    }

    /// Row-major `(eps, delta)` cells.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.eps_grid
            .iter()
            .flat_map(|&e| self.delta_grid.iter().map(move |&d| (e, d)))
            .collect()
    }

    pub fn manifest(&self, points: &[PhasePoint]) -> String {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        s.push_str("# jl sweep manifest\n");
        s.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("eps_grid = {}\n", list(&self.eps_grid)));
        s.push_str(&format!("delta_grid = {}\n", list(&self.delta_grid)));
        s.push_str(&format!("d = {}\n", self.d.describe()));
        s.push_str(&format!("d_rule_note = {}\n", match self.d {
            DimensionRule::Auto => "smallest power of ten with k_hi/d < 0.1",
            DimensionRule::Fixed(_) => "fixed",
            DimensionRule::MultipleOfGuess(_) => "multiple of the explicit upper dimension",
        }));
        s.push_str(&format!("mc_samples = {}\n", self.mc_samples));
        for (i, p) in points.iter().enumerate() {
            s.push_str(&format!(
                "cell.{i} = eps={} delta={} d={} seed={}\n",
                p.eps,
                p.delta,
                p.d,
                child_seed(self.seed, i as u64)
            ));
        }
        s
    }
}

/// Monte Carlo check of one cell: Haar failure at `k_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCheck {
    pub n: u64,
    pub p_hat: f64,
    pub std_error: f64,
    pub exact: f64,
}

impl CellCheck {
    pub const CSV_HEADER: &'static str = "eps,delta,d,k,n,p_hat,std_error,exact";
}

/// Everything one sweep produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<PhasePoint>,
    pub checks: Vec<Option<CellCheck>>,
    pub files: Vec<PathBuf>,
    pub seconds: f64,
}

/// Worker threads allowed by `JL_THREADS` (unset or 0 means automatic).
pub fn configured_threads() -> usize {
    std::env::var("JL_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

fn run_cell(cfg: &SweepConfig, index: usize, eps: f64, delta: f64) -> Result<(PhasePoint, Option<CellCheck>)> {
    let point = match cfg.d {
        DimensionRule::Auto => bracket_k0_default_d(eps, delta)?,
        DimensionRule::Fixed(d) => bracket_k0(eps, delta, d)?,
        DimensionRule::MultipleOfGuess(m) => {
            let guess = kmn_upper_k(eps, delta, None)?;
            bracket_k0(eps, delta, (m * guess as f64).ceil() as usize)?
        }
    };
    let check = if cfg.mc_samples > 0 {
        let (k, d) = (point.k_hi, point.d);
        let lambda = (d as f64 / k as f64).sqrt();
        let profile = SpectralProfile::from_singular_values(k, d, vec![lambda; k]);
        let est = decomposed_failure_prob(&profile, eps, cfg.mc_samples, child_seed(cfg.seed, index as u64))?;
        Some(CellCheck {
            n: est.n_samples,
            p_hat: est.p_hat,
            std_error: est.std_error,
            exact: orthogonal_failure(k, d, eps)?,
        })
    } else {
        None
    };
    Ok((point, check))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

/// Brackets every grid cell and writes `phase.csv`, `manifest.txt`, one
/// plot file per `ε` and side, `mc.csv` when checks are on, and the
/// wall-clock time in `timing.txt` (kept apart so the rest is reproducible
/// byte for byte).
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let start = Instant::now();
    fs::create_dir_all(&cfg.output_dir)?;
    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(configured_threads())
        .build()
        .map_err(|e| Error::numeric(format!("thread pool: {e}")))?;
    let results = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &(e, d))| run_cell(cfg, i, e, d))
            .collect::<Result<Vec<_>>>()
    })?;
    let (points, checks): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let mut files = Vec::new();
    let mut csv = String::from(PhasePoint::CSV_HEADER);
    csv.push('\n');
    for p in &points {
        csv.push_str(&p.csv_row());
        csv.push('\n');
    }
    let path = cfg.output_dir.join("phase.csv");
    write_file(&path, &csv)?;
    files.push(path);

    let path = cfg.output_dir.join("manifest.txt");
    write_file(&path, &cfg.manifest(&points))?;
    files.push(path);

    for &eps in &cfg.eps_grid {
        for (side, pick) in [("lo", 0), ("hi", 1)] {
            let mut body = format!("# eps={eps} side={side}\n# baseline ratio\n");
            for p in points.iter().filter(|p| p.eps == eps) {
                let y = if pick == 0 { p.ratio_lo } else { p.ratio_hi };
                body.push_str(&format!("{} {}\n", fmt_f64(p.baseline), fmt_f64(y)));
            }
            let path = cfg.output_dir.join(format!("plot_eps{eps}_{side}.dat"));
            write_file(&path, &body)?;
            files.push(path);
        }
    }

    if cfg.mc_samples > 0 {
        let mut body = String::from(CellCheck::CSV_HEADER);
        body.push('\n');
        for (p, c) in points.iter().zip(&checks) {
            if let Some(c) = c {
                body.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    p.eps,
                    p.delta,
                    p.d,
                    p.k_hi,
                    c.n,
                    fmt_f64(c.p_hat),
                    fmt_f64(c.std_error),
                    fmt_f64(c.exact)
                ));
            }
        }
        let path = cfg.output_dir.join("mc.csv");
        write_file(&path, &body)?;
        files.push(path);
    }

    let seconds = start.elapsed().as_secs_f64();
    write_file(&cfg.output_dir.join("timing.txt"), &format!("wall_clock_seconds = {seconds}\n"))?;
    Ok(SweepResult { points, checks, files, seconds })
}

/// Checks both certificates of a bracket against exact tails.
pub fn bracket_is_valid(p: &PhasePoint) -> Result<bool> {
    let lo_ok = p.k_lo == 0 || certify_no_jld(p.k_lo, p.d, p.eps, p.delta)?.no_jld;
    let hi_ok = orthogonal_failure(p.k_hi, p.d, p.eps)? <= p.delta;
    Ok(lo_ok && hi_ok && p.k_lo < p.k_hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exhaustive(eps: f64, delta: f64, d: usize) -> (usize, usize) {
        let k_max = d - 1;
        let k_lo = (1..=k_max)
            .filter(|&k| min_tail(k, d, eps).unwrap() > delta)
            .max()
            .unwrap_or(0);
        let k_hi = (1..=k_max)
            .find(|&k| orthogonal_failure(k, d, eps).unwrap() <= delta)
            .unwrap();
        (k_lo, k_hi)
    }

    #[test]
    fn binary_search_matches_exhaustive_scan() {
        for (eps, delta, d) in [(0.2, 0.4, 40), (0.3, 0.2, 200), (0.1, 0.3, 2000), (0.25, 0.1, 600)] {
            let p = bracket_k0(eps, delta, d).unwrap();
            assert_eq!((p.k_lo, p.k_hi), exhaustive(eps, delta, d), "eps={eps} delta={delta} d={d}");
            assert!(bracket_is_valid(&p).unwrap());
        }
    }

    #[test]
    fn tiny_bracket_values() {
        // mpmath: failure(18) = 0.42033, failure(19) = 0.39641; the min-tail
        // peaks at 0.3165 (k = 4), so nothing is certified.
        let p = bracket_k0(0.2, 0.4, 40).unwrap();
        assert_eq!((p.k_lo, p.k_hi), (0, 19));
    }

    #[test]
    fn bracket_at_one_million() {
        // mpmath: failure(2173) = 1.002e-3, failure(2174) = 9.995e-4,
        // min-tail(1791) = 1.001e-3, min-tail(1792) = 9.983e-4.
        let p = bracket_k0(0.1, 1e-3, 1_000_000).unwrap();
        assert!((p.baseline - 2763.102_111_592_855).abs() < 1e-9);
        assert_eq!((p.k_lo, p.k_hi), (1791, 2174));
        assert!(bracket_is_valid(&p).unwrap());
        // At this scale the whole bracket sits below the asymptotic baseline.
        assert!((p.k_hi as f64) < p.baseline);
    }

    #[test]
    fn k_hi_nonincreasing_in_delta() {
        let mut prev = usize::MAX;
        for delta in [1e-4, 1e-3, 1e-2, 0.1, 0.3] {
            let p = bracket_k0(0.2, delta, 100_000).unwrap();
            assert!(p.k_hi <= prev);
            prev = p.k_hi;
        }
    }

    #[test]
    fn small_d_is_reported() {
        assert!(matches!(bracket_k0(0.05, 1e-4, 100), Err(Error::Domain(_))));
        assert!(matches!(bracket_k0(0.1, 0.1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn dimension_rules() {
        assert_eq!(DimensionRule::parse("auto").unwrap(), DimensionRule::Auto);
        assert_eq!(DimensionRule::parse("5000").unwrap(), DimensionRule::Fixed(5000));
        assert_eq!(DimensionRule::parse("4*k").unwrap(), DimensionRule::MultipleOfGuess(4.0));
        assert!(DimensionRule::parse("0.5*k").is_err());
        assert!(DimensionRule::parse("big").is_err());
    }

    #[test]
    fn config_text() {
        let cfg = SweepConfig::from_config_text(
            "eps_grid = 0.2\ndelta_grid = 0.01, 0.001\nseed = 9\nout = /tmp/x\nd = auto\nmc_samples = 0\n",
        )
        .unwrap();
        assert_eq!(cfg.cells(), vec![(0.2, 0.01), (0.2, 0.001)]);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.mc_samples, 0);
        assert!(SweepConfig::from_config_text("eps_grid = 0.7\ndelta_grid=0.1").is_err());
        assert!(SweepConfig::from_config_text("eps_grid = 0.1\ndelta_grid=0.1\ncolour=red").is_err());
        assert!(SweepConfig::from_config_text("delta_grid=0.1").is_err());
    }
}
