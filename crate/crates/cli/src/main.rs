//! `jl`: exact tails, bounds, sampling, projections, certificates and sweeps.
//!
//! `--config FILE` reads `key = value` lines; each key is a long flag of the
//! chosen subcommand. Flags given on the command line take precedence.
//! Exit codes: 0 ok, 1 sandwich violation, 2 domain, 3 numeric, 4 i/o or parse.

use clap::{Args, Parser, Subcommand, ValueEnum};
use jl_core::bounds::BoundReport;
use jl_core::cert::{certify_no_jld, empirical_failure_prob, eta_threshold_scan, exact_failure_floor, spectral_profile, CertVerdict, FailurePath};
use jl_core::io::{fmt_f64, parse_config, parse_f64_list, read_matrix, write_matrix, write_sphere_samples};
use jl_core::phase::{configured_threads, run_sweep, DimensionRule, PhasePoint, SweepConfig};
use jl_core::rng::substream;
use jl_core::sphere::{sample_uniform_sphere, SplitParams};
use jl_core::tail::{tail_probabilities, tail_probabilities_monte_carlo, tail_probabilities_quadrature, TailQuery};
use jl_core::transform::{construct, ProjectionKind};
use jl_core::Error;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "jl", version, about = "Johnson-Lindenstrauss phase-threshold toolkit", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact tail probabilities of the split statistic.
    Tail(TailArgs),
    /// Concentration bounds against the exact tails, as one CSV row.
    Bounds(BoundsArgs),
    /// Uniform samples on the unit sphere.
    Sample(SampleArgs),
    /// Build or load a projection matrix; optionally estimate its failure rate.
    Project(ProjectArgs),
    /// Certificate that no JL distribution exists at (k, d, eps, delta).
    Certify(CertifyArgs),
    /// Bracket the threshold dimension over an (eps, delta) grid.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// key = value file supplying any long flag
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Closed,
    Quadrature,
    MonteCarlo,
}

#[derive(Args)]
struct TailArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long, value_enum, default_value = "closed")]
    method: Method,
    /// Monte Carlo draws
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout if absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "gaussian")]
    kind: String,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read the matrix from this file instead of constructing one
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Write the matrix here
    #[arg(long)]
    out: Option<PathBuf>,
    /// With --eps, estimate P[| |Aw|^2 - 1 | > eps] and compare with the floor
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    n: u64,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    /// Choose k = floor(eta * eps^-2 * ln(1/delta)) instead of --k
    #[arg(long, conflicts_with = "k")]
    eta: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma- or space-separated eps grid
    #[arg(long, alias = "eps-grid")]
    eps: Option<String>,
    /// Comma- or space-separated delta grid
    #[arg(long, alias = "delta-grid")]
    delta: Option<String>,
    /// `auto`, an integer, or `m*k`
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, alias = "output-dir")]
    out: Option<PathBuf>,
    /// Monte Carlo draws per cell (0 disables the check)
    #[arg(long, alias = "mc-samples")]
    n: Option<u64>,
}

/// Splices `--key value` pairs from the config file in front of the user's
/// own flags, so that later (command-line) occurrences override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let pos = args.iter().position(|a| a == "--config");
    let path = match pos {
        Some(i) => args.get(i + 1).cloned(),
        None => args.iter().find_map(|a| a.to_str()?.strip_prefix("--config=").map(OsString::from)),
    };
    let Some(path) = path else { return Ok(args) };
    let map = parse_config(&fs::read_to_string(PathBuf::from(&path))?)?;
    let mut injected = Vec::new();
    for (key, value) in map {
        if key == "config" {
            continue;
        }
        injected.push(OsString::from(format!("--{}", key.replace('_', "-"))));
        injected.push(OsString::from(value));
    }
    // args[0] is the program, args[1] the subcommand.
    let split = 2.min(args.len());
    let mut out = args[..split].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[split..]);
    Ok(out)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) => 2,
        Error::Numeric(_) => 3,
        Error::Io(_) | Error::Parse { .. } => 4,
    }
}

fn emit(out: Option<&PathBuf>, body: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, body)?,
        None => io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn tail(a: TailArgs) -> Result<u8, Error> {
    let q = TailQuery::new(SplitParams::new(a.k, a.d)?, a.eps)?;
    let t = match a.method {
        Method::Closed => tail_probabilities(&q)?,
        Method::Quadrature => tail_probabilities_quadrature(&q)?,
        Method::MonteCarlo => tail_probabilities_monte_carlo(&q, a.n, a.seed)?,
    };
    println!("k,d,eps,above,below,method,abs_error");
    println!(
        "{},{},{},{},{},{:?},{}",
        a.k,
        a.d,
        a.eps,
        fmt_f64(t.above),
        fmt_f64(t.below),
        t.method,
        fmt_f64(t.abs_error_estimate)
    );
    Ok(0)
}

fn bounds(a: BoundsArgs) -> Result<u8, Error> {
    let r = BoundReport::compute(SplitParams::new(a.k, a.d)?, a.eps, a.delta)?;
    println!("{}", BoundReport::CSV_HEADER);
    println!("{}", r.csv_row());
    let set = &r.assumptions;
    eprintln!("assumptions_hold={} parity={}", set.holds(), set.parity_ok);
    for v in set.violations() {
        eprintln!("assumption violated: {v}");
    }
    if r.has_violation() {
        eprintln!("sandwich violation: a bound fails to bracket the exact tail");
        return Ok(1);
    }
    Ok(0)
}

fn sample(a: SampleArgs) -> Result<u8, Error> {
    let mut rng = substream(a.seed, 0);
    let xs = (0..a.n)
        .map(|_| sample_uniform_sphere(a.d, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let mut buf = Vec::new();
    write_sphere_samples(&mut buf, a.d, a.seed, &xs)?;
    emit(a.out.as_ref(), &String::from_utf8_lossy(&buf))?;
    Ok(0)
}

fn project(a: ProjectArgs) -> Result<u8, Error> {
    let m = match &a.matrix {
        Some(p) => read_matrix(BufReader::new(fs::File::open(p)?))?,
        None => {
            let (Some(k), Some(d)) = (a.k, a.d) else {
                return Err(Error::Domain("project needs --k and --d, or --matrix".into()));
            };
            construct(a.kind.parse::<ProjectionKind>()?, k, d, &mut substream(a.seed, 0))?
        }
    };
    if let Some(p) = &a.out {
        let mut f = io::BufWriter::new(fs::File::create(p)?);
        write_matrix(&mut f, &m)?;
        f.flush()?;
    } else if a.eps.is_none() {
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m)?;
        io::stdout().write_all(&buf)?;
    }
    if let Some(eps) = a.eps {
        let est = empirical_failure_prob(&m, eps, a.n, a.seed, FailurePath::Direct)?;
        let rank = spectral_profile(&m)?.rank();
        let floor = if rank >= 1 && m.k() < m.d() { Some(exact_failure_floor(m.k(), m.d(), eps)?) } else { None };
        println!("kind,k,d,rank,eps,n,p_hat,std_error,floor");
        println!(
            "{},{},{},{},{},{},{},{},{}",
            m.kind(),
            m.k(),
            m.d(),
            rank,
            eps,
            est.n_samples,
            fmt_f64(est.p_hat),
            fmt_f64(est.std_error),
            floor.map(fmt_f64).unwrap_or_default()
        );
    }
    Ok(0)
}

fn certify(a: CertifyArgs) -> Result<u8, Error> {
    let v = match (a.k, a.eta) {
        (_, Some(eta)) => eta_threshold_scan(eta, a.eps, a.delta, a.d)?,
        (Some(k), None) => certify_no_jld(k, a.d, a.eps, a.delta)?,
        (None, None) => return Err(Error::Domain("certify needs --k or --eta".into())),
    };
    println!("{}", CertVerdict::CSV_HEADER);
    println!("{}", v.csv_row());
    Ok(0)
}

fn sweep(a: SweepArgs) -> Result<u8, Error> {
    let grid = |s: Option<String>, name: &str| -> Result<Vec<f64>, Error> {
        s.map(|s| parse_f64_list(&s))
            .unwrap_or_else(|| Err(Error::Domain(format!("sweep needs --{name}"))))
    };
    let mut cfg = SweepConfig::new(
        grid(a.eps, "eps")?,
        grid(a.delta, "delta")?,
        a.seed.unwrap_or(0),
        a.out.unwrap_or_else(|| PathBuf::from("sweep_out")),
    );
    if let Some(d) = a.d {
        cfg.d = DimensionRule::parse(&d)?;
    }
    if let Some(n) = a.n {
        cfg.mc_samples = n;
    }
    let res = run_sweep(&cfg)?;
    println!("{}", PhasePoint::CSV_HEADER);
    for p in &res.points {
        println!("{}", p.csv_row());
    }
    eprintln!("wrote {} files to {} in {:.2}s", res.files.len(), cfg.output_dir.display(), res.seconds);
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Tail(a) => tail(a),
        Command::Bounds(a) => bounds(a),
        Command::Sample(a) => sample(a),
        Command::Project(a) => project(a),
        Command::Certify(a) => certify(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn main() -> ExitCode {
    let threads = configured_threads();
    if threads > 0 {
        // Only fails if a pool exists already, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("jl: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("jl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
