//! Text formats: sphere sample dumps, matrix files, and `key = value` configs.
//!
//! All writers emit UTF-8 with LF line endings and print floats with 17
//! significant digits, which round-trips every `f64`.

use crate::error::{Error, Result};
use crate::sphere::UnitVector;
use crate::transform::{ProjectionKind, ProjectionMatrix};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_row<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    let line: Vec<String> = xs.iter().map(|&x| fmt_f64(x)).collect();
    writeln!(w, "{}", line.join(" "))?;
    Ok(())
}

fn parse_row(line: &str, lineno: usize, expect: usize) -> Result<Vec<f64>> {
    let xs = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse(lineno, format!("'{t}' is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if xs.len() != expect {
        return Err(Error::parse(
            lineno,
            format!("expected {expect} values, found {}", xs.len()),
        ));
    }
    Ok(xs)
}

/// Header `# sphere d=<d> seed=<seed>`, then one vector per line.
pub fn write_sphere_samples<W: Write>(w: &mut W, d: usize, seed: u64, samples: &[UnitVector]) -> Result<()> {
    writeln!(w, "# sphere d={d} seed={seed}")?;
    for x in samples {
        if x.dim() != d {
            return Err(Error::domain(format!("sample has dimension {}, expected {d}", x.dim())));
        }
        write_row(w, x.coords())?;
    }
    Ok(())
}

/// Parsed sample dump.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereSamples {
    pub d: usize,
    pub seed: u64,
    pub samples: Vec<UnitVector>,
}

pub fn read_sphere_samples<R: BufRead>(r: R) -> Result<SphereSamples> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty file"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (d, seed) = match fields.as_slice() {
        ["#", "sphere", d, seed] => (
            d.strip_prefix("d=").and_then(|v| v.parse::<usize>().ok()),
            seed.strip_prefix("seed=").and_then(|v| v.parse::<u64>().ok()),
        ),
        _ => (None, None),
    };
    let (Some(d), Some(seed)) = (d, seed) else {
        return Err(Error::parse(1, "expected '# sphere d=<d> seed=<seed>'"));
    };
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let x = UnitVector::new(parse_row(&line, i + 2, d)?)
            .map_err(|e| Error::parse(i + 2, e.to_string()))?;
        samples.push(x);
    }
    Ok(SphereSamples { d, seed, samples })
}

/// First line `k d kind scale`, then `k` rows of `d` values.
pub fn write_matrix<W: Write>(w: &mut W, a: &ProjectionMatrix) -> Result<()> {
    writeln!(w, "{} {} {} {}", a.k(), a.d(), a.kind(), fmt_f64(a.scale()))?;
    for i in 0..a.k() {
        write_row(w, a.row(i))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<ProjectionMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty file"))??;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 4 {
        return Err(Error::parse(1, "expected 'k d kind scale'"));
    }
    let k: usize = f[0].parse().map_err(|_| Error::parse(1, "bad k"))?;
    let d: usize = f[1].parse().map_err(|_| Error::parse(1, "bad d"))?;
    let kind: ProjectionKind = f[2].parse().map_err(|e: Error| Error::parse(1, e.to_string()))?;
    let scale: f64 = f[3].parse().map_err(|_| Error::parse(1, "bad scale"))?;
    let mut entries = Vec::with_capacity(k * d);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if rows == k {
            return Err(Error::parse(i + 2, format!("more than {k} rows")));
        }
        entries.extend(parse_row(&line, i + 2, d)?);
        rows += 1;
    }
    if rows != k {
        return Err(Error::parse(rows + 1, format!("expected {k} rows, found {rows}")));
    }
    ProjectionMatrix::from_entries(kind, k, d, entries, scale)
}

/// Parses the `key = value` grammar.
///
/// One pair per line; surrounding whitespace is ignored; `#` starts a comment
/// line; blank lines are skipped; keys may use `-` or `_` interchangeably
/// and a leading `--` is dropped, so `--delta = 0.1` and `delta=0.1` are the
/// same. A repeated key is an error.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, format!("expected key = value, got '{line}'")))?;
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        if key.is_empty() {
            return Err(Error::parse(i + 1, "empty key"));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::parse(i + 1, format!("duplicate key '{key}'")));
        }
    }
    Ok(out)
}

/// Floats separated by commas and/or whitespace, as used for sweep grids.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::domain(format!("'{t}' is not a number"))))
        .collect()
}
