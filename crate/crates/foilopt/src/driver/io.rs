//! Field snapshots, CSV writers, and checkpoint serialization.
//!
//! All floats are written with 17 significant digits, which round-trips
//! `f64` exactly; every CSV carries a single header row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::disc::{Scheme, State};
use crate::error::{Error, Result};
use crate::euler::N_VARS;
use crate::solver::forces::ForceReport;
use crate::solver::steady::SteadyStats;

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a field snapshot: per-element cell averages and (for DG) the
/// modal coefficients.
pub fn write_field(state: &State, scheme: Scheme, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str("fields2d 1\n");
    let _ = writeln!(out, "scheme {}", scheme.name());
    let _ = writeln!(out, "elements {} modes {}", state.ne, state.nk);
    for e in 0..state.ne {
        let _ = write!(out, "{e}");
        for m in 0..N_VARS {
            for k in 0..state.nk {
                let _ = write!(out, " {}", fmt(state.at(e, m, k)));
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<(State, Scheme)> {
    let text = fs::read_to_string(&path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "fields2d 1" {
        return Err(Error::Config(format!(
            "{}: bad field header `{header}`",
            path.as_ref().display()
        )));
    }
    let scheme_line = lines.next().unwrap_or("");
    let scheme = Scheme::parse(scheme_line.strip_prefix("scheme ").unwrap_or(""))?;
    let dims = lines.next().unwrap_or("");
    let parts: Vec<&str> = dims.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "elements" || parts[2] != "modes" {
        return Err(Error::Config(format!("bad field dims line `{dims}`")));
    }
    let ne: usize = parts[1].parse().map_err(|_| Error::Config("bad element count".into()))?;
    let nk: usize = parts[3].parse().map_err(|_| Error::Config("bad mode count".into()))?;
    let mut state = State::zeros(ne, nk);
    for line in lines {
        let mut it = line.split_whitespace();
        let e: usize = match it.next() {
            Some(t) => t.parse().map_err(|_| Error::Config("bad element id".into()))?,
            None => continue,
        };
        for m in 0..N_VARS {
            for k in 0..nk {
                let t = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("truncated field row {e}")))?;
                *state.at_mut(e, m, k) =
                    t.parse().map_err(|_| Error::Config("bad field value".into()))?;
            }
        }
    }
    Ok((state, scheme))
}

/// Wall-surface CSV: `x, y, cp`.
pub fn write_surface_cp(report: &ForceReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("x,y,cp\n");
    for &(x, y, cp) in &report.cp {
        let _ = writeln!(out, "{},{},{}", fmt(x), fmt(y), fmt(cp));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Convergence CSV: `step, cfl, residual_l2, cl, cd`.
pub fn write_convergence(stats: &SteadyStats, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("step,cfl,residual_l2,cl,cd\n");
    for r in &stats.history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.step,
            fmt(r.cfl),
            fmt(r.residual_l2),
            fmt(r.cl),
            fmt(r.cd)
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// One vector per line.
pub fn write_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for x in v {
        let _ = writeln!(out, "{}", fmt(*x));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad vector entry `{l}`")))
        })
        .collect()
}

/// BFGS checkpoint: dimension, row-major matrix entries, rho, tol, iter.
pub fn write_bfgs(
    b: &DMatrix<f64>,
    rho: f64,
    tol: f64,
    iter: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let n = b.nrows();
    let mut out = String::new();
    let _ = writeln!(out, "{n}");
    for i in 0..n {
        for j in 0..n {
            let _ = write!(out, "{} ", fmt(b[(i, j)]));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{}", fmt(rho));
    let _ = writeln!(out, "{}", fmt(tol));
    let _ = writeln!(out, "{iter}");
    fs::write(path, out)?;
    Ok(())
}

pub fn read_bfgs(path: impl AsRef<Path>) -> Result<(DMatrix<f64>, f64, f64, usize)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let n: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| Error::Config("bad bfgs checkpoint".into()))?;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        let row = lines
            .next()
            .ok_or_else(|| Error::Config("truncated bfgs checkpoint".into()))?;
        for (j, t) in row.split_whitespace().enumerate() {
            b[(i, j)] = t.parse().map_err(|_| Error::Config("bad bfgs entry".into()))?;
        }
    }
    let rho: f64 = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| Error::Config("missing rho".into()))?;
    let tol: f64 = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| Error::Config("missing tol".into()))?;
    let iter: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| Error::Config("missing iter".into()))?;
    Ok((b, rho, tol, iter))
}

/// FV2 pin: one row of four scalings per element.
pub fn write_pin(pin: &[[f64; N_VARS]], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for row in pin {
        let _ = writeln!(out, "{} {} {} {}", fmt(row[0]), fmt(row[1]), fmt(row[2]), fmt(row[3]));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pin(path: impl AsRef<Path>) -> Result<Vec<[f64; N_VARS]>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse().unwrap_or(f64::NAN))
                .collect();
            if vals.len() != N_VARS || vals.iter().any(|v| v.is_nan()) {
                Err(Error::Config("bad pin row".into()))
            } else {
                Ok([vals[0], vals[1], vals[2], vals[3]])
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_roundtrip_bit_exact() {
        let mut s = State::zeros(3, 3);
        for (i, v) in s.data.iter_mut().enumerate() {
            *v = (i as f64 * 0.123456789).sin() * 1e-3 + 1.0 / 3.0;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.dat");
        write_field(&s, Scheme::DgP1, &path).unwrap();
        let (s2, scheme) = read_field(&path).unwrap();
        assert_eq!(scheme, Scheme::DgP1);
        assert_eq!(s.data, s2.data);
    }

    #[test]
    fn vector_roundtrip_bit_exact() {
        let v = vec![std::f64::consts::PI, -1.0 / 3.0, 1e-300, 0.0];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        write_vector(&v, &path).unwrap();
        assert_eq!(read_vector(&path).unwrap(), v);
    }

    #[test]
    fn bfgs_roundtrip_bit_exact() {
        let b = DMatrix::from_row_slice(2, 2, &[1.5, -0.25, -0.25, 2.0 / 3.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.txt");
        write_bfgs(&b, 1.1, 1e-6, 7, &path).unwrap();
        let (b2, rho, tol, iter) = read_bfgs(&path).unwrap();
        assert_eq!(b, b2);
        assert_eq!(rho, 1.1);
        assert_eq!(tol, 1e-6);
        assert_eq!(iter, 7);
    }
}
