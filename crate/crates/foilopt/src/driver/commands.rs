//! CLI subcommand implementations.
//!
//! Exit codes (mapped by the binary from the error variants): 0 success,
//! 2 config error, 3 solver divergence, 4 gradient-check failure,
//! 5 optimizer failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adjoint::{SensitivityReport, SensitivityRow};
use crate::driver::config::RunConfig;
use crate::driver::io;
use crate::driver::pipeline::Pipeline;
use crate::error::{Error, Result};
use crate::mesh::io::{load_mesh, write_mesh};
use crate::objectives::{objective_value, ObjectiveSpec, ObjectiveValues};
use crate::rbf::deformation_report;
use crate::slsqp::{self, Eval, IterateSnapshot, Problem, SlsqpConfig, StopReason, WarmStart};
use crate::solver::forces::compute_forces;

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

/// `validate`: mesh and config checks, no compute.
pub fn cmd_validate(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let mesh = crate::mesh::io::parse_mesh(&fs::read_to_string(&cfg.mesh)?)?;
    let report = mesh.validate();
    if report.is_clean() {
        Ok(format!(
            "mesh {}: {} vertices, {} elements, {} faces — valid",
            cfg.mesh.display(),
            mesh.n_vertices(),
            mesh.n_elements(),
            mesh.faces.len()
        ))
    } else {
        Err(Error::MeshInvalid(report.to_string()))
    }
}

/// `solve`: steady solve from a cold start, write field/Cp/convergence.
pub fn cmd_solve(cfg: &RunConfig) -> Result<ObjectiveValues> {
    ensure_dir(&cfg.output)?;
    let mut pipe = Pipeline::new(cfg.clone())?;
    let d0 = vec![0.0; pipe.n_design()];
    pipe.solve_at(&d0)?;
    let cache = pipe.cache.as_ref().unwrap();
    let spec = ObjectiveSpec::capture(&cache.disc, &cache.u, &pipe.fs)?;
    let values = objective_value(&cache.disc, &cache.u, &pipe.fs, &spec)?;
    let report = compute_forces(&cache.disc, &cache.u, &pipe.fs)?;

    io::write_field(&cache.u, cfg.scheme, cfg.output.join("field.dat"))?;
    io::write_surface_cp(&report, cfg.output.join("surface_cp.csv"))?;
    io::write_convergence(&cache.stats, cfg.output.join("convergence.csv"))?;
    Ok(values)
}

/// `adjoint`: converged solve plus adjoint gradients of Cd, Cl, A.
pub fn cmd_adjoint(cfg: &RunConfig) -> Result<PathBuf> {
    ensure_dir(&cfg.output)?;
    let mut pipe = Pipeline::new(cfg.clone())?;
    let d0 = vec![0.0; pipe.n_design()];
    let grad = pipe.gradients_at(&d0)?;

    let mut out = String::from("i,d_cd,d_cl,d_area\n");
    for i in 0..grad.d_cd.len() {
        let _ = writeln!(
            out,
            "{i},{},{},{}",
            io::fmt(grad.d_cd[i]),
            io::fmt(grad.d_cl[i]),
            io::fmt(grad.d_area[i])
        );
    }
    let path = cfg.output.join("gradient.csv");
    fs::write(&path, out)?;

    let cache = pipe.cache.as_ref().unwrap();
    io::write_field(&cache.u, cfg.scheme, cfg.output.join("field.dat"))?;
    Ok(path)
}

pub struct GradCheckRow {
    pub i: usize,
    pub adjoint: f64,
    pub fd: f64,
    pub rel_err: f64,
}

pub struct GradCheckResult {
    pub rows: Vec<GradCheckRow>,
    pub passed: bool,
    pub tol: f64,
}

/// `grad-check`: adjoint gradient vs full-pipeline central differences.
/// Components below `1e-3 |grad|_inf` are reported but not gated.
pub fn cmd_grad_check(cfg: &RunConfig) -> Result<GradCheckResult> {
    ensure_dir(&cfg.output)?;
    let mut pipe = Pipeline::new(cfg.clone())?;
    let result = grad_check(&mut pipe)?;

    let mut out = String::from("i,adjoint_grad,fd_grad,rel_err\n");
    for row in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.i,
            io::fmt(row.adjoint),
            io::fmt(row.fd),
            io::fmt(row.rel_err)
        );
    }
    fs::write(cfg.output.join("grad_check.csv"), out)?;

    if result.passed {
        Ok(result)
    } else {
        Err(Error::GradCheckFailure {
            failed: result
                .rows
                .iter()
                .filter(|r| r.rel_err > result.tol)
                .count(),
            total: result.rows.len(),
            tol: result.tol,
        })
    }
}

/// Core of the gradient check, reusable from tests.
pub fn grad_check(pipe: &mut Pipeline) -> Result<GradCheckResult> {
    let n = pipe.n_design();
    let d0 = vec![0.0; n];
    let grad = pipe.gradients_at(&d0)?;

    // FV2: the oracle re-solves inherit the baseline limiter pin, so they
    // converge roots of the operator the adjoint actually differentiates
    if let Some(pin) = pipe.cache.as_ref().and_then(|c| c.pin.clone()) {
        pipe.inherit_pin = Some(pin);
    }

    // fresh nonlinear re-solves at D +- h e_i
    let edges: Vec<f64> = pipe
        .lower
        .iter()
        .zip(&pipe.upper)
        .map(|(l, u)| 0.5 * (u - l))
        .collect();
    let spec = {
        let cache = pipe.cache.as_ref().unwrap();
        ObjectiveSpec::capture(&cache.disc, &cache.u, &pipe.fs)?
    };
    let mut fd = vec![0.0; n];
    for i in 0..n {
        let h = pipe.cfg.gradcheck_sigma_rel * edges[i];
        let mut dp = d0.clone();
        dp[i] += h;
        let jp = pipe.values_at(&dp, &spec)?.cd;
        let mut dm = d0.clone();
        dm[i] -= h;
        let jm = pipe.values_at(&dm, &spec)?.cd;
        fd[i] = (jp - jm) / (2.0 * h);
    }
    pipe.inherit_pin = None;

    let gmax = grad.d_cd.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let tol = pipe.cfg.gradcheck_tol;
    let mut rows = Vec::with_capacity(n);
    let mut passed = true;
    for i in 0..n {
        let denom = fd[i].abs().max(1e-300);
        let rel = (grad.d_cd[i] - fd[i]).abs() / denom;
        // components below the noise floor are informational only
        let significant = fd[i].abs() > 1e-3 * gmax;
        if significant && rel > tol {
            passed = false;
        }
        rows.push(GradCheckRow {
            i,
            adjoint: grad.d_cd[i],
            fd: fd[i],
            rel_err: rel,
        });
    }
    Ok(GradCheckResult { rows, passed, tol })
}

/// Final report of an optimization run.
pub struct OptimizeOutcome {
    pub initial: ObjectiveValues,
    pub final_values: ObjectiveValues,
    pub final_d: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub total_steps: usize,
}

/// `optimize`: the full design loop with per-iteration checkpoints.
pub fn cmd_optimize(cfg: &RunConfig, resume: bool) -> Result<OptimizeOutcome> {
    ensure_dir(&cfg.output)?;
    let mut pipe = Pipeline::new(cfg.clone())?;
    optimize_pipeline(&mut pipe, Some(cfg.output.clone()), resume)
}

/// Reusable optimization driver over a prepared pipeline. `output = None`
/// skips all file I/O (used by the acceptance suite).
pub fn optimize_pipeline(
    pipe: &mut Pipeline,
    output: Option<PathBuf>,
    resume: bool,
) -> Result<OptimizeOutcome> {
    let n = pipe.n_design();
    let cfg = pipe.cfg.clone();

    // resume support: restore design, state, optimizer internals
    let mut warm: Option<WarmStart> = None;
    let mut d_start = vec![0.0; n];
    if resume {
        let out = output
            .as_ref()
            .ok_or_else(|| Error::Optimizer("resume requires an output directory".into()))?;
        let mut latest: Option<(usize, PathBuf)> = None;
        for entry in fs::read_dir(out)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().to_string();
            if let Some(k) = name.strip_prefix("iter_").and_then(|s| s.parse::<usize>().ok()) {
                if latest.as_ref().map(|(lk, _)| k > *lk).unwrap_or(true) {
                    latest = Some((k, entry.path()));
                }
            }
        }
        let (_, dir) = latest.ok_or_else(|| Error::Optimizer("no checkpoint to resume".into()))?;
        d_start = io::read_vector(dir.join("design.txt"))?;
        let (u, _) = io::read_field(dir.join("state.dat"))?;
        let pin = if dir.join("fv2pin.txt").exists() {
            Some(io::read_pin(dir.join("fv2pin.txt"))?)
        } else {
            None
        };
        pipe.restore_cache(d_start.clone(), u, pin)?;
        let (b, rho, tol, iter) = io::read_bfgs(dir.join("bfgs.txt"))?;
        warm = Some(WarmStart {
            b,
            rho,
            tol,
            iter_offset: iter,
        });
    }

    // reference values captured before step 0
    pipe.solve_at(&d_start)?;
    let spec = {
        let cache = pipe.cache.as_ref().unwrap();
        ObjectiveSpec::capture(&cache.disc, &cache.u, &pipe.fs)?
    };
    let initial = pipe.values_at(&d_start, &spec)?;

    let lower = pipe.lower.clone();
    let upper = pipe.upper.clone();

    // history rows shared between the eval closure and the writer
    let mut history_rows: Vec<(usize, ObjectiveValues, f64, f64)> = Vec::new();

    let outcome = {
        let pipe_cell = std::cell::RefCell::new(&mut *pipe);
        let mut eval = |d: &[f64], want_grad: bool| -> Result<Eval> {
            let mut p = pipe_cell.borrow_mut();
            let vals = p.values_at(d, &spec)?;
            let (grad_j, grad_c) = if want_grad {
                let g = p.gradients_at(d)?;
                // c = (Cl0 - Cl, A0 - A): gradients are the negations
                let gc1: Vec<f64> = g.d_cl.iter().map(|v| -v).collect();
                let gc2: Vec<f64> = g.d_area.iter().map(|v| -v).collect();
                (Some(g.d_cd), Some(vec![gc1, gc2]))
            } else {
                (None, None)
            };
            Ok(Eval {
                j: vals.cd,
                c_eq: vec![],
                c_ineq: vec![vals.c_ineq[0], vals.c_ineq[1]],
                grad_j,
                grad_c_eq: want_grad.then(Vec::new),
                grad_c_ineq: grad_c,
            })
        };

        let mut problem = Problem {
            n,
            n_eq: 0,
            n_ineq: 2,
            lower,
            upper,
            d0: d_start.clone(),
            eval: &mut eval,
        };
        let slsqp_cfg = SlsqpConfig {
            max_iter: cfg.opt_max_iter,
            kkt_tol: cfg.opt_kkt_tol,
            noise_floor: cfg.opt_noise_floor,
            merit_rho_margin: cfg.opt_merit_rho_margin,
            ..SlsqpConfig::default()
        };

        let out_dir = output.clone();
        let mut observer = |snap: &IterateSnapshot| -> Result<()> {
            if let Some(out) = &out_dir {
                let dir = out.join(format!("iter_{:03}", snap.iter));
                ensure_dir(&dir)?;
                io::write_vector(snap.d, dir.join("design.txt"))?;
                io::write_bfgs(snap.b, snap.rho, snap.tol, snap.iter, dir.join("bfgs.txt"))?;
                let mut p = pipe_cell.borrow_mut();
                // the cache at the accepted point holds the converged state
                p.solve_at(snap.d)?;
                let cache = p.cache.as_ref().unwrap();
                io::write_field(&cache.u, cache.disc.scheme, dir.join("state.dat"))?;
                if let Some(pin) = &cache.pin {
                    io::write_pin(pin, dir.join("fv2pin.txt"))?;
                }
                let vals = objective_value(&cache.disc, &cache.u, &p.fs, &spec)?;
                drop(p);
                history_rows.push((snap.iter, vals, 0.0, 0.0));
            }
            Ok(())
        };

        slsqp::optimize_with(&mut problem, &slsqp_cfg, warm, &mut observer)?
    };

    let final_values = pipe.values_at(&outcome.d, &spec)?;

    if let Some(out) = &output {
        // history CSV from the optimizer's own rows
        let mut csv = String::from("iter,cd,cl,area,feasibility,kkt_norm\n");
        for row in &outcome.history {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                row.iter,
                io::fmt(row.j),
                io::fmt(spec.cl0 - row.c_ineq[0]),
                io::fmt(spec.a0 - row.c_ineq[1]),
                io::fmt(row.feasibility),
                io::fmt(row.kkt_norm)
            );
        }
        fs::write(out.join("history.csv"), csv)?;

        // final geometry and wall shape
        let final_mesh = pipe.mesh_for(&outcome.d)?;
        write_mesh(&final_mesh, out.join("final_mesh.m2d"))?;
        let mut wall = String::from("x,y\n");
        for lp in final_mesh.wall_loops()? {
            for v in lp {
                let p = final_mesh.vertices[v];
                let _ = writeln!(wall, "{},{}", io::fmt(p.x), io::fmt(p.y));
            }
        }
        fs::write(out.join("final_wall.csv"), wall)?;

        let mut report = String::new();
        let _ = writeln!(report, "iterations: {}", outcome.history.len());
        let _ = writeln!(report, "stop: {:?}", outcome.stop);
        let _ = writeln!(
            report,
            "cd: {} -> {} ({:+.1}%)",
            io::fmt(initial.cd),
            io::fmt(final_values.cd),
            100.0 * (final_values.cd - initial.cd) / initial.cd
        );
        let _ = writeln!(
            report,
            "cl: {} -> {}",
            io::fmt(initial.cl),
            io::fmt(final_values.cl)
        );
        let _ = writeln!(
            report,
            "area: {} -> {}",
            io::fmt(initial.area),
            io::fmt(final_values.area)
        );
        fs::write(out.join("report.txt"), report)?;
    }
    let _ = history_rows;

    let iterations = outcome.history.len();
    let stop = outcome.stop;
    if matches!(stop, StopReason::CallbackFailure) {
        return Err(Error::Optimizer("objective callback failed".into()));
    }
    Ok(OptimizeOutcome {
        initial,
        final_values,
        final_d: outcome.d,
        iterations,
        stop,
        total_steps: pipe.total_steps,
    })
}

/// `deform`: deformation-only dry run with a report CSV.
pub fn cmd_deform(cfg: &RunConfig) -> Result<PathBuf> {
    ensure_dir(&cfg.output)?;
    let pipe = Pipeline::new(cfg.clone())?;
    let d = if cfg.deform_design.is_empty() {
        vec![0.0; pipe.n_design()]
    } else {
        if cfg.deform_design.len() != pipe.n_design() {
            return Err(Error::Config(format!(
                "deform.design has {} entries, parameterization expects {}",
                cfg.deform_design.len(),
                pipe.n_design()
            )));
        }
        cfg.deform_design.clone()
    };
    let deformed = pipe.mesh_for(&d)?;
    let report = deformation_report(&pipe.base_mesh, &deformed);
    let out_mesh = cfg.output.join("deformed.m2d");
    write_mesh(&deformed, &out_mesh)?;
    let csv = format!(
        "max_displacement,min_area_before,min_area_after\n{},{},{}\n",
        io::fmt(report.max_displacement),
        io::fmt(report.min_area_before),
        io::fmt(report.min_area_after)
    );
    fs::write(cfg.output.join("deformation_report.csv"), csv)?;
    Ok(out_mesh)
}

/// Sensitivity comparison across schemes (used by the comparison example
/// and the acceptance suite): each scheme's adjoint gradient on its own
/// mesh, against a declared reference gradient.
pub fn sensitivity_comparison(
    runs: Vec<(String, RunConfig)>,
    reference: Vec<f64>,
) -> Result<SensitivityReport> {
    let mut rows = Vec::new();
    for (name, cfg) in runs {
        let mut pipe = Pipeline::new(cfg)?;
        let d0 = vec![0.0; pipe.n_design()];
        let grad = pipe.gradients_at(&d0)?;
        rows.push(SensitivityRow {
            scheme: name,
            gradient: grad.d_cd,
        });
    }
    Ok(SensitivityReport { rows, reference })
}

/// Loads a mesh referenced by a config (exposed for the validate CLI path).
pub fn load_config_mesh(cfg: &RunConfig) -> Result<crate::mesh::Mesh> {
    load_mesh(&cfg.mesh)
}
