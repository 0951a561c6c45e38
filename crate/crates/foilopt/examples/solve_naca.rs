//! Steady transonic flow over a NACA-0012 airfoil.
//!
//! Generates an O-mesh, runs the chosen scheme to convergence, and prints
//! the force coefficients. Pass a scheme name (fv1, fv2, dgp1, dgp2) and
//! optionally the circumferential/radial element counts.

use foilopt::disc::{Disc, Scheme, State};
use foilopt::euler::Freestream;
use foilopt::mesh::gen::{naca0012, omesh};
use foilopt::solver::steady::sequenced_initial_state;
use foilopt::solver::{steady_solve, Hooks, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let scheme = Scheme::parse(args.get(1).map(|s| s.as_str()).unwrap_or("dgp1"))?;
    let ns: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(48);
    let nr: usize = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(16);
    let mach: f64 = args.get(4).map(|s| s.parse()).transpose()?.unwrap_or(0.8);
    let c_eps: f64 = args.get(5).map(|s| s.parse()).transpose()?.unwrap_or(0.01);
    let radius: f64 = args.get(6).map(|s| s.parse()).transpose()?.unwrap_or(20.0);
    let growth: f64 = args.get(7).map(|s| s.parse()).transpose()?.unwrap_or(1.3);
    let max_steps: usize = args.get(8).map(|s| s.parse()).transpose()?.unwrap_or(200);

    let profile = naca0012(ns);
    let mesh = omesh(&profile, nr, radius, growth)?;
    println!("mesh: {} elements", mesh.n_elements());

    let fs = Freestream::new(mach, 1.25, 1.4);
    let disc = Disc::new(&mesh, scheme)?;
    let mut cfg = SolverConfig::new(scheme);
    cfg.tol_rel = 1e-10;
    cfg.max_steps = max_steps;
    cfg.av_c_eps = c_eps;

    let t0 = std::time::Instant::now();
    let (u0, seq_steps) = sequenced_initial_state(&disc, &cfg, &fs, &Hooks::default())?;
    if seq_steps > 0 {
        println!("sequenced start: {} fv1 steps", seq_steps);
    }
    let _ = State::uniform(1, 1, fs.state());
    let (u, stats) = steady_solve(&disc, &u0, &cfg, &fs, &Hooks::default())?;
    let dt = t0.elapsed().as_secs_f64();

    for rec in stats.history.iter().step_by(10) {
        println!(
            "step {:4}  cfl {:10.3e}  |R| {:10.3e}  Cl {:9.5}  Cd {:9.6}",
            rec.step, rec.cfl, rec.residual_l2, rec.cl, rec.cd
        );
    }
    let report = foilopt::solver::compute_forces(&disc, &u, &fs)?;
    println!(
        "converged: {} in {} steps ({dt:.1}s)  residual {:.3e} (ref {:.3e})",
        stats.converged, stats.steps, stats.final_residual, stats.reference_residual
    );
    println!("Cl = {:.6}  Cd = {:.6}", report.cl, report.cd);
    Ok(())
}
