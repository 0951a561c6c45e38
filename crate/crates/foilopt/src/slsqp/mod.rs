//! Sequential least-squares programming: damped-BFGS Hessian approximation,
//! a convex QP subproblem per iteration, and an L1 exact-penalty line
//! search. Inequalities are handled by the QP's active set; variable
//! bounds become inequality rows of the subproblem so every iterate stays
//! inside the box.

pub mod qp;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use qp::{qp_solve, QpProblem};

/// Objective/constraint evaluation at a design point.
#[derive(Clone, Debug, Default)]
pub struct Eval {
    pub j: f64,
    pub c_eq: Vec<f64>,
    pub c_ineq: Vec<f64>,
    /// Gradients, present when requested.
    pub grad_j: Option<Vec<f64>>,
    pub grad_c_eq: Option<Vec<Vec<f64>>>,
    pub grad_c_ineq: Option<Vec<Vec<f64>>>,
}

/// The optimization problem: callbacks plus bounds and a start point.
pub struct Problem<'a> {
    pub n: usize,
    pub n_eq: usize,
    pub n_ineq: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub d0: Vec<f64>,
    /// Evaluates at `d`; the flag requests gradients.
    pub eval: &'a mut dyn FnMut(&[f64], bool) -> Result<Eval>,
}

#[derive(Clone, Copy, Debug)]
pub struct SlsqpConfig {
    pub max_iter: usize,
    pub kkt_tol: f64,
    /// KKT tolerance floor as a fraction of the initial gradient norm
    /// (guards against stagnating on finite-difference gradient noise).
    pub noise_floor: f64,
    /// Penalty-weight margin over the multiplier norm.
    pub merit_rho_margin: f64,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for SlsqpConfig {
    fn default() -> Self {
        SlsqpConfig {
            max_iter: 50,
            kkt_tol: 1e-6,
            noise_floor: 1e-5,
            merit_rho_margin: 1.1,
            armijo: 1e-4,
            max_halvings: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    KktSatisfied,
    IterationCap,
    LineSearchFailure,
    StepBelowResolution,
    CallbackFailure,
}

/// One row of the optimization history.
#[derive(Clone, Debug)]
pub struct KktPoint {
    pub iter: usize,
    pub d: Vec<f64>,
    pub j: f64,
    pub c_eq: Vec<f64>,
    pub c_ineq: Vec<f64>,
    pub kkt_norm: f64,
    pub feasibility: f64,
    pub step_length: f64,
    pub qp_relaxed: bool,
}

#[derive(Clone, Debug)]
pub struct SlsqpResult {
    pub d: Vec<f64>,
    pub j: f64,
    pub stop: StopReason,
    pub history: Vec<KktPoint>,
}

/// Optimizer state restored from a checkpoint; resuming with it reproduces
/// the uncheckpointed run bit-for-bit.
#[derive(Clone, Debug)]
pub struct WarmStart {
    pub b: DMatrix<f64>,
    pub rho: f64,
    pub iter_offset: usize,
    /// The stopping tolerance fixed at the original iteration 0.
    pub tol: f64,
}

/// Snapshot emitted after every accepted step (drives checkpointing).
pub struct IterateSnapshot<'a> {
    /// Iterations completed, counting any warm-start offset.
    pub iter: usize,
    pub d: &'a [f64],
    pub b: &'a DMatrix<f64>,
    pub rho: f64,
    pub tol: f64,
}

/// Damped BFGS Hessian approximation (Powell damping, threshold 0.2 s'Bs).
#[derive(Clone, Debug)]
pub struct BfgsState {
    pub b: DMatrix<f64>,
}

impl BfgsState {
    pub fn new(n: usize, scale: f64) -> BfgsState {
        BfgsState {
            b: DMatrix::identity(n, n) * scale.max(1e-10),
        }
    }

    /// Applies the damped update; positive definiteness is preserved for
    /// any (s, y) with |s| > 0.
    pub fn update(&mut self, s: &[f64], y: &[f64]) {
        let n = s.len();
        let sv = DVector::from_column_slice(s);
        let yv = DVector::from_column_slice(y);
        let bs = &self.b * &sv;
        let s_b_s = sv.dot(&bs);
        if s_b_s <= 0.0 {
            return;
        }
        let s_y = sv.dot(&yv);
        // Powell damping toward Bs keeps s'y_bar >= 0.2 s'Bs > 0
        let y_bar = if s_y < 0.2 * s_b_s {
            let theta = 0.8 * s_b_s / (s_b_s - s_y);
            yv * theta + &bs * (1.0 - theta)
        } else {
            yv
        };
        let s_y_bar = sv.dot(&y_bar);
        if s_y_bar <= 1e-300 {
            return;
        }
        // B <- B - Bs s'B / s'Bs + y y' / s'y
        let bs_outer = &bs * bs.transpose();
        self.b -= bs_outer / s_b_s;
        let y_outer = &y_bar * y_bar.transpose();
        self.b += y_outer / s_y_bar;
        // enforce exact symmetry against rounding drift
        let bt = self.b.transpose();
        self.b = (&self.b + bt) * 0.5;
        // eigenvalue floor: exact damping keeps B positive definite, but
        // repeated rounded updates can drive the smallest eigenvalue to zero
        let min_eig = self.min_eigenvalue();
        if min_eig < 1e-10 {
            for i in 0..n {
                self.b[(i, i)] += 1e-10 - min_eig;
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.b
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &v| a.min(v))
    }
}

/// L1 exact-penalty merit function.
fn merit(j: f64, c_eq: &[f64], c_ineq: &[f64], rho: f64) -> f64 {
    let viol: f64 = c_eq.iter().map(|c| c.abs()).sum::<f64>()
        + c_ineq.iter().map(|c| c.max(0.0)).sum::<f64>();
    j + rho * viol
}

fn violation_norm(c_eq: &[f64], c_ineq: &[f64]) -> f64 {
    let mut v: f64 = 0.0;
    for c in c_eq {
        v = v.max(c.abs());
    }
    for c in c_ineq {
        v = v.max(c.max(0.0));
    }
    v
}

/// Runs the optimizer; returns the best iterate found and the history.
pub fn optimize(problem: &mut Problem, cfg: &SlsqpConfig) -> Result<SlsqpResult> {
    optimize_with(problem, cfg, None, &mut |_| Ok(()))
}

/// Full-control entry point: optional warm start and a per-step observer.
pub fn optimize_with(
    problem: &mut Problem,
    cfg: &SlsqpConfig,
    warm: Option<WarmStart>,
    observer: &mut dyn FnMut(&IterateSnapshot) -> Result<()>,
) -> Result<SlsqpResult> {
    let n = problem.n;
    let mut d = problem.d0.clone();
    for i in 0..n {
        d[i] = d[i].clamp(problem.lower[i], problem.upper[i]);
    }

    let mut history: Vec<KktPoint> = Vec::new();
    let mut ev = (problem.eval)(&d, true)?;
    let grad0_norm = ev
        .grad_j
        .as_ref()
        .map(|g| g.iter().fold(0.0f64, |a, &v| a.max(v.abs())))
        .unwrap_or(1.0);

    let (mut bfgs, mut rho, iter_offset, tol) = match warm {
        Some(w) => (BfgsState { b: w.b }, w.rho, w.iter_offset, w.tol),
        None => {
            let tol = cfg.kkt_tol.max(cfg.noise_floor * grad0_norm);
            observer(&IterateSnapshot {
                iter: 0,
                d: &d,
                b: &(DMatrix::identity(n, n) * grad0_norm.max(1e-8)),
                rho: 1.0,
                tol,
            })?;
            (BfgsState::new(n, grad0_norm.max(1e-8)), 1.0f64, 0, tol)
        }
    };
    let mut stop = StopReason::IterationCap;

    for iter in iter_offset..cfg.max_iter {
        let gj = ev.grad_j.clone().ok_or_else(|| Error::Optimizer("missing gradient".into()))?;
        let g_eq = ev.grad_c_eq.clone().unwrap_or_default();
        let g_in = ev.grad_c_ineq.clone().unwrap_or_default();

        // QP subproblem with linearized constraints and box rows
        let mut a_in = Vec::with_capacity(g_in.len() + 2 * n);
        let mut b_in = Vec::with_capacity(g_in.len() + 2 * n);
        for (a, &c) in g_in.iter().zip(&ev.c_ineq) {
            a_in.push(a.clone());
            b_in.push(c);
        }
        for i in 0..n {
            // d_i <= upper_i - x_i  and  -d_i <= x_i - lower_i
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            a_in.push(row);
            b_in.push(d[i] - problem.upper[i]);
            let mut row = vec![0.0; n];
            row[i] = -1.0;
            a_in.push(row);
            b_in.push(problem.lower[i] - d[i]);
        }
        let qp = QpProblem {
            g: gj.clone(),
            b: bfgs.b.clone(),
            a_eq: g_eq.clone(),
            b_eq: ev.c_eq.clone(),
            a_in,
            b_in,
        };
        let sol = qp_solve(&qp)?;

        // KKT residual with the QP multipliers
        let mut stat = gj.clone();
        for (a, mu) in g_eq.iter().zip(&sol.mu_eq) {
            for i in 0..n {
                stat[i] += a[i] * mu;
            }
        }
        for (j, a) in g_in.iter().enumerate() {
            for i in 0..n {
                stat[i] += a[i] * sol.mu_in[j];
            }
        }
        for (j, mu) in sol.mu_in.iter().enumerate().skip(g_in.len()) {
            // bound rows
            let k = j - g_in.len();
            let (var, sign) = (k / 2, if k % 2 == 0 { 1.0 } else { -1.0 });
            stat[var] += sign * mu;
        }
        let kkt_norm = stat.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let feasibility = violation_norm(&ev.c_eq, &ev.c_ineq);

        history.push(KktPoint {
            iter,
            d: d.clone(),
            j: ev.j,
            c_eq: ev.c_eq.clone(),
            c_ineq: ev.c_ineq.clone(),
            kkt_norm,
            feasibility,
            step_length: 0.0,
            qp_relaxed: sol.relaxed,
        });

        if kkt_norm <= tol && feasibility <= tol {
            stop = StopReason::KktSatisfied;
            break;
        }

        let step_norm = sol.d.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if step_norm <= 1e-14 * (1.0 + d.iter().fold(0.0f64, |a, &v| a.max(v.abs()))) {
            stop = if feasibility <= tol {
                StopReason::KktSatisfied
            } else {
                StopReason::StepBelowResolution
            };
            break;
        }

        // penalty weight: nondecreasing, above the multiplier norm
        let mu_max = sol
            .mu_eq
            .iter()
            .chain(&sol.mu_in)
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        rho = rho.max(cfg.merit_rho_margin * mu_max).max(1.0);

        // L1 merit line search with the Powell directional bound
        let phi0 = merit(ev.j, &ev.c_eq, &ev.c_ineq, rho);
        let gd: f64 = gj.iter().zip(&sol.d).map(|(a, b)| a * b).sum();
        let viol0: f64 = ev.c_eq.iter().map(|c| c.abs()).sum::<f64>()
            + ev.c_ineq.iter().map(|c| c.max(0.0)).sum::<f64>();
        let dphi = gd - rho * viol0;
        if dphi >= 0.0 && viol0 == 0.0 && gd >= 0.0 {
            stop = StopReason::LineSearchFailure;
            break;
        }

        let mut alpha = 1.0f64;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = d
                .iter()
                .zip(&sol.d)
                .map(|(x, s)| x + alpha * s)
                .collect();
            match (problem.eval)(&trial, false) {
                Ok(te) => {
                    let phi = merit(te.j, &te.c_eq, &te.c_ineq, rho);
                    if phi <= phi0 + cfg.armijo * alpha * dphi.min(0.0) && phi.is_finite() {
                        accepted = Some((trial, te, alpha));
                        break;
                    }
                }
                Err(_) => {
                    // CFD failure on a trial point: shrink the step
                }
            }
            alpha *= 0.5;
        }

        let (d_new, _te, alpha_used) = match accepted {
            Some(v) => v,
            None => {
                stop = StopReason::LineSearchFailure;
                break;
            }
        };
        history.last_mut().unwrap().step_length = alpha_used;

        // full evaluation with gradients at the accepted point
        let ev_new = (problem.eval)(&d_new, true)?;

        // BFGS on the Lagrangian gradient difference with the new multipliers
        let gj_new = ev_new
            .grad_j
            .clone()
            .ok_or_else(|| Error::Optimizer("missing gradient".into()))?;
        let mut lag_old = gj.clone();
        let mut lag_new = gj_new.clone();
        for (a_old, mu) in g_eq.iter().zip(&sol.mu_eq) {
            for i in 0..n {
                lag_old[i] += a_old[i] * mu;
            }
        }
        if let Some(ga) = &ev_new.grad_c_eq {
            for (a_new, mu) in ga.iter().zip(&sol.mu_eq) {
                for i in 0..n {
                    lag_new[i] += a_new[i] * mu;
                }
            }
        }
        for (j, a_old) in g_in.iter().enumerate() {
            for i in 0..n {
                lag_old[i] += a_old[i] * sol.mu_in[j];
            }
        }
        if let Some(ga) = &ev_new.grad_c_ineq {
            for (j, a_new) in ga.iter().enumerate() {
                for i in 0..n {
                    lag_new[i] += a_new[i] * sol.mu_in[j];
                }
            }
        }
        let s: Vec<f64> = d_new.iter().zip(&d).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = lag_new.iter().zip(&lag_old).map(|(a, b)| a - b).collect();
        bfgs.update(&s, &y);
        debug_assert!(bfgs.min_eigenvalue() > 0.0, "BFGS matrix lost definiteness");

        d = d_new;
        ev = ev_new;

        observer(&IterateSnapshot {
            iter: iter + 1,
            d: &d,
            b: &bfgs.b,
            rho,
            tol,
        })?;
    }

    Ok(SlsqpResult {
        d,
        j: ev.j,
        stop,
        history,
    })
}
