//! Strictly convex quadratic programming by a dual active-set method.
//!
//! Solves
//!
//! ```text
//! min  g'd + 0.5 d'Bd
//! s.t. a_j'd + b_j  = 0   (equalities)
//!      a_j'd + b_j <= 0   (inequalities, including variable bounds)
//! ```
//!
//! starting from the unconstrained minimum and adding the most violated
//! constraint one at a time, Goldfarb-Idnani style. The working-set KKT
//! systems are solved densely; problem sizes here are a few dozen
//! variables. Equality constraints are forced into the working set first
//! and never dropped. An infeasible subproblem is reported as such; the
//! caller runs an elastic relaxation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct QpProblem {
    pub g: Vec<f64>,
    pub b: DMatrix<f64>,
    /// Equality rows: a_j'd + b_j = 0.
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    /// Inequality rows: a_j'd + b_j <= 0.
    pub a_in: Vec<Vec<f64>>,
    pub b_in: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub d: Vec<f64>,
    pub mu_eq: Vec<f64>,
    /// Inequality multipliers (nonnegative), zero for inactive rows.
    pub mu_in: Vec<f64>,
    /// True when the elastic relaxation had to be used.
    pub relaxed: bool,
}

const TOL: f64 = 1e-11;

/// Solves the QP; on an infeasible linearization retries with elastic
/// slack variables and flags the result.
pub fn qp_solve(p: &QpProblem) -> Result<QpSolution> {
    match solve_strict(p) {
        Ok(mut sol) => {
            sol.relaxed = false;
            Ok(sol)
        }
        Err(Error::Qp(_)) => {
            let mut sol = solve_elastic(p)?;
            sol.relaxed = true;
            Ok(sol)
        }
        Err(e) => Err(e),
    }
}

fn solve_strict(p: &QpProblem) -> Result<QpSolution> {
    let n = p.g.len();
    let n_eq = p.a_eq.len();
    let n_in = p.a_in.len();

    // working set: all equalities plus active inequalities (by index)
    let mut active: Vec<usize> = Vec::new();

    let solve_kkt = |active: &[usize]| -> Result<(Vec<f64>, Vec<f64>)> {
        let m = n_eq + active.len();
        let mut kkt = DMatrix::<f64>::zeros(n + m, n + m);
        let mut rhs = DVector::<f64>::zeros(n + m);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = p.b[(i, j)];
            }
            rhs[i] = -p.g[i];
        }
        for (r, a_row, b_val) in p
            .a_eq
            .iter()
            .zip(&p.b_eq)
            .enumerate()
            .map(|(r, (a, b))| (r, a, *b))
            .chain(
                active
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| (n_eq + k, &p.a_in[j], p.b_in[j])),
            )
        {
            for i in 0..n {
                kkt[(i, n + r)] = a_row[i];
                kkt[(n + r, i)] = a_row[i];
            }
            rhs[n + r] = -b_val;
        }
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Qp("singular working-set KKT system".into()))?;
        let d = sol.as_slice()[..n].to_vec();
        let mu = sol.as_slice()[n..].to_vec();
        Ok((d, mu))
    };

    for _outer in 0..(4 * (n + n_in + 1)) {
        let (d, mu) = solve_kkt(&active)?;

        // an active inequality with a negative multiplier (convention
        // B d + g + A' mu = 0, feasible side a'd + b <= 0) blocks descent
        // and is dropped, most negative first
        let mut drop: Option<usize> = None;
        let mut worst = TOL;
        for (k, _) in active.iter().enumerate() {
            if mu[n_eq + k] < -worst {
                worst = -mu[n_eq + k];
                drop = Some(k);
            }
        }
        if let Some(k) = drop {
            active.remove(k);
            continue;
        }

        // find the most violated inactive inequality
        let mut worst_violation = TOL;
        let mut add: Option<usize> = None;
        for j in 0..n_in {
            if active.contains(&j) {
                continue;
            }
            let v = p.b_in[j] + dot(&p.a_in[j], &d);
            if v > worst_violation {
                worst_violation = v;
                add = Some(j);
            }
        }
        match add {
            Some(j) => {
                active.push(j);
            }
            None => {
                // optimal: assemble multiplier vectors
                let mut mu_eq = vec![0.0; n_eq];
                mu_eq.copy_from_slice(&mu[..n_eq]);
                let mut mu_in = vec![0.0; n_in];
                for (k, &j) in active.iter().enumerate() {
                    mu_in[j] = mu[n_eq + k];
                }
                return Ok(QpSolution {
                    d,
                    mu_eq,
                    mu_in,
                    relaxed: false,
                });
            }
        }
    }
    Err(Error::Qp("active-set iteration did not terminate".into()))
}

/// Elastic relaxation: inequality rows get slacks `t >= 0` with a large
/// linear penalty, which always admits a solution.
fn solve_elastic(p: &QpProblem) -> Result<QpSolution> {
    let n = p.g.len();
    let n_in = p.a_in.len();
    let rho = 1e6 * (1.0 + p.g.iter().fold(0.0f64, |a, &v| a.max(v.abs())));
    let eps = 1e-6;

    // extended variables (d, t)
    let nt = n + n_in;
    let mut g = vec![0.0; nt];
    g[..n].copy_from_slice(&p.g);
    for gi in g.iter_mut().skip(n) {
        *gi = rho;
    }
    let mut b = DMatrix::<f64>::zeros(nt, nt);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = p.b[(i, j)];
        }
    }
    for i in n..nt {
        b[(i, i)] = eps;
    }
    // a_j'd + b_j - t_j <= 0  and  -t_j <= 0
    let mut a_in = Vec::with_capacity(2 * n_in);
    let mut b_in = Vec::with_capacity(2 * n_in);
    for j in 0..n_in {
        let mut row = vec![0.0; nt];
        row[..n].copy_from_slice(&p.a_in[j]);
        row[n + j] = -1.0;
        a_in.push(row);
        b_in.push(p.b_in[j]);
        let mut tneg = vec![0.0; nt];
        tneg[n + j] = -1.0;
        a_in.push(tneg);
        b_in.push(0.0);
    }
    let a_eq = p
        .a_eq
        .iter()
        .map(|a| {
            let mut row = vec![0.0; nt];
            row[..n].copy_from_slice(a);
            row
        })
        .collect();

    let ext = QpProblem {
        g,
        b,
        a_eq,
        b_eq: p.b_eq.clone(),
        a_in,
        b_in,
    };
    let sol = solve_strict(&ext)?;
    let mut mu_in = vec![0.0; n_in];
    for j in 0..n_in {
        mu_in[j] = sol.mu_in[2 * j];
    }
    Ok(QpSolution {
        d: sol.d[..n].to_vec(),
        mu_eq: sol.mu_eq,
        mu_in,
        relaxed: true,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn projection_onto_equality() {
        // min 0.5|d|^2 s.t. d1 + d2 = 1 -> d = (0.5, 0.5), multiplier 0.5
        let p = QpProblem {
            g: vec![0.0, 0.0],
            b: identity(2),
            a_eq: vec![vec![1.0, 1.0]],
            b_eq: vec![-1.0],
            a_in: vec![],
            b_in: vec![],
        };
        let s = qp_solve(&p).unwrap();
        assert!((s.d[0] - 0.5).abs() < 1e-10);
        assert!((s.d[1] - 0.5).abs() < 1e-10);
        assert!((s.mu_eq[0].abs() - 0.5).abs() < 1e-10);
        assert!(!s.relaxed);
    }

    #[test]
    fn unconstrained_newton_step() {
        // B = I, g = (1, -2) -> d = (-1, 2)
        let p = QpProblem {
            g: vec![1.0, -2.0],
            b: identity(2),
            a_eq: vec![],
            b_eq: vec![],
            a_in: vec![],
            b_in: vec![],
        };
        let s = qp_solve(&p).unwrap();
        assert!((s.d[0] + 1.0).abs() < 1e-12);
        assert!((s.d[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_active_bound() {
        // g = (-1), bound d <= 0.1, B = 1 -> d = 0.1 with positive multiplier
        let p = QpProblem {
            g: vec![-1.0],
            b: identity(1),
            a_eq: vec![],
            b_eq: vec![],
            a_in: vec![vec![1.0]],
            b_in: vec![-0.1],
        };
        let s = qp_solve(&p).unwrap();
        assert!((s.d[0] - 0.1).abs() < 1e-10);
        // stationarity: d + g + mu = 0 -> mu = 0.9
        assert!((s.mu_in[0] - 0.9).abs() < 1e-10);
    }

    #[test]
    fn inactive_inequality_ignored() {
        let p = QpProblem {
            g: vec![1.0, 1.0],
            b: identity(2),
            a_eq: vec![],
            b_eq: vec![],
            a_in: vec![vec![1.0, 0.0]],
            b_in: vec![-10.0], // d1 <= 10, inactive
        };
        let s = qp_solve(&p).unwrap();
        assert!((s.d[0] + 1.0).abs() < 1e-10);
        assert_eq!(s.mu_in[0], 0.0);
    }

    #[test]
    fn kkt_residual_of_solution_is_small() {
        // random-ish strictly convex problem with a mix of constraints
        let b = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let p = QpProblem {
            g: vec![1.0, -2.0, 0.5],
            b,
            a_eq: vec![vec![1.0, 1.0, 1.0]],
            b_eq: vec![-1.0],
            a_in: vec![vec![1.0, -1.0, 0.0], vec![0.0, 0.0, -1.0]],
            b_in: vec![-0.2, -0.3],
        };
        let s = qp_solve(&p).unwrap();
        // stationarity: B d + g + A_eq' mu_eq + A_in' mu_in = 0
        for i in 0..3 {
            let mut r = p.g[i];
            for j in 0..3 {
                r += p.b[(i, j)] * s.d[j];
            }
            r += p.a_eq[0][i] * s.mu_eq[0];
            for (row, mu) in p.a_in.iter().zip(&s.mu_in) {
                r += row[i] * mu;
            }
            assert!(r.abs() < 1e-8, "stationarity row {i}: {r}");
        }
        // primal feasibility
        assert!((p.b_eq[0] + dot(&p.a_eq[0], &s.d)).abs() < 1e-9);
        for (row, b) in p.a_in.iter().zip(&p.b_in) {
            assert!(b + dot(row, &s.d) < 1e-9);
        }
        // dual feasibility
        assert!(s.mu_in.iter().all(|&m| m >= -1e-9));
    }

    #[test]
    fn infeasible_rows_trigger_elastic_mode() {
        // d <= -1 and d >= 1 cannot both hold
        let p = QpProblem {
            g: vec![0.0],
            b: identity(1),
            a_eq: vec![],
            b_eq: vec![],
            a_in: vec![vec![1.0], vec![-1.0]],
            b_in: vec![1.0, 1.0],
        };
        let s = qp_solve(&p).unwrap();
        assert!(s.relaxed);
        assert!(s.d[0].abs() <= 1.0 + 1e-6);
    }
}
