//! Discrete adjoint gradients.
//!
//! The adjoint system `(dR/dU)^T lambda = (dJ/dU)^T` is solved at the
//! converged state with the frozen-coefficient Jacobian (no pseudo-time
//! shift). The CFD-related grid partials `(dJ/dX dX/dD)_i` and
//! `(dR/dX dX/dD)_i` come from central finite differences through the
//! whole geometry chain: each design variable perturbs the surface, the
//! RBF morph rebuilds the volume grid, and quadrature, normals, and basis
//! data are rebuilt on the perturbed mesh. The flow DoFs are never
//! re-solved or modified. The total design gradient is
//!
//! ```text
//! dJ/dD_i = (dJ/dX dX/dD)_i - lambda^T (dR/dX dX/dD)_i
//! ```
//!
//! per functional; the state-independent area constraint reduces to its
//! pure geometric difference.

use std::fmt::Write as _;

use crate::disc::{Disc, Scheme, State};
use crate::error::{Error, Result};
use crate::euler::Freestream;
use crate::mesh::Mesh;
use crate::objectives::{area, objective_partial_du};
use crate::solver::forces::compute_forces;
use crate::solver::linear::{gmres, BlockIlu0, BlockJacobi, BlockMatrix, IdentityPrecond};
use crate::solver::residual::{residual, Hooks};
use crate::solver::{Precond, SolverConfig};

/// Transposed system with its preconditioner, reusable across several
/// right-hand sides.
pub struct AdjointOperator {
    jt: BlockMatrix,
    precond: Box<dyn crate::solver::linear::PrecondOp>,
}

impl AdjointOperator {
    pub fn new(jac: &BlockMatrix, cfg: &SolverConfig) -> Result<AdjointOperator> {
        let jt = jac.transpose();
        let precond: Box<dyn crate::solver::linear::PrecondOp> = match cfg.precond {
            Precond::Ilu0 => Box::new(BlockIlu0::new(&jt)?),
            Precond::BlockJacobi => Box::new(BlockJacobi::new(&jt)?),
            Precond::None => Box::new(IdentityPrecond),
        };
        Ok(AdjointOperator { jt, precond })
    }

    pub fn solve(&self, rhs: &State, cfg: &SolverConfig) -> Result<State> {
        let (sol, _, _) = gmres(
            &self.jt,
            &rhs.data,
            self.precond.as_ref(),
            cfg.adjoint_tol,
            cfg.gmres_restart,
            cfg.gmres_max_iters,
        )?;
        Ok(State {
            ne: rhs.ne,
            nk: rhs.nk,
            data: sol,
        })
    }
}

/// Solves the transposed linear system for one right-hand side.
pub fn adjoint_solve(jac: &BlockMatrix, rhs: &State, cfg: &SolverConfig) -> Result<State> {
    AdjointOperator::new(jac, cfg)?.solve(rhs, cfg)
}

/// Adjoint vectors for the drag objective and the lift constraint.
pub struct AdjointPair {
    pub lambda_cd: State,
    pub lambda_cl: State,
}

/// Solves both adjoint systems, reusing one transposed factorization.
pub fn solve_adjoints(
    disc: &Disc,
    u: &State,
    jac: &BlockMatrix,
    cfg: &SolverConfig,
    fs: &Freestream,
) -> Result<AdjointPair> {
    let partials = objective_partial_du(disc, u, fs)?;
    let op = AdjointOperator::new(jac, cfg)?;
    Ok(AdjointPair {
        lambda_cd: op.solve(&partials.d_cd_du, cfg)?,
        lambda_cl: op.solve(&partials.d_cl_du, cfg)?,
    })
}

/// Per-design-variable finite-difference steps.
#[derive(Clone, Debug)]
pub struct PerturbationPlan {
    pub steps: Vec<f64>,
}

/// Deterministic steps `sigma_rel * max(|d_i|, edge_i)`, halved (up to 8
/// times) whenever the deformed mesh at `d +- step e_i` is invalid.
pub fn make_perturbation_plan(
    d: &[f64],
    sigma_rel: f64,
    edges: &[f64],
    mesh_of: &dyn Fn(&[f64]) -> Result<Mesh>,
) -> Result<PerturbationPlan> {
    assert!(sigma_rel > 0.0);
    let mut steps = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let mut step = sigma_rel * d[i].abs().max(edges[i]);
        let mut ok = false;
        for _ in 0..=8 {
            let mut dp = d.to_vec();
            dp[i] += step;
            let mut dm = d.to_vec();
            dm[i] -= step;
            if mesh_of(&dp).is_ok() && mesh_of(&dm).is_ok() {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if !ok {
            return Err(Error::PerturbationFailure { var: i, halvings: 8 });
        }
        steps.push(step);
    }
    Ok(PerturbationPlan { steps })
}

/// CFD-related grid partials per design variable, already contracted with
/// the adjoint vectors.
#[derive(Clone, Debug, Default)]
pub struct GridPartials {
    /// (dJ/dX dX/dD)_i for J = Cd.
    pub d_cd_dx: Vec<f64>,
    /// Same for Cl.
    pub d_cl_dx: Vec<f64>,
    /// Pure geometric area differences dA/dD_i.
    pub d_area: Vec<f64>,
    /// lambda_Cd^T (dR/dX dX/dD)_i.
    pub adj_cd_r: Vec<f64>,
    /// lambda_Cl^T (dR/dX dX/dD)_i.
    pub adj_cl_r: Vec<f64>,
}

/// Evaluates the grid partials by central differences over the geometry
/// chain with frozen flow DoFs.
#[allow(clippy::too_many_arguments)]
pub fn grid_partials(
    mesh_of: &dyn Fn(&[f64]) -> Result<Mesh>,
    d0: &[f64],
    plan: &PerturbationPlan,
    scheme: Scheme,
    cfg: &SolverConfig,
    fs: &Freestream,
    u: &State,
    hooks: &Hooks,
    adjoints: &AdjointPair,
) -> Result<GridPartials> {
    let n = d0.len();
    assert_eq!(plan.steps.len(), n);
    let checksum = u.checksum();

    let mut out = GridPartials {
        d_cd_dx: vec![0.0; n],
        d_cl_dx: vec![0.0; n],
        d_area: vec![0.0; n],
        adj_cd_r: vec![0.0; n],
        adj_cl_r: vec![0.0; n],
    };

    for i in 0..n {
        let h = plan.steps[i];
        let eval = |sign: f64| -> Result<(f64, f64, f64, f64, f64)> {
            let mut d = d0.to_vec();
            d[i] += sign * h;
            let mesh = mesh_of(&d)?;
            // rebuild quadrature, normals, and basis data on the new grid
            let disc = Disc::new(&mesh, scheme)?;
            let forces = compute_forces(&disc, u, fs)?;
            let a = area(&mesh)?;
            let r = residual(&disc, u, cfg, fs, hooks, None)?;
            let dot = |lambda: &State| -> f64 {
                lambda.data.iter().zip(&r.data).map(|(l, rr)| l * rr).sum()
            };
            Ok((
                forces.cd,
                forces.cl,
                a,
                dot(&adjoints.lambda_cd),
                dot(&adjoints.lambda_cl),
            ))
        };
        let plus = eval(1.0)?;
        let minus = eval(-1.0)?;
        let inv = 1.0 / (2.0 * h);
        out.d_cd_dx[i] = (plus.0 - minus.0) * inv;
        out.d_cl_dx[i] = (plus.1 - minus.1) * inv;
        out.d_area[i] = (plus.2 - minus.2) * inv;
        out.adj_cd_r[i] = (plus.3 - minus.3) * inv;
        out.adj_cl_r[i] = (plus.4 - minus.4) * inv;
    }

    // the flow DoFs must never change during grid perturbation
    assert_eq!(u.checksum(), checksum, "grid_partials mutated the state");
    Ok(out)
}

/// Total design gradients of the objective and both constraints.
#[derive(Clone, Debug, Default)]
pub struct DesignGradient {
    pub d_cd: Vec<f64>,
    pub d_cl: Vec<f64>,
    pub d_area: Vec<f64>,
}

pub fn total_gradient(partials: &GridPartials) -> DesignGradient {
    let n = partials.d_cd_dx.len();
    let mut g = DesignGradient {
        d_cd: vec![0.0; n],
        d_cl: vec![0.0; n],
        d_area: partials.d_area.clone(),
    };
    for i in 0..n {
        g.d_cd[i] = partials.d_cd_dx[i] - partials.adj_cd_r[i];
        g.d_cl[i] = partials.d_cl_dx[i] - partials.adj_cl_r[i];
    }
    g
}

/// Gradient rows for one scheme, used by the sensitivity comparison.
#[derive(Clone, Debug)]
pub struct SensitivityRow {
    pub scheme: String,
    pub gradient: Vec<f64>,
}

/// Comparison of per-scheme gradients against a declared reference:
/// emits one CSV block of gradient values and L2/Linf deviations.
pub struct SensitivityReport {
    pub rows: Vec<SensitivityRow>,
    pub reference: Vec<f64>,
}

impl SensitivityReport {
    pub fn deviations(&self) -> Vec<(String, f64, f64)> {
        self.rows
            .iter()
            .map(|row| {
                let mut l2 = 0.0;
                let mut linf: f64 = 0.0;
                for (g, r) in row.gradient.iter().zip(&self.reference) {
                    let d = g - r;
                    l2 += d * d;
                    linf = linf.max(d.abs());
                }
                (row.scheme.clone(), l2.sqrt(), linf)
            })
            .collect()
    }

    /// CSV: `i, scheme, grad_value` then deviation summary rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,scheme,grad_value\n");
        for (i, r) in self.reference.iter().enumerate() {
            let _ = writeln!(out, "{i},reference,{r:.16e}");
        }
        for row in &self.rows {
            for (i, g) in row.gradient.iter().enumerate() {
                let _ = writeln!(out, "{i},{},{g:.16e}", row.scheme);
            }
        }
        out.push_str("scheme,l2_deviation,linf_deviation\n");
        for (name, l2, linf) in self.deviations() {
            let _ = writeln!(out, "{name},{l2:.16e},{linf:.16e}");
        }
        out
    }
}
