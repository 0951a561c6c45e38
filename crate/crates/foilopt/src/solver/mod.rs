//! Steady compressible Euler solvers: FV1, FV2, DGp1, DGp2.

pub mod forces;
pub mod jacobian;
pub mod limiter;
pub mod linear;
pub mod remap;
pub mod residual;
pub mod steady;

pub use forces::{compute_forces, ForceReport};
pub use jacobian::assemble_jacobian;
pub use limiter::positivity_limit;
pub use linear::{gmres, BlockIlu0, BlockJacobi, BlockMatrix, IdentityPrecond, PrecondOp};
pub use remap::remap_solution;
pub use residual::{compute_freeze, residual, Freeze, Hooks};
pub use steady::{steady_solve, SteadyStats};

use crate::error::{Error, Result};
use crate::euler::RiemannSolver;

/// Artificial-viscosity coefficient form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AvVariant {
    /// eps_e = C h^{2-beta} mean |div F(u_h)| over the element (default).
    VolumeResidual,
    /// eps_e = C h^{2-beta} mean |F(u_h)| over the element boundary.
    FaceFlux,
}

/// When to apply artificial viscosity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AvIndicator {
    /// Unconditionally (default).
    Always,
    /// Gate by the highest-mode energy fraction of the density.
    ModalDecay { cutoff: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precond {
    Ilu0,
    BlockJacobi,
    None,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub scheme: crate::disc::Scheme,
    pub riemann: RiemannSolver,
    /// AV constant; valid range [0.0005, 0.5].
    pub av_c_eps: f64,
    pub av_beta: f64,
    pub av_variant: AvVariant,
    pub av_indicator: AvIndicator,
    pub cfl0: f64,
    pub cfl_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Convergence: |R|_2 <= tol_rel * |R(free stream)|_2.
    pub tol_rel: f64,
    pub max_steps: usize,
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iters: usize,
    pub adjoint_tol: f64,
    pub precond: Precond,
    /// Forward-difference step scale for the block Jacobian.
    pub fd_step: f64,
    /// Relative residual level at which an FV2 run pins its limiter
    /// scalings to escape Barth-Jespersen limit cycles (0 disables).
    pub fv2_freeze_tol: f64,
}

impl SolverConfig {
    pub fn new(scheme: crate::disc::Scheme) -> SolverConfig {
        SolverConfig {
            scheme,
            riemann: RiemannSolver::Llf,
            av_c_eps: 0.01,
            av_beta: 0.1,
            av_variant: AvVariant::VolumeResidual,
            av_indicator: AvIndicator::Always,
            cfl0: 1.0,
            cfl_max: 1e7,
            theta_min: 0.8,
            theta_max: 2.0,
            tol_rel: 1e-10,
            max_steps: 400,
            gmres_tol: 1e-4,
            gmres_restart: 60,
            gmres_max_iters: 4000,
            adjoint_tol: 1e-10,
            precond: Precond::Ilu0,
            fd_step: 1e-7,
            fv2_freeze_tol: 1e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.av_c_eps != 0.0 && !(0.0005..=0.5).contains(&self.av_c_eps) {
            return Err(Error::Config(format!(
                "av.c_eps = {} outside [0.0005, 0.5]",
                self.av_c_eps
            )));
        }
        if !(self.theta_min <= 1.0 && 1.0 <= self.theta_max) {
            return Err(Error::Config(format!(
                "CFL growth bounds must satisfy theta_min <= 1 <= theta_max, got [{}, {}]",
                self.theta_min, self.theta_max
            )));
        }
        if self.cfl0 <= 0.0 || self.tol_rel <= 0.0 {
            return Err(Error::Config("cfl0 and tol must be positive".into()));
        }
        Ok(())
    }
}

/// CFL growth factor, Eq-style clamp of the residual ratio.
pub fn cfl_growth(prev_res: f64, new_res: f64, theta_min: f64, theta_max: f64) -> f64 {
    (prev_res / new_res).clamp(theta_min, theta_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::Scheme;

    #[test]
    fn cfl_growth_clamps() {
        assert_eq!(cfl_growth(3.0, 1.0, 0.8, 2.0), 2.0);
        assert_eq!(cfl_growth(0.5, 1.0, 0.8, 2.0), 0.8);
        assert!((cfl_growth(1.2, 1.0, 0.8, 2.0) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::new(Scheme::DgP1);
        assert!(cfg.validate().is_ok());
        cfg.av_c_eps = 0.9;
        assert!(cfg.validate().is_err());
        cfg.av_c_eps = 0.01;
        cfg.theta_min = 1.5;
        assert!(cfg.validate().is_err());
    }
}
