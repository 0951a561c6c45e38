//! 2D aerodynamic shape optimization toolkit.
//!
//! The crate covers the full adjoint-based design loop for inviscid
//! transonic airfoil flows:
//!
//! - [`mesh`]: unstructured 2D meshes (triangles/quads), native ASCII
//!   format, validation, and fixture generation;
//! - [`param`]: Hicks-Henne bump and free-form-deformation shape
//!   parameterizations mapping a design vector to surface displacements;
//! - [`rbf`]: compact-support radial-basis-function mesh morphing;
//! - [`euler`]: compressible Euler states, fluxes, and Riemann solvers;
//! - [`disc`]: Taylor-basis discretization caches and quadrature;
//! - [`solver`]: FV1/FV2/DGp1/DGp2 residuals, implicit pseudo-time
//!   marching, positivity limiting, solution remapping, force integration;
//! - [`objectives`]: drag objective, lift/area constraints, state partials;
//! - [`adjoint`]: discrete adjoint solves and total design gradients via
//!   grid perturbation;
//! - [`slsqp`]: damped-BFGS SQP optimizer with an active-set QP core;
//! - [`driver`]: run configuration, the optimization pipeline, and the
//!   CLI subcommands;
//! - [`verification`]: manufactured solutions and grid-convergence studies.
//!
//! See the `examples/` directory for runnable entry points to each
//! capability, and the README for the file formats.

pub mod adjoint;
pub mod disc;
pub mod driver;
pub mod error;
pub mod euler;
pub mod geom;
pub mod mesh;
pub mod objectives;
pub mod param;
pub mod rbf;
pub mod slsqp;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
pub use geom::Vec2;
pub use mesh::{Mesh, PatchTag};
