//! Run configuration, the optimization pipeline, file I/O, and the CLI
//! commands.

pub mod commands;
pub mod config;
pub mod io;
pub mod pipeline;

pub use commands::{cmd_adjoint, cmd_deform, cmd_grad_check, cmd_optimize, cmd_solve, cmd_validate};
pub use config::RunConfig;
pub use pipeline::Pipeline;
