//! Desk-scale toolkit for coupled variational-hemivariational inequality
//! systems: a damped fixed-point solver over the two coupled inequalities,
//! gap-function certificates for returned pairs, a hypothesis audit with
//! falsification witnesses, and a brute-force grid oracle that the solver
//! is tested against.

pub mod error;
pub mod functions;
pub mod gap;
pub mod hypotheses;
pub mod inner;
pub mod instances;
pub mod io;
pub mod operators;
pub mod optim;
pub mod oracle;
pub mod outer;
pub mod problem;
pub mod spaces;

mod cli;
mod numeric;

pub use cli::run_cli;
pub use error::{Error, Result};
