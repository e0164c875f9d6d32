//! Sleep-mode control for small cells in a two-tier cellular network.
//!
//! A macro base station covers a disc and several small cells sit inside it.
//! Putting a small cell to sleep saves its circuit power but hands its users
//! to the macro station, which must raise its transmit power to keep every
//! user at the target rate and outage. The crate evaluates that trade-off in
//! closed form and picks which small cells to switch off.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod nonuniform;
pub mod power_model;
mod roots;
pub mod scenario;
pub mod uniform;
pub mod validation;

pub use error::{Error, Result};
pub use nonuniform::{solve_nonuniform, Candidate};
pub use power_model::{evaluate, Evaluation, OperationMode};
pub use scenario::{load_scenario, parse_scenario, Scenario};
pub use uniform::{solve_uniform, UniformSolution};
