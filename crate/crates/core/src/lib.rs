//! Total-stability analysis for discrete-time nonlinear systems: Lyapunov
//! certificates, explicit perturbation budgets, equilibrium certification
//! for perturbed models and robust output regulation with integral action.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dynamics;
pub mod equilibrium;
mod error;
pub mod expr;
pub mod linalg;
pub mod lyapunov;
pub mod regulation;

pub use error::{Error, Result};
