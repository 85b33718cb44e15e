//! Surplus functions `b(x, y) = sup_z h(x, z) + g(y, z)` from hedonic
//! pricing models: their derivatives, Ma–Trudinger–Wang curvature,
//! regularity-condition screening and discrete equilibria.

pub mod commands;
pub mod conditions;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod expr;
pub mod families;
pub mod mtw;
pub mod report;
pub mod sum_form;
pub mod surplus;
pub mod tensor_calc;

pub use error::{Error, Result};
