//! Differentiation and Legendre conjugation primitives.

mod diff;
mod field;
mod legendre;
pub mod linalg;

pub use diff::{default_step, differentiate, gradient, hessian, partial, DerivativeRequest, Scheme};
pub use field::{check_point, DomainBox, Evaluator, PartialFn, Point, ScalarField};
pub use legendre::{legendre_conjugate, legendre_conjugate_with, NewtonOptions};
pub(crate) use legendre::damped_newton;
