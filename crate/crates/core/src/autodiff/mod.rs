//! Dense kernels and the differentiation engine.
//!
//! Reverse-mode gradients, forward tangents and their nesting all run on one
//! [`Tape`]; see the module docs of [`tape`] for how nesting works.

mod activation;
pub mod api;
mod matrix;
mod params;
pub mod tape;

pub use activation::{Activation, MAX_DERIVATIVE_ORDER};
pub use api::{
    central_difference, eval, fd_check, grad, gradient_discrepancy, input_grad, input_gradient,
    jacobian, jvp, value_and_grad, vjp, DiffMap, FdReport,
};
pub use matrix::{dot, norm2, sub_vec, Matrix};
pub use params::{ParamGroup, ParamLayout, ParamVector, Segment};
pub use tape::{Tape, Var};
