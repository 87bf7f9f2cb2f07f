//! Hand-written forward and backward passes for the handful of tensor ops
//! the model needs, plus a finite-difference gradient checker.

mod conv;
mod gradcheck;
mod grid;
pub mod ops;

pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvKernel, KERNEL_SIZE};
pub(crate) use conv::conv2d_backward_with;
pub use gradcheck::{
    builtin_checks, grad_check, grad_check_with, AddCheck, AffineCheck, ConvCheck, GradCheckOp, GradCheckOptions,
    GradCheckReport, MaskedCeCheck, MaskedL1Check, ReluCheck, SoftmaxCheck,
};
pub use grid::{Grid4, Real};
