//! Minimal differentiable numeric kernel: parameter tensors, a reverse-mode
//! tape over matrix ops, the Adam optimizer, and a finite-difference checker.

mod adam;
mod binding;
mod gradcheck;
mod param;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use binding::Binding;
pub use gradcheck::{finite_diff_check, GradCheckReport, TensorCheck};
pub use param::{init_embedding, init_glorot, ParamGroup, ParamId, ParamStore, ParameterTensor};
pub use tape::{NodeId, ScorePair, Tape, TapeError};
pub use tensor::{Mat, Scalar};
