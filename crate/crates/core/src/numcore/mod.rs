//! Dense tensors, reverse-mode differentiation, Adam and the step schedule.

mod adam;
mod schedule;
mod tape;
mod tensor;

pub use adam::{clip_grad_norm, AdamState, BETA1, BETA2, EPSILON};
pub use schedule::LrSchedule;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
