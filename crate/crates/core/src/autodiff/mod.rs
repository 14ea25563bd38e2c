//! Reverse-mode automatic differentiation over dense `f64` matrices.

pub mod gradcheck;
pub mod meta;
pub mod params;
pub mod tape;
pub mod tensor;

pub use meta::{adapt, grad_through_updates, query_loss_at, InnerLoopTask, MamlMode};
pub use params::{ParamNodes, ParamSet};
pub use tape::{NodeId, Op, Tape};
pub use tensor::Tensor;
