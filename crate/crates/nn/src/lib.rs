//! Tensor engine with reverse-mode automatic differentiation.
//!
//! Everything is generic over [`Real`] so the networks run in `f32` while
//! gradient checks instantiate identical code in `f64`. A [`Graph`] records
//! operations in execution order; [`Graph::backward`] walks the tape once in
//! reverse and produces gradients per named parameter of a [`ParamStore`].
//!
//! Layer kernels expose per-frame step variants (`conv2d_step`, `gru_cell`,
//! ...) with the same accumulation order as the offline forward passes;
//! the streaming inference path is built on those and reproduces offline
//! outputs exactly.

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod ops;
pub mod optim;
pub mod params;
pub mod real;
pub mod tensor;

pub use error::NnError;
pub use graph::{CustomOp, Graph, NodeId};
pub use optim::Rmsprop;
pub use params::{Param, ParamGrads, ParamId, ParamStore};
pub use real::Real;
pub use tensor::Tensor;

pub use ops::conv::Conv2dSpec;
pub use ops::deconv::Deconv2dSpec;
pub use ops::gru::GruSpec;
