//! Dense `f64` tensors, a reverse-mode tape, and the attention/MLP blocks
//! used by the planner.
//!
//! ```
//! use trajplan_diffmath::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.leaf(Tensor::new([2], vec![1.0, 2.0]).unwrap(), true);
//! let sq = g.mul(x, x).unwrap();
//! let loss = g.sum(sq);
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0]);
//! ```

pub mod gradcheck;
pub mod kernels;
pub mod nn;
mod tape;
mod tensor;

pub use nn::{
    glorot_uniform, multi_head_attention, seeded_rng, FeedForward, LayerNorm, Linear,
    MultiHeadAttention, ParamStore, ProjectionVars, Session,
};
pub use tape::{Graph, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("axis {axis} out of range for rank {rank}")]
    Axis { axis: usize, rank: usize },
    #[error("backward needs a one-element loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("{0}")]
    Config(String),
}

impl DiffError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        DiffError::Shape { op, detail: detail.into() }
    }
}
