mod container;
pub mod dataset;
pub mod diff;
pub mod error;
pub mod extract;
pub mod ingest;
pub mod metrics;
pub mod mstie;
pub mod objective;
pub mod scalar;
pub mod synth;
pub mod train;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Array;

/// Single-precision graph, used for training and inference.
pub type Graph32 = diff::Graph<f32>;
/// Double-precision graph, used for gradient checks.
pub type Graph64 = diff::Graph<f64>;
pub type Params32 = mstie::MstieParams<f32>;
pub type Params64 = mstie::MstieParams<f64>;
pub type Tensor32 = tensor::Array<f32>;
pub type Tensor64 = tensor::Array<f64>;
