//! Minimal reverse-mode differentiable array engine.
//!
//! A [`Graph`] records each operation as it is evaluated. Calling
//! [`Graph::backward`] on a scalar node walks the record in reverse and
//! leaves the gradient of every contributing [`Graph::param`] leaf in place.
//!
//! The operator set is closed: 3D convolution, bias add, dense, relu,
//! softmax, temporal pooling, spatial/channel means, elementwise
//! add/sub/mul, matmul, transpose, affine, sum/mean, log, clamp, global
//! SSIM, concat, reshape and leading-axis slice. Every operator has a
//! hand-written backward rule.

mod conv;
pub mod gradcheck;
mod graph;
mod ssim;

pub use conv::Conv3dSpec;
pub use graph::{pool_bins, Graph, Var};
pub use ssim::{SSIM_C1, SSIM_C2};
