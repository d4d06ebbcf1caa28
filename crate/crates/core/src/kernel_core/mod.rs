//! Kernels over state-action spaces, gram matrices, the incrementally grown
//! Cholesky factor of `K + lambda I`, and low-rank feature sketches.

mod cholesky;
mod kernel;
mod point;
mod sketch;

pub use cholesky::CholeskyState;
pub use kernel::{gram_matrix, KernelFamily, KernelSpec, MaternNu};
pub use point::Point;
pub use sketch::{FeatureSketch, SketchKind};
