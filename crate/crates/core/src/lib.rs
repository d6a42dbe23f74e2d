//! Tensor networks, the Bhattacharya–Mesner product and learned bilinear
//! matrix-multiplication schemes.

pub mod border;
pub mod cli;
pub mod error;
pub mod harness;
pub mod model;
pub mod netgraph;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use model::BilinearScheme;
pub use scalar::{Rational, Scalar};
pub use tensor::Tensor;
