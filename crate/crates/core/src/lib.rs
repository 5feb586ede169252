//! Matrix product states embedded in local unitaries, the loss functions and
//! gradients defined on them, and the machinery for studying how gradient
//! variance scales with system size: Monte-Carlo estimators, closed-form
//! variance bounds, and an exact Haar-moment (Weingarten) oracle for small
//! systems.

pub mod error;
pub mod experiment;
pub mod grad;
pub mod loss;
pub mod mps;
pub mod tensor;
pub mod unitary;
pub mod weingarten;

pub use error::{Error, Result};
pub use tensor::DenseTensor;
