//! Convolutional network engine and pipeline pieces for three-class
//! (normal / benign / malignant) mammogram classification.
//!
//! The numerical core is generic over the floating-point type through
//! [`Scalar`]; the pipeline runs in `f64` and the aliases below name the
//! concrete types it uses.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod network;
pub mod preprocess;
pub mod scalar;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Class labels in output-unit order.
pub const CLASS_NAMES: [&str; 3] = ["normal", "benign", "malignant"];

pub type Tensor = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type NetworkModel = network::NetworkModel<f64>;
pub type NetworkModel32 = network::NetworkModel<f32>;
pub type GradientSet = network::GradientSet<f64>;
pub type AdamState = training::AdamState<f64>;
pub type Checkpoint = training::Checkpoint<f64>;
pub type Sample = training::Sample<f64>;
pub type LabeledSet = training::LabeledSet<f64>;
