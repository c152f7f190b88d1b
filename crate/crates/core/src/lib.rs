//! Deep Q-learning intrusion detection over the NSL-KDD dataset.
//!
//! The crate is split along the pipeline:
//!
//! - [`data`]: parse NSL-KDD CSV rows, map attack names to the five traffic
//!   classes, fit min-max statistics and encode records into `[0, 1]` matrices.
//! - [`nn`]: a small fully connected ReLU network used as the Q-function, with
//!   hand-written backpropagation, Adam/SGD updates and a binary checkpoint format.
//! - [`agent`]: the batch-as-state training loop with epsilon-greedy exploration.
//! - [`eval`]: confusion matrices and per-class / macro metrics.

pub mod agent;
pub mod data;
pub mod eval;
pub mod nn;

mod binio;

pub use agent::{HyperParams, TrainingHistory};
pub use data::{ClassLabel, EncodedDataset, NormalizationStats, RawRecord};
pub use eval::{ConfusionMatrix, MetricsReport};
pub use nn::QNetwork;
