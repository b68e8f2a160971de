//! Allocation-only building blocks for multi-sensor late-fusion UAV
//! classification: dense tensors and layer kernels, synthetic per-sensor
//! feature maps, temporal registration of the modality streams, the fusion
//! network with its training loop, and binary classification metrics.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, configuration
//! and the command-line front end live in the `uavfusion` crate.
#![no_std]
#![deny(unused_must_use, rust_2018_idioms)]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod registration;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use data::{DetectionSample, Label, ModalityId, ModalitySet, Recording, ShapeProfile};
pub use error::{Error, Result};
pub use metrics::{ClassificationReport, ConfusionMatrix, RocCurve};
pub use model::{Model, ModelSpec};
pub use registration::{FusedDataset, FusedSample, MatchConfig};
pub use rng::Rng;
pub use synth::SynthConfig;
pub use tensor::{Scalar, Tensor};
pub use train::{TrainConfig, TrainReport};
