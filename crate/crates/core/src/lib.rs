//! Shape-routed cortex networks.
//!
//! Samples are grouped by the shapes of their input and output tensors into
//! association areas. Each area trains a general base network, then
//! *reflects*: the samples it gets wrong are clustered with k-means, one
//! specialist network is trained per cluster, and a gain-ratio decision tree
//! learns to route inputs to the network that should answer them.
//!
//! The crate is `no_std` and only needs an allocator. File IO, configuration
//! and serialization containers live in the `crtx` companion crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod clustering;
pub mod cortex;
pub mod data;
pub mod nets;
pub mod rng;
pub mod tensor;
pub mod theory;
pub mod tree;

pub use cortex::{
    AreaConfig, AssociationArea, CortexError, CortexModel, LabeledDataset, ReflectionParams, SenseKey, TaskKind,
};
pub use nets::{BaseNetwork, NetworkConfig, TrainParams};
pub use tensor::{Shape, Tensor, TensorError};
