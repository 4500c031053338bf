//! Causally-aware beam codebook learning for massive-MIMO joint communication
//! and sensing.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithmic piece:
//! a small dense network engine, the array/beam math, synthetic scene and
//! channel generation, channel clustering and cluster-to-agent assignment,
//! the beam-learning environment, the DDPG / TD3 / TD3-INVASE agents, and the
//! pipelines that assemble a codebook. File formats, the CLI and threading live
//! in the `jcas` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod agents;
pub mod clustering;
pub mod env;
mod error;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod radio;
pub mod scenario;

pub use error::{Error, Result};
