//! Closed-loop spiking Pong: a feed-forward network of leaky
//! integrate-and-fire neurons learns to place a paddle under a bouncing
//! ball, trained online by reward-modulated STDP.
//!
//! The crate is organized bottom-up:
//!
//! - [`snn`]: Poisson encoding, LIF dynamics and trial simulation
//! - [`plasticity`]: eligibility traces, quantized weights, the
//!   three-factor update and the reward baseline
//! - [`pong`]: the game the network plays
//! - [`experiment`]: the closed training loop, evaluation and metrics
//! - [`bench`]: iteration-throughput measurements
//! - [`config`]: one declarative configuration for all of the above
//! - [`report`]: text formats for logs, weights and summaries
//! - [`stats`]: quantiles, rank correlation, permutation tests

pub mod bench;
pub mod config;
pub mod error;
pub mod experiment;
pub mod plasticity;
pub mod pong;
pub mod report;
pub mod snn;
pub mod stats;

pub use error::{Error, Result};
