//! Simulation and DSP workbench for Volterra-assisted optical phase conjugation.
//!
//! The crate covers a PM-16QAM WDM transmitter, a Manakov split-step fiber
//! channel with EDFA noise and optical phase conjugation, closed-form
//! first-order Volterra kernels, the VSFE/VAO/DBP/EDC equalizers, the receiver
//! chain, SNR metrics, and a parallel sweep harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod equalizers;
pub mod error;
pub mod fft;
pub mod harness;
pub mod kernels;
pub mod metrics;
pub mod rxdsp;
pub mod waveform;

pub use error::{Error, Result};
