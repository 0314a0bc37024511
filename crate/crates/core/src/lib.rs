//! Phase retrieval workbench.
//!
//! Recovers real images from the magnitudes `y = |Ax|` of Fourier or Gaussian
//! measurements. Provides the measurement operators and a shot-noise model,
//! projection solvers (Gerchberg–Saxton, HIO, RAAR), a small dense network
//! engine with the end-to-end, VAE and conditional-GAN reconstructors,
//! latent-space refinement, and an evaluation harness that registers
//! reconstructions against circular shifts and 180° rotation before scoring.

pub mod classical;
pub mod data;
pub mod error;
pub mod evalreg;
pub mod harness;
pub mod latentopt;
pub mod autonet;
pub mod measurement;
pub mod models;
pub mod numerics;

pub use error::{Error, Result};
