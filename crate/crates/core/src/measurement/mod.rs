//! Magnitude measurements `y = |Ax|` for Fourier and Gaussian `A`, the
//! Poisson shot-noise model and the SNR meter.

mod noise;
mod operator;

pub use noise::{sample_poisson, shot_noise, snr, NoiseConfig, SnrReport, POISSON_EXACT_LIMIT};
pub use operator::{zero_pad, MeasurementOperator, OperatorDescriptor, Pullback};
