//! Dense tensors, seeded random streams, the orthonormal 2-D DFT and circular
//! cross-correlation.

mod fourier;
mod rng;
mod tensor;

pub use fourier::{
    circular_cross_correlate, circular_cross_correlate_direct, dft2, dft2_complex, dft2_direct,
    idft2, idft2_direct, Fft2,
};
pub use rng::{sample_standard_normal, RandomStream};
pub use tensor::{circular_shift, point_reflect, ComplexTensor, Tensor};
