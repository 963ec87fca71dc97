//! Numerical kernels shared by the physics modules.

pub mod bessel;
pub mod fourier;
pub mod quadrature;
pub mod rng;
pub mod spherical;

pub use bessel::{bessel_j, laurent_exponential_coefficient, log_bessel_i};
pub use fourier::{fourier_coefficients, FourierOptions, FourierSpectrum};
pub use quadrature::{gauss_legendre, integrate, Integral};
