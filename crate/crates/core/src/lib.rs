//! Stokes waves in conformal variables: Babenko-equation solver, spectra of
//! the linearized Babenko operator and Fourier-Floquet-Hill stability
//! spectra, all matrix-free on FFT-backed operators.

pub mod babenko;
pub mod error;
pub mod krylov;
pub mod spectral;
pub mod stability;
pub mod stokes;

pub use error::{KrylovError, SpectralError, SpectrumError, StabilityError, StokesError};
pub use spectral::C64;
