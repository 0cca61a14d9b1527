//! Simultaneous-multislice MRI reconstruction.
//!
//! The crate models SMS acquisition as readout-concatenated SENSE encoding,
//! reconstructs with diffusion posterior sampling (alternating an
//! epsilon-denoiser prior, a k-space data-consistency step and re-noising),
//! and fills the low-frequency band of ACS-free data with GRAPPA kernels fit
//! on a separate single-band calibration scan. A phantom simulator,
//! classical baselines and image-quality metrics round out the toolkit.

pub mod baselines;
pub mod data_io;
pub mod diffusion_prior;
pub mod error;
pub mod fft;
pub mod grappa_lfe;
pub mod metrics;
pub mod roger_sampler;
pub mod simulator;
pub mod sms_operators;
pub mod wavelet;

pub use error::{Error, Result};
