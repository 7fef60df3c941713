//! Monaural sound-source localization.
//!
//! A single microphone inside a scattering structure hears every direction
//! through a different spectral filter. This crate provides the pieces needed
//! to exploit that:
//!
//! * [`signal`]: convolution, noise injection, STFT and magnitude spectrograms.
//! * [`scatter`]: directional response sets ("devices"), synthetic generators,
//!   band selection and the on-disk container format.
//! * [`simulate`]: synthetic sources and noisy multi-source mixtures.
//! * [`whiteloc`]: exhaustive subspace localization of white sources.
//! * [`nmf`]: group-sparse NMF with multiplicative updates and dictionary learning.
//! * [`doa`]: end-to-end direction estimation by NMF, with multiresolution refinement.
//! * [`eval`]: circular error metrics, bin accuracy and confusion matrices.
//! * [`experiment`]: trial runners shared by the CLI and the acceptance suite.

pub mod container;
pub mod doa;
mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod nmf;
pub mod scatter;
pub mod signal;
pub mod simulate;
pub mod whiteloc;

pub use error::{Error, Result};
pub use exec::Exec;
