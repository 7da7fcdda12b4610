//! Roto-translation wavelet scattering.

pub mod error;
pub mod filterbank;
pub(crate) mod fourier;
pub mod image;

pub use error::{Error, Result};
pub use fourier::rot90_ccw;
pub mod scattering;
pub mod features;
pub mod classifier;
pub mod datasets;
pub mod formats;
pub mod pipeline;
pub mod validation;
