//! Gaussian-kernel SVM classification.

pub mod kernel;
pub mod model;
pub mod smo;

pub use kernel::{estimate_bandwidth, gaussian_kernel, BandwidthRule, KernelRows};
pub use model::{accuracy, argmax, decision_values, predict, train, KernelModel, SvmParams};
pub use smo::{solve_binary, SmoParams, SmoSolution};
