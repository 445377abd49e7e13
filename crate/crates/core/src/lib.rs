//! Acceleration-guided acoustic signal denoising with a learnable fast
//! wavelet transform, plus the feature extraction and SVM classification
//! used to evaluate it.
//!
//! Module map:
//! - [`signal`]: signals, manifests, band splitting, padding, decibels
//! - [`wavelet`]: db4, QMF, circular FDWT cascade and its inverse, WPT
//! - [`despawn`]: learnable kernels and hard-threshold gates
//! - [`training`]: losses, hand-written gradients, Adam, training drivers
//! - [`features`]: feature vectors, STFT bands, standardization
//! - [`svm`]: one-vs-one RBF SVM (SMO), cross-validation, evaluation
//! - [`synthgen`]: seeded synthetic paired-signal generator
//! - [`experiments`]: evaluation protocols on a dataset

pub mod despawn;
pub mod error;
pub mod experiments;
pub mod features;
pub mod signal;
pub mod svm;
pub mod synthgen;
pub mod training;
pub mod wavelet;

pub use error::{Error, Result};
