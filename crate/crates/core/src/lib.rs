//! Pressure-mat infant movement classification.
//!
//! The pipeline turns 500-frame recordings of a 32×32 pressure grid into six
//! normalized motion signals (center of pressure and mean pressure for the
//! upper and lower body), derives statistical features from them, and trains
//! one of four classifier families (kernel SVM, feed-forward, 1-D CNN, LSTM)
//! to separate FM+ from FM− snippets. Evaluation uses infant-grouped 5-fold
//! cross-validation with per-fold model selection.
//!
//! Module map:
//!
//! * [`data`]: snippet/dataset model, the canonical `PMAT` binary format,
//!   JSON manifests, CSV import and a synthetic snippet generator.
//! * [`encoding`]: crop, region split, center of pressure, smoothing and
//!   min–max normalization.
//! * [`features`]: the 12/24-value statistical feature vectors.
//! * [`nn`]: a small layer engine with exact gradients, Adam and early stopping.
//! * [`models`]: the architecture catalog, the SMO-trained kernel SVM and
//!   per-fold model selection.
//! * [`eval`]: grouped folds, confusion metrics, confidence intervals,
//!   t-tests, the cross-validation driver and report rendering.
//! * [`par`]: data-parallel helpers with a sequential fallback.
//! * [`selftest`]: the embedded verification battery used by the CLI.

pub mod data;
pub mod encoding;
mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod nn;
pub mod par;
pub mod selftest;

pub use error::{Error, Result};
