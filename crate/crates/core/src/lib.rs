//! Score-level fusion of fake-audio-detection (FAD) scores guided by
//! predicted speech quality (MOS).
//!
//! The crate covers the whole experimental loop:
//!
//! - [`data`]: per-utterance score records and their JSONL/CSV formats
//! - [`filter`]: MOS quantization and MOS-band training-data selection
//! - [`fusion`]: MLP, Gated MLP, MOS fuser and the MOS threshold override
//! - [`gbdt`]: leaf-wise histogram gradient boosting
//! - [`train`]: SGD training with early stopping, gradient checking
//! - [`metrics`]: EER, AUC, paired bootstrap, relative reduction
//! - [`synth`]: a synthetic corpus with a Bayes-optimal reference scorer
//! - [`experiment`]: the fusion benchmark that ties them together
//!
//! Scores are oriented so that higher means "more likely bona fide".

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod fusion;
pub mod gbdt;
pub mod metrics;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
