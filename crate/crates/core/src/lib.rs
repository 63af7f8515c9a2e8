//! Decode-time text watermarking bench.
//!
//! The crate bundles everything needed to embed, detect, attack, and score
//! green/red-list watermarks on top of a small deterministic n-gram language
//! model:
//!
//! * [`lm`] — tokenizer, Laplace-smoothed backoff n-gram model, sampling.
//! * [`watermark`] — vocabulary partition functions and the UNIW / KGW / BW
//!   embedders.
//! * [`detect`] — green-token counting, z-statistic, AUCROC and TPR@FPR.
//! * [`attack`] — token-perturbation scrubbers and the STEAL spoofing attack.
//! * [`cefw`] — metric normalization and the weighted five-characteristic
//!   comprehensive score.
//! * [`run`] — run configuration, manifest, and the pipeline stages behind
//!   the CLI.

pub mod attack;
pub mod cefw;
pub mod corpus;
pub mod detect;
pub mod error;
mod hashing;
pub mod lm;
pub mod plot;
pub mod rng;
pub mod run;
pub mod watermark;

pub use error::{Error, Result};
