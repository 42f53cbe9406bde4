//! Constrained decoding with speculative lookaheads, the decoders it is
//! measured against, and the call-level cost model used to compare them.
//!
//! Module map:
//!
//! - [`lm`]: vocabulary, distributions, the model trait and the call ledger
//! - [`models`]: scripted tables and add-k n-gram models
//! - [`rewards`]: concept coverage and blocklist rewards
//! - [`verify`]: hard rejection and speculative-sampling verification
//! - [`decode`]: greedy, nucleus, beam, speculative, CDLH, CDLH-appx and CDSL
//! - [`metrics`]: runtime per token, speedup and constraint satisfaction

pub mod decode;
pub mod error;
pub mod lm;
pub mod metrics;
pub mod models;
pub mod rewards;
pub mod verify;

pub use error::{Error, Result};
