//! Adaptive treatment allocation for sequential A/B experiments with
//! carryover: day-level designs that randomize the first action in proportion
//! to fitted standard deviations, doubly-robust online ATE estimation, exact
//! efficiency-bound oracles, and a replicated benchmark harness.

pub mod basis;
pub mod bench;
pub mod designs;
pub mod env;
pub mod environments;
pub mod error;
pub mod estimation;
pub mod oracle;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
