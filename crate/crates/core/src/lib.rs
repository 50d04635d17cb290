//! Winnow error reconciliation for quantum key distribution.
//!
//! The crate is organised bottom-up:
//!
//! - [`hamming`]: the Hamming(2^m - 1) syndrome codec used inside each Winnow block.
//! - [`analysis`]: exact combinatorics of how one Winnow pass changes the error
//!   count of a block, with brute-force oracles.
//! - [`efficiency`]: the binomial-ensemble pass model (fraction of key kept and
//!   post-pass error rate) and its iteration over a schedule.
//! - [`protocol`]: two-party Winnow and BINARY state machines over an in-memory
//!   channel, with a leaked-bit ledger and a framed wire format.
//! - [`simulator`]: Monte Carlo harness driving complete sessions.
//! - [`planner`]: p0 estimation, secure-yield models and schedule search.
//! - [`cli`]: the `winnow` command-line front end.

pub mod analysis;
pub mod cli;
pub mod efficiency;
mod error;
pub mod hamming;
pub mod planner;
pub mod protocol;
pub mod schedule;
pub mod simulator;

pub use error::{Error, Result};
pub use hamming::{BitBlock, HammingParams, Syndrome};
pub use schedule::Schedule;
