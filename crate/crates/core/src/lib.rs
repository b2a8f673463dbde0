//! Simulation and analysis toolkit for practical DL04 quantum secure direct
//! communication.
//!
//! Bob prepares single qubits in the four BB84 states and sends them to
//! Alice. Alice spends a random subset on eavesdropping checks, estimates the
//! wiretap secrecy capacity of the link, and, if it is positive, encodes a
//! message block onto the remaining qubits with the identity / `Y` operations
//! before returning them. Bob measures each returned qubit in the basis he
//! prepared it in.
//!
//! The crate is split along the same lines:
//!
//! - [`state`]: the four-state qubit model, Alice's encoding and the lossy,
//!   noisy channel.
//! - [`security`]: closed-form wiretap bounds and the Gram-matrix analysis of
//!   the optimal collective attack.
//! - [`coding`]: universal-hash preprocessing, LDPC encoding, pseudo-random
//!   spreading, LLR computation and belief-propagation decoding.
//! - [`protocol`]: the two-party block protocol and session driver.
//! - [`attack`] and [`experiments`]: eavesdropper models and the experiment
//!   harness behind the `qsdc-sim` command line tool.

pub mod attack;
pub mod coding;
mod error;
pub mod experiments;
pub mod protocol;
pub mod rng;
pub mod security;
pub mod state;

pub use error::{Error, Result};
