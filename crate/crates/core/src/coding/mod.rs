//! Concatenated wiretap coding chain.
//!
//! `(m, r)` → UHF mixing → LDPC encoding → spreading over `N` pulses per
//! coded bit; on the receive side, per-bit LLRs from the detected chips feed
//! a belief-propagation decoder, and the inverse UHF recovers `m`.

pub mod bp;
pub mod code;
pub mod gf2;
pub mod lfsr;
pub mod peg;
pub mod spread;

pub use bp::{bp_decode, DecodeOutcome};
pub use code::{
    build_code, check_security_condition, extract_info, ldpc_encode, random_bit_rate, total_bit_rate, uhf_invert,
    uhf_map, CodeDescription, CodeParams, WiretapCode,
};
pub use spread::{compute_llrs, keystream, spread, ChipFrame, LlrVector};
