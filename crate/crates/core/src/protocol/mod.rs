//! The two-party protocol: Bob's preparation, Alice's check and gate, the
//! coded return trip, and Bob's decoding, looped over message blocks.

pub mod config;
pub mod engine;
pub mod session;

pub use config::{LinkParams, ProtocolConfig};
pub use engine::{
    alice_encode_block, alice_sample_check, bob_decode_block, bob_estimate_errors, bob_prepare_block, forward_link,
    gate_on_capacity, CheckDisclosure, CheckEstimate, DecodePolicy, ErrorTally, ForwardCheckRecord, GateDecision,
    PreparationRecord,
};
pub use session::{
    bits_to_bytes, bytes_to_bits, run_block, run_session, AbortCause, BlockRecord, BlockStatus, SessionOutcome,
    SessionReport, SessionSummary, SessionTranscript,
};
