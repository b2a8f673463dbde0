use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::ProtocolConfig;
use super::engine::{
    alice_encode_block, alice_sample_check, bob_decode_block, bob_estimate_errors, bob_prepare_block, forward_link,
    gate_on_capacity, shared_gate_inputs, DecodeAbort, ErrorTally, GateAbort, GateDecision,
};
use crate::attack::AttackModel;
use crate::coding::{check_security_condition, random_bit_rate, WiretapCode};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, Stream};
use crate::security::secrecy_at_half;
use crate::state::transmit_train;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortCause {
    ChannelOutage,
    /// A basis bucket of the check sample was empty.
    EstimateUndefined,
    CapacityGate,
    CodeCondition,
    GateDisagreement,
    InsufficientPulses,
    DecoderFailure,
    ThresholdExceeded,
}

impl AbortCause {
    /// Causes that end the session at once rather than retrying the chunk.
    pub fn is_terminal(self) -> bool {
        !matches!(
            self,
            AbortCause::ChannelOutage | AbortCause::InsufficientPulses | AbortCause::DecoderFailure
        )
    }

    /// Causes raised by the security checks rather than by the channel.
    pub fn is_security(self) -> bool {
        matches!(
            self,
            AbortCause::EstimateUndefined
                | AbortCause::CapacityGate
                | AbortCause::CodeCondition
                | AbortCause::GateDisagreement
                | AbortCause::ThresholdExceeded
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BlockStatus {
    Delivered,
    Retry { cause: AbortCause },
    Aborted { cause: AbortCause },
}

/// One line of the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block_index: u64,
    /// Message chunk this block carried.
    pub chunk: usize,
    pub attempt: usize,
    pub pulses: usize,
    /// Pulses that reached Alice.
    pub received: usize,
    /// Check measurements Alice disclosed.
    pub checked: usize,
    pub n_x: usize,
    pub n_z: usize,
    pub e_x: Option<f64>,
    pub e_z: Option<f64>,
    pub q_bob_est: Option<f64>,
    /// `e` the gate used.
    pub e_gate: Option<f64>,
    pub gate: Option<GateDecision>,
    pub forward_checks: usize,
    /// This block's own forward error estimate.
    pub e: Option<f64>,
    /// Pooled estimate used for the LLRs.
    pub e_used: Option<f64>,
    pub detections: usize,
    pub bp_iterations: Option<usize>,
    pub eve_attacked: usize,
    pub eve_info_bound: Option<f64>,
    pub status: BlockStatus,
    pub message_bits: usize,
}

impl BlockRecord {
    fn new(block_index: u64, chunk: usize, attempt: usize, pulses: usize) -> Self {
        BlockRecord {
            block_index,
            chunk,
            attempt,
            pulses,
            received: 0,
            checked: 0,
            n_x: 0,
            n_z: 0,
            e_x: None,
            e_z: None,
            q_bob_est: None,
            e_gate: None,
            gate: None,
            forward_checks: 0,
            e: None,
            e_used: None,
            detections: 0,
            bp_iterations: None,
            eve_attacked: 0,
            eve_info_bound: None,
            status: BlockStatus::Delivered,
            message_bits: 0,
        }
    }
}

/// Everything one block produced.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    pub record: BlockRecord,
    /// Decoded message bits, or why the block failed.
    pub outcome: std::result::Result<Vec<u8>, AbortCause>,
    /// Forward check bits this block contributed.
    pub tally: ErrorTally,
}

/// Runs the four protocol steps for one block carrying `m` (`k_m` bits).
/// The record's status is left as `Delivered` or `Aborted`; sessions turn
/// non-terminal failures into retries.
pub fn run_block(
    cfg: &ProtocolConfig,
    code: &WiretapCode,
    attack: &AttackModel,
    block_index: u64,
    m: &[u8],
    tally: &ErrorTally,
) -> Result<BlockResult> {
    let seed = cfg.seed;
    let mut bob_rng = derive_rng(seed, Stream::Bob, block_index);
    let mut alice_rng = derive_rng(seed, Stream::Alice, block_index);
    let mut fwd_rng = derive_rng(seed, Stream::ForwardChannel, block_index);
    let mut back_rng = derive_rng(seed, Stream::BackwardChannel, block_index);
    let mut eve_rng = derive_rng(seed, Stream::Eve, block_index);
    let (design_rp, _) = cfg.design_point()?;

    let mut rec = BlockRecord::new(block_index, 0, 0, cfg.block_pulses);
    let abort = |mut rec: BlockRecord, cause: AbortCause, tally: ErrorTally| {
        rec.status = BlockStatus::Aborted { cause };
        Ok(BlockResult {
            record: rec,
            outcome: Err(cause),
            tally,
        })
    };

    // Step 1: Bob sends a fresh block.
    let (train, prep) = bob_prepare_block(cfg.block_pulses, &mut bob_rng)?;
    let (received, eve) = forward_link(
        &train,
        &cfg.channel.forward,
        attack,
        &design_rp,
        &mut fwd_rng,
        &mut eve_rng,
    )?;
    drop(train);
    rec.received = received.iter().filter(|q| q.is_some()).count();
    rec.eve_attacked = eve.attacked;
    rec.eve_info_bound = eve.info_bound;

    // Step 2: sampling check and the capacity gate.
    let disclosure = match alice_sample_check(&received, cfg.check_fraction, &cfg.channel.forward, &mut alice_rng) {
        Ok(d) => d,
        Err(Error::ChannelOutage) => return abort(rec, AbortCause::ChannelOutage, ErrorTally::default()),
        Err(e) => return Err(e),
    };
    rec.checked = disclosure.len();
    let estimate = bob_estimate_errors(&disclosure, &prep)?;
    rec.n_x = estimate.n_x;
    rec.n_z = estimate.n_z;
    rec.e_x = estimate.e_x();
    rec.e_z = estimate.e_z();

    let e_gate = if tally.checks > 0 {
        tally.estimate()
    } else {
        cfg.e_prior
    };
    rec.e_gate = Some(e_gate);
    let Some((rates, q_bob)) = shared_gate_inputs(&disclosure, &estimate, e_gate, cfg.g(), cfg.hoeffding_confidence)
    else {
        return abort(rec, AbortCause::EstimateUndefined, ErrorTally::default());
    };
    rec.q_bob_est = Some(q_bob);
    let code_check = cfg.enforce_code_condition_per_block.then_some(code);
    // Each party evaluates the gate from the shared disclosure.
    let bob_gate = gate_on_capacity(&rates, q_bob, cfg.g(), cfg.abort_threshold_capacity, code_check);
    let alice_gate = gate_on_capacity(&rates, q_bob, cfg.g(), cfg.abort_threshold_capacity, code_check);
    rec.gate = Some(bob_gate);
    if bob_gate != alice_gate {
        return abort(rec, AbortCause::GateDisagreement, ErrorTally::default());
    }
    if let GateDecision::Abort { reason, .. } = bob_gate {
        let cause = match reason {
            GateAbort::Capacity => AbortCause::CapacityGate,
            GateAbort::CodeCondition => AbortCause::CodeCondition,
        };
        return abort(rec, cause, ErrorTally::default());
    }

    // Step 3: Alice encodes onto the unchecked pulses.
    let (returned, forward_checks) = match alice_encode_block(
        m,
        code,
        &received,
        &disclosure,
        cfg.forward_check_fraction,
        block_index,
        &mut alice_rng,
    ) {
        Ok(x) => x,
        Err(Error::InsufficientPulses { .. }) => {
            return abort(rec, AbortCause::InsufficientPulses, ErrorTally::default())
        }
        Err(e) => return Err(e),
    };
    drop(received);
    let arrived = transmit_train(&returned, &cfg.channel.backward, &mut back_rng);
    drop(returned);

    // Step 4: Bob decodes.
    let decoded = bob_decode_block(
        &arrived,
        &prep,
        code,
        &disclosure,
        &forward_checks,
        tally,
        &cfg.decode_policy(),
        block_index,
        &mut bob_rng,
    )?;
    rec.forward_checks = decoded.block_tally.checks;
    rec.e = decoded.e_block();
    rec.e_used = Some(decoded.e_used);
    rec.detections = decoded.detections;
    match decoded.message {
        Ok(bits) => {
            rec.bp_iterations = Some(decoded.iterations);
            rec.message_bits = bits.len();
            Ok(BlockResult {
                record: rec,
                outcome: Ok(bits),
                tally: decoded.block_tally,
            })
        }
        Err(DecodeAbort::DecoderFailure) => {
            rec.bp_iterations = Some(decoded.iterations);
            abort(rec, AbortCause::DecoderFailure, decoded.block_tally)
        }
        Err(DecodeAbort::ThresholdExceeded) => abort(rec, AbortCause::ThresholdExceeded, decoded.block_tally),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SessionOutcome {
    Completed,
    /// `block_index` is absent when the session stopped before any block.
    Aborted {
        block_index: Option<u64>,
        cause: AbortCause,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub outcome: SessionOutcome,
    pub message_bytes: usize,
    pub delivered_bytes: usize,
    pub blocks: usize,
    pub total_pulses: u64,
    pub delivered_bits: u64,
    /// Delivered message bits per emitted pulse, times the repetition rate.
    pub throughput_bps: f64,
    /// `k_m / block_pulses × rate`, one chunk per block with no retries.
    pub nominal_block_bps: f64,
    /// `k_r / (N·l) × rate`.
    pub random_bit_rate_bps: f64,
    /// `I(A:E)` at the design point, and the code's `k_r / (N·l)`.
    pub design_i_ae: f64,
    pub code_random_bit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TranscriptLine {
    Block(BlockRecord),
    Summary(SessionSummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub blocks: Vec<BlockRecord>,
    pub summary: SessionSummary,
}

impl SessionTranscript {
    /// One JSON object per line: every block, then the summary.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for b in &self.blocks {
            serde_json::to_writer(&mut w, &TranscriptLine::Block(b.clone()))?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &TranscriptLine::Summary(self.summary.clone()))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut summary = None;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line)? {
                TranscriptLine::Block(b) => blocks.push(b),
                TranscriptLine::Summary(s) => summary = Some(s),
            }
        }
        let summary = summary.ok_or_else(|| Error::Config("transcript has no summary line".into()))?;
        Ok(SessionTranscript { blocks, summary })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub transcript: SessionTranscript,
    /// Bytes Bob recovered, possibly fewer than sent after an abort.
    pub delivered: Vec<u8>,
}

impl SessionReport {
    pub fn outcome(&self) -> SessionOutcome {
        self.transcript.summary.outcome
    }
}

/// Bits of `bytes`, most significant first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Packs bits most significant first; a trailing partial byte is dropped.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks_exact(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect()
}

/// Sends `message` block by block until it is delivered or a terminal abort.
pub fn run_session(
    cfg: &ProtocolConfig,
    code: &WiretapCode,
    message: &[u8],
    attack: &AttackModel,
) -> Result<SessionReport> {
    cfg.validate()?;
    attack.validate()?;
    if *code.params() != cfg.code {
        return Err(Error::Config(
            "code does not match the configured code parameters".into(),
        ));
    }
    let k_m = code.k_m();
    let (rp, design_rates) = cfg.design_point()?;
    let design_i_ae = secrecy_at_half(&rp, &design_rates)?.i_ae;

    let bits = bytes_to_bits(message);
    let mut delivered_bits: Vec<u8> = Vec::with_capacity(bits.len());
    let mut blocks = Vec::new();
    let mut tally = ErrorTally::default();
    let mut block_index = 0u64;
    let mut outcome = SessionOutcome::Completed;

    if !check_security_condition(code, design_i_ae) {
        outcome = SessionOutcome::Aborted {
            block_index: None,
            cause: AbortCause::CodeCondition,
        };
    } else {
        'chunks: for (chunk, part) in bits.chunks(k_m).enumerate() {
            let mut m = part.to_vec();
            m.resize(k_m, 0);
            for attempt in 0..=cfg.max_block_retries {
                let mut result = run_block(cfg, code, attack, block_index, &m, &tally)?;
                tally = tally.add(&result.tally);
                result.record.chunk = chunk;
                result.record.attempt = attempt;
                block_index += 1;
                match result.outcome {
                    Ok(decoded) => {
                        delivered_bits.extend_from_slice(&decoded[..part.len()]);
                        result.record.message_bits = part.len();
                        blocks.push(result.record);
                        continue 'chunks;
                    }
                    Err(cause) if !cause.is_terminal() && attempt < cfg.max_block_retries => {
                        result.record.status = BlockStatus::Retry { cause };
                        blocks.push(result.record);
                    }
                    Err(cause) => {
                        outcome = SessionOutcome::Aborted {
                            block_index: Some(result.record.block_index),
                            cause,
                        };
                        blocks.push(result.record);
                        break 'chunks;
                    }
                }
            }
        }
    }

    let delivered = bits_to_bytes(&delivered_bits);
    let total_pulses = blocks.len() as u64 * cfg.block_pulses as u64;
    let throughput_bps = if total_pulses == 0 {
        0.0
    } else {
        delivered_bits.len() as f64 / total_pulses as f64 * cfg.repetition_rate
    };
    let summary = SessionSummary {
        outcome,
        message_bytes: message.len(),
        delivered_bytes: delivered.len(),
        blocks: blocks.len(),
        total_pulses,
        delivered_bits: delivered_bits.len() as u64,
        throughput_bps,
        nominal_block_bps: k_m as f64 / cfg.block_pulses as f64 * cfg.repetition_rate,
        random_bit_rate_bps: random_bit_rate(code) * cfg.repetition_rate,
        design_i_ae,
        code_random_bit_rate: random_bit_rate(code),
    };
    Ok(SessionReport {
        transcript: SessionTranscript { blocks, summary },
        delivered,
    })
}
