//! Pseudo-random spreading of coded bits over many pulses, and the
//! log-likelihood ratios Bob recovers from the few that reach him.

use serde::{Deserialize, Serialize};

use super::code::WiretapCode;
use super::lfsr::Lfsr32;
use crate::error::{domain, Error, Result};
use crate::rng::mix64;

/// Saturation for channel and decoder messages.
pub const LLR_CLAMP: f64 = 30.0;

/// Keystream chips `c(i, j)` for one block, laid out as `i·N + j`.
pub fn keystream(code: &WiretapCode, block_index: u64) -> Vec<u8> {
    let p = code.params();
    let seed = mix64(mix64(p.seed ^ 0x5EED_5EED) ^ block_index);
    let mut lfsr = Lfsr32::new((seed ^ (seed >> 32)) as u32);
    let mut out = vec![0u8; p.chips()];
    lfsr.fill(&mut out);
    out
}

/// `chip(i·N + j) = c(i, j) ⊕ v(i)`.
pub fn spread(v: &[u8], code: &WiretapCode, block_index: u64) -> Result<Vec<u8>> {
    let p = code.params();
    if v.len() != p.l {
        return Err(Error::LengthMismatch {
            what: "codeword",
            expected: p.l,
            got: v.len(),
        });
    }
    let mut chips = keystream(code, block_index);
    for (slice, &bit) in chips.chunks_mut(p.n_spread).zip(v) {
        if bit & 1 == 1 {
            slice.iter_mut().for_each(|c| *c ^= 1);
        }
    }
    Ok(chips)
}

/// Chips as Bob sees them: values are meaningful only where `detected`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChipFrame {
    pub chips: Vec<u8>,
    pub detected: Vec<bool>,
}

impl ChipFrame {
    pub fn new(chips: Vec<u8>, detected: Vec<bool>) -> Result<Self> {
        if chips.len() != detected.len() {
            return Err(Error::LengthMismatch {
                what: "detection mask",
                expected: chips.len(),
                got: detected.len(),
            });
        }
        Ok(ChipFrame { chips, detected })
    }

    /// Every chip detected.
    pub fn full(chips: Vec<u8>) -> Self {
        let detected = vec![true; chips.len()];
        ChipFrame { chips, detected }
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn detections(&self) -> usize {
        self.detected.iter().filter(|&&d| d).count()
    }
}

/// Per-coded-bit LLRs; positive favours 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlrVector {
    pub values: Vec<f64>,
}

impl LlrVector {
    pub fn hard_decision(&self) -> Vec<u8> {
        self.values.iter().map(|&x| (x < 0.0) as u8).collect()
    }
}

/// `LLR(i) = Σ_j∈detected (−1)^(y(i,j) ⊕ c(i,j)) · ln((1−e)/e)`.
pub fn compute_llrs(frame: &ChipFrame, e: f64, code: &WiretapCode, block_index: u64) -> Result<LlrVector> {
    if !(e > 0.0 && e < 0.5) {
        return Err(domain(format!("LLR error rate must lie in (0, 0.5), got {e}")));
    }
    let p = code.params();
    if frame.len() != p.chips() {
        return Err(Error::LengthMismatch {
            what: "chip frame",
            expected: p.chips(),
            got: frame.len(),
        });
    }
    let weight = ((1.0 - e) / e).ln();
    let ks = keystream(code, block_index);
    let n = p.n_spread;
    let values = (0..p.l)
        .map(|i| {
            let range = i * n..(i + 1) * n;
            let mut votes: i64 = 0;
            for ((&y, &c), &d) in frame.chips[range.clone()]
                .iter()
                .zip(&ks[range.clone()])
                .zip(&frame.detected[range])
            {
                if d {
                    votes += if (y ^ c) & 1 == 0 { 1 } else { -1 };
                }
            }
            votes as f64 * weight
        })
        .collect();
    Ok(LlrVector { values })
}
