use serde::{Deserialize, Serialize};

use super::gf2::BitMatrix;
use super::peg::{peg, SparseParity};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, Stream};

const MAX_CONSTRUCTION_ATTEMPTS: u64 = 16;
const MAX_UHF_DRAWS: u64 = 64;
const COLUMN_WEIGHT: usize = 3;

/// Dimensions of a wiretap code.
///
/// Each block carries `k_m = k_u − k_r` message bits mixed with `k_r` fresh
/// random bits, LDPC-encoded to `l` bits, and each coded bit is spread over
/// `n_spread` pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeParams {
    pub l: usize,
    pub k_u: usize,
    pub k_r: usize,
    pub n_spread: usize,
    pub seed: u64,
}

impl CodeParams {
    /// l = 1312, N = 830, k_r = 1045, k_u = 1100.
    pub fn nominal() -> Self {
        CodeParams {
            l: 1312,
            k_u: 1100,
            k_r: 1045,
            n_spread: 830,
            seed: 0x51D0_4C0D,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_r > 0 && self.k_r < self.k_u && self.k_u < self.l) {
            return Err(Error::Config(format!(
                "code needs 0 < k_r < k_u < l, got k_r={} k_u={} l={}",
                self.k_r, self.k_u, self.l
            )));
        }
        if self.n_spread == 0 {
            return Err(Error::Config("spreading factor must be >= 1".into()));
        }
        Ok(())
    }

    pub fn k_m(&self) -> usize {
        self.k_u - self.k_r
    }

    /// Pulses per codeword, `N·l`.
    pub fn chips(&self) -> usize {
        self.n_spread * self.l
    }
}

#[derive(Debug, Clone)]
pub struct WiretapCode {
    params: CodeParams,
    attempt: u64,
    parity: SparseParity,
    generator: BitMatrix,
    info_positions: Vec<usize>,
    uhf: BitMatrix,
    uhf_inv: BitMatrix,
}

impl WiretapCode {
    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn k_m(&self) -> usize {
        self.params.k_m()
    }

    pub fn parity(&self) -> &SparseParity {
        &self.parity
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.generator
    }

    pub fn uhf_matrix(&self) -> &BitMatrix {
        &self.uhf
    }

    pub fn uhf_inverse(&self) -> &BitMatrix {
        &self.uhf_inv
    }

    /// Codeword positions that carry `u` verbatim.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// Which PEG draw produced a full-rank parity matrix.
    pub fn construction_attempt(&self) -> u64 {
        self.attempt
    }

    pub fn describe(&self) -> CodeDescription {
        CodeDescription {
            l: self.params.l,
            k_u: self.params.k_u,
            k_r: self.params.k_r,
            n_spread: self.params.n_spread,
            seed: self.params.seed,
            construction_attempt: self.attempt,
            parity_sha256: self.parity.to_dense().checksum(),
            generator_sha256: self.generator.checksum(),
            uhf_sha256: self.uhf.checksum(),
        }
    }
}

/// Builds the code deterministically from `params.seed`.
///
/// The parity-check matrix is a column-weight-3 PEG graph, re-drawn if it is
/// rank deficient. The generator is its systematic complement and the UHF
/// matrix a uniformly random nonsingular `k_u × k_u` matrix.
pub fn build_code(params: CodeParams) -> Result<WiretapCode> {
    params.validate()?;
    let n_checks = params.l - params.k_u;

    let mut built = None;
    for attempt in 0..MAX_CONSTRUCTION_ATTEMPTS {
        let mut rng = derive_rng(params.seed, Stream::CodeConstruction, attempt);
        let parity = peg(n_checks, params.l, COLUMN_WEIGHT, &mut rng);
        if let Some((generator, info_positions)) = systematic_generator(&parity) {
            built = Some((attempt, parity, generator, info_positions));
            break;
        }
    }
    let Some((attempt, parity, generator, info_positions)) = built else {
        return Err(Error::Construction(format!(
            "parity-check matrix rank deficient after {MAX_CONSTRUCTION_ATTEMPTS} draws"
        )));
    };

    let mut rng = derive_rng(params.seed, Stream::CodeConstruction, 1 << 32);
    let mut uhf_pair = None;
    for _ in 0..MAX_UHF_DRAWS {
        let m = BitMatrix::random(params.k_u, params.k_u, &mut rng);
        if let Some(inv) = m.inverse() {
            uhf_pair = Some((m, inv));
            break;
        }
    }
    let Some((uhf, uhf_inv)) = uhf_pair else {
        return Err(Error::Construction(format!(
            "no invertible UHF matrix in {MAX_UHF_DRAWS} draws"
        )));
    };

    Ok(WiretapCode {
        params,
        attempt,
        parity,
        generator,
        info_positions,
        uhf,
        uhf_inv,
    })
}

/// `None` when the parity matrix is not of full row rank.
fn systematic_generator(parity: &SparseParity) -> Option<(BitMatrix, Vec<usize>)> {
    let mut h = parity.to_dense();
    let pivots = h.rref();
    if pivots.len() < parity.n_checks {
        return None;
    }
    let mut is_pivot = vec![false; parity.n_vars];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let info: Vec<usize> = (0..parity.n_vars).filter(|&c| !is_pivot[c]).collect();
    let mut g = BitMatrix::zeros(info.len(), parity.n_vars);
    for (t, &col) in info.iter().enumerate() {
        g.set(t, col, true);
        for (row, &p) in pivots.iter().enumerate() {
            if h.get(row, col) {
                g.set(t, p, true);
            }
        }
    }
    Some((g, info))
}

fn check_len(what: &'static str, expected: usize, bits: &[u8]) -> Result<()> {
    if bits.len() != expected {
        return Err(Error::LengthMismatch {
            what,
            expected,
            got: bits.len(),
        });
    }
    Ok(())
}

/// `u = M·(m ‖ r)` over GF(2).
pub fn uhf_map(m: &[u8], r: &[u8], code: &WiretapCode) -> Result<Vec<u8>> {
    check_len("message bits", code.k_m(), m)?;
    check_len("random bits", code.params.k_r, r)?;
    let joined: Vec<u8> = m.iter().chain(r).copied().collect();
    Ok(code.uhf.mul_vec(&joined))
}

/// Recovers `(m, r)` from `u`.
pub fn uhf_invert(u: &[u8], code: &WiretapCode) -> Result<(Vec<u8>, Vec<u8>)> {
    check_len("hashed vector", code.params.k_u, u)?;
    let mut joined = code.uhf_inv.mul_vec(u);
    let r = joined.split_off(code.k_m());
    Ok((joined, r))
}

/// `v = u·G`.
pub fn ldpc_encode(u: &[u8], code: &WiretapCode) -> Result<Vec<u8>> {
    check_len("LDPC input", code.params.k_u, u)?;
    Ok(code.generator.left_mul(u))
}

/// Reads `u` back off the systematic positions of a codeword.
pub fn extract_info(v: &[u8], code: &WiretapCode) -> Vec<u8> {
    code.info_positions.iter().map(|&i| v[i]).collect()
}

/// `I(A:E) ≤ k_r / (N·l)`: the random bits alone must cover everything Eve
/// can learn per pulse.
pub fn check_security_condition(code: &WiretapCode, i_ae: f64) -> bool {
    i_ae <= random_bit_rate(code)
}

/// `k_r / (N·l)` bits per pulse.
pub fn random_bit_rate(code: &WiretapCode) -> f64 {
    code.params.k_r as f64 / code.params.chips() as f64
}

/// `k_u / (N·l)`, the alternative reading of the condition that counts all
/// information bits.
pub fn total_bit_rate(code: &WiretapCode) -> f64 {
    code.params.k_u as f64 / code.params.chips() as f64
}

/// Plain-text description from which a peer rebuilds the identical code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDescription {
    pub l: usize,
    pub k_u: usize,
    pub k_r: usize,
    pub n_spread: usize,
    pub seed: u64,
    pub construction_attempt: u64,
    pub parity_sha256: String,
    pub generator_sha256: String,
    pub uhf_sha256: String,
}

impl CodeDescription {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn params(&self) -> CodeParams {
        CodeParams {
            l: self.l,
            k_u: self.k_u,
            k_r: self.k_r,
            n_spread: self.n_spread,
            seed: self.seed,
        }
    }

    /// Rebuilds the code and checks every matrix against its checksum.
    pub fn instantiate(&self) -> Result<WiretapCode> {
        let code = build_code(self.params())?;
        let ours = code.describe();
        if ours != *self {
            let field = if ours.construction_attempt != self.construction_attempt {
                "construction_attempt"
            } else if ours.parity_sha256 != self.parity_sha256 {
                "parity_sha256"
            } else if ours.generator_sha256 != self.generator_sha256 {
                "generator_sha256"
            } else {
                "uhf_sha256"
            };
            return Err(Error::CodeDescription(format!(
                "{field} does not match the rebuilt code"
            )));
        }
        Ok(code)
    }
}
