//! The four-state qubit model.
//!
//! Every operation in the protocol maps the set {|0⟩, |1⟩, |+⟩, |−⟩} onto
//! itself up to a global phase, so states are a plain enumeration rather
//! than amplitude vectors. Phases such as `Y|1⟩ = −|0⟩` are dropped; no
//! measurement in the protocol can see them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            Basis::X
        } else {
            Basis::Z
        }
    }
}

/// One of the four BB84 states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum QubitState {
    /// |0⟩
    Z0 = 0,
    /// |1⟩
    Z1 = 1,
    /// |+⟩
    Xp = 2,
    /// |−⟩
    Xm = 3,
}

impl QubitState {
    pub const ALL: [QubitState; 4] = [QubitState::Z0, QubitState::Z1, QubitState::Xp, QubitState::Xm];

    pub fn from_index(i: u8) -> Self {
        Self::ALL[(i & 3) as usize]
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    /// The basis this state is an eigenstate of.
    pub fn basis(self) -> Basis {
        match self {
            QubitState::Z0 | QubitState::Z1 => Basis::Z,
            QubitState::Xp | QubitState::Xm => Basis::X,
        }
    }

    /// Bit value carried by the state in its own basis (|0⟩,|+⟩ ↦ 0).
    pub fn bit(self) -> u8 {
        self as u8 & 1
    }

    pub fn eigenstate(basis: Basis, bit: u8) -> Self {
        match (basis, bit & 1) {
            (Basis::Z, 0) => QubitState::Z0,
            (Basis::Z, _) => QubitState::Z1,
            (Basis::X, 0) => QubitState::Xp,
            (Basis::X, _) => QubitState::Xm,
        }
    }

    /// The orthogonal state in the same basis.
    pub fn flipped(self) -> Self {
        Self::from_index(self as u8 ^ 1)
    }
}

/// Bob's private record of one prepared pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedQubit {
    pub index: usize,
    pub state: QubitState,
    pub basis: Basis,
}

impl PreparedQubit {
    pub fn new(index: usize, state: QubitState) -> Self {
        PreparedQubit {
            index,
            state,
            basis: state.basis(),
        }
    }
}

/// Alice's coding operation: `I` carries a 0, `Y = |1⟩⟨0| − |0⟩⟨1|` a 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodeOp {
    I,
    Y,
}

impl EncodeOp {
    pub fn from_bit(bit: u8) -> Self {
        if bit & 1 == 0 {
            EncodeOp::I
        } else {
            EncodeOp::Y
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            EncodeOp::I => 0,
            EncodeOp::Y => 1,
        }
    }
}

/// A lossy binary symmetric channel: erasure with probability
/// `1 − 10^(−loss_db/10)`, then a bit flip within the basis with
/// probability `flip_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub loss_db: f64,
    pub flip_prob: f64,
}

impl ChannelParams {
    pub fn new(loss_db: f64, flip_prob: f64) -> Result<Self> {
        let ch = ChannelParams { loss_db, flip_prob };
        ch.validate()?;
        Ok(ch)
    }

    pub fn ideal() -> Self {
        ChannelParams {
            loss_db: 0.0,
            flip_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss_db.is_finite() && self.loss_db >= 0.0) {
            return Err(domain(format!("loss_db must be finite and >= 0, got {}", self.loss_db)));
        }
        if !(0.0..=0.5).contains(&self.flip_prob) {
            return Err(domain(format!(
                "flip_prob must lie in [0, 0.5], got {}",
                self.flip_prob
            )));
        }
        Ok(())
    }

    pub fn survival(&self) -> f64 {
        survival_from_db(self.loss_db)
    }

    /// Two channels back to back.
    pub fn then(&self, next: &ChannelParams) -> ChannelParams {
        let (a, b) = (self.flip_prob, next.flip_prob);
        ChannelParams {
            loss_db: self.loss_db + next.loss_db,
            flip_prob: a + b - 2.0 * a * b,
        }
    }
}

pub fn survival_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Uniformly random state.
pub fn prepare_random<R: Rng + ?Sized>(rng: &mut R) -> QubitState {
    QubitState::from_index(rng.random::<u8>() & 3)
}

/// Fills `out` with uniformly random states, 32 per 64-bit draw.
pub fn prepare_random_fill<R: Rng + ?Sized>(out: &mut [QubitState], rng: &mut R) {
    for chunk in out.chunks_mut(32) {
        let mut word: u64 = rng.random();
        for slot in chunk {
            *slot = QubitState::from_index((word & 3) as u8);
            word >>= 2;
        }
    }
}

pub fn apply_encoding(q: QubitState, op: EncodeOp) -> QubitState {
    match op {
        EncodeOp::I => q,
        // Y|0⟩ = |1⟩, Y|1⟩ = −|0⟩, Y|+⟩ = −|−⟩, Y|−⟩ = |+⟩
        EncodeOp::Y => q.flipped(),
    }
}

/// Projective measurement in `basis`. Eigenstates give their bit; the
/// conjugate basis gives a fair coin.
pub fn measure<R: Rng + ?Sized>(q: QubitState, basis: Basis, rng: &mut R) -> u8 {
    if q.basis() == basis {
        q.bit()
    } else {
        rng.random::<bool>() as u8
    }
}

/// Sends one qubit through `ch`; `None` means the photon was lost.
pub fn transmit<R: Rng + ?Sized>(q: QubitState, ch: &ChannelParams, rng: &mut R) -> Option<QubitState> {
    let survival = ch.survival();
    if survival < 1.0 && !rng.random_bool(survival) {
        return None;
    }
    if ch.flip_prob > 0.0 && rng.random_bool(ch.flip_prob) {
        Some(q.flipped())
    } else {
        Some(q)
    }
}

/// Sends a whole pulse train through `ch`. Statistically identical to
/// calling [`transmit`] per pulse, but only draws for the surviving pulses.
pub fn transmit_train<R: Rng + ?Sized>(
    train: &[Option<QubitState>],
    ch: &ChannelParams,
    rng: &mut R,
) -> Vec<Option<QubitState>> {
    let mut out = vec![None; train.len()];
    let survivors = crate::rng::bernoulli_positions(train.len(), ch.survival(), rng);
    for i in survivors {
        if let Some(q) = train[i] {
            out[i] = Some(if ch.flip_prob > 0.0 && rng.random_bool(ch.flip_prob) {
                q.flipped()
            } else {
                q
            });
        }
    }
    out
}
