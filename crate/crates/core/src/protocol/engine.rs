//! One block of the protocol, one party action per function. Nothing is
//! shared between the parties except the values passed between these calls.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{apply_attack, AttackModel, AttackReport};
use crate::coding::{
    bp_decode, check_security_condition, compute_llrs, ldpc_encode, spread, uhf_invert, uhf_map, ChipFrame, WiretapCode,
};
use crate::error::{domain, Error, Result};
use crate::rng::bernoulli_positions;
use crate::security::{secrecy_at_half, ErrorRates, RateParams};
use crate::state::{
    apply_encoding, measure, prepare_random_fill, transmit_train, Basis, ChannelParams, EncodeOp, QubitState,
};

/// Bob's private copy of what he sent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparationRecord {
    pub states: Vec<QubitState>,
}

impl PreparationRecord {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Uniformly random four-state pulses and the matching record.
pub fn bob_prepare_block<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<(Vec<Option<QubitState>>, PreparationRecord)> {
    if n == 0 {
        return Err(domain("block must contain at least one pulse"));
    }
    let mut states = vec![QubitState::Z0; n];
    prepare_random_fill(&mut states, rng);
    let train = states.iter().copied().map(Some).collect();
    Ok((train, PreparationRecord { states }))
}

/// Bob to Alice: loss, then Eve on whatever survives. The forward flip is
/// left to the check measurement.
pub fn forward_link<R: Rng + ?Sized, E: Rng + ?Sized>(
    train: &[Option<QubitState>],
    forward: &ChannelParams,
    attack: &AttackModel,
    rp: &RateParams,
    channel_rng: &mut R,
    eve_rng: &mut E,
) -> Result<(Vec<Option<QubitState>>, AttackReport)> {
    let lossy = ChannelParams {
        loss_db: forward.loss_db,
        flip_prob: 0.0,
    };
    let mut received = transmit_train(train, &lossy, channel_rng);
    let report = apply_attack(&mut received, attack, rp, eve_rng)?;
    Ok((received, report))
}

/// Alice's public check announcement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckDisclosure {
    /// Every slot Alice set aside for checking, received or not.
    pub routed: Vec<usize>,
    /// Routed slots that produced a detection.
    pub positions: Vec<usize>,
    pub bases: Vec<Basis>,
    pub outcomes: Vec<u8>,
}

impl CheckDisclosure {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Routes each slot to checking with probability `check_fraction` and
/// measures the routed pulses that arrived in a random basis.
pub fn alice_sample_check<R: Rng + ?Sized>(
    received: &[Option<QubitState>],
    check_fraction: f64,
    forward: &ChannelParams,
    rng: &mut R,
) -> Result<CheckDisclosure> {
    if received.iter().all(Option::is_none) {
        return Err(Error::ChannelOutage);
    }
    let routed = bernoulli_positions(received.len(), check_fraction, rng);
    let mut d = CheckDisclosure {
        positions: Vec::new(),
        bases: Vec::new(),
        outcomes: Vec::new(),
        routed,
    };
    for &i in &d.routed {
        if let Some(mut q) = received[i] {
            if forward.flip_prob > 0.0 && rng.random_bool(forward.flip_prob) {
                q = q.flipped();
            }
            let basis = Basis::random(rng);
            d.positions.push(i);
            d.bases.push(basis);
            d.outcomes.push(measure(q, basis, rng));
        }
    }
    Ok(d)
}

/// Basis-matched check counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CheckEstimate {
    pub n_x: usize,
    pub err_x: usize,
    pub n_z: usize,
    pub err_z: usize,
}

impl CheckEstimate {
    pub fn e_x(&self) -> Option<f64> {
        (self.n_x > 0).then(|| self.err_x as f64 / self.n_x as f64)
    }

    pub fn e_z(&self) -> Option<f64> {
        (self.n_z > 0).then(|| self.err_z as f64 / self.n_z as f64)
    }

    /// False when either basis bucket is empty.
    pub fn is_defined(&self) -> bool {
        self.n_x > 0 && self.n_z > 0
    }

    /// Point estimates, or one-sided Hoeffding upper bounds holding with
    /// probability `1 − confidence` each.
    pub fn bounds(&self, hoeffding_confidence: Option<f64>) -> Option<(f64, f64)> {
        let (ex, ez) = (self.e_x()?, self.e_z()?);
        Some(match hoeffding_confidence {
            None => (ex, ez),
            Some(delta) => {
                let slack = |n: usize| ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt();
                ((ex + slack(self.n_x)).min(0.5), (ez + slack(self.n_z)).min(0.5))
            }
        })
    }
}

/// Compares Alice's outcomes with the prepared bits wherever her basis
/// matched Bob's.
pub fn bob_estimate_errors(disclosure: &CheckDisclosure, record: &PreparationRecord) -> Result<CheckEstimate> {
    let n = disclosure.positions.len();
    if disclosure.bases.len() != n || disclosure.outcomes.len() != n {
        return Err(Error::LengthMismatch {
            what: "check disclosure",
            expected: n,
            got: disclosure.bases.len().min(disclosure.outcomes.len()),
        });
    }
    let mut est = CheckEstimate::default();
    for ((&pos, &basis), &bit) in disclosure
        .positions
        .iter()
        .zip(&disclosure.bases)
        .zip(&disclosure.outcomes)
    {
        let prepared = *record
            .states
            .get(pos)
            .ok_or_else(|| domain(format!("disclosed position {pos} outside the block")))?;
        if prepared.basis() != basis {
            continue;
        }
        let wrong = (bit != prepared.bit()) as usize;
        match basis {
            Basis::X => {
                est.n_x += 1;
                est.err_x += wrong;
            }
            Basis::Z => {
                est.n_z += 1;
                est.err_z += wrong;
            }
        }
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateAbort {
    Capacity,
    CodeCondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum GateDecision {
    Proceed {
        c_s: f64,
        i_ae: f64,
    },
    Abort {
        /// Absent when the rates fall outside the formula's domain.
        c_s: Option<f64>,
        i_ae: Option<f64>,
        reason: GateAbort,
    },
}

impl GateDecision {
    pub fn proceeds(&self) -> bool {
        matches!(self, GateDecision::Proceed { .. })
    }

    pub fn c_s(&self) -> Option<f64> {
        match *self {
            GateDecision::Proceed { c_s, .. } => Some(c_s),
            GateDecision::Abort { c_s, .. } => c_s,
        }
    }

    pub fn i_ae(&self) -> Option<f64> {
        match *self {
            GateDecision::Proceed { i_ae, .. } => Some(i_ae),
            GateDecision::Abort { i_ae, .. } => i_ae,
        }
    }
}

/// C_s at p = 1/2; proceed only if it beats `threshold` and, when a code is
/// given, `I(A:E)` stays within the code's random-bit rate.
pub fn gate_on_capacity(
    rates: &ErrorRates,
    q_bob: f64,
    g: f64,
    threshold: f64,
    code: Option<&WiretapCode>,
) -> GateDecision {
    let est = RateParams::new(q_bob, g).and_then(|rp| secrecy_at_half(&rp, rates));
    let est = match est {
        Ok(est) => est,
        Err(_) => {
            return GateDecision::Abort {
                c_s: None,
                i_ae: None,
                reason: GateAbort::Capacity,
            }
        }
    };
    if est.c_s.is_nan() || est.c_s <= threshold {
        return GateDecision::Abort {
            c_s: Some(est.c_s),
            i_ae: Some(est.i_ae),
            reason: GateAbort::Capacity,
        };
    }
    if let Some(code) = code {
        if !check_security_condition(code, est.i_ae) {
            return GateDecision::Abort {
                c_s: Some(est.c_s),
                i_ae: Some(est.i_ae),
                reason: GateAbort::CodeCondition,
            };
        }
    }
    GateDecision::Proceed {
        c_s: est.c_s,
        i_ae: est.i_ae,
    }
}

/// Gate inputs both parties can compute from public data: the announced
/// check rates, `e`, and `Q^Bob` scaled from the detection rate of the
/// routed check slots.
pub fn shared_gate_inputs(
    disclosure: &CheckDisclosure,
    estimate: &CheckEstimate,
    e: f64,
    g: f64,
    hoeffding_confidence: Option<f64>,
) -> Option<(ErrorRates, f64)> {
    if disclosure.routed.is_empty() || disclosure.is_empty() {
        return None;
    }
    let (e_x, e_z) = estimate.bounds(hoeffding_confidence)?;
    let q_forward = disclosure.len() as f64 / disclosure.routed.len() as f64;
    Some((ErrorRates { e, e_x, e_z }, q_forward / g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum SlotRole {
    Check,
    Chip,
    ForwardCheck,
    Unused,
}

/// Lays out a block: routed slots are checks, `forward_checks` are check
/// bits, and the first `chips` of the rest carry the codeword.
pub fn slot_roles(n: usize, routed: &[usize], forward_checks: &[usize], chips: usize) -> Result<Vec<SlotRole>> {
    let mut roles = vec![SlotRole::Chip; n];
    for &i in routed {
        roles[i] = SlotRole::Check;
    }
    for &i in forward_checks {
        if roles[i] == SlotRole::Check {
            return Err(domain(format!("slot {i} is both a check and a check bit")));
        }
        roles[i] = SlotRole::ForwardCheck;
    }
    let mut assigned = 0;
    for r in roles.iter_mut().filter(|r| **r == SlotRole::Chip) {
        if assigned == chips {
            *r = SlotRole::Unused;
        } else {
            assigned += 1;
        }
    }
    if assigned < chips {
        return Err(Error::InsufficientPulses {
            needed: chips,
            available: assigned,
        });
    }
    Ok(roles)
}

/// Random check bits Alice hid among the chips, disclosed after Bob has
/// received the block.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ForwardCheckRecord {
    pub positions: Vec<usize>,
    pub values: Vec<u8>,
}

/// Encodes `m` and modulates it onto the unchecked slots. Check slots were
/// consumed by measurement and return nothing.
pub fn alice_encode_block<R: Rng + ?Sized>(
    m: &[u8],
    code: &WiretapCode,
    received: &[Option<QubitState>],
    disclosure: &CheckDisclosure,
    forward_check_fraction: f64,
    block_index: u64,
    rng: &mut R,
) -> Result<(Vec<Option<QubitState>>, ForwardCheckRecord)> {
    let chips_needed = code.params().chips();
    let remaining = received.len() - disclosure.routed.len();
    let needed = (chips_needed as f64 / (1.0 - forward_check_fraction)).ceil() as usize;
    if remaining < needed {
        return Err(Error::InsufficientPulses {
            needed,
            available: remaining,
        });
    }
    let r: Vec<u8> = (0..code.params().k_r).map(|_| rng.random::<bool>() as u8).collect();
    let u = uhf_map(m, &r, code)?;
    let chips = spread(&ldpc_encode(&u, code)?, code, block_index)?;

    let candidates = bernoulli_positions(received.len(), forward_check_fraction, rng);
    let routed = &disclosure.routed;
    let mut fc = ForwardCheckRecord::default();
    let mut k = 0;
    for i in candidates {
        while k < routed.len() && routed[k] < i {
            k += 1;
        }
        if k < routed.len() && routed[k] == i {
            continue;
        }
        fc.positions.push(i);
        fc.values.push(rng.random::<bool>() as u8);
    }
    let roles = slot_roles(received.len(), routed, &fc.positions, chips_needed)?;

    let mut out = Vec::with_capacity(received.len());
    let (mut chip, mut check_bit) = (0, 0);
    for (q, role) in received.iter().zip(&roles) {
        let op = match role {
            SlotRole::Check => {
                out.push(None);
                continue;
            }
            SlotRole::Chip => {
                chip += 1;
                EncodeOp::from_bit(chips[chip - 1])
            }
            SlotRole::ForwardCheck => {
                check_bit += 1;
                EncodeOp::from_bit(fc.values[check_bit - 1])
            }
            SlotRole::Unused => EncodeOp::I,
        };
        out.push(q.map(|q| apply_encoding(q, op)));
    }
    Ok((out, fc))
}

/// Session-wide tally of forward check bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorTally {
    pub checks: usize,
    pub errors: usize,
}

impl ErrorTally {
    /// `(errors + 1/2) / (checks + 1)`, never exactly 0.
    pub fn estimate(&self) -> f64 {
        (self.errors as f64 + 0.5) / (self.checks as f64 + 1.0)
    }

    pub fn add(&self, other: &ErrorTally) -> ErrorTally {
        ErrorTally {
            checks: self.checks + other.checks,
            errors: self.errors + other.errors,
        }
    }
}

/// Bob's decoding parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodePolicy {
    pub e_margin: f64,
    /// Abort only when `e > e_margin` is significant at this level.
    pub confidence: f64,
    /// LLR error rate used while no check bit has been seen.
    pub e_prior: f64,
    pub bp_max_iters: usize,
}

/// Chernoff bound on `P(X ≥ errors)` for `X ~ Bin(checks, p)`, which is
/// `exp(−n·D(k/n ‖ p))` when `k/n > p` and 1 otherwise.
pub fn binomial_upper_tail_bound(errors: usize, checks: usize, p: f64) -> f64 {
    if checks == 0 {
        return 1.0;
    }
    let a = errors as f64 / checks as f64;
    if a <= p {
        return 1.0;
    }
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    let kl = term(a, p) + term(1.0 - a, 1.0 - p);
    (-(checks as f64) * kl).exp()
}

impl DecodePolicy {
    /// True when the tally is inconsistent with any `e ≤ e_margin`.
    pub fn exceeds_margin(&self, tally: &ErrorTally) -> bool {
        binomial_upper_tail_bound(tally.errors, tally.checks, self.e_margin) < self.confidence
    }

    /// Error rate for the LLRs: the smoothed estimate, or the prior before
    /// any check bit.
    pub fn llr_error_rate(&self, tally: &ErrorTally) -> f64 {
        if tally.checks == 0 {
            self.e_prior
        } else {
            tally.estimate().min(0.5 - 1e-9)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeAbort {
    DecoderFailure,
    ThresholdExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BobDecode {
    pub message: std::result::Result<Vec<u8>, DecodeAbort>,
    /// Forward check bits seen in this block.
    pub block_tally: ErrorTally,
    /// Error rate used for the LLRs.
    pub e_used: f64,
    /// Chip detections.
    pub detections: usize,
    pub iterations: usize,
}

impl BobDecode {
    /// This block's own forward error estimate.
    pub fn e_block(&self) -> Option<f64> {
        let t = self.block_tally;
        (t.checks > 0).then(|| t.errors as f64 / t.checks as f64)
    }
}

/// Measures every returned pulse in its preparation basis, estimates `e`
/// from the check bits pooled with `prior`, and decodes.
#[allow(clippy::too_many_arguments)]
pub fn bob_decode_block<R: Rng + ?Sized>(
    returned: &[Option<QubitState>],
    record: &PreparationRecord,
    code: &WiretapCode,
    disclosure: &CheckDisclosure,
    forward_checks: &ForwardCheckRecord,
    prior: &ErrorTally,
    policy: &DecodePolicy,
    block_index: u64,
    rng: &mut R,
) -> Result<BobDecode> {
    if returned.len() != record.len() {
        return Err(Error::LengthMismatch {
            what: "returned pulses",
            expected: record.len(),
            got: returned.len(),
        });
    }
    if forward_checks.values.len() != forward_checks.positions.len() {
        return Err(Error::LengthMismatch {
            what: "check bit values",
            expected: forward_checks.positions.len(),
            got: forward_checks.values.len(),
        });
    }
    let n_chips = code.params().chips();
    let roles = slot_roles(returned.len(), &disclosure.routed, &forward_checks.positions, n_chips)?;

    let mut frame = ChipFrame::new(vec![0; n_chips], vec![false; n_chips])?;
    let mut tally = ErrorTally::default();
    let (mut chip, mut check_bit) = (0, 0);
    for ((q, role), prepared) in returned.iter().zip(&roles).zip(&record.states) {
        let this = match role {
            SlotRole::Chip => {
                chip += 1;
                chip - 1
            }
            SlotRole::ForwardCheck => {
                check_bit += 1;
                check_bit - 1
            }
            _ => continue,
        };
        let Some(q) = q else { continue };
        let y = measure(*q, prepared.basis(), rng) ^ prepared.bit();
        if *role == SlotRole::Chip {
            frame.chips[this] = y;
            frame.detected[this] = true;
        } else {
            tally.checks += 1;
            tally.errors += (y != forward_checks.values[this]) as usize;
        }
    }

    let detections = frame.detections();
    let pooled = prior.add(&tally);
    let e_used = policy.llr_error_rate(&pooled);
    let mut out = BobDecode {
        message: Err(DecodeAbort::ThresholdExceeded),
        block_tally: tally,
        e_used,
        detections,
        iterations: 0,
    };
    if policy.exceeds_margin(&pooled) {
        return Ok(out);
    }
    let llrs = compute_llrs(&frame, e_used, code, block_index)?;
    let decoded = bp_decode(&llrs, code, policy.bp_max_iters)?;
    out.iterations = decoded.iterations;
    out.message = if decoded.converged {
        Ok(uhf_invert(&decoded.u, code)?.0)
    } else {
        Err(DecodeAbort::DecoderFailure)
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{build_code, CodeParams};
    use crate::rng::{derive_rng, Stream};

    fn toy_code() -> WiretapCode {
        build_code(CodeParams {
            l: 64,
            k_u: 32,
            k_r: 8,
            n_spread: 16,
            seed: 3,
        })
        .unwrap()
    }

    const POLICY: DecodePolicy = DecodePolicy {
        e_margin: 0.03,
        confidence: 1e-3,
        e_prior: 0.006,
        bp_max_iters: 50,
    };

    fn rng(i: u64) -> crate::rng::SimRng {
        derive_rng(77, Stream::Trial, i)
    }

    fn lossless(flip: f64) -> ChannelParams {
        ChannelParams {
            loss_db: 0.0,
            flip_prob: flip,
        }
    }

    #[test]
    fn preparation_is_reproducible_and_uniform() {
        let (a, ra) = bob_prepare_block(4, &mut rng(1)).unwrap();
        let (b, _) = bob_prepare_block(4, &mut rng(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.len(), 4);
        assert!(bob_prepare_block(0, &mut rng(1)).is_err());

        let n = 1_000_000;
        let (_, rec) = bob_prepare_block(n, &mut rng(2)).unwrap();
        let mut counts = [0usize; 4];
        for s in &rec.states {
            counts[s.index() as usize] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn check_sampling_statistics() {
        let n = 200_000;
        let (train, rec) = bob_prepare_block(n, &mut rng(3)).unwrap();
        let d = alice_sample_check(&train, 0.1, &lossless(0.0), &mut rng(4)).unwrap();
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        assert!((d.len() as f64 - n as f64 * 0.1).abs() < 3.0 * sigma);
        assert!(d.positions.windows(2).all(|w| w[0] < w[1]));
        let z = d.bases.iter().filter(|&&b| b == Basis::Z).count() as f64;
        assert!((z - d.len() as f64 / 2.0).abs() < 3.0 * (d.len() as f64 * 0.25).sqrt());

        let est = bob_estimate_errors(&d, &rec).unwrap();
        assert_eq!((est.e_x(), est.e_z()), (Some(0.0), Some(0.0)));

        let all = alice_sample_check(&train, 1.0, &lossless(0.0), &mut rng(5)).unwrap();
        assert_eq!(all.len(), n);
        assert!(alice_sample_check(&[None, None], 0.5, &lossless(0.0), &mut rng(6)).is_err());
    }

    #[test]
    fn check_errors_follow_forward_flip_and_attack() {
        let n = 400_000;
        let (train, rec) = bob_prepare_block(n, &mut rng(7)).unwrap();
        let rp = RateParams::new(0.003, 2.57).unwrap();

        let d = alice_sample_check(&train, 0.5, &lossless(0.008), &mut rng(8)).unwrap();
        let est = bob_estimate_errors(&d, &rec).unwrap();
        for (e, m) in [(est.e_x().unwrap(), est.n_x), (est.e_z().unwrap(), est.n_z)] {
            assert!((e - 0.008).abs() < 3.0 * (0.008 * 0.992 / m as f64).sqrt(), "{e}");
        }

        let attack = AttackModel::InterceptResend { fraction: 1.0 };
        let (rx, report) = forward_link(&train, &lossless(0.0), &attack, &rp, &mut rng(9), &mut rng(10)).unwrap();
        assert_eq!(report.attacked, n);
        let d = alice_sample_check(&rx, 0.5, &lossless(0.0), &mut rng(11)).unwrap();
        let est = bob_estimate_errors(&d, &rec).unwrap();
        for (e, m) in [(est.e_x().unwrap(), est.n_x), (est.e_z().unwrap(), est.n_z)] {
            assert!((e - 0.25).abs() < 3.0 * (0.25 * 0.75 / m as f64).sqrt(), "{e}");
        }
    }

    #[test]
    fn estimate_flags_empty_bucket() {
        let rec = PreparationRecord {
            states: vec![QubitState::Z0, QubitState::Xp],
        };
        let d = CheckDisclosure {
            routed: vec![0],
            positions: vec![0],
            bases: vec![Basis::Z],
            outcomes: vec![0],
        };
        let est = bob_estimate_errors(&d, &rec).unwrap();
        assert!(!est.is_defined());
        assert_eq!(est.e_x(), None);
        let bad = CheckDisclosure {
            positions: vec![5],
            ..d
        };
        assert!(bob_estimate_errors(&bad, &rec).is_err());
    }

    #[test]
    fn hoeffding_bounds_sit_above_point_estimates() {
        let est = CheckEstimate {
            n_x: 250,
            err_x: 2,
            n_z: 250,
            err_z: 2,
        };
        let (px, pz) = est.bounds(None).unwrap();
        let (ux, uz) = est.bounds(Some(1e-3)).unwrap();
        assert_eq!((px, pz), (0.008, 0.008));
        assert!((ux - (0.008 + (1e3f64.ln() / 500.0).sqrt())).abs() < 1e-12);
        assert!(uz > pz);
    }

    #[test]
    fn gate_examples() {
        let nominal = ErrorRates::new(0.006, 0.008, 0.008).unwrap();
        match gate_on_capacity(&nominal, 0.00309, 2.57, 0.0, None) {
            GateDecision::Proceed { c_s, .. } => assert!((c_s - 0.00184).abs() / 0.00184 < 0.1, "{c_s}"),
            other => panic!("{other:?}"),
        }
        let attacked = ErrorRates::new(0.006, 0.25, 0.25).unwrap();
        assert!(!gate_on_capacity(&attacked, 0.00309, 2.57, 0.0, None).proceeds());
        let over = ErrorRates {
            e: 0.006,
            e_x: 0.26,
            e_z: 0.26,
        };
        assert_eq!(gate_on_capacity(&over, 0.00309, 2.57, 0.0, None).c_s(), None);
        let clean = ErrorRates::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(
            gate_on_capacity(&clean, 0.003, 2.57, 0.0, None),
            GateDecision::Proceed { c_s: 0.003, i_ae: 0.0 }
        );
    }

    #[test]
    fn gate_checks_code_condition() {
        let code = build_code(CodeParams::nominal()).unwrap();
        let nominal = ErrorRates::new(0.006, 0.008, 0.008).unwrap();
        assert!(gate_on_capacity(&nominal, 0.00309, 2.5704, 0.0, Some(&code)).proceeds());
        let worse = ErrorRates::new(0.006, 0.01, 0.01).unwrap();
        match gate_on_capacity(&worse, 0.00309, 2.5704, 0.0, Some(&code)) {
            GateDecision::Abort { reason, .. } => assert_eq!(reason, GateAbort::CodeCondition),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn roles_are_disjoint_and_account_for_every_chip() {
        let roles = slot_roles(10, &[1, 4], &[2, 7], 4).unwrap();
        use SlotRole::*;
        assert_eq!(
            roles,
            vec![
                Chip,
                Check,
                ForwardCheck,
                Chip,
                Check,
                Chip,
                Chip,
                ForwardCheck,
                Unused,
                Unused
            ]
        );
        assert!(slot_roles(10, &[1], &[1], 2).is_err());
        assert!(matches!(
            slot_roles(4, &[0, 1], &[], 3),
            Err(Error::InsufficientPulses {
                needed: 3,
                available: 2
            })
        ));
    }

    /// Full block over a lossless channel with the given flips.
    fn run_toy_block(m: &[u8], back_flip: f64, seed: u64) -> (BobDecode, ForwardCheckRecord, usize) {
        let code = toy_code();
        let n = 2000;
        let (train, rec) = bob_prepare_block(n, &mut rng(seed)).unwrap();
        let d = alice_sample_check(&train, 0.1, &lossless(0.0), &mut rng(seed + 1)).unwrap();
        let (returned, fc) = alice_encode_block(m, &code, &train, &d, 0.05, 0, &mut rng(seed + 2)).unwrap();
        let consumed = returned.iter().filter(|q| q.is_none()).count();
        assert_eq!(consumed, d.routed.len());
        let back = transmit_train(&returned, &lossless(back_flip), &mut rng(seed + 3));
        let out = bob_decode_block(
            &back,
            &rec,
            &code,
            &d,
            &fc,
            &ErrorTally::default(),
            &POLICY,
            0,
            &mut rng(seed + 4),
        )
        .unwrap();
        (out, fc, d.routed.len())
    }

    #[test]
    fn noiseless_block_delivers_exactly() {
        let m: Vec<u8> = (0..24).map(|i| (i % 3 == 0) as u8).collect();
        let (out, fc, _) = run_toy_block(&m, 0.0, 20);
        assert_eq!(out.message, Ok(m));
        assert_eq!(out.block_tally.errors, 0);
        assert_eq!(out.block_tally.checks, fc.positions.len());
        assert_eq!(out.detections, 64 * 16);

        let zeros = vec![0u8; 24];
        assert_eq!(run_toy_block(&zeros, 0.0, 30).0.message, Ok(zeros));
    }

    #[test]
    fn heavy_backward_noise_trips_the_threshold() {
        let (out, _, _) = run_toy_block(&[0; 24], 0.2, 40);
        assert_eq!(out.message, Err(DecodeAbort::ThresholdExceeded));
        let e = out.e_block().unwrap();
        assert!((e - 0.2).abs() < 0.1, "{e}");
    }

    #[test]
    fn encode_rejects_short_blocks() {
        let code = toy_code();
        let (train, _) = bob_prepare_block(1000, &mut rng(50)).unwrap();
        let d = alice_sample_check(&train, 0.1, &lossless(0.0), &mut rng(51)).unwrap();
        let r = alice_encode_block(&[0; 24], &code, &train, &d, 0.05, 0, &mut rng(52));
        assert!(matches!(r, Err(Error::InsufficientPulses { .. })));
    }

    #[test]
    fn margin_test_needs_significant_excess() {
        // 5 errors in 168 is a 3% point estimate but entirely plausible at 0.6%.
        let marginal = ErrorTally { checks: 168, errors: 5 };
        assert!(!POLICY.exceeds_margin(&marginal));
        assert!(POLICY.exceeds_margin(&ErrorTally {
            checks: 170,
            errors: 34
        }));
        assert!(!POLICY.exceeds_margin(&ErrorTally::default()));
        assert_eq!(POLICY.llr_error_rate(&ErrorTally::default()), 0.006);
    }

    #[test]
    fn chernoff_bound_dominates_exact_tail() {
        // Exact upper tail by summing the pmf.
        let exact = |k: usize, n: usize, p: f64| {
            let mut pmf = (1.0 - p).powi(n as i32);
            let mut below = 0.0;
            for i in 0..k {
                below += pmf;
                pmf *= (n - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
            }
            1.0 - below
        };
        for (k, n) in [(5, 100), (10, 170), (20, 300), (3, 10)] {
            let bound = binomial_upper_tail_bound(k, n, 0.03);
            assert!(bound >= exact(k, n, 0.03) - 1e-12, "{k}/{n}");
        }
        assert_eq!(binomial_upper_tail_bound(1, 100, 0.03), 1.0);
        assert_eq!(binomial_upper_tail_bound(0, 0, 0.03), 1.0);
    }

    #[test]
    fn tally_estimate_is_never_zero() {
        let t = ErrorTally { checks: 0, errors: 0 };
        assert_eq!(t.estimate(), 0.5);
        let t = ErrorTally { checks: 999, errors: 0 };
        assert_eq!(t.estimate(), 0.5 / 1000.0);
    }
}
