//! Experiment drivers: stability runs, loss sweeps, file transfer and
//! decoder Monte-Carlo. Tables are written as CSV with a header row.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attack::AttackModel;
use crate::coding::{bp_decode, compute_llrs, ldpc_encode, spread, ChipFrame, WiretapCode};
use crate::error::{domain, Result};
use crate::protocol::{run_block, run_session, ErrorTally, ProtocolConfig, SessionReport};
use crate::rng::{bernoulli_positions, derive_rng, Stream};
use crate::security::{eve_information, main_information, ErrorRates};
use crate::state::survival_from_db;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub block: u64,
    pub e_x: Option<f64>,
    pub e_z: Option<f64>,
    pub e: Option<f64>,
    /// Sample sizes behind each estimate.
    pub n_x: usize,
    pub n_z: usize,
    pub n_e: usize,
    pub delivered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        MeanStd {
            mean,
            std: var.sqrt(),
            count: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub e_x: MeanStd,
    pub e_z: MeanStd,
    pub e: MeanStd,
}

/// Runs `n_blocks` independent blocks carrying random messages and records
/// the per-block error estimates. Blocks that abort still contribute
/// whatever estimates they reached.
pub fn run_stability(
    cfg: &ProtocolConfig,
    code: &WiretapCode,
    n_blocks: usize,
    attack: &AttackModel,
) -> Result<StabilityReport> {
    if n_blocks == 0 {
        return Err(domain("stability run needs at least one block"));
    }
    cfg.validate()?;
    let mut tally = ErrorTally::default();
    let mut rows = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks as u64 {
        let mut msg_rng = derive_rng(cfg.seed, Stream::Message, b);
        let m: Vec<u8> = (0..code.k_m()).map(|_| msg_rng.random::<bool>() as u8).collect();
        let result = run_block(cfg, code, attack, b, &m, &tally)?;
        tally = tally.add(&result.tally);
        rows.push(StabilityRow {
            block: b,
            e_x: result.record.e_x,
            e_z: result.record.e_z,
            e: result.record.e,
            n_x: result.record.n_x,
            n_z: result.record.n_z,
            n_e: result.record.forward_checks,
            delivered: result.outcome.as_ref().is_ok_and(|d| *d == m),
        });
    }
    Ok(StabilityReport {
        e_x: MeanStd::of(rows.iter().filter_map(|r| r.e_x)),
        e_z: MeanStd::of(rows.iter().filter_map(|r| r.e_z)),
        e: MeanStd::of(rows.iter().filter_map(|r| r.e)),
        rows,
    })
}

pub fn write_stability_csv<W: Write>(rows: &[StabilityRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub loss_start_db: f64,
    pub loss_end_db: f64,
    pub loss_step_db: f64,
    pub rates: ErrorRates,
    pub g: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.loss_step_db.is_nan() || self.loss_step_db <= 0.0 {
            return Err(domain(format!(
                "sweep step must be positive, got {}",
                self.loss_step_db
            )));
        }
        if !(self.loss_start_db.is_finite() && self.loss_end_db.is_finite() && self.loss_start_db <= self.loss_end_db) {
            return Err(domain("sweep range must be finite and nonempty"));
        }
        if !(self.g.is_finite() && self.g >= 1.0) {
            return Err(domain(format!("g must be >= 1, got {}", self.g)));
        }
        self.rates.validate()
    }

    /// Loss values from start to end inclusive, computed from the index to
    /// avoid accumulating rounding.
    pub fn losses(&self) -> Vec<f64> {
        let n = ((self.loss_end_db - self.loss_start_db) / self.loss_step_db + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| self.loss_start_db + i as f64 * self.loss_step_db)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub loss_db: f64,
    pub q_bob: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    pub c_s: f64,
}

/// `I(A:B)`, `I(A:E)` and `C_s` at p = 1/2 with `Q^Bob = 10^(−loss/10)` and
/// `Q^Eve = min(g·Q^Bob, 1)`.
pub fn run_capacity_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.losses()
        .into_iter()
        .map(|loss_db| {
            let q_bob = survival_from_db(loss_db);
            let i_ab = main_information(q_bob, 0.5, spec.rates.e)?;
            let i_ae = eve_information((spec.g * q_bob).min(1.0), 0.5, &spec.rates)?;
            Ok(SweepRow {
                loss_db,
                q_bob,
                i_ab,
                i_ae,
                c_s: i_ab - i_ae,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Sends the file at `input` and writes whatever Bob recovered to `output`.
pub fn run_e2e(
    cfg: &ProtocolConfig,
    code: &WiretapCode,
    input: &Path,
    output: &Path,
    attack: &AttackModel,
) -> Result<SessionReport> {
    let message = std::fs::read(input)?;
    let report = run_session(cfg, code, &message, attack)?;
    std::fs::write(output, &report.delivered)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecStats {
    pub trials: usize,
    pub failures: usize,
    pub mean_iterations: f64,
}

impl CodecStats {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }
}

/// Encode, spread, detect each chip with probability `survival`, flip
/// detected chips with probability `e`, then decode with the true `e`. A
/// trial fails unless BP converges to the transmitted `u`.
pub fn codec_trials(
    code: &WiretapCode,
    survival: f64,
    e: f64,
    max_iters: usize,
    trials: usize,
    seed: u64,
) -> Result<CodecStats> {
    let k_u = code.params().k_u;
    let mut failures = 0;
    let mut iterations = 0;
    for t in 0..trials as u64 {
        let mut rng = derive_rng(seed, Stream::Trial, t);
        let u: Vec<u8> = (0..k_u).map(|_| rng.random::<bool>() as u8).collect();
        let mut chips = spread(&ldpc_encode(&u, code)?, code, t)?;
        let mut detected = vec![false; chips.len()];
        for i in bernoulli_positions(chips.len(), survival, &mut rng) {
            detected[i] = true;
            if rng.random_bool(e) {
                chips[i] ^= 1;
            }
        }
        let llrs = compute_llrs(&ChipFrame::new(chips, detected)?, e, code, t)?;
        let out = bp_decode(&llrs, code, max_iters)?;
        iterations += out.iterations;
        if !(out.converged && out.u == u) {
            failures += 1;
        }
    }
    Ok(CodecStats {
        trials,
        failures,
        mean_iterations: if trials == 0 {
            0.0
        } else {
            iterations as f64 / trials as f64
        },
    })
}
