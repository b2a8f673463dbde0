use std::path::Path;

use serde::{Deserialize, Serialize};

use super::engine::DecodePolicy;
use crate::coding::{build_code, CodeParams, WiretapCode};
use crate::error::{Error, Result};
use crate::security::{gap_from_back_channel_db, ErrorRates, RateParams};
use crate::state::ChannelParams;

/// Channel used for each direction of the round trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    /// Bob to Alice. Its flip probability shows up in Alice's check
    /// measurements.
    pub forward: ChannelParams,
    /// Alice to Bob, seen by coding chips and forward check bits.
    pub backward: ChannelParams,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            forward: ChannelParams {
                loss_db: 21.0,
                flip_prob: 0.008,
            },
            backward: ChannelParams {
                loss_db: 4.1,
                flip_prob: 0.006,
            },
        }
    }
}

impl LinkParams {
    /// Round-trip survival of a coding pulse.
    pub fn q_bob(&self) -> f64 {
        self.forward.survival() * self.backward.survival()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub seed: u64,
    pub block_pulses: usize,
    /// Fraction of slots Alice routes to check measurements.
    pub check_fraction: f64,
    /// Density of random check bits among the remaining slots.
    pub forward_check_fraction: f64,
    /// Blocks proceed only when the estimated C_s exceeds this.
    pub abort_threshold_capacity: f64,
    pub g_back_channel_db: f64,
    /// Abort when the Alice-to-Bob error rate is shown to exceed this.
    pub e_margin: f64,
    /// Significance at which the check bits must show `e > e_margin`.
    pub e_margin_confidence: f64,
    /// Error rate assumed for the first gate, before any check bit is seen.
    pub e_prior: f64,
    pub max_block_retries: usize,
    pub bp_max_iters: usize,
    /// When set, gate on one-sided Hoeffding upper bounds at this failure
    /// probability instead of point estimates.
    pub hoeffding_confidence: Option<f64>,
    /// Also require the code condition on every block's own estimate.
    pub enforce_code_condition_per_block: bool,
    /// Pulses per second, used only to convert counts to bit rates.
    pub repetition_rate: f64,
    pub code: CodeParams,
    pub channel: LinkParams,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            seed: 1,
            block_pulses: 1_280_000,
            check_fraction: 0.1,
            forward_check_fraction: 0.05,
            abort_threshold_capacity: 0.0,
            g_back_channel_db: 4.1,
            e_margin: 0.03,
            e_margin_confidence: 1e-3,
            e_prior: 0.006,
            max_block_retries: 5,
            bp_max_iters: 100,
            hoeffding_confidence: None,
            enforce_code_condition_per_block: false,
            repetition_rate: 1e6,
            code: CodeParams::nominal(),
            channel: LinkParams::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 1), got {x}")))
            }
        };
        self.code.validate()?;
        self.channel.forward.validate()?;
        self.channel.backward.validate()?;
        if !(self.check_fraction > 0.0 && self.check_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "check_fraction must lie in (0, 1], got {}",
                self.check_fraction
            )));
        }
        open_unit("forward_check_fraction", self.forward_check_fraction)?;
        open_unit("e_margin", self.e_margin)?;
        open_unit("e_margin_confidence", self.e_margin_confidence)?;
        if !(self.e_prior > 0.0 && self.e_prior < 0.5) {
            return Err(Error::Config(format!(
                "e_prior must lie in (0, 0.5), got {}",
                self.e_prior
            )));
        }
        if let Some(c) = self.hoeffding_confidence {
            open_unit("hoeffding_confidence", c)?;
        }
        if self.block_pulses < self.code.chips() {
            return Err(Error::Config(format!(
                "block_pulses {} is below N·l = {}",
                self.block_pulses,
                self.code.chips()
            )));
        }
        if !(self.g_back_channel_db.is_finite() && self.g_back_channel_db >= 0.0) {
            return Err(Error::Config("g_back_channel_db must be finite and >= 0".into()));
        }
        if self.bp_max_iters == 0 {
            return Err(Error::Config("bp_max_iters must be >= 1".into()));
        }
        if self.repetition_rate.is_nan() || self.repetition_rate <= 0.0 {
            return Err(Error::Config("repetition_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn g(&self) -> f64 {
        gap_from_back_channel_db(self.g_back_channel_db)
    }

    /// Rates at the configured channel's nominal operating point.
    pub fn design_point(&self) -> Result<(RateParams, ErrorRates)> {
        let rp = RateParams::new(self.channel.q_bob(), self.g())?;
        let f = self.channel.forward.flip_prob;
        Ok((rp, ErrorRates::new(self.e_prior, f, f)?))
    }

    pub fn decode_policy(&self) -> DecodePolicy {
        DecodePolicy {
            e_margin: self.e_margin,
            confidence: self.e_margin_confidence,
            e_prior: self.e_prior,
            bp_max_iters: self.bp_max_iters,
        }
    }

    pub fn build_code(&self) -> Result<WiretapCode> {
        build_code(self.code)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg = Self::from_toml_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validating, for callers that override fields first.
    pub fn from_toml_unchecked(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn load_unchecked(path: &Path) -> Result<Self> {
        Self::from_toml_unchecked(&std::fs::read_to_string(path)?)
    }
}
