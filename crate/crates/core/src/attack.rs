//! Eavesdropper models acting on the Bob-to-Alice leg.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::security::{eve_information, ErrorRates, RateParams};
use crate::state::{measure, Basis, QubitState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackModel {
    #[default]
    None,
    /// Measure a `fraction` of pulses in a random basis and resend the result.
    InterceptResend { fraction: f64 },
    /// Disturbance matching target check error rates; Eve's information is
    /// accounted analytically.
    OptimalCollective { e_x: f64, e_z: f64 },
}

impl AttackModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackModel::None => Ok(()),
            AttackModel::InterceptResend { fraction } => {
                if (0.0..=1.0).contains(&fraction) {
                    Ok(())
                } else {
                    Err(domain(format!("intercept fraction must lie in [0, 1], got {fraction}")))
                }
            }
            AttackModel::OptimalCollective { e_x, e_z } => {
                if e_x >= 0.0 && e_z >= 0.0 && e_x + e_z <= 0.5 {
                    Ok(())
                } else {
                    Err(domain(format!(
                        "collective targets need e_x, e_z >= 0 and e_x + e_z <= 0.5, got {e_x}, {e_z}"
                    )))
                }
            }
        }
    }
}

/// What Eve did to one block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AttackReport {
    /// Pulses Eve touched.
    pub attacked: usize,
    /// Pulses Eve measured whose basis matched the preparation.
    pub correct_basis: usize,
    /// Analytic information bound in bits per pulse, for the collective attack.
    pub info_bound: Option<f64>,
}

/// With probability `fraction`, measure in a uniformly random basis and
/// resend the observed eigenstate. Returns the resent pulse and Eve's bit.
pub fn eve_intercept_resend<R: Rng + ?Sized>(
    q: QubitState,
    fraction: f64,
    rng: &mut R,
) -> (QubitState, Option<(Basis, u8)>) {
    if fraction <= 0.0 || !rng.random_bool(fraction.min(1.0)) {
        return (q, None);
    }
    let basis = Basis::random(rng);
    let bit = measure(q, basis, rng);
    (QubitState::eigenstate(basis, bit), Some((basis, bit)))
}

/// Flips X-basis states with probability `e_x` and Z-basis states with
/// probability `e_z`; the returned bound is `Q^Eve·h(e_x + e_z)`.
pub fn eve_optimal_collective<R: Rng + ?Sized>(
    train: &mut [Option<QubitState>],
    e_x: f64,
    e_z: f64,
    rp: &RateParams,
    rng: &mut R,
) -> Result<AttackReport> {
    AttackModel::OptimalCollective { e_x, e_z }.validate()?;
    let mut attacked = 0;
    for q in train.iter_mut().flatten() {
        attacked += 1;
        let p = match q.basis() {
            Basis::X => e_x,
            Basis::Z => e_z,
        };
        if p > 0.0 && rng.random_bool(p) {
            *q = q.flipped();
        }
    }
    let bound = eve_information(rp.q_eve().min(1.0), 0.5, &ErrorRates::new(0.0, e_x, e_z)?)?;
    Ok(AttackReport {
        attacked,
        correct_basis: 0,
        info_bound: Some(bound),
    })
}

/// Runs `model` over every pulse still present in `train`.
pub fn apply_attack<R: Rng + ?Sized>(
    train: &mut [Option<QubitState>],
    model: &AttackModel,
    rp: &RateParams,
    rng: &mut R,
) -> Result<AttackReport> {
    model.validate()?;
    match *model {
        AttackModel::None => Ok(AttackReport::default()),
        AttackModel::InterceptResend { fraction } => {
            let mut report = AttackReport::default();
            for q in train.iter_mut().flatten() {
                let (out, guess) = eve_intercept_resend(*q, fraction, rng);
                if let Some((basis, _)) = guess {
                    report.attacked += 1;
                    if basis == q.basis() {
                        report.correct_basis += 1;
                    }
                }
                *q = out;
            }
            Ok(report)
        }
        AttackModel::OptimalCollective { e_x, e_z } => eve_optimal_collective(train, e_x, e_z, rp, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, Stream};
    use crate::state::prepare_random;

    /// Check error seen by a basis-matched measurement after the attack.
    fn induced_error(fraction: f64, n: usize, seed: u64) -> f64 {
        let mut rng = derive_rng(seed, Stream::Eve, 0);
        let mut errors = 0;
        for _ in 0..n {
            let q = prepare_random(&mut rng);
            let (out, _) = eve_intercept_resend(q, fraction, &mut rng);
            errors += (measure(out, q.basis(), &mut rng) != q.bit()) as usize;
        }
        errors as f64 / n as f64
    }

    fn within_3_sigma(x: f64, p: f64, n: usize) -> bool {
        (x - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-12
    }

    #[test]
    fn intercept_resend_error_rates() {
        let n = 100_000;
        assert_eq!(induced_error(0.0, n, 1), 0.0);
        let full = induced_error(1.0, n, 2);
        assert!(within_3_sigma(full, 0.25, n), "{full}");
        let half = induced_error(0.5, n, 3);
        assert!(within_3_sigma(half, 0.125, n), "{half}");
    }

    #[test]
    fn intercept_resend_error_is_monotone_in_fraction() {
        let rates: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &f)| induced_error(f, 40_000, 10 + i as u64))
            .collect();
        assert!(rates.windows(2).all(|w| w[0] <= w[1]), "{rates:?}");
    }

    #[test]
    fn intercept_resend_table_by_enumeration() {
        // Over Eve's two bases and her outcomes, the resent state is wrong in
        // the original basis with probability 1/4 for every input state.
        for q in QubitState::ALL {
            let mut p_err = 0.0;
            for eve_basis in [Basis::Z, Basis::X] {
                for bit in [0u8, 1] {
                    let p_outcome = if eve_basis == q.basis() {
                        (bit == q.bit()) as u8 as f64
                    } else {
                        0.5
                    };
                    let resent = QubitState::eigenstate(eve_basis, bit);
                    let p_wrong = if resent.basis() == q.basis() {
                        (resent.bit() != q.bit()) as u8 as f64
                    } else {
                        0.5
                    };
                    p_err += 0.5 * p_outcome * p_wrong;
                }
            }
            assert_eq!(p_err, 0.25);
        }
    }

    #[test]
    fn collective_targets_and_ledger() {
        let rp = RateParams::new(0.003, 2.57).unwrap();
        let mut rng = derive_rng(4, Stream::Eve, 0);
        let prepared: Vec<QubitState> = (0..200_000).map(|_| prepare_random(&mut rng)).collect();
        let mut train: Vec<Option<QubitState>> = prepared.iter().copied().map(Some).collect();
        let report = eve_optimal_collective(&mut train, 0.008, 0.02, &rp, &mut rng).unwrap();
        assert_eq!(report.attacked, 200_000);
        let (mut nx, mut ex, mut nz, mut ez) = (0, 0, 0, 0);
        for (p, q) in prepared.iter().zip(&train) {
            let wrong = (q.unwrap() != *p) as usize;
            match p.basis() {
                Basis::X => (nx, ex) = (nx + 1, ex + wrong),
                Basis::Z => (nz, ez) = (nz + 1, ez + wrong),
            }
        }
        assert!(within_3_sigma(ex as f64 / nx as f64, 0.008, nx));
        assert!(within_3_sigma(ez as f64 / nz as f64, 0.02, nz));

        let mut empty: Vec<Option<QubitState>> = vec![Some(QubitState::Z0); 10];
        let zero = eve_optimal_collective(&mut empty, 0.0, 0.0, &rp, &mut rng).unwrap();
        assert_eq!(zero.info_bound, Some(0.0));
        assert!(empty.iter().all(|q| *q == Some(QubitState::Z0)));

        let mut t: Vec<Option<QubitState>> = vec![];
        let nominal = eve_optimal_collective(&mut t, 0.008, 0.008, &rp, &mut rng).unwrap();
        let bound = nominal.info_bound.unwrap();
        assert!((bound - 9.1e-4).abs() / 9.1e-4 < 0.02, "{bound}");
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(AttackModel::InterceptResend { fraction: 1.5 }.validate().is_err());
        assert!(AttackModel::OptimalCollective { e_x: 0.3, e_z: 0.3 }
            .validate()
            .is_err());
        assert!(AttackModel::None.validate().is_ok());
    }

    #[test]
    fn skipped_pulses_stay_lost() {
        let rp = RateParams::new(0.003, 2.57).unwrap();
        let mut rng = derive_rng(5, Stream::Eve, 0);
        let mut train = vec![None, Some(QubitState::Xp), None];
        let r = apply_attack(
            &mut train,
            &AttackModel::InterceptResend { fraction: 1.0 },
            &rp,
            &mut rng,
        )
        .unwrap();
        assert_eq!(r.attacked, 1);
        assert!(train[0].is_none() && train[2].is_none() && train[1].is_some());
    }
}
