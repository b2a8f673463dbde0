//! Wiretap security bounds for the two-way single-photon link.
//!
//! Quantities are in bits per emitted pulse unless stated otherwise. The
//! main channel is a binary symmetric channel followed by an erasure
//! channel, so `I(A:B) = Q_bob · [h(p + e − 2pe) − h(e)]`. Eve's collective
//! attack is bounded by `I(A:E) ≤ Q_eve · h(ξ)`, where ξ depends on Alice's
//! `I` probability `p` and the check error rates.
//!
//! The maximisation over Eve's unitaries is done analytically: the Gram
//! matrix of her post-interaction states has a closed-form spectrum
//! ([`gram_eigenvalues`]), and the entropy of the joint state is largest at
//! `Δ1 = 0`, `Δ2 = 1 − 2e_x − 2e_z`, giving `S(ρ_ABE) = 1 + h(ξ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Check and main-channel error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    /// Bit error rate at Bob.
    pub e: f64,
    /// X-basis check error rate at Alice.
    pub e_x: f64,
    /// Z-basis check error rate at Alice.
    pub e_z: f64,
}

impl ErrorRates {
    pub fn new(e: f64, e_x: f64, e_z: f64) -> Result<Self> {
        let r = ErrorRates { e, e_x, e_z };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e", self.e), ("e_x", self.e_x), ("e_z", self.e_z)] {
            if !(0.0..=0.5).contains(&v) {
                return Err(domain(format!("{name} must lie in [0, 0.5], got {v}")));
            }
        }
        Ok(())
    }

    /// `e_x + e_z`, the argument of Eve's entropy term at p = 1/2.
    pub fn check_sum(&self) -> f64 {
        self.e_x + self.e_z
    }
}

/// Receipt rate at Bob and Eve's access gap `g = Q_eve / Q_bob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub q_bob: f64,
    pub g: f64,
}

impl RateParams {
    pub fn new(q_bob: f64, g: f64) -> Result<Self> {
        let rp = RateParams { q_bob, g };
        rp.validate()?;
        Ok(rp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_bob > 0.0 && self.q_bob <= 1.0) {
            return Err(domain(format!("q_bob must lie in (0, 1], got {}", self.q_bob)));
        }
        if !(self.g >= 1.0 && self.g.is_finite()) {
            return Err(domain(format!("g must be >= 1, got {}", self.g)));
        }
        if self.q_eve() > 1.0 + 1e-12 {
            return Err(domain(format!("q_eve = g * q_bob = {} exceeds 1", self.q_eve())));
        }
        Ok(())
    }

    pub fn q_eve(&self) -> f64 {
        self.g * self.q_bob
    }
}

/// `g` from the return-path loss, `10^(dB/10)`.
pub fn gap_from_back_channel_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityEstimate {
    pub i_ab: f64,
    pub i_ae: f64,
    /// `i_ab − i_ae` at `p_star`. Negative means the link is insecure.
    pub c_s: f64,
    pub p_star: f64,
    /// `Q_bob · [1 − h(e) − g·h(e_x + e_z)]`, the p = 1/2 evaluation.
    pub closed_form: f64,
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("p must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_sum_domain(e_x: f64, e_z: f64) -> Result<f64> {
    if e_x < 0.0 || e_z < 0.0 {
        return Err(domain("check error rates must be nonnegative"));
    }
    let s = e_x + e_z;
    if s > 0.5 {
        return Err(domain(format!("e_x + e_z = {s} exceeds 0.5")));
    }
    Ok(s)
}

/// `ξ = (1 − √((1−2p)² + (1−2e_x−2e_z)²[1−(1−2p)²])) / 2`.
pub fn xi(p: f64, e_x: f64, e_z: f64) -> Result<f64> {
    check_p(p)?;
    let s = check_sum_domain(e_x, e_z)?;
    if p == 0.5 {
        // The radicand collapses to (1 − 2s)², so ξ = s exactly.
        return Ok(s);
    }
    // Radicand = 1 − k with k = 16 p(1−p) s(1−s); rewrite to avoid the
    // cancellation in 1 − √(1 − k) for small k.
    let k = 16.0 * p * (1.0 - p) * s * (1.0 - s);
    let root = (1.0 - k).max(0.0).sqrt();
    Ok(k / (2.0 * (1.0 + root)))
}

/// `Q_eve · h(ξ)`.
pub fn eve_information(q_eve: f64, p: f64, rates: &ErrorRates) -> Result<f64> {
    if !(0.0..=1.0).contains(&q_eve) {
        return Err(domain(format!("q_eve must lie in [0, 1], got {q_eve}")));
    }
    Ok(q_eve * binary_entropy(xi(p, rates.e_x, rates.e_z)?)?)
}

/// `Q_bob · [h(p + e − 2pe) − h(e)]`.
pub fn main_information(q_bob: f64, p: f64, e: f64) -> Result<f64> {
    check_p(p)?;
    if !(0.0..=1.0).contains(&q_bob) {
        return Err(domain(format!("q_bob must lie in [0, 1], got {q_bob}")));
    }
    if !(0.0..=0.5).contains(&e) {
        return Err(domain(format!("e must lie in [0, 0.5], got {e}")));
    }
    let crossover = p + e - 2.0 * p * e;
    Ok(q_bob * (binary_entropy(crossover.clamp(0.0, 1.0))? - binary_entropy(e)?))
}

const P_GRID: usize = 1000;

/// Maximises `I(A:B) − I(A:E)` over `p` with a grid search and golden-section
/// refinement, and records the p = 1/2 closed form alongside.
pub fn secrecy_capacity(rp: &RateParams, rates: &ErrorRates) -> Result<SecurityEstimate> {
    rp.validate()?;
    rates.validate()?;
    check_sum_domain(rates.e_x, rates.e_z)?;
    let q_eve = rp.q_eve().min(1.0);

    // Per received pulse, so the search works on O(1) values.
    let gap = q_eve / rp.q_bob;
    let objective = |p: f64| -> f64 {
        let ab = main_information(1.0, p, rates.e).unwrap_or(f64::NEG_INFINITY);
        let ae = eve_information(1.0, p, rates).unwrap_or(f64::INFINITY);
        ab - gap * ae
    };

    let mut best_p = 0.5;
    let mut best = objective(0.5);
    for i in 0..=P_GRID {
        let p = i as f64 / P_GRID as f64;
        let v = objective(p);
        if v > best {
            best = v;
            best_p = p;
        }
    }

    let step = 1.0 / P_GRID as f64;
    let (p_star, refined) = golden_max(&objective, (best_p - step).max(0.0), (best_p + step).min(1.0), 60);
    let (p_star, value) = if refined > best {
        (p_star, refined)
    } else {
        (best_p, best)
    };

    let i_ab = main_information(rp.q_bob, p_star, rates.e)?;
    let i_ae = eve_information(q_eve, p_star, rates)?;
    let closed_form = rp.q_bob * (1.0 - binary_entropy(rates.e)? - rp.g * binary_entropy(rates.check_sum())?);
    Ok(SecurityEstimate {
        i_ab,
        i_ae,
        c_s: value * rp.q_bob,
        p_star,
        closed_form,
    })
}

/// Secrecy estimate with Alice fixed at p = 1/2, as the protocol runs.
pub fn secrecy_at_half(rp: &RateParams, rates: &ErrorRates) -> Result<SecurityEstimate> {
    rp.validate()?;
    rates.validate()?;
    check_sum_domain(rates.e_x, rates.e_z)?;
    let i_ab = main_information(rp.q_bob, 0.5, rates.e)?;
    let i_ae = eve_information(rp.q_eve().min(1.0), 0.5, rates)?;
    let closed_form = rp.q_bob * (1.0 - binary_entropy(rates.e)? - rp.g * binary_entropy(rates.check_sum())?);
    Ok(SecurityEstimate {
        i_ab,
        i_ae,
        c_s: i_ab - i_ae,
        p_star: 0.5,
        closed_form,
    })
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let p = 0.5 * (a + b);
    (p, f(p))
}

/// Overlaps of Eve's ancilla states that fix the Gram matrix:
/// `α = Im⟨ε01|ε00⟩`, `β = Im⟨ε10|ε11⟩`, `δ = ⟨ε01|ε10⟩ − ⟨ε00|ε11⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackOverlaps {
    pub alpha: f64,
    pub beta: f64,
    pub delta: Complex64,
}

impl AttackOverlaps {
    /// Overlaps with a real, nonnegative `δ`.
    pub fn new(alpha: f64, beta: f64, delta_mag: f64) -> Self {
        AttackOverlaps {
            alpha,
            beta,
            delta: Complex64::new(delta_mag, 0.0),
        }
    }

    pub fn delta_mag(&self) -> f64 {
        self.delta.norm()
    }

    /// `Δ1 = |α − β|`.
    pub fn delta1(&self) -> f64 {
        (self.alpha - self.beta).abs()
    }

    /// `Δ2 = √((α + β)² + |δ|²)`.
    pub fn delta2(&self) -> f64 {
        ((self.alpha + self.beta).powi(2) + self.delta.norm_sqr()).sqrt()
    }
}

pub type Matrix4c = [[Complex64; 4]; 4];

/// Gram matrix of the four states Eve can end up holding jointly with the
/// qubit. Hermitian with unit trace.
pub fn gram_matrix(p: f64, ov: &AttackOverlaps) -> Matrix4c {
    let s = (p * (1.0 - p)).sqrt();
    let z = Complex64::new(0.0, 0.0);
    let re = |x: f64| Complex64::new(x, 0.0);
    let im = |x: f64| Complex64::new(0.0, x);
    let d = ov.delta * s;
    let dc = ov.delta.conj() * s;
    let a = 2.0 * ov.alpha * s;
    let b = 2.0 * ov.beta * s;
    let g = [
        [re(p), z, im(a), d],
        [z, re(p), -dc, im(-b)],
        [im(-a), -d, re(1.0 - p), z],
        [dc, im(b), z, re(1.0 - p)],
    ];
    g.map(|row| row.map(|x| x * 0.5))
}

/// `λ = 1/4 ± ½ √(p(1−p)(Δ1 ± Δ2)² + (p − ½)²)`, all four sign choices,
/// sorted in descending order.
pub fn gram_eigenvalues(p: f64, ov: &AttackOverlaps) -> [f64; 4] {
    let (d1, d2) = (ov.delta1(), ov.delta2());
    let w = p * (1.0 - p);
    let c = (p - 0.5).powi(2);
    let r_plus = (w * (d1 + d2).powi(2) + c).sqrt();
    let r_minus = (w * (d1 - d2).powi(2) + c).sqrt();
    let mut ev = [
        0.25 + 0.5 * r_plus,
        0.25 + 0.5 * r_minus,
        0.25 - 0.5 * r_minus,
        0.25 - 0.5 * r_plus,
    ];
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `−Σ λ log2 λ`. Round-off negatives at the 1e-12 level count as zero.
pub fn von_neumann_entropy(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigenvalues {
        if l < -1e-12 {
            return Err(domain(format!("negative eigenvalue {l}")));
        }
        if l > 0.0 {
            s -= l * l.log2();
        }
    }
    Ok(s)
}

/// `S(ρ_ABE) = 1 + h(ξ)` at Eve's optimal attack.
pub fn entropy_rho_abe(p: f64, rates: &ErrorRates) -> Result<f64> {
    Ok(1.0 + binary_entropy(xi(p, rates.e_x, rates.e_z)?)?)
}

/// The maximising attack: `⟨ε00|ε01⟩ = ⟨ε11|ε10⟩ = 0`, `⟨ε10|ε01⟩ = e_z`,
/// `⟨ε00|ε11⟩ = 1 − 2e_x − e_z`, hence `Δ1 = 0`, `Δ2 = 1 − 2e_x − 2e_z`.
pub fn optimal_attack_overlaps(rates: &ErrorRates) -> Result<AttackOverlaps> {
    check_sum_domain(rates.e_x, rates.e_z)?;
    let e01_e10 = rates.e_z;
    let e00_e11 = 1.0 - 2.0 * rates.e_x - rates.e_z;
    Ok(AttackOverlaps {
        alpha: 0.0,
        beta: 0.0,
        delta: Complex64::new(e01_e10 - e00_e11, 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn numeric_eigenvalues(g: &Matrix4c) -> [f64; 4] {
        let m = Matrix4::from_fn(|i, j| g[i][j]);
        let eig = m.symmetric_eigen();
        let mut ev = [0.0; 4];
        for (k, v) in eig.eigenvalues.iter().enumerate() {
            ev[k] = *v;
        }
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    fn rates(e: f64, ex: f64, ez: f64) -> ErrorRates {
        ErrorRates::new(e, ex, ez).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.016).unwrap() - 0.1183).abs() < 1e-4);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn entropy_is_strictly_concave() {
        let n = 1000;
        let h: Vec<f64> = (1..n).map(|i| binary_entropy(i as f64 / n as f64).unwrap()).collect();
        for w in h.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] < 0.0);
        }
    }

    #[test]
    fn xi_examples() {
        assert_eq!(xi(0.5, 0.008, 0.008).unwrap(), 0.016);
        assert_eq!(xi(0.5, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(xi(0.0, 0.008, 0.008).unwrap(), 0.0);
        assert!(xi(0.5, 0.3, 0.3).is_err());
        assert!(xi(1.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn xi_matches_direct_formula() {
        for &(p, ex, ez) in &[
            (0.3, 0.01, 0.02),
            (0.9, 0.1, 0.2),
            (0.5001, 0.05, 0.05),
            (0.1, 0.25, 0.25),
        ] {
            let t: f64 = (1.0 - 2.0 * p) * (1.0 - 2.0 * p);
            let d: f64 = 1.0 - 2.0 * ex - 2.0 * ez;
            let direct = (1.0 - (t + d * d * (1.0 - t)).sqrt()) / 2.0;
            assert!((xi(p, ex, ez).unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn eve_information_examples() {
        let r = rates(0.006, 0.008, 0.008);
        let v = eve_information(2.57 * 0.003, 0.5, &r).unwrap();
        assert!((v - 9.1e-4).abs() / 9.1e-4 < 0.02, "{v}");
        assert_eq!(eve_information(0.0, 0.5, &r).unwrap(), 0.0);
        assert_eq!(eve_information(0.5, 0.5, &rates(0.01, 0.0, 0.0)).unwrap(), 0.0);
        assert!(eve_information(1.5, 0.5, &r).is_err());
    }

    #[test]
    fn main_information_examples() {
        let v = main_information(0.003, 0.5, 0.006).unwrap();
        assert!((v - 2.84e-3).abs() / 2.84e-3 < 0.01, "{v}");
        assert!((main_information(0.2, 0.5, 0.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(main_information(0.2, 0.0, 0.03).unwrap().abs() < 1e-15);
    }

    #[test]
    fn secrecy_capacity_operating_point() {
        let rp = RateParams::new(0.00309, 2.57).unwrap();
        let est = secrecy_capacity(&rp, &rates(0.006, 0.008, 0.008)).unwrap();
        assert!((est.c_s - 0.00184).abs() / 0.00184 < 0.10, "{est:?}");
        assert!((est.p_star - 0.5).abs() < 1e-3);
        assert!((est.c_s - est.closed_form).abs() < 1e-9);
        assert!(est.c_s <= est.i_ab);
    }

    #[test]
    fn secrecy_capacity_perfect_channel() {
        let rp = RateParams::new(0.01, 3.0).unwrap();
        let est = secrecy_capacity(&rp, &rates(0.0, 0.0, 0.0)).unwrap();
        assert!((est.c_s - 0.01).abs() < 1e-12);
        assert!((est.p_star - 0.5).abs() < 1e-9);
    }

    #[test]
    fn secrecy_capacity_under_full_disturbance() {
        for g in [1.0, 1.5, 2.57, 10.0] {
            let rp = RateParams::new(0.003, g).unwrap();
            let est = secrecy_at_half(&rp, &rates(0.006, 0.25, 0.25)).unwrap();
            assert!(est.c_s <= 0.0);
            assert!(est.closed_form <= 0.0);
        }
    }

    #[test]
    fn rate_params_validation() {
        assert!(RateParams::new(0.0, 2.0).is_err());
        assert!(RateParams::new(0.5, 0.9).is_err());
        assert!(RateParams::new(0.5, 3.0).is_err());
        assert!((gap_from_back_channel_db(4.1) - 2.57).abs() < 0.005);
    }

    #[test]
    fn gram_matrix_examples() {
        let ov = AttackOverlaps::new(0.2, -0.1, 0.3);
        let g = gram_matrix(1.0, &ov);
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expected = if i == j && i < 2 { 0.5 } else { 0.0 };
                assert!((v - Complex64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
        let g = gram_matrix(0.5, &AttackOverlaps::new(0.0, 0.0, 0.0));
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expected = if i == j { 0.25 } else { 0.0 };
                assert!((v - Complex64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gram_matrix_is_hermitian_with_unit_trace() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let p: f64 = rng.random();
            let ov = AttackOverlaps {
                alpha: rng.random_range(-0.5..0.5),
                beta: rng.random_range(-0.5..0.5),
                delta: Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..6.3)),
            };
            let g = gram_matrix(p, &ov);
            let tr: Complex64 = (0..4).map(|i| g[i][i]).sum();
            assert!((tr - Complex64::new(1.0, 0.0)).norm() < 1e-14);
            for (i, row) in g.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    assert!((v - g[j][i].conj()).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn gram_eigenvalue_examples() {
        let ev = gram_eigenvalues(0.5, &AttackOverlaps::new(0.0, 0.0, 0.0));
        assert!(ev.iter().all(|v| (v - 0.25).abs() < 1e-15));
        // Δ1 = 0, Δ2 = 1
        let ev = gram_eigenvalues(0.5, &AttackOverlaps::new(0.0, 0.0, 1.0));
        let want = [0.5, 0.5, 0.0, 0.0];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_spectrum_matches_numeric_including_complex_delta() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        while checked < 500 {
            let ov = AttackOverlaps {
                alpha: rng.random_range(-0.5..0.5),
                beta: rng.random_range(-0.5..0.5),
                delta: Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..6.3)),
            };
            if ov.delta1() + ov.delta2() > 1.0 {
                continue;
            }
            let p: f64 = rng.random();
            let closed = gram_eigenvalues(p, &ov);
            let numeric = numeric_eigenvalues(&gram_matrix(p, &ov));
            for (a, b) in closed.iter().zip(numeric) {
                assert!((a - b).abs() < 1e-10, "{closed:?} vs {numeric:?}");
            }
            checked += 1;
        }
    }

    #[test]
    fn entropy_rho_abe_examples() {
        assert!((entropy_rho_abe(0.5, &rates(0.0, 0.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        let v = entropy_rho_abe(0.5, &rates(0.0, 0.008, 0.008)).unwrap();
        assert!((v - 1.1183).abs() < 1e-4);
    }

    #[test]
    fn entropy_rho_abe_is_spectrum_entropy_at_optimal_attack() {
        for &(p, ex, ez) in &[(0.5, 0.008, 0.008), (0.3, 0.02, 0.05), (0.8, 0.1, 0.1), (0.5, 0.0, 0.0)] {
            let r = rates(0.0, ex, ez);
            let ov = optimal_attack_overlaps(&r).unwrap();
            let s = von_neumann_entropy(&gram_eigenvalues(p, &ov)).unwrap();
            assert!((s - entropy_rho_abe(p, &r).unwrap()).abs() < 1e-12, "{p} {ex} {ez}");
        }
    }

    #[test]
    fn optimal_attack_examples() {
        let ov = optimal_attack_overlaps(&rates(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(ov.delta1(), 0.0);
        assert!((ov.delta2() - 1.0).abs() < 1e-15);
        let ov = optimal_attack_overlaps(&rates(0.0, 0.008, 0.008)).unwrap();
        assert_eq!(ov.delta1(), 0.0);
        assert!((ov.delta2() - 0.968).abs() < 1e-12);
        assert!(optimal_attack_overlaps(&rates(0.0, 0.3, 0.3)).is_err());
    }

    #[test]
    fn optimal_attack_recovers_eve_bound_at_half() {
        for &(ex, ez) in &[(0.008, 0.008), (0.01, 0.03), (0.1, 0.05)] {
            let r = rates(0.0, ex, ez);
            let ov = optimal_attack_overlaps(&r).unwrap();
            let s = von_neumann_entropy(&gram_eigenvalues(0.5, &ov)).unwrap();
            let bound = s - 1.0;
            assert!((bound - binary_entropy(ex + ez).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn eve_bound_monotone_in_check_errors() {
        let mut last = -1.0;
        for i in 0..=250 {
            let s = i as f64 / 1000.0;
            let v = eve_information(0.01, 0.5, &rates(0.0, s, s)).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    proptest! {
        #[test]
        fn entropy_symmetric(x in 0.0f64..=1.0) {
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn xi_reduces_at_half(ex in 0.0f64..0.25, ez in 0.0f64..0.25) {
            prop_assert_eq!(xi(0.5, ex, ez).unwrap(), ex + ez);
        }

        #[test]
        fn eigenvalues_valid_and_swap_invariant(
            p in 0.0f64..=1.0,
            a in -0.5f64..0.5,
            b in -0.5f64..0.5,
            dm in 0.0f64..1.0,
        ) {
            let ov = AttackOverlaps::new(a, b, dm);
            prop_assume!(ov.delta1() + ov.delta2() <= 1.0);
            let ev = gram_eigenvalues(p, &ov);
            prop_assert!(ev.iter().all(|&v| v >= -1e-12));
            prop_assert!((ev.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let swapped = gram_eigenvalues(p, &AttackOverlaps::new(b, a, dm));
            for (x, y) in ev.iter().zip(swapped) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }

        #[test]
        fn optimal_entropy_dominates_feasible_attacks(
            p in 0.0f64..=1.0,
            ex in 0.0f64..0.2,
            ez in 0.0f64..0.2,
            u in 0.0f64..=1.0,
            v in 0.0f64..=1.0,
        ) {
            let r = ErrorRates::new(0.0, ex, ez).unwrap();
            let floor = 1.0 - 2.0 * ex - 2.0 * ez;
            // Δ2 ≥ floor, Δ1 + Δ2 ≤ 1
            let d2 = floor + u * (1.0 - floor);
            let d1 = v * (1.0 - d2);
            let ov = AttackOverlaps::new(d1 / 2.0, -d1 / 2.0, d2);
            prop_assert!((ov.delta1() - d1).abs() < 1e-12 && (ov.delta2() - d2).abs() < 1e-12);
            let s = von_neumann_entropy(&gram_eigenvalues(p, &ov)).unwrap();
            prop_assert!(s <= entropy_rho_abe(p, &r).unwrap() + 1e-12);
        }
    }
}
