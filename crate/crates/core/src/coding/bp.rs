//! Sum-product belief propagation in the LLR domain, flooding schedule.

use serde::{Deserialize, Serialize};

use super::code::{extract_info, WiretapCode};
use super::spread::{LlrVector, LLR_CLAMP};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    /// Systematic part of the final hard decision.
    pub u: Vec<u8>,
    pub codeword: Vec<u8>,
    /// Syndrome was zero on exit.
    pub converged: bool,
    pub iterations: usize,
}

/// Decodes `llrs` on the code's parity graph, stopping as soon as the hard
/// decision satisfies every check. Zero iterations means the channel LLRs
/// were already a codeword.
pub fn bp_decode(llrs: &LlrVector, code: &WiretapCode, max_iters: usize) -> Result<DecodeOutcome> {
    let h = code.parity();
    if llrs.values.len() != h.n_vars {
        return Err(Error::LengthMismatch {
            what: "LLR vector",
            expected: h.n_vars,
            got: llrs.values.len(),
        });
    }
    if max_iters == 0 {
        return Err(Error::Config("max_iters must be >= 1".into()));
    }

    let channel: Vec<f64> = llrs.values.iter().map(|x| x.clamp(-LLR_CLAMP, LLR_CLAMP)).collect();

    // Edges are numbered check-major; var_edges maps each variable to its
    // edge ids.
    let mut edge_var = Vec::with_capacity(h.n_edges());
    let mut check_start = Vec::with_capacity(h.n_checks + 1);
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); h.n_vars];
    for vars in &h.check_vars {
        check_start.push(edge_var.len());
        for &v in vars {
            var_edges[v].push(edge_var.len());
            edge_var.push(v);
        }
    }
    check_start.push(edge_var.len());

    let mut v2c: Vec<f64> = edge_var.iter().map(|&v| channel[v]).collect();
    let mut c2v = vec![0.0f64; edge_var.len()];
    let mut hard: Vec<u8> = channel.iter().map(|&x| (x < 0.0) as u8).collect();

    if h.is_codeword(&hard) {
        return Ok(finish(hard, true, 0, code));
    }

    let mut tanh_buf = Vec::new();
    let mut suffix = Vec::new();
    for it in 1..=max_iters {
        for c in 0..h.n_checks {
            let (a, b) = (check_start[c], check_start[c + 1]);
            tanh_buf.clear();
            tanh_buf.extend(v2c[a..b].iter().map(|&m| (0.5 * m).tanh()));
            suffix.clear();
            suffix.resize(b - a + 1, 1.0);
            for k in (0..b - a).rev() {
                suffix[k] = suffix[k + 1] * tanh_buf[k];
            }
            let mut prefix = 1.0;
            for k in 0..b - a {
                let prod = (prefix * suffix[k + 1]).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                c2v[a + k] = (2.0 * prod.atanh()).clamp(-LLR_CLAMP, LLR_CLAMP);
                prefix *= tanh_buf[k];
            }
        }

        for (v, edges) in var_edges.iter().enumerate() {
            let total = channel[v] + edges.iter().map(|&e| c2v[e]).sum::<f64>();
            for &e in edges {
                v2c[e] = (total - c2v[e]).clamp(-LLR_CLAMP, LLR_CLAMP);
            }
            hard[v] = (total < 0.0) as u8;
        }

        if h.is_codeword(&hard) {
            return Ok(finish(hard, true, it, code));
        }
    }
    Ok(finish(hard, false, max_iters, code))
}

fn finish(codeword: Vec<u8>, converged: bool, iterations: usize, code: &WiretapCode) -> DecodeOutcome {
    DecodeOutcome {
        u: extract_info(&codeword, code),
        codeword,
        converged,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::code::{build_code, ldpc_encode, CodeParams};
    use crate::coding::spread::{compute_llrs, spread, ChipFrame};
    use rand::{Rng, SeedableRng};

    #[test]
    fn noiseless_decodes_immediately() {
        let code = build_code(CodeParams {
            k_u: 656,
            k_r: 600,
            n_spread: 4,
            ..CodeParams::nominal()
        })
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let u: Vec<u8> = (0..656).map(|_| rng.random::<bool>() as u8).collect();
        let v = ldpc_encode(&u, &code).unwrap();
        let frame = ChipFrame::full(spread(&v, &code, 0).unwrap());
        let llr = compute_llrs(&frame, 0.006, &code, 0).unwrap();
        let out = bp_decode(&llr, &code, 100).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
        assert_eq!(out.u, u);
    }

    #[test]
    fn corrects_erasures_and_flips() {
        let code = build_code(CodeParams {
            l: 512,
            k_u: 256,
            k_r: 16,
            n_spread: 1,
            seed: 2,
        })
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut ok = 0;
        for _ in 0..50 {
            let u: Vec<u8> = (0..256).map(|_| rng.random::<bool>() as u8).collect();
            let v = ldpc_encode(&u, &code).unwrap();
            let values = v
                .iter()
                .map(|&b| {
                    if rng.random_bool(0.2) {
                        0.0
                    } else {
                        let s = if b == 0 { 4.0 } else { -4.0 };
                        if rng.random_bool(0.01) {
                            -s
                        } else {
                            s
                        }
                    }
                })
                .collect();
            let out = bp_decode(&LlrVector { values }, &code, 100).unwrap();
            if out.converged && out.u == u {
                ok += 1;
            }
        }
        assert!(ok >= 48, "{ok}/50");
    }

    #[test]
    fn reports_non_convergence() {
        let code = build_code(CodeParams {
            l: 64,
            k_u: 32,
            k_r: 4,
            n_spread: 1,
            seed: 3,
        })
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = bp_decode(&LlrVector { values }, &code, 5).unwrap();
        if !out.converged {
            assert_eq!(out.iterations, 5);
        }
        assert!(bp_decode(&LlrVector { values: vec![0.0; 63] }, &code, 5).is_err());
        assert!(bp_decode(&LlrVector { values: vec![0.0; 64] }, &code, 0).is_err());
    }
}
