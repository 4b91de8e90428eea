//! `P_i = (1 - q_i) P̃_i`, where `P̃_i` is the probability that the infection
//! reaches `i` given that `i` is susceptible, and the first-order split
//! `P̃_j = P̃_j|_{q_i = 1} + (1 - q_i) Q_ji`.

use crate::error::{Error, Result};
use crate::graph::Network;

use super::{exact, AttackVector, DefenseVector, MAX_EXACT_NODES};

fn enumerate_checked(net: &Network, q: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
    if net.n() > MAX_EXACT_NODES {
        return Err(Error::TooLargeForExact {
            n: net.n(),
            max: MAX_EXACT_NODES,
        });
    }
    Ok(exact::enumerate(net, q, phi))
}

fn with(q: &[f64], i: usize, value: f64) -> Vec<f64> {
    let mut out = q.to_vec();
    out[i] = value;
    out
}

/// `P̃_i`: the exact infection probability of `i` with `q_i` set to 0.
pub fn reach_probability(
    net: &Network,
    q: &DefenseVector,
    phi: &AttackVector,
    i: usize,
) -> Result<f64> {
    net.check_node(i)?;
    net.check_len(q.len())?;
    net.check_len(phi.len())?;
    Ok(enumerate_checked(net, &with(q.as_slice(), i, 0.0), phi.as_slice())?[i])
}

/// Returns `(P̃_i, Q_ji)`.
pub fn reach_decomposition(
    net: &Network,
    q: &DefenseVector,
    phi: &AttackVector,
    i: usize,
    j: usize,
) -> Result<(f64, f64)> {
    net.check_node(j)?;
    if i == j {
        return Err(Error::InvalidArgument("Q_ji needs i != j".into()));
    }
    let p_tilde_i = reach_probability(net, q, phi, i)?;
    let q_j = with(q.as_slice(), j, 0.0);
    let open = enumerate_checked(net, &with(&q_j, i, 0.0), phi.as_slice())?[j];
    let shut = enumerate_checked(net, &with(&q_j, i, 1.0), phi.as_slice())?[j];
    Ok((p_tilde_i, open - shut))
}
