//! Risk family `R^{(f,L)}_i = E[f(N^L_i)]`.
//!
//! `N^L_i` counts walks from `i` to the seed in `T(X)` of length at most `L`,
//! including the zero-length walk when `i` is the (susceptible) seed, so that
//! `step` converges to the infection probability as `L` grows.

use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Network;

use super::monte_carlo::{chunk_rng, chunks, McEstimate};
use super::{AttackVector, DefenseVector, RiskKind, RiskVector};

/// Non-decreasing activation functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `1[N >= 1]`
    Step,
    Linear,
    Log1p,
    Sqrt,
    /// `min(N, k)`
    Cap(f64),
}

impl Activation {
    pub fn apply(&self, count: f64) -> f64 {
        match *self {
            Activation::Step => (count >= 1.0) as u8 as f64,
            Activation::Linear => count,
            Activation::Log1p => count.ln_1p(),
            Activation::Sqrt => count.sqrt(),
            Activation::Cap(k) => count.min(k),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(Activation::Step),
            "linear" => Ok(Activation::Linear),
            "log1p" => Ok(Activation::Log1p),
            "sqrt" => Ok(Activation::Sqrt),
            _ => match s.strip_prefix("cap:").map(str::parse::<f64>) {
                Some(Ok(k)) if k >= 0.0 => Ok(Activation::Cap(k)),
                _ => Err(Error::UnknownActivation(s.to_string())),
            },
        }
    }
}

/// Monte Carlo estimate of `Σ_s w_s E_X[f(N^L_is)]`. Seeds are drawn with
/// probability proportional to `|w_s|` and reweighted by `sign(w_s) Σ|w|`.
pub(crate) fn estimate(
    net: &Network,
    q: &[f64],
    weights: &[f64],
    f: Activation,
    length: usize,
    samples: usize,
    seed: u64,
) -> McEstimate {
    let n = net.n();
    let mass: f64 = weights.iter().map(|w| w.abs()).sum();
    if mass == 0.0 {
        return McEstimate {
            mean: vec![0.0; n],
            std_err: vec![0.0; n],
        };
    }
    let abs: Vec<f64> = weights.iter().map(|w| w.abs()).collect();
    let seeds = WeightedIndex::new(&abs).expect("positive mass");
    let partial: Vec<(Vec<f64>, Vec<f64>)> = chunks(samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut sum = vec![0.0; n];
            let mut sq = vec![0.0; n];
            let mut x = vec![false; n];
            let mut count = vec![0.0; n];
            let mut v = vec![0.0; n];
            let mut next = vec![0.0; n];
            for _ in 0..len {
                for (xi, &qi) in x.iter_mut().zip(q) {
                    *xi = rng.random::<f64>() >= qi;
                }
                let s = seeds.sample(&mut rng);
                let scale = weights[s].signum() * mass;
                count.fill(0.0);
                if x[s] {
                    v.fill(0.0);
                    v[s] = 1.0;
                    count[s] = 1.0;
                    for _ in 0..length {
                        for i in 0..n {
                            next[i] = if x[i] {
                                net.neighbors(i)
                                    .iter()
                                    .filter(|&&k| x[k])
                                    .map(|&k| v[k])
                                    .sum()
                            } else {
                                0.0
                            };
                        }
                        std::mem::swap(&mut v, &mut next);
                        for i in 0..n {
                            count[i] += v[i];
                        }
                    }
                }
                for i in 0..n {
                    let y = scale * f.apply(count[i]);
                    sum[i] += y;
                    sq[i] += y * y;
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for (s, q2) in &partial {
        for i in 0..n {
            sum[i] += s[i];
            sq[i] += q2[i];
        }
    }
    let m = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let std_err = (0..n)
        .map(|i| {
            let var = if samples > 1 {
                ((sq[i] / m - mean[i] * mean[i]) * m / (m - 1.0)).max(0.0)
            } else {
                0.0
            };
            (var / m).sqrt()
        })
        .collect();
    McEstimate { mean, std_err }
}

pub fn activation_risk(
    net: &Network,
    q: &DefenseVector,
    phi: &AttackVector,
    function: &str,
    length: usize,
    samples: usize,
    seed: u64,
) -> Result<RiskVector> {
    net.check_len(q.len())?;
    net.check_len(phi.len())?;
    let f: Activation = function.parse()?;
    if samples == 0 || length == 0 {
        return Err(Error::InvalidArgument(
            "activation needs samples, length >= 1".into(),
        ));
    }
    let est = estimate(net, q.as_slice(), phi.as_slice(), f, length, samples, seed);
    Ok(RiskVector {
        values: est.mean,
        kind: RiskKind::Activation,
        std_err: Some(est.std_err),
    })
}
