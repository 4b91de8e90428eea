use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Network;

use super::{AttackVector, DefenseVector, RiskKind, RiskVector};

/// Samples per RNG stream. Sample `m` of a run always comes from stream
/// `m / CHUNK`, so results do not depend on the worker count.
pub(crate) const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

pub(crate) fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// `(chunk index, samples in chunk)` covering `samples` draws.
pub(crate) fn chunks(samples: usize) -> Vec<(usize, usize)> {
    (0..samples.div_ceil(CHUNK))
        .map(|c| (c, CHUNK.min(samples - c * CHUNK)))
        .collect()
}

fn draw_susceptible(rng: &mut ChaCha8Rng, q: &[f64], x: &mut [bool]) {
    for (xi, &qi) in x.iter_mut().zip(q) {
        *xi = rng.random::<f64>() >= qi;
    }
}

/// Marks the component of `s` in the susceptible subgraph, writing `mark`
/// into `seen`. Returns the visited nodes through `stack`-backed `out`.
fn flood(net: &Network, x: &[bool], s: usize, seen: &mut [u32], mark: u32, out: &mut Vec<usize>) {
    out.clear();
    if !x[s] {
        return;
    }
    seen[s] = mark;
    out.push(s);
    let mut head = 0;
    while head < out.len() {
        let v = out[head];
        head += 1;
        for &w in net.neighbors(v) {
            if x[w] && seen[w] != mark {
                seen[w] = mark;
                out.push(w);
            }
        }
    }
}

/// Samples `(s, X)` from the joint law and averages the infected-set
/// indicators. Standard errors are the binomial `sqrt(p (1 - p) / N)`.
pub fn infection_probability_mc(
    net: &Network,
    q: &DefenseVector,
    phi: &AttackVector,
    samples: usize,
    seed: u64,
) -> Result<RiskVector> {
    net.check_len(q.len())?;
    net.check_len(phi.len())?;
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "monte_carlo needs samples >= 1".into(),
        ));
    }
    let n = net.n();
    let q = q.as_slice();
    let seeds =
        WeightedIndex::new(phi.as_slice()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let partial: Vec<Vec<f64>> = chunks(samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut hits = vec![0.0; n];
            let mut x = vec![false; n];
            let mut seen = vec![0u32; n];
            let mut infected = Vec::with_capacity(n);
            for m in 0..len {
                draw_susceptible(&mut rng, q, &mut x);
                let s = seeds.sample(&mut rng);
                flood(net, &x, s, &mut seen, m as u32 + 1, &mut infected);
                for &v in &infected {
                    hits[v] += 1.0;
                }
            }
            hits
        })
        .collect();
    let mut mean = vec![0.0; n];
    for hits in &partial {
        for (m, h) in mean.iter_mut().zip(hits) {
            *m += h;
        }
    }
    let total = samples as f64;
    mean.iter_mut().for_each(|m| *m /= total);
    let std_err = mean
        .iter()
        .map(|p| (p * (1.0 - p) / total).sqrt())
        .collect();
    Ok(RiskVector {
        values: mean,
        kind: RiskKind::Probability,
        std_err: Some(std_err),
    })
}

/// Estimates `Σ_s w_s P(i ~ s in T(X))` by sampling `X` only; the seed is
/// integrated out exactly through the component weight sums.
pub(crate) fn component_estimate(
    net: &Network,
    q: &[f64],
    weights: &[f64],
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let n = net.n();
    let partial: Vec<Vec<f64>> = chunks(samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut acc = vec![0.0; n];
            let mut x = vec![false; n];
            for _ in 0..len {
                draw_susceptible(&mut rng, q, &mut x);
                let labels = net.components_where(&x);
                let mut comp = vec![0.0; n];
                for s in 0..n {
                    if x[s] {
                        comp[labels[s] as usize] += weights[s];
                    }
                }
                for i in 0..n {
                    if x[i] {
                        acc[i] += comp[labels[i] as usize];
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; n];
    for acc in &partial {
        for (o, a) in out.iter_mut().zip(acc) {
            *o += a;
        }
    }
    out.iter_mut().for_each(|o| *o /= samples as f64);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::infection_probability_exact;

    #[test]
    fn immune_network_is_never_infected() {
        let net = Network::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let r = infection_probability_mc(
            &net,
            &DefenseVector::ones(3),
            &AttackVector::uniform(3),
            1000,
            1,
        )
        .unwrap();
        assert_eq!(r.values, vec![0.0; 3]);
    }

    #[test]
    fn k2_estimate() {
        let net = Network::from_edges(2, &[(0, 1)]).unwrap();
        let q = DefenseVector::new(vec![0.5, 0.5]).unwrap();
        let r = infection_probability_mc(&net, &q, &AttackVector::uniform(2), 100_000, 9).unwrap();
        assert!((r.values[0] - 0.375).abs() < 0.005);
        assert!((r.values[1] - 0.375).abs() < 0.005);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let net = Network::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let q = DefenseVector::new(vec![0.1, 0.4, 0.2, 0.3]).unwrap();
        let phi = AttackVector::uniform(4);
        let a = infection_probability_mc(&net, &q, &phi, 5000, 3).unwrap();
        let b = infection_probability_mc(&net, &q, &phi, 5000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn component_estimate_tracks_exact() {
        let net =
            Network::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]).unwrap();
        let q = DefenseVector::new(vec![0.1, 0.5, 0.3, 0.2, 0.6]).unwrap();
        let phi = AttackVector::new(vec![0.4, 0.1, 0.1, 0.2, 0.2]).unwrap();
        let exact = infection_probability_exact(&net, &q, &phi).unwrap();
        let est = component_estimate(&net, q.as_slice(), phi.as_slice(), 50_000, 5);
        for (a, b) in exact.values.iter().zip(&est) {
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
    }
}
