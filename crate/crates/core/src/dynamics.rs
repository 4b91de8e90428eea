//! Discrete-time contagion used to validate static allocations.
//!
//! Every node draws one `u ~ U(0, 1)` per step. An infected node stays
//! infected iff `γ - u > 0`; a susceptible node becomes infected iff
//! `β_i / d_i · Σ_j A_ij σ_j - Z > 0` with `Z = τ δ + (1 - τ) u`, where
//! `β_i = (1 - q_i) β` when `rescale_beta` is set. `τ = 0` gives SIS (SI when
//! `γ = 1`) and `τ = 1` the threshold model.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::risk::{AttackVector, DefenseVector};

fn default_true() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub beta: f64,
    /// Probability that an infected node stays infected; 1 gives SI.
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub tau: f64,
    pub horizon: usize,
    #[serde(default = "default_true")]
    pub rescale_beta: bool,
}

impl DynamicsParams {
    /// SI dynamics: no recovery, uniform noise threshold.
    pub fn si(beta: f64, horizon: usize) -> Self {
        Self {
            beta,
            gamma: 1.0,
            delta: 0.0,
            tau: 0.0,
            horizon,
            rescale_beta: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("tau", self.tau),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Infected fraction at `t = 0..=T`.
    pub fractions: Vec<f64>,
    pub final_state: Vec<bool>,
    /// Mean fraction over the last `max(10, T / 10)` steps.
    pub asymptotic: f64,
}

impl Trajectory {
    fn new(fractions: Vec<f64>, final_state: Vec<bool>) -> Self {
        let horizon = fractions.len() - 1;
        let tail = 10.max(horizon / 10).min(fractions.len());
        let asymptotic = fractions[fractions.len() - tail..].iter().sum::<f64>() / tail as f64;
        Self {
            fractions,
            final_state,
            asymptotic,
        }
    }
}

/// Mean over an ensemble of runs, with the runs kept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub mean_fractions: Vec<f64>,
    pub asymptotic: f64,
    pub runs: Vec<Trajectory>,
}

impl Ensemble {
    fn from_runs(runs: Vec<Trajectory>) -> Self {
        let len = runs[0].fractions.len();
        let count = runs.len() as f64;
        let mut mean_fractions = vec![0.0; len];
        for r in &runs {
            for (m, f) in mean_fractions.iter_mut().zip(&r.fractions) {
                *m += f;
            }
        }
        mean_fractions.iter_mut().for_each(|m| *m /= count);
        let asymptotic = runs.iter().map(|r| r.asymptotic).sum::<f64>() / count;
        Self {
            mean_fractions,
            asymptotic,
            runs,
        }
    }

    pub fn per_run_asymptotic(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.asymptotic).collect()
    }
}

fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Separate streams for budget reshuffles, so the contagion draws stay
/// common across compared strategies.
fn shuffle_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED_5EED_5EED);
    rng.set_stream(run as u64);
    rng
}

fn check_inputs(net: &Network, q: &DefenseVector, phi: &AttackVector) -> Result<()> {
    net.check_len(q.len())?;
    net.check_len(phi.len())
}

fn initial_with(q: &[f64], phi: &[f64], rng: &mut impl Rng) -> Vec<bool> {
    q.iter()
        .zip(phi)
        .map(|(qi, pi)| rng.random::<f64>() < pi * (1.0 - qi))
        .collect()
}

/// Node `i` starts infected with probability `φ_i (1 - q_i)`, independently.
pub fn sample_initial(
    net: &Network,
    q: &DefenseVector,
    phi: &AttackVector,
    seed: u64,
) -> Result<Vec<bool>> {
    check_inputs(net, q, phi)?;
    Ok(initial_with(
        q.as_slice(),
        phi.as_slice(),
        &mut run_rng(seed, 0),
    ))
}

fn step_with(
    net: &Network,
    state: &[bool],
    q: &[f64],
    params: &DynamicsParams,
    rng: &mut impl Rng,
) -> Vec<bool> {
    (0..net.n())
        .map(|i| {
            let u: f64 = rng.random();
            if state[i] {
                return params.gamma - u > 0.0;
            }
            let d = net.degree(i);
            let pressure = if d == 0 {
                0.0
            } else {
                let beta = if params.rescale_beta {
                    (1.0 - q[i]) * params.beta
                } else {
                    params.beta
                };
                let infected = net.neighbors(i).iter().filter(|&&j| state[j]).count();
                beta * infected as f64 / d as f64
            };
            pressure - (params.tau * params.delta + (1.0 - params.tau) * u) > 0.0
        })
        .collect()
}

/// One transition of the chain.
pub fn step(
    net: &Network,
    state: &[bool],
    q: &DefenseVector,
    params: &DynamicsParams,
    rng: &mut impl Rng,
) -> Result<Vec<bool>> {
    net.check_len(state.len())?;
    net.check_len(q.len())?;
    Ok(step_with(net, state, q.as_slice(), params, rng))
}

fn fraction(state: &[bool]) -> f64 {
    state.iter().filter(|&&s| s).count() as f64 / state.len() as f64
}

fn run_with(
    net: &Network,
    q: &[f64],
    phi: &[f64],
    params: &DynamicsParams,
    rng: &mut ChaCha8Rng,
) -> Trajectory {
    let mut state = initial_with(q, phi, rng);
    let mut fractions = Vec::with_capacity(params.horizon + 1);
    fractions.push(fraction(&state));
    for _ in 0..params.horizon {
        state = step_with(net, &state, q, params, rng);
        fractions.push(fraction(&state));
    }
    Trajectory::new(fractions, state)
}

/// Runs `runs` independent chains; run `r` uses RNG stream `r` of `seed`.
pub fn simulate(
    net: &Network,
    q: &DefenseVector,
    phi: &AttackVector,
    params: &DynamicsParams,
    runs: usize,
    seed: u64,
) -> Result<Ensemble> {
    check_inputs(net, q, phi)?;
    params.validate()?;
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be >= 1".into()));
    }
    let trajectories = (0..runs)
        .into_par_iter()
        .map(|r| {
            run_with(
                net,
                q.as_slice(),
                phi.as_slice(),
                params,
                &mut run_rng(seed, r),
            )
        })
        .collect();
    Ok(Ensemble::from_runs(trajectories))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reshuffle {
    /// Random permutation of the entries of `q`.
    #[default]
    Permutation,
    /// Uniform point on the simplex scaled to `Σ q`, clamped to `[0, 1]`.
    Redistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub none: Ensemble,
    pub optimal: Ensemble,
    pub reshuffled: Ensemble,
}

impl Comparison {
    pub fn strategies(&self) -> [(&'static str, &Ensemble); 3] {
        [
            ("none", &self.none),
            ("optimal", &self.optimal),
            ("reshuffled", &self.reshuffled),
        ]
    }
}

fn reshuffle(q: &[f64], how: Reshuffle, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match how {
        Reshuffle::Permutation => {
            let mut out = q.to_vec();
            out.shuffle(rng);
            out
        }
        Reshuffle::Redistribution => {
            let budget: f64 = q.iter().sum();
            let e: Vec<f64> = q
                .iter()
                .map(|_| -(1.0 - rng.random::<f64>()).ln())
                .collect();
            let total: f64 = e.iter().sum();
            e.iter()
                .map(|x| (budget * x / total).clamp(0.0, 1.0))
                .collect()
        }
    }
}

/// Simulates no protection, `budget_q`, and a fresh reshuffle of `budget_q`
/// per run. All three strategies of run `r` consume the same uniforms.
pub fn compare_strategies(
    net: &Network,
    budget_q: &DefenseVector,
    phi: &AttackVector,
    params: &DynamicsParams,
    runs: usize,
    seed: u64,
    how: Reshuffle,
) -> Result<Comparison> {
    check_inputs(net, budget_q, phi)?;
    params.validate()?;
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be >= 1".into()));
    }
    let zero = vec![0.0; net.n()];
    let q = budget_q.as_slice();
    let phi = phi.as_slice();
    let triples: Vec<[Trajectory; 3]> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let shuffled = reshuffle(q, how, &mut shuffle_rng(seed, r));
            [
                run_with(net, &zero, phi, params, &mut run_rng(seed, r)),
                run_with(net, q, phi, params, &mut run_rng(seed, r)),
                run_with(net, &shuffled, phi, params, &mut run_rng(seed, r)),
            ]
        })
        .collect();
    let mut split: [Vec<Trajectory>; 3] = Default::default();
    for triple in triples {
        for (bucket, t) in split.iter_mut().zip(triple) {
            bucket.push(t);
        }
    }
    let [none, optimal, reshuffled] = split.map(Ensemble::from_runs);
    Ok(Comparison {
        none,
        optimal,
        reshuffled,
    })
}

/// `t,mean_fraction` rows.
pub fn trajectory_csv(ensemble: &Ensemble) -> String {
    let mut out = String::from("t,mean_fraction\n");
    for (t, f) in ensemble.mean_fractions.iter().enumerate() {
        out.push_str(&format!("{t},{f}\n"));
    }
    out
}

/// `t,mean_fraction,strategy` rows, one block per strategy.
pub fn comparison_csv(cmp: &Comparison) -> String {
    let mut out = String::from("t,mean_fraction,strategy\n");
    for (name, ens) in cmp.strategies() {
        for (t, f) in ens.mean_fractions.iter().enumerate() {
            out.push_str(&format!("{t},{f},{name}\n"));
        }
    }
    out
}
