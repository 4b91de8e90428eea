//! Contagion semantics and node risk measures.
//!
//! An attack picks a seed `s ~ φ`; every node is independently susceptible
//! with probability `1 - q_i`. The infection reaches exactly the connected
//! component of the seed in the subgraph induced by susceptible nodes (empty
//! when the seed itself is immune).
//!
//! Every risk measure here is linear in the seed weights, so the same
//! routines evaluate `P_i(q, φ)` for a distribution and `P_i(q, η)` for an
//! arbitrary real value profile.

mod activation;
mod decomposition;
mod exact;
mod monte_carlo;
mod walks;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Network;

pub use activation::{activation_risk, Activation};
pub use decomposition::{reach_decomposition, reach_probability};
pub use exact::{for_each_state, infection_probability_exact, MAX_EXACT_NODES};
pub use monte_carlo::{infection_probability_mc, McEstimate};
pub use walks::{walk_count_risk, WalkIndex, MAX_EXACT_WALK_LENGTH};

/// Defender investment, one entry in `[0, 1]` per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DefenseVector(Vec<f64>);

impl DefenseVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if let Some((i, x)) = q
            .iter()
            .enumerate()
            .find(|(_, x)| !(0.0..=1.0).contains(*x))
        {
            return Err(Error::InvalidArgument(format!(
                "q[{i}] = {x} outside [0, 1]"
            )));
        }
        Ok(Self(q))
    }

    /// Clamps every entry into `[0, 1]`; NaN becomes 0.
    pub fn clamped(q: &[f64]) -> Self {
        Self(
            q.iter()
                .map(|&x| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for DefenseVector {
    type Error = Error;
    fn try_from(q: Vec<f64>) -> Result<Self> {
        Self::new(q)
    }
}

impl From<DefenseVector> for Vec<f64> {
    fn from(q: DefenseVector) -> Self {
        q.0
    }
}

/// Tolerance on `Σ φ_i = 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Attack distribution over seed nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AttackVector(Vec<f64>);

impl AttackVector {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if let Some((i, x)) = phi
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "phi[{i}] = {x} is not a nonnegative number"
            )));
        }
        let total: f64 = phi.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "phi sums to {total}, expected 1"
            )));
        }
        Ok(Self(phi))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point(n: usize, seed: usize) -> Self {
        let mut phi = vec![0.0; n];
        phi[seed] = 1.0;
        Self(phi)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for AttackVector {
    type Error = Error;
    fn try_from(phi: Vec<f64>) -> Result<Self> {
        Self::new(phi)
    }
}

impl From<AttackVector> for Vec<f64> {
    fn from(phi: AttackVector) -> Self {
        phi.0
    }
}

/// Susceptibility realization: `true` means susceptible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SusceptibilityState(pub Vec<bool>);

impl SusceptibilityState {
    pub fn all(n: usize) -> Self {
        Self(vec![true; n])
    }

    /// Reads susceptibility off a binary defense: `q_i = 1` means immune.
    pub fn from_binary_defense(q: &[f64]) -> Self {
        Self(q.iter().map(|&x| x < 0.5).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Probability,
    WalkCount,
    Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskVector {
    pub values: Vec<f64>,
    pub kind: RiskKind,
    /// Per-node standard errors for sampled estimates.
    pub std_err: Option<Vec<f64>>,
}

impl RiskVector {
    pub fn weighted_total(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(r, w)| r * w).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkMode {
    /// Susceptibility factor once per distinct node of each walk.
    ExactDistinct,
    /// `Σ_ℓ D (A D)^ℓ`: one factor per visit, so revisits are discounted twice.
    MatrixPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RiskSpec {
    Exact,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
    /// `zero_diagonal` drops closed walks (`s = i`) from node `i`'s own risk.
    Walk {
        length: usize,
        mode: WalkMode,
        #[serde(default)]
        zero_diagonal: bool,
    },
    Activation {
        function: String,
        length: usize,
        samples: usize,
        seed: u64,
    },
}

impl RiskSpec {
    pub fn kind(&self) -> RiskKind {
        match self {
            RiskSpec::Exact | RiskSpec::MonteCarlo { .. } => RiskKind::Probability,
            RiskSpec::Walk { .. } => RiskKind::WalkCount,
            RiskSpec::Activation { .. } => RiskKind::Activation,
        }
    }
}

/// Nodes infected by a seed `s` under susceptibility `x`, ascending.
pub fn infected_set(net: &Network, x: &SusceptibilityState, s: usize) -> Result<Vec<usize>> {
    net.check_node(s)?;
    net.check_len(x.0.len())?;
    if !x.0[s] {
        return Ok(Vec::new());
    }
    let mut seen = vec![false; net.n()];
    seen[s] = true;
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for &w in net.neighbors(v) {
            if x.0[w] && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    Ok((0..net.n()).filter(|&i| seen[i]).collect())
}

enum Backend {
    Enumerate,
    Forest,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
    Walks(WalkIndex),
    MatrixPower {
        length: usize,
        closed: bool,
    },
    Activation {
        f: Activation,
        length: usize,
        samples: usize,
        seed: u64,
    },
}

/// A risk measure bound to a network, with any per-network precomputation
/// (walk tables) done once.
pub struct RiskModel<'a> {
    net: &'a Network,
    spec: RiskSpec,
    backend: Backend,
}

impl<'a> RiskModel<'a> {
    pub fn new(net: &'a Network, spec: &RiskSpec) -> Result<Self> {
        let backend = match spec {
            RiskSpec::Exact => {
                if net.n() <= MAX_EXACT_NODES {
                    Backend::Enumerate
                } else if net.is_forest() {
                    Backend::Forest
                } else {
                    return Err(Error::TooLargeForExact {
                        n: net.n(),
                        max: MAX_EXACT_NODES,
                    });
                }
            }
            RiskSpec::MonteCarlo { samples, seed } => {
                if *samples == 0 {
                    return Err(Error::InvalidArgument(
                        "monte_carlo needs samples >= 1".into(),
                    ));
                }
                Backend::MonteCarlo {
                    samples: *samples,
                    seed: *seed,
                }
            }
            RiskSpec::Walk {
                length,
                mode,
                zero_diagonal,
            } => {
                if *length == 0 {
                    return Err(Error::InvalidArgument("walk length must be >= 1".into()));
                }
                match mode {
                    WalkMode::ExactDistinct => {
                        Backend::Walks(WalkIndex::build_with(net, *length, !zero_diagonal)?)
                    }
                    WalkMode::MatrixPower => Backend::MatrixPower {
                        length: *length,
                        closed: !zero_diagonal,
                    },
                }
            }
            RiskSpec::Activation {
                function,
                length,
                samples,
                seed,
            } => {
                if *samples == 0 || *length == 0 {
                    return Err(Error::InvalidArgument(
                        "activation needs samples, length >= 1".into(),
                    ));
                }
                Backend::Activation {
                    f: function.parse()?,
                    length: *length,
                    samples: *samples,
                    seed: *seed,
                }
            }
        };
        Ok(Self {
            net,
            spec: spec.clone(),
            backend,
        })
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn spec(&self) -> &RiskSpec {
        &self.spec
    }

    pub fn kind(&self) -> RiskKind {
        self.spec.kind()
    }

    /// `R_i(q, w)` for arbitrary real seed weights `w`.
    pub fn evaluate(&self, q: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        self.net.check_len(q.len())?;
        self.net.check_len(weights.len())?;
        Ok(match &self.backend {
            Backend::Enumerate => exact::enumerate(self.net, q, weights),
            Backend::Forest => exact::forest(self.net, q, weights),
            Backend::MonteCarlo { samples, seed } => {
                monte_carlo::component_estimate(self.net, q, weights, *samples, *seed)
            }
            Backend::Walks(index) => index.evaluate(q, weights),
            Backend::MatrixPower { length, closed } => {
                let mut r = walks::matrix_power(self.net, q, weights, *length);
                if !closed {
                    let diag = walks::matrix_power_diagonal(self.net, q, weights, *length);
                    r.iter_mut().zip(diag).for_each(|(x, d)| *x -= d);
                }
                r
            }
            Backend::Activation {
                f,
                length,
                samples,
                seed,
            } => activation::estimate(self.net, q, weights, *f, *length, *samples, *seed).mean,
        })
    }

    /// Whether [`RiskModel::vjp`] is available; otherwise callers fall back
    /// to finite differences.
    pub fn has_analytic_gradient(&self) -> bool {
        matches!(
            self.backend,
            Backend::Forest | Backend::Walks(_) | Backend::MatrixPower { .. }
        )
    }

    /// Whether the measure is a smooth function of `q` (sampled estimates are
    /// piecewise constant in `q` under a fixed seed).
    pub fn is_differentiable(&self) -> bool {
        !matches!(
            self.backend,
            Backend::MonteCarlo { .. } | Backend::Activation { .. }
        )
    }

    /// Gradient of `Σ_i cot_i R_i(q, w)` with respect to `q`.
    pub fn vjp(&self, q: &[f64], weights: &[f64], cot: &[f64]) -> Option<Vec<f64>> {
        match &self.backend {
            Backend::Forest => Some(exact::forest_vjp(self.net, q, weights, cot)),
            Backend::Walks(index) => Some(index.vjp(q, weights, cot)),
            Backend::MatrixPower { length, closed } => {
                let mut g = walks::matrix_power_vjp(self.net, q, weights, cot, *length);
                if !closed {
                    let diag = walks::matrix_power_diagonal_vjp(self.net, q, weights, cot, *length);
                    g.iter_mut().zip(diag).for_each(|(x, d)| *x -= d);
                }
                Some(g)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> Network {
        Network::from_edges(6, &[(0, 1), (0, 2), (0, 3), (1, 4), (3, 4), (4, 5)]).unwrap()
    }

    #[test]
    fn infected_set_examples() {
        let net = fig2();
        assert!(infected_set(&net, &SusceptibilityState(vec![false; 6]), 3)
            .unwrap()
            .is_empty());
        let path = Network::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let x = SusceptibilityState(vec![true, false, true]);
        assert_eq!(infected_set(&path, &x, 0).unwrap(), vec![0]);
        let x = SusceptibilityState(vec![true, false, true, false, true, true]);
        assert_eq!(infected_set(&net, &x, 5).unwrap(), vec![4, 5]);
    }

    #[test]
    fn infected_set_matches_walk_criterion() {
        // i infected iff some power of A∘XXᵀ has a nonzero (i, s) entry, or i = s
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let n = rng.random_range(1..=8);
            let mut edges = Vec::new();
            for i in 0..n {
                for k in i + 1..n {
                    if rng.random::<f64>() < 0.4 {
                        edges.push((i, k));
                    }
                }
            }
            let net = Network::from_edges(n, &edges).unwrap();
            let x: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
            let s = rng.random_range(0..n);
            let a = net.adjacency_matrix();
            let t = |i: usize, k: usize| (a[i][k] == 1 && x[i] && x[k]) as u64;
            let mut reach = vec![0u64; n];
            let mut power: Vec<u64> = (0..n).map(|i| (i == s) as u64).collect();
            for _ in 0..n {
                power = (0..n)
                    .map(|i| (0..n).map(|k| t(i, k) * power[k]).sum::<u64>().min(1))
                    .collect();
                for i in 0..n {
                    reach[i] |= power[i];
                }
            }
            let expected: Vec<usize> = if x[s] {
                (0..n).filter(|&i| i == s || reach[i] > 0).collect()
            } else {
                vec![]
            };
            assert_eq!(
                infected_set(&net, &SusceptibilityState(x.clone()), s).unwrap(),
                expected
            );
        }
    }

    #[test]
    fn vector_validation() {
        assert!(DefenseVector::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(DefenseVector::new(vec![1.5]).is_err());
        assert!(DefenseVector::new(vec![f64::NAN]).is_err());
        assert!(AttackVector::new(vec![0.5, 0.5]).is_ok());
        assert!(AttackVector::new(vec![0.5, 0.6]).is_err());
        assert!(AttackVector::new(vec![1.5, -0.5]).is_err());
        let third = 1.0 / 3.0;
        assert!(AttackVector::new(vec![third, third, third]).is_ok());
    }

    #[test]
    fn exact_refuses_large_cyclic_networks() {
        let n = 20;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let net = Network::from_edges(n, &edges).unwrap();
        assert!(matches!(
            RiskModel::new(&net, &RiskSpec::Exact),
            Err(Error::TooLargeForExact { .. })
        ));
    }

    #[test]
    fn risk_spec_json_shape() {
        let spec: RiskSpec =
            serde_json::from_str(r#"{"type":"walk","length":4,"mode":"matrix_power"}"#).unwrap();
        assert_eq!(
            spec,
            RiskSpec::Walk {
                length: 4,
                mode: WalkMode::MatrixPower,
                zero_diagonal: false
            }
        );
        let spec: RiskSpec = serde_json::from_str(r#"{"type":"exact"}"#).unwrap();
        assert_eq!(spec, RiskSpec::Exact);
    }

    #[test]
    fn zero_diagonal_removes_closed_walks() {
        // on K2 every closed walk of length 2 is i -> j -> i
        let net = Network::from_edges(2, &[(0, 1)]).unwrap();
        let q = [0.25, 0.5];
        let w = [1.0, 0.0];
        for mode in [WalkMode::ExactDistinct, WalkMode::MatrixPower] {
            let spec = |zero_diagonal| RiskSpec::Walk {
                length: 2,
                mode,
                zero_diagonal,
            };
            let full = RiskModel::new(&net, &spec(false))
                .unwrap()
                .evaluate(&q, &w)
                .unwrap();
            let open = RiskModel::new(&net, &spec(true))
                .unwrap()
                .evaluate(&q, &w)
                .unwrap();
            assert_eq!(open[0], 0.0);
            assert!((open[1] - full[1]).abs() < 1e-15);
            assert!(full[0] > 0.0);
        }
    }

    #[test]
    fn zero_diagonal_gradients() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let net = fig2();
        let q: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..0.9)).collect();
        let w: Vec<f64> = (0..6).map(|_| rng.random()).collect();
        let cot: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        for mode in [WalkMode::ExactDistinct, WalkMode::MatrixPower] {
            let model = RiskModel::new(
                &net,
                &RiskSpec::Walk {
                    length: 4,
                    mode,
                    zero_diagonal: true,
                },
            )
            .unwrap();
            let f = |x: &[f64]| {
                model
                    .evaluate(x, &w)
                    .unwrap()
                    .iter()
                    .zip(&cot)
                    .map(|(r, c)| r * c)
                    .sum::<f64>()
            };
            let g = model.vjp(&q, &w, &cot).unwrap();
            for k in 0..6 {
                let (mut up, mut down) = (q.clone(), q.clone());
                up[k] += 1e-6;
                down[k] -= 1e-6;
                assert!(((f(&up) - f(&down)) / 2e-6 - g[k]).abs() < 1e-6);
            }
        }
    }
}
