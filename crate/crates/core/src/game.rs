//! Player objectives and the attacker's best response.
//!
//! The defender pays `Σ z_i R_i(q, φ) + α C_d(q)`; the attacker earns
//! `Σ η_i R_i(q, φ) - θ ½ Σ φ_i²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{AttackVector, DefenseVector, RiskModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueProfiles {
    pub z: Vec<f64>,
    pub eta: Vec<f64>,
}

impl ValueProfiles {
    pub fn new(z: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let p = Self { z, eta };
        p.check(p.z.len())?;
        Ok(p)
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            z: vec![1.0; n],
            eta: vec![1.0; n],
        }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        for (name, v) in [("z", &self.z), ("eta", &self.eta)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} has non-finite entry {x}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `½ Σ q_i²`
    #[default]
    Quadratic,
    /// `Σ q_i`
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub alpha: f64,
    pub theta: f64,
    #[serde(default)]
    pub defender_cost: CostKind,
}

impl GameParams {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            theta,
            defender_cost: CostKind::Quadratic,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "theta must be positive, got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

pub fn defender_cost(q: &[f64], kind: CostKind) -> f64 {
    match kind {
        CostKind::Quadratic => 0.5 * q.iter().map(|x| x * x).sum::<f64>(),
        CostKind::L1 => q.iter().map(|x| x.abs()).sum(),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn attacker_utility(
    model: &RiskModel,
    phi: &AttackVector,
    q: &DefenseVector,
    profiles: &ValueProfiles,
    theta: f64,
) -> Result<f64> {
    profiles.check(model.network().n())?;
    let r = model.evaluate(q.as_slice(), phi.as_slice())?;
    Ok(dot(&profiles.eta, &r) - theta * 0.5 * dot(phi.as_slice(), phi.as_slice()))
}

pub fn defender_loss(
    model: &RiskModel,
    q: &DefenseVector,
    phi: &AttackVector,
    profiles: &ValueProfiles,
    alpha: f64,
    cost: CostKind,
) -> Result<f64> {
    profiles.check(model.network().n())?;
    let r = model.evaluate(q.as_slice(), phi.as_slice())?;
    Ok(dot(&profiles.z, &r) + alpha * defender_cost(q.as_slice(), cost))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub phi: AttackVector,
    /// True when the unconstrained stationary point was already feasible.
    pub interior: bool,
    /// Nodes with `φ_i > 0` in the active-set solution.
    pub support: Vec<usize>,
}

/// Maximizes `φ·c - θ ½ |φ|²` over the simplex, i.e. projects `c / θ` onto
/// it: solve on the support, drop negative coordinates, repeat.
pub fn best_response_from_payoff(c: &[f64], theta: f64) -> (Vec<f64>, bool, Vec<usize>) {
    let n = c.len();
    let mut support: Vec<usize> = (0..n).collect();
    let mut phi = vec![0.0; n];
    let mut interior = true;
    loop {
        let m = support.len() as f64;
        let mean = support.iter().map(|&i| c[i]).sum::<f64>() / m;
        phi.fill(0.0);
        for &i in &support {
            phi[i] = 1.0 / m + (c[i] - mean) / theta;
        }
        let before = support.len();
        support.retain(|&i| phi[i] > 0.0);
        if support.len() == before {
            break;
        }
        interior = false;
    }
    (phi, interior, support)
}

/// `φ*(q)`: the attacker's payoff for seeding `s` is `R_s(q, η)` (the risk
/// measures are symmetric in node and seed), so `φ* = Π_simplex(R(q, η) / θ)`.
pub fn attacker_best_response(
    model: &RiskModel,
    q: &DefenseVector,
    profiles: &ValueProfiles,
    theta: f64,
) -> Result<BestResponse> {
    profiles.check(model.network().n())?;
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let payoff = model.evaluate(q.as_slice(), &profiles.eta)?;
    let (phi, interior, support) = best_response_from_payoff(&payoff, theta);
    Ok(BestResponse {
        phi: AttackVector::new(phi)?,
        interior,
        support,
    })
}
