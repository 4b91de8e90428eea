//! Strong Stackelberg equilibria: the defender commits to `q`, the attacker
//! answers with `φ*(q)`.
//!
//! Two solvers are provided. [`asymptotic_sse`] evaluates the large-`α`
//! closed form `q* ≈ (αI - M)^{-1} s` built from the protection tensors;
//! [`numerical_sse`] minimizes `L_d(q; φ*(q))` over the box directly.

mod closed_form;
mod numerical;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{
    attacker_utility, defender_loss, BestResponse, CostKind, GameParams, ValueProfiles,
};
use crate::risk::AttackVector;
use crate::risk::{DefenseVector, RiskModel, RiskSpec};

pub use closed_form::{assemble_system, asymptotic_sse, asymptotic_sse_with, AsymptoticSystem};
pub use numerical::{numerical_sse, numerical_sse_with, Objective};

/// How the constant term of the `1/θ` corrections in `M` is scoped.
///
/// `Theorem` subtracts `n · a^i(1/n, η) a^j(1/n, z)` (the constant sits inside
/// `Σ_k`); `Proof` subtracts it once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MVariant {
    Proof,
    #[default]
    Theorem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    /// `s / α`
    First,
    /// `s / α + M s / α²`
    Second,
    /// `(αI - M)^{-1} s`
    #[default]
    Full,
}

fn default_armijo() -> f64 {
    1e-4
}
fn default_shrink() -> f64 {
    0.5
}
fn default_tol() -> f64 {
    1e-7
}
fn default_max_iters() -> usize {
    10_000
}
fn default_random_starts() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_fd_step() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientOptions {
    #[serde(default = "default_armijo")]
    pub armijo: f64,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    /// Stationarity tolerance on `‖q - Π(q - ∇L)‖∞`.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_random_starts")]
    pub random_starts: usize,
    /// Barzilai-Borwein trial steps; otherwise every line search starts at 1.
    #[serde(default = "default_true")]
    pub bb_step: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            armijo: default_armijo(),
            shrink: default_shrink(),
            tol: default_tol(),
            max_iters: default_max_iters(),
            random_starts: default_random_starts(),
            bb_step: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SolverMethod {
    ClosedForm {
        #[serde(default)]
        order: Order,
        #[serde(default)]
        variant: MVariant,
    },
    ProjectedGradient(GradientOptions),
}

impl Default for SolverMethod {
    fn default() -> Self {
        SolverMethod::ProjectedGradient(GradientOptions::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    #[serde(default)]
    pub method: SolverMethod,
    pub risk: RiskSpec,
    /// Central finite-difference step for risks without analytic gradients.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

impl SolverOptions {
    pub fn new(method: SolverMethod, risk: RiskSpec) -> Self {
        Self {
            method,
            risk,
            fd_step: default_fd_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
    /// Some coordinate of `q_raw` left `[0, 1]` and was clamped.
    pub out_of_box: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<MVariant>,
    /// The attacker's best response at `q*` needed no projection.
    pub interior: bool,
    /// `‖q - Π(q - ∇L)‖∞` at the returned point (numerical solver only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationarity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_index: Option<usize>,
    pub source_connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    #[serde(rename = "q")]
    pub q_star: DefenseVector,
    #[serde(skip)]
    pub q_raw: Vec<f64>,
    #[serde(rename = "phi")]
    pub phi_star: AttackVector,
    pub loss: f64,
    pub utility: f64,
    pub diagnostics: Diagnostics,
}

impl EquilibriumResult {
    /// `node,q,phi` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,q,phi\n");
        for (i, (q, p)) in self
            .q_star
            .as_slice()
            .iter()
            .zip(self.phi_star.as_slice())
            .enumerate()
        {
            out.push_str(&format!("{i},{q},{p}\n"));
        }
        out
    }
}

/// Evaluates the attacker's answer and both payoffs at `q_raw` clamped to the box.
pub(crate) fn finish(
    model: &RiskModel,
    profiles: &ValueProfiles,
    params: &GameParams,
    q_raw: Vec<f64>,
    mut diagnostics: Diagnostics,
) -> Result<EquilibriumResult> {
    let q_star = DefenseVector::clamped(&q_raw);
    diagnostics.out_of_box |= q_raw.iter().zip(q_star.as_slice()).any(|(a, b)| a != b);
    let BestResponse { phi, interior, .. } =
        crate::game::attacker_best_response(model, &q_star, profiles, params.theta)?;
    diagnostics.interior = interior;
    let loss = defender_loss(
        model,
        &q_star,
        &phi,
        profiles,
        params.alpha,
        params.defender_cost,
    )?;
    let utility = attacker_utility(model, &phi, &q_star, profiles, params.theta)?;
    Ok(EquilibriumResult {
        q_star,
        q_raw,
        phi_star: phi,
        loss,
        utility,
        diagnostics,
    })
}

pub(crate) fn cost_gradient(q: &[f64], alpha: f64, kind: CostKind) -> Vec<f64> {
    match kind {
        CostKind::Quadratic => q.iter().map(|x| alpha * x).collect(),
        CostKind::L1 => vec![alpha; q.len()],
    }
}
