//! Risk/cost efficient frontiers traced by sweeping the defender's cost
//! multiplier `α`.

use rayon::prelude::*;
use serde::Serialize;

use crate::equil::{
    asymptotic_sse_with, numerical_sse_with, EquilibriumResult, SolverMethod, SolverOptions,
};
use crate::error::{Error, Result};
use crate::game::{defender_cost, dot, GameParams, ValueProfiles};
use crate::graph::Network;
use crate::protect::{OnePointTensor, TwoPointTensor};
use crate::risk::RiskModel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub alpha: f64,
    pub cost: f64,
    pub risk_z: f64,
    pub risk_eta: f64,
    /// `ok`, `not_converged`, `out_of_box` or `failed`.
    pub flag: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub q: Vec<f64>,
    pub phi: Vec<f64>,
}

impl FrontierPoint {
    fn failed(alpha: f64, err: &Error) -> Self {
        Self {
            alpha,
            cost: f64::NAN,
            risk_z: f64::NAN,
            risk_eta: f64::NAN,
            flag: "failed".into(),
            message: Some(err.to_string()),
            q: Vec::new(),
            phi: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.flag != "failed"
    }
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(
        lo > 0.0 && hi > lo && points >= 2,
        "log grid needs 0 < lo < hi and two points"
    );
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

fn check_grid(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha grid is empty".into()));
    }
    if alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument(
            "alpha grid entries must be positive".into(),
        ));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "alpha grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

struct Sweep<'a, 'n> {
    model: &'a RiskModel<'n>,
    net: &'a Network,
    profiles: &'a ValueProfiles,
    params: GameParams,
    options: &'a SolverOptions,
    tensors: Option<(OnePointTensor, TwoPointTensor)>,
}

impl Sweep<'_, '_> {
    fn solve(&self, alpha: f64, warm: Option<&[f64]>) -> Result<EquilibriumResult> {
        let params = GameParams {
            alpha,
            ..self.params
        };
        match (&self.options.method, &self.tensors) {
            (SolverMethod::ClosedForm { .. }, Some((a, b))) => {
                asymptotic_sse_with(self.net, self.profiles, &params, self.options, a, b)
            }
            _ => numerical_sse_with(self.model, self.profiles, &params, self.options, warm),
        }
    }

    fn point(&self, alpha: f64, warm: Option<&[f64]>) -> FrontierPoint {
        let eq = match self.solve(alpha, warm) {
            Ok(eq) => eq,
            Err(e) => return FrontierPoint::failed(alpha, &e),
        };
        let risk = match self
            .model
            .evaluate(eq.q_star.as_slice(), eq.phi_star.as_slice())
        {
            Ok(r) => r,
            Err(e) => return FrontierPoint::failed(alpha, &e),
        };
        let flag = if !eq.diagnostics.converged {
            "not_converged"
        } else if eq.diagnostics.out_of_box {
            "out_of_box"
        } else {
            "ok"
        };
        FrontierPoint {
            alpha,
            cost: defender_cost(eq.q_star.as_slice(), self.params.defender_cost),
            risk_z: dot(&self.profiles.z, &risk),
            risk_eta: dot(&self.profiles.eta, &risk),
            flag: flag.into(),
            message: None,
            q: eq.q_star.into_inner(),
            phi: eq.phi_star.into_inner(),
        }
    }
}

/// Solves the equilibrium at every `α` of the grid. With `chain` set, each
/// solve is warm-started from the previous `q*` (sequential); otherwise grid
/// points run in parallel. A failing point is flagged and the sweep goes on.
pub fn efficient_frontier(
    net: &Network,
    profiles: &ValueProfiles,
    params: &GameParams,
    alphas: &[f64],
    options: &SolverOptions,
    chain: bool,
) -> Result<Vec<FrontierPoint>> {
    check_grid(alphas)?;
    profiles.check(net.n())?;
    let model = RiskModel::new(net, &options.risk)?;
    let tensors = matches!(options.method, SolverMethod::ClosedForm { .. })
        .then(|| TwoPointTensor::build_both(net));
    let sweep = Sweep {
        model: &model,
        net,
        profiles,
        params: *params,
        options,
        tensors,
    };
    if chain {
        let mut out: Vec<FrontierPoint> = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            let warm = out.last().filter(|p| p.is_ok()).map(|p| p.q.clone());
            out.push(sweep.point(alpha, warm.as_deref()));
        }
        Ok(out)
    } else {
        Ok(alphas
            .par_iter()
            .map(|&alpha| sweep.point(alpha, None))
            .collect())
    }
}

pub fn frontier_csv(points: &[FrontierPoint]) -> String {
    let mut out = String::from("alpha,cost,risk_z,risk_eta,flag\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.alpha, p.cost, p.risk_z, p.risk_eta, p.flag
        ));
    }
    out
}
