use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{dot, CostKind, GameParams, ValueProfiles};
use crate::graph::Network;
use crate::protect::{OnePointTensor, TwoPointTensor};
use crate::risk::RiskModel;

use super::{finish, Diagnostics, EquilibriumResult, MVariant, Order, SolverMethod, SolverOptions};

/// Largest acceptable condition number of `αI - M`.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticSystem {
    pub m: DMatrix<f64>,
    pub s: DVector<f64>,
    pub variant: MVariant,
}

/// `s_i = a^i(1/n, z)` and
/// `M_ij = b_ij(1/n, z) - (1/θ)[Σ_k a^i_k(η) a^j_k(z) - c a^i(1/n, η) a^j(1/n, z)] - (i <-> j on z, η)`
/// with `c = n` (theorem) or `c = 1` (proof).
pub fn assemble_system(
    net: &Network,
    profiles: &ValueProfiles,
    theta: f64,
    a: &OnePointTensor,
    b: &TwoPointTensor,
    variant: MVariant,
) -> Result<AsymptoticSystem> {
    let n = net.n();
    for size in [a.n(), b.n()] {
        if size != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: size,
            });
        }
    }
    profiles.check(n)?;
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let u = vec![1.0 / n as f64; n];
    let az: Vec<Vec<f64>> = (0..n)
        .map(|i| a.reduce_vec(i, &profiles.z))
        .collect::<Result<_>>()?;
    let aeta: Vec<Vec<f64>> = (0..n)
        .map(|i| a.reduce_vec(i, &profiles.eta))
        .collect::<Result<_>>()?;
    let sz: Vec<f64> = az.iter().map(|r| dot(&u, r)).collect();
    let seta: Vec<f64> = aeta.iter().map(|r| dot(&u, r)).collect();
    let c = match variant {
        MVariant::Theorem => n as f64,
        MVariant::Proof => 1.0,
    };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let first = dot(&aeta[i], &az[j]) - c * seta[i] * sz[j];
            let second = dot(&az[i], &aeta[j]) - c * sz[i] * seta[j];
            m[(i, j)] = b.reduce(a, i, j, &u, &profiles.z)? - (first + second) / theta;
        }
    }
    Ok(AsymptoticSystem {
        m,
        s: DVector::from_vec(sz),
        variant,
    })
}

impl AsymptoticSystem {
    /// Solves for `q_raw` at the given order; returns the condition estimate
    /// of `αI - M` for the full solve.
    pub fn solve(&self, alpha: f64, order: Order) -> Result<(Vec<f64>, Option<f64>)> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let n = self.s.len();
        match order {
            Order::First => Ok(((&self.s / alpha).iter().copied().collect(), None)),
            Order::Second => {
                let q = &self.s / alpha + (&self.m * &self.s) / (alpha * alpha);
                Ok((q.iter().copied().collect(), None))
            }
            Order::Full => {
                let radius = self.m.clone().symmetric_eigen().eigenvalues.amax();
                if alpha <= radius {
                    return Err(Error::AsymptoticRegime(format!(
                        "alpha = {alpha} does not exceed the spectral radius {radius:.6e} of M"
                    )));
                }
                let system = DMatrix::identity(n, n) * alpha - &self.m;
                let sv = system.clone().singular_values();
                let (hi, lo) = (sv.max(), sv.min());
                let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
                if !(condition <= MAX_CONDITION) {
                    return Err(Error::AsymptoticRegime(format!(
                        "condition estimate {condition:.3e} of alpha I - M"
                    )));
                }
                let q = system
                    .lu()
                    .solve(&self.s)
                    .ok_or_else(|| Error::AsymptoticRegime("alpha I - M is singular".into()))?;
                Ok((q.iter().copied().collect(), Some(condition)))
            }
        }
    }
}

/// Closed-form equilibrium; builds both protection tensors.
pub fn asymptotic_sse(
    net: &Network,
    profiles: &ValueProfiles,
    params: &GameParams,
    options: &SolverOptions,
) -> Result<EquilibriumResult> {
    let (a, b) = TwoPointTensor::build_both(net);
    asymptotic_sse_with(net, profiles, params, options, &a, &b)
}

pub fn asymptotic_sse_with(
    net: &Network,
    profiles: &ValueProfiles,
    params: &GameParams,
    options: &SolverOptions,
    a: &OnePointTensor,
    b: &TwoPointTensor,
) -> Result<EquilibriumResult> {
    params.validate()?;
    let (order, variant) = match options.method {
        SolverMethod::ClosedForm { order, variant } => (order, variant),
        _ => (Order::Full, MVariant::default()),
    };
    if params.defender_cost != CostKind::Quadratic {
        return Err(Error::InvalidArgument(
            "the closed form needs a quadratic defender cost".into(),
        ));
    }
    let model = RiskModel::new(net, &options.risk)?;
    let system = assemble_system(net, profiles, params.theta, a, b, variant)?;
    let (q_raw, condition) = system.solve(params.alpha, order)?;
    let diagnostics = Diagnostics {
        method: format!("closed_form_{}", order_name(order)),
        condition_estimate: condition,
        variant: Some(variant),
        converged: true,
        source_connected: a.source_connected(),
        ..Diagnostics::default()
    };
    finish(&model, profiles, params, q_raw, diagnostics)
}

fn order_name(order: Order) -> &'static str {
    match order {
        Order::First => "first",
        Order::Second => "second",
        Order::Full => "full",
    }
}
