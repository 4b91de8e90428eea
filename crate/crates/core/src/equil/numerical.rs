use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{best_response_from_payoff, defender_cost, dot, GameParams, ValueProfiles};
use crate::graph::Network;
use crate::protect::TwoPointTensor;
use crate::risk::RiskModel;

use super::closed_form::assemble_system;
use super::{
    cost_gradient, finish, Diagnostics, EquilibriumResult, GradientOptions, MVariant, Order,
    SolverMethod, SolverOptions,
};

/// The defender's reduced objective `q ↦ L_d(q; φ*(q))`.
pub struct Objective<'m, 'n> {
    pub model: &'m RiskModel<'n>,
    pub profiles: &'m ValueProfiles,
    pub params: GameParams,
    pub fd_step: f64,
}

impl Objective<'_, '_> {
    pub fn value(&self, q: &[f64]) -> Result<f64> {
        let payoff = self.model.evaluate(q, &self.profiles.eta)?;
        let (phi, _, _) = best_response_from_payoff(&payoff, self.params.theta);
        let risk = self.model.evaluate(q, &phi)?;
        Ok(dot(&self.profiles.z, &risk)
            + self.params.alpha * defender_cost(q, self.params.defender_cost))
    }

    /// Analytic when the risk backend provides a vector-Jacobian product,
    /// central differences otherwise.
    ///
    /// On the best response's support `S`, `φ*_s = 1/|S| + (c_s - mean_S c)/θ`
    /// with `c = R(q, η)`, and `∂L/∂φ_s = R_s(q, z)`.
    pub fn gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        if !self.model.is_differentiable() {
            return Err(Error::InvalidArgument(
                "the numerical solver needs a differentiable risk (exact or walk)".into(),
            ));
        }
        let mut grad = cost_gradient(q, self.params.alpha, self.params.defender_cost);
        if self.model.has_analytic_gradient() {
            let payoff = self.model.evaluate(q, &self.profiles.eta)?;
            let (phi, _, support) = best_response_from_payoff(&payoff, self.params.theta);
            let direct = self
                .model
                .vjp(q, &phi, &self.profiles.z)
                .expect("analytic backend");
            let cz = self.model.evaluate(q, &self.profiles.z)?;
            let mean = support.iter().map(|&s| cz[s]).sum::<f64>() / support.len() as f64;
            let mut cot = vec![0.0; q.len()];
            for &s in &support {
                cot[s] = (cz[s] - mean) / self.params.theta;
            }
            let through_phi = self
                .model
                .vjp(q, &self.profiles.eta, &cot)
                .expect("analytic backend");
            for k in 0..q.len() {
                grad[k] += direct[k] + through_phi[k];
            }
        } else {
            let h = self.fd_step;
            let risk_only =
                |x: &[f64]| -> Result<f64> {
                    Ok(self.value(x)?
                        - self.params.alpha * defender_cost(x, self.params.defender_cost))
                };
            let mut x = q.to_vec();
            for k in 0..q.len() {
                x[k] = q[k] + h;
                let up = risk_only(&x)?;
                x[k] = q[k] - h;
                let down = risk_only(&x)?;
                x[k] = q[k];
                grad[k] += (up - down) / (2.0 * h);
            }
        }
        Ok(grad)
    }
}

fn project(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

fn stationarity(q: &[f64], g: &[f64]) -> f64 {
    q.iter()
        .zip(g)
        .map(|(x, d)| (x - (x - d).clamp(0.0, 1.0)).abs())
        .fold(0.0, f64::max)
}

pub(crate) struct Descent {
    pub q: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stationarity: f64,
}

/// Projected gradient with Armijo backtracking along the projection arc and
/// Barzilai-Borwein trial steps.
pub(crate) fn descend(obj: &Objective, start: &[f64], opts: &GradientOptions) -> Result<Descent> {
    let mut q = start.to_vec();
    project(&mut q);
    let mut loss = obj.value(&q)?;
    let mut g = obj.gradient(&q)?;
    let mut step = 1.0;
    let mut iterations = 0;
    let mut stat = stationarity(&q, &g);
    let mut stalled = false;
    while stat > opts.tol && iterations < opts.max_iters {
        iterations += 1;
        let mut t = step;
        let (next, next_loss) = loop {
            let mut trial: Vec<f64> = q.iter().zip(&g).map(|(x, d)| x - t * d).collect();
            project(&mut trial);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&q))
                .map(|(d, (a, b))| d * (a - b))
                .sum();
            let trial_loss = obj.value(&trial)?;
            if trial_loss <= loss + opts.armijo * decrease || t < 1e-14 {
                break (trial, trial_loss);
            }
            t *= opts.shrink;
        };
        let next_g = obj.gradient(&next)?;
        let s: Vec<f64> = next.iter().zip(&q).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let (ss, sy) = (dot(&s, &s), dot(&s, &y));
        step = if opts.bb_step && sy > 0.0 {
            (ss / sy).clamp(1e-10, 1e10)
        } else {
            1.0
        };
        stalled = ss == 0.0;
        q = next;
        loss = next_loss;
        g = next_g;
        stat = stationarity(&q, &g);
        if stalled {
            break;
        }
    }
    // A stall means no step down to 1e-14 changes the loss: the rounding
    // floor of an ill-conditioned loss. Accept it when already near `tol`.
    let converged = stat <= opts.tol || (stalled && stat <= opts.tol.sqrt());
    Ok(Descent {
        q,
        loss,
        iterations,
        converged,
        stationarity: stat,
    })
}

/// Numerical SSE with the default multistart set: `0`, the closed form,
/// and `random_starts` uniform points.
pub fn numerical_sse(
    net: &Network,
    profiles: &ValueProfiles,
    params: &GameParams,
    options: &SolverOptions,
) -> Result<EquilibriumResult> {
    let model = RiskModel::new(net, &options.risk)?;
    numerical_sse_with(&model, profiles, params, options, None)
}

/// Like [`numerical_sse`] on a prebuilt risk model, with an optional warm
/// start appended after the default starts.
pub fn numerical_sse_with(
    model: &RiskModel,
    profiles: &ValueProfiles,
    params: &GameParams,
    options: &SolverOptions,
    warm_start: Option<&[f64]>,
) -> Result<EquilibriumResult> {
    params.validate()?;
    let net = model.network();
    let n = net.n();
    profiles.check(n)?;
    let opts = match &options.method {
        SolverMethod::ProjectedGradient(opts) => opts.clone(),
        SolverMethod::ClosedForm { .. } => GradientOptions::default(),
    };
    if !(opts.tol > 0.0 && opts.armijo > 0.0 && opts.shrink > 0.0 && opts.shrink < 1.0) {
        return Err(Error::InvalidArgument(
            "solver tolerances must be positive, shrink in (0, 1)".into(),
        ));
    }

    let mut starts = vec![vec![0.0; n]];
    let (a, b) = TwoPointTensor::build_both(net);
    let system = assemble_system(net, profiles, params.theta, &a, &b, MVariant::default())?;
    let closed = system
        .solve(params.alpha, Order::Full)
        .or_else(|_| system.solve(params.alpha, Order::First))?
        .0;
    starts.push(closed.iter().map(|x| x.clamp(0.0, 1.0)).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        starts.push((0..n).map(|_| rng.random::<f64>()).collect());
    }
    if let Some(w) = warm_start {
        net.check_len(w.len())?;
        starts.push(w.to_vec());
    }

    let obj = Objective {
        model,
        profiles,
        params: *params,
        fd_step: options.fd_step,
    };
    let runs: Vec<Result<Descent>> = starts.par_iter().map(|s| descend(&obj, s, &opts)).collect();
    let mut best: Option<(usize, Descent)> = None;
    for (index, run) in runs.into_iter().enumerate() {
        let run = run?;
        if best.as_ref().is_none_or(|(_, b)| run.loss < b.loss) {
            best = Some((index, run));
        }
    }
    let (index, run) = best.expect("at least one start");
    let diagnostics = Diagnostics {
        method: "projected_gradient".into(),
        iterations: run.iterations,
        converged: run.converged,
        stationarity: Some(run.stationarity),
        start_index: Some(index),
        source_connected: a.source_connected(),
        ..Diagnostics::default()
    };
    finish(model, profiles, params, run.q, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equil::asymptotic_sse;
    use crate::game::CostKind;
    use crate::risk::{RiskSpec, WalkMode};

    fn k2() -> Network {
        Network::from_edges(2, &[(0, 1)]).unwrap()
    }

    fn pg(risk: RiskSpec) -> SolverOptions {
        SolverOptions::new(
            SolverMethod::ProjectedGradient(GradientOptions::default()),
            risk,
        )
    }

    fn grid_min(obj: &Objective, n: usize, resolution: usize) -> (f64, Vec<f64>) {
        let mut best = (f64::INFINITY, vec![]);
        let total = (resolution + 1).pow(n as u32);
        let mut q = vec![0.0; n];
        for idx in 0..total {
            let mut r = idx;
            for v in q.iter_mut() {
                *v = (r % (resolution + 1)) as f64 / resolution as f64;
                r /= resolution + 1;
            }
            let l = obj.value(&q).unwrap();
            if l < best.0 {
                best = (l, q.clone());
            }
        }
        best
    }

    #[test]
    fn zero_defender_value_invests_nothing() {
        let net = Network::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let profiles = ValueProfiles::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let params = GameParams::new(5.0, 10.0).unwrap();
        let r = numerical_sse(&net, &profiles, &params, &pg(RiskSpec::Exact)).unwrap();
        assert_eq!(r.q_star.as_slice(), &[0.0; 3]);
    }

    #[test]
    fn k2_matches_grid_and_closed_form() {
        let net = k2();
        let profiles = ValueProfiles::uniform(2);
        let params = GameParams::new(50.0, 100.0).unwrap();
        let r = numerical_sse(&net, &profiles, &params, &pg(RiskSpec::Exact)).unwrap();
        assert!(r.diagnostics.converged);
        let model = RiskModel::new(&net, &RiskSpec::Exact).unwrap();
        let obj = Objective {
            model: &model,
            profiles: &profiles,
            params,
            fd_step: 1e-5,
        };
        let (grid_loss, grid_q) = grid_min(&obj, 2, 1000);
        assert!(r.loss <= grid_loss + 1e-9);
        assert!(r
            .q_star
            .as_slice()
            .iter()
            .zip(&grid_q)
            .all(|(a, b)| (a - b).abs() <= 1e-3));
        let closed = SolverOptions::new(
            SolverMethod::ClosedForm {
                order: Order::Full,
                variant: MVariant::Theorem,
            },
            RiskSpec::Exact,
        );
        let c = asymptotic_sse(&net, &profiles, &params, &closed).unwrap();
        for (a, b) in c.q_raw.iter().zip(r.q_star.as_slice()) {
            assert!((a - b).abs() <= 2e-2);
        }
    }

    #[test]
    fn path3_beats_coarse_grid() {
        let net = Network::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let profiles = ValueProfiles::uniform(3);
        let params = GameParams::new(40.0, 100.0).unwrap();
        let r = numerical_sse(&net, &profiles, &params, &pg(RiskSpec::Exact)).unwrap();
        let model = RiskModel::new(&net, &RiskSpec::Exact).unwrap();
        let obj = Objective {
            model: &model,
            profiles: &profiles,
            params,
            fd_step: 1e-5,
        };
        let (grid_loss, _) = grid_min(&obj, 3, 100);
        assert!(grid_loss >= r.loss - 1e-4);
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let net = Network::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)])
            .unwrap();
        let profiles = ValueProfiles::new(
            vec![1.0, 0.5, 0.2, 1.0, 0.3, 0.8],
            vec![0.4, 1.0, 0.9, 0.2, 0.6, 0.1],
        )
        .unwrap();
        let params = GameParams::new(3.0, 2.0).unwrap();
        for mode in [WalkMode::ExactDistinct, WalkMode::MatrixPower] {
            let model = RiskModel::new(
                &net,
                &RiskSpec::Walk {
                    length: 3,
                    mode,
                    zero_diagonal: false,
                },
            )
            .unwrap();
            let obj = Objective {
                model: &model,
                profiles: &profiles,
                params,
                fd_step: 1e-5,
            };
            let q = [0.1, 0.3, 0.05, 0.2, 0.15, 0.4];
            let g = obj.gradient(&q).unwrap();
            let h = 1e-6;
            for k in 0..6 {
                let mut up = q.to_vec();
                let mut down = q.to_vec();
                up[k] += h;
                down[k] -= h;
                let fd = (obj.value(&up).unwrap() - obj.value(&down).unwrap()) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6, "{mode:?} k={k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn l1_cost_and_stationarity() {
        let net = Network::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let profiles = ValueProfiles::uniform(4);
        let mut params = GameParams::new(0.3, 5.0).unwrap();
        params.defender_cost = CostKind::L1;
        let r = numerical_sse(
            &net,
            &profiles,
            &params,
            &pg(RiskSpec::Walk {
                length: 3,
                mode: WalkMode::ExactDistinct,
                zero_diagonal: false,
            }),
        )
        .unwrap();
        assert!(r.diagnostics.converged);
        assert!(r.diagnostics.stationarity.unwrap() <= 1e-7);
    }

    #[test]
    fn sampled_risks_rejected() {
        let net = k2();
        let spec = RiskSpec::MonteCarlo {
            samples: 100,
            seed: 1,
        };
        let err = numerical_sse(
            &net,
            &ValueProfiles::uniform(2),
            &GameParams::new(5.0, 5.0).unwrap(),
            &pg(spec),
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn cost_decreases_with_alpha() {
        let net = Network::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let profiles = ValueProfiles::uniform(5);
        let opts = pg(RiskSpec::Walk {
            length: 4,
            mode: WalkMode::MatrixPower,
            zero_diagonal: false,
        });
        let mut last = f64::INFINITY;
        for alpha in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let r = numerical_sse(
                &net,
                &profiles,
                &GameParams::new(alpha, 10.0).unwrap(),
                &opts,
            )
            .unwrap();
            let cost = defender_cost(r.q_star.as_slice(), CostKind::Quadratic);
            assert!(cost <= last + 1e-6);
            last = cost;
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let net = Network::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let profiles =
            ValueProfiles::new(vec![1.0, 0.0, 1.0, 0.5], vec![0.3, 1.0, 0.1, 0.2]).unwrap();
        let params = GameParams::new(3.0, 4.0).unwrap();
        let opts = pg(RiskSpec::Exact);
        let a = numerical_sse(&net, &profiles, &params, &opts).unwrap();
        let b = numerical_sse(&net, &profiles, &params, &opts).unwrap();
        assert_eq!(a, b);
    }
}
