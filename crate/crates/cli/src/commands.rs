//! Subcommands. Each writes its artifacts into the output directory and
//! returns the paths written, in a fixed order.

use std::fmt::Write as _;
use std::path::PathBuf;

use netdefense::dynamics::{
    compare_strategies, comparison_csv, simulate as run_dynamics, trajectory_csv, Ensemble,
};
use netdefense::equil::{asymptotic_sse, numerical_sse};
use netdefense::frontier::{efficient_frontier, frontier_csv};
use netdefense::game::attacker_best_response;
use netdefense::risk::RiskModel;
use netdefense::stats::paired_t_test;
use netdefense::{
    AttackVector, DefenseVector, EquilibriumResult, Network, SolverMethod, TwoPointTensor,
    ValueProfiles,
};
use serde_json::json;

use crate::config::{AttackSource, Context, DefenseSource, MetricsConfig};
use crate::CliError;

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(ctx: &Context) -> Result<Self, CliError> {
        let dir = ctx.out_dir();
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Compute(format!("cannot create {}: {e}", dir.display())))?;
        let mut w = Self {
            dir,
            written: Vec::new(),
        };
        // the effective config, minus the output location, so reruns into
        // different directories stay byte-identical
        let mut config = ctx.config.clone();
        config.out = None;
        w.put("config.json", &config.to_json())?;
        Ok(w)
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn finish(self) -> Vec<PathBuf> {
        self.written
    }
}

fn pretty(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Writes the network as an edge list.
pub fn generate(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let net = ctx.network()?;
    let mut out = Writer::new(ctx)?;
    out.put("network.txt", &net.to_edge_list_string())?;
    Ok(out.finish())
}

/// Protection tensors and their reductions against the configured `v`, `w`.
pub fn metrics(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let net = ctx.network()?;
    let n = net.n();
    let cfg = ctx.config.metrics.clone().unwrap_or_default();
    let MetricsConfig { v, w } = &cfg;
    let (v, w) = (ctx.profile(v, n)?, ctx.profile(w, n)?);
    let (a, b) = TwoPointTensor::build_both(&net);

    let mut one = String::from("node,value\n");
    for j in 0..n {
        let _ = writeln!(one, "{j},{}", a.reduce_scalar(j, &v, &w)?);
    }
    let mut two = String::from("i,j,value\n");
    for i in 0..n {
        for j in 0..n {
            let _ = writeln!(two, "{i},{j},{}", b.reduce(&a, i, j, &v, &w)?);
        }
    }
    let mut out = Writer::new(ctx)?;
    out.put("tensor_a.jsonl", &a.to_json_lines())?;
    out.put("tensor_b.jsonl", &b.to_json_lines())?;
    out.put("reduction_a.csv", &one)?;
    out.put("reduction_b.csv", &two)?;
    Ok(out.finish())
}

fn solve(
    ctx: &Context,
    net: &Network,
    profiles: &ValueProfiles,
) -> Result<EquilibriumResult, CliError> {
    let params = ctx.game()?;
    let options = ctx.solver_options();
    let eq = match options.method {
        SolverMethod::ClosedForm { .. } => asymptotic_sse(net, profiles, &params, &options)?,
        SolverMethod::ProjectedGradient(_) => numerical_sse(net, profiles, &params, &options)?,
    };
    Ok(eq)
}

fn risk_csv(values: &[f64]) -> String {
    let mut out = String::from("node,risk\n");
    for (i, r) in values.iter().enumerate() {
        let _ = writeln!(out, "{i},{r}");
    }
    out
}

/// Equilibrium JSON and CSV, plus the defender-weighted risk at the equilibrium.
pub fn equilibrium(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let net = ctx.network()?;
    let profiles = ctx.profiles(net.n())?;
    let eq = solve(ctx, &net, &profiles)?;
    let model = RiskModel::new(&net, &ctx.config.risk)?;
    let risk = model.evaluate(eq.q_star.as_slice(), eq.phi_star.as_slice())?;
    let mut out = Writer::new(ctx)?;
    out.put("equilibrium.json", &pretty(&eq))?;
    out.put("equilibrium.csv", &eq.to_csv())?;
    out.put("risk.csv", &risk_csv(&risk))?;
    Ok(out.finish())
}

pub fn frontier(ctx: &Context, full: bool) -> Result<Vec<PathBuf>, CliError> {
    let net = ctx.network()?;
    let profiles = ctx.profiles(net.n())?;
    let params = ctx.game()?;
    let cfg = ctx
        .config
        .frontier
        .as_ref()
        .ok_or_else(|| CliError::Config("missing frontier section".into()))?;
    let alphas = cfg.alphas.values()?;
    let points = efficient_frontier(
        &net,
        &profiles,
        &params,
        &alphas,
        &ctx.solver_options(),
        cfg.chain,
    )
    .map_err(|e| match e {
        netdefense::Error::InvalidArgument(m) => CliError::Config(m),
        other => other.into(),
    })?;
    let mut out = Writer::new(ctx)?;
    out.put("frontier.csv", &frontier_csv(&points))?;
    if full {
        out.put("frontier.json", &pretty(&points))?;
    }
    Ok(out.finish())
}

/// The defense and seed law a simulation runs under.
fn simulated_strategy(
    ctx: &Context,
    net: &Network,
) -> Result<(DefenseVector, AttackVector), CliError> {
    let n = net.n();
    let dyn_cfg = ctx.dynamics()?;
    let profiles = ctx.profiles(n)?;
    let mut equilibrium = None;
    let q = match &dyn_cfg.defense {
        DefenseSource::Values(v) => {
            DefenseVector::new(v.clone()).map_err(|e| CliError::Config(e.to_string()))?
        }
        DefenseSource::Named(name) => match name.as_str() {
            "zeros" => DefenseVector::zeros(n),
            "ones" => DefenseVector::ones(n),
            "equilibrium" => {
                let eq = solve(ctx, net, &profiles)?;
                let q = eq.q_star.clone();
                equilibrium = Some(eq);
                q
            }
            other => return Err(CliError::Config(format!("unknown defense '{other}'"))),
        },
    };
    if q.len() != n {
        return Err(CliError::Config(format!(
            "defense has {} entries, network has {n} nodes",
            q.len()
        )));
    }
    let phi = match &dyn_cfg.attack {
        AttackSource::Values(v) => {
            AttackVector::new(v.clone()).map_err(|e| CliError::Config(e.to_string()))?
        }
        AttackSource::Named(name) => match name.as_str() {
            "uniform" => AttackVector::uniform(n),
            "best_response" => match equilibrium {
                Some(eq) => eq.phi_star,
                None => {
                    let theta = ctx.game()?.theta;
                    let model = RiskModel::new(net, &ctx.config.risk)?;
                    attacker_best_response(&model, &q, &profiles, theta)?.phi
                }
            },
            other => return Err(CliError::Config(format!("unknown attack '{other}'"))),
        },
    };
    if phi.len() != n {
        return Err(CliError::Config(format!(
            "attack has {} entries, network has {n} nodes",
            phi.len()
        )));
    }
    Ok((q, phi))
}

fn runs_jsonl(out: &mut String, strategy: Option<&str>, ensemble: &Ensemble) {
    for (r, run) in ensemble.runs.iter().enumerate() {
        let mut line =
            json!({ "run": r, "asymptotic": run.asymptotic, "fractions": run.fractions });
        if let Some(s) = strategy {
            line["strategy"] = json!(s);
        }
        out.push_str(&line.to_string());
        out.push('\n');
    }
}

pub fn simulate(ctx: &Context, full: bool) -> Result<Vec<PathBuf>, CliError> {
    let net = ctx.network()?;
    let seed = ctx.run_seed()?;
    let (q, phi) = simulated_strategy(ctx, &net)?;
    let cfg = ctx.dynamics()?;
    let ensemble = run_dynamics(&net, &q, &phi, &cfg.params, cfg.runs, seed)?;
    let mut out = Writer::new(ctx)?;
    out.put("trajectory.csv", &trajectory_csv(&ensemble))?;
    if full {
        let mut runs = String::new();
        runs_jsonl(&mut runs, None, &ensemble);
        out.put("runs.jsonl", &runs)?;
    }
    Ok(out.finish())
}

/// No protection vs the configured defense vs a reshuffle of it.
pub fn compare(ctx: &Context, full: bool) -> Result<Vec<PathBuf>, CliError> {
    let net = ctx.network()?;
    let seed = ctx.run_seed()?;
    let (q, phi) = simulated_strategy(ctx, &net)?;
    let cfg = ctx.dynamics()?;
    let cmp = compare_strategies(&net, &q, &phi, &cfg.params, cfg.runs, seed, cfg.reshuffle)?;
    let mut summary = json!({
        "runs": cfg.runs,
        "asymptotic": {
            "none": cmp.none.asymptotic,
            "optimal": cmp.optimal.asymptotic,
            "reshuffled": cmp.reshuffled.asymptotic,
        },
    });
    if cfg.runs >= 2 {
        let optimal = cmp.optimal.per_run_asymptotic();
        summary["optimal_vs_reshuffled"] = json!(paired_t_test(
            &optimal,
            &cmp.reshuffled.per_run_asymptotic()
        ));
        summary["optimal_vs_none"] = json!(paired_t_test(&optimal, &cmp.none.per_run_asymptotic()));
    }
    let mut out = Writer::new(ctx)?;
    out.put("comparison.csv", &comparison_csv(&cmp))?;
    out.put("comparison.json", &pretty(&summary))?;
    if full {
        let mut runs = String::new();
        for (name, ens) in cmp.strategies() {
            runs_jsonl(&mut runs, Some(name), ens);
        }
        out.put("runs.jsonl", &runs)?;
    }
    Ok(out.finish())
}
