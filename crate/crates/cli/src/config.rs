//! Run configuration: one JSON file per experiment, plus flag overrides.

use std::path::{Path, PathBuf};

use netdefense::dynamics::Reshuffle;
use netdefense::equil::GradientOptions;
use netdefense::graph::{generate_topology, tree_level_nodes};
use netdefense::{
    DynamicsParams, GameParams, Network, RiskSpec, SolverMethod, SolverOptions, Topology,
    TopologySpec, ValueProfiles,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Fills in a missing topology seed and drives the solver's
    /// random starts and the contagion runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyConfig>,
    /// Edge-list file, relative to the config file. Alternative to `topology`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_list: Option<PathBuf>,
    #[serde(default)]
    pub profiles: ProfilesConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameParams>,
    #[serde(default = "default_risk")]
    pub risk: RiskSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier: Option<FrontierConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_risk() -> RiskSpec {
    RiskSpec::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    #[serde(flatten)]
    pub topology: Topology,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A value vector given inline or by preset name: `uniform` (all ones),
/// `normalized` (all `1/n`), `indicator:<i,j,..>`, `level:<k>` (tree level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Values(Vec<f64>),
    Preset(String),
}

impl ProfileSpec {
    fn preset(name: &str) -> Self {
        ProfileSpec::Preset(name.into())
    }

    pub fn resolve(&self, n: usize, topology: Option<&Topology>) -> Result<Vec<f64>, CliError> {
        let preset = match self {
            ProfileSpec::Values(v) => {
                if v.len() != n {
                    return Err(CliError::Config(format!(
                        "profile has {} entries, network has {n} nodes",
                        v.len()
                    )));
                }
                return Ok(v.clone());
            }
            ProfileSpec::Preset(p) => p.as_str(),
        };
        match preset.split_once(':') {
            None if preset == "uniform" => Ok(vec![1.0; n]),
            None if preset == "normalized" => Ok(vec![1.0 / n as f64; n]),
            Some(("indicator", list)) => {
                let mut v = vec![0.0; n];
                for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let i: usize = item.parse().map_err(|_| {
                        CliError::Config(format!("bad node index '{item}' in preset '{preset}'"))
                    })?;
                    if i >= n {
                        return Err(CliError::Config(format!(
                            "node {i} out of range in preset '{preset}'"
                        )));
                    }
                    v[i] = 1.0;
                }
                Ok(v)
            }
            Some(("level", k)) => {
                let level: usize = k
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad level in preset '{preset}'")))?;
                let Some(&Topology::Tree { branching, levels }) = topology else {
                    return Err(CliError::Config(format!(
                        "preset '{preset}' needs a tree topology"
                    )));
                };
                if level > levels {
                    return Err(CliError::Config(format!("tree has no level {level}")));
                }
                let mut v = vec![0.0; n];
                for i in tree_level_nodes(branching, level) {
                    v[i] = 1.0;
                }
                Ok(v)
            }
            _ => Err(CliError::Config(format!(
                "unknown profile preset '{preset}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilesConfig {
    #[serde(default = "uniform_profile")]
    pub z: ProfileSpec,
    #[serde(default = "uniform_profile")]
    pub eta: ProfileSpec,
}

fn uniform_profile() -> ProfileSpec {
    ProfileSpec::preset("uniform")
}

impl Default for ProfilesConfig {
    fn default() -> Self {
        Self {
            z: uniform_profile(),
            eta: uniform_profile(),
        }
    }
}

fn default_fd_step() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: SolverMethod,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::default(),
            fd_step: default_fd_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    #[serde(default = "normalized_profile")]
    pub v: ProfileSpec,
    #[serde(default = "uniform_profile")]
    pub w: ProfileSpec,
}

fn normalized_profile() -> ProfileSpec {
    ProfileSpec::preset("normalized")
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            v: normalized_profile(),
            w: uniform_profile(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaGrid {
    List(Vec<f64>),
    Log { lo: f64, hi: f64, points: usize },
}

impl AlphaGrid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match *self {
            AlphaGrid::List(ref v) => Ok(v.clone()),
            AlphaGrid::Log { lo, hi, points } => {
                if !(lo > 0.0 && hi > lo && points >= 2) {
                    return Err(CliError::Config(
                        "log grid needs 0 < lo < hi and points >= 2".into(),
                    ));
                }
                Ok(netdefense::frontier::log_grid(lo, hi, points))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierConfig {
    pub alphas: AlphaGrid,
    /// Warm-start each grid point from the previous one (sequential sweep).
    #[serde(default)]
    pub chain: bool,
}

/// Where the simulated defense comes from: an explicit vector, or one of
/// `equilibrium`, `zeros`, `ones`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DefenseSource {
    Values(Vec<f64>),
    Named(String),
}

/// Initial-seed law: an explicit distribution, `best_response` or `uniform`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttackSource {
    Values(Vec<f64>),
    Named(String),
}

fn default_runs() -> usize {
    100
}

fn default_defense() -> DefenseSource {
    DefenseSource::Named("equilibrium".into())
}

fn default_attack() -> AttackSource {
    AttackSource::Named("best_response".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    #[serde(flatten)]
    pub params: DynamicsParams,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_defense")]
    pub defense: DefenseSource,
    #[serde(default = "default_attack")]
    pub attack: AttackSource,
    #[serde(default)]
    pub reshuffle: Reshuffle,
}

/// Flag overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A parsed config together with the directory relative paths resolve from.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            // serde_json appends its own " at line L column C"
            let msg = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            let msg = msg.strip_suffix(&suffix).unwrap_or(&msg);
            CliError::Config(format!("line {}, column {}: {msg}", e.line(), e.column()))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is serializable") + "\n"
    }
}

impl Context {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = RunConfig::from_json(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        if overrides.seed.is_some() {
            config.seed = overrides.seed;
        }
        if overrides.out.is_some() {
            config.out = overrides.out.clone();
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let ctx = Self { config, base_dir };
        ctx.validate()?;
        Ok(ctx)
    }

    fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        match (&c.topology, &c.edge_list) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either topology or edge_list, not both".into(),
                ))
            }
            (None, None) => return Err(CliError::Config("missing topology or edge_list".into())),
            _ => {}
        }
        if let Some(t) = &c.topology {
            let random = matches!(t.topology, Topology::ErdosRenyi { .. });
            if random && t.seed.is_none() && c.seed.is_none() {
                return Err(CliError::Config(
                    "random topology needs topology.seed or a master seed".into(),
                ));
            }
        }
        if let Some(game) = &c.game {
            game.validate().map_err(config)?;
        }
        if let Some(d) = &c.dynamics {
            d.params.validate().map_err(config)?;
            if d.runs == 0 {
                return Err(CliError::Config("dynamics.runs must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.config
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn network(&self) -> Result<Network, CliError> {
        if let Some(path) = &self.config.edge_list {
            let path = self.base_dir.join(path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            return Network::from_edge_list_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
        }
        let t = self.config.topology.as_ref().expect("validated");
        let seed = t.seed.or(self.config.seed).unwrap_or(0);
        generate_topology(&TopologySpec::new(t.topology.clone(), seed)).map_err(config)
    }

    fn topology(&self) -> Option<&Topology> {
        self.config.topology.as_ref().map(|t| &t.topology)
    }

    pub fn profile(&self, spec: &ProfileSpec, n: usize) -> Result<Vec<f64>, CliError> {
        spec.resolve(n, self.topology())
    }

    pub fn profiles(&self, n: usize) -> Result<ValueProfiles, CliError> {
        let p = &self.config.profiles;
        ValueProfiles::new(self.profile(&p.z, n)?, self.profile(&p.eta, n)?).map_err(config)
    }

    pub fn game(&self) -> Result<GameParams, CliError> {
        self.config
            .game
            .ok_or_else(|| CliError::Config("missing game section (alpha, theta)".into()))
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut method = self.config.solver.method.clone();
        if let (SolverMethod::ProjectedGradient(opts), Some(seed)) = (&mut method, self.config.seed)
        {
            *opts = GradientOptions {
                seed,
                ..opts.clone()
            };
        }
        SolverOptions {
            method,
            risk: self.config.risk.clone(),
            fd_step: self.config.solver.fd_step,
        }
    }

    pub fn dynamics(&self) -> Result<&DynamicsConfig, CliError> {
        self.config
            .dynamics
            .as_ref()
            .ok_or_else(|| CliError::Config("missing dynamics section".into()))
    }

    /// Seed for the contagion runs.
    pub fn run_seed(&self) -> Result<u64, CliError> {
        self.config.seed.ok_or_else(|| {
            CliError::Config("simulations need a master seed (config seed or --seed)".into())
        })
    }
}

fn config(e: netdefense::Error) -> CliError {
    CliError::Config(e.to_string())
}
