//! Security investment on networks exposed to strategic, contagious attacks.
//!
//! A defender spreads an investment vector `q ∈ [0,1]^n` over the nodes of an
//! undirected network; an attacker answers with a seed distribution `φ` on the
//! simplex. Infection spreads from the seed through every susceptible node
//! connected to it. The crate provides
//!
//! * [`graph`]: networks, the topology generators used in experiments, and
//!   connectivity queries under node removal;
//! * [`protect`]: 1-point and 2-point protection tensors and their weighted
//!   reductions;
//! * [`risk`]: infection probabilities (exhaustive, Monte Carlo, tree closed
//!   form), walk-count risks and activation risks;
//! * [`game`]: player objectives and the attacker's best response;
//! * [`equil`]: closed-form asymptotic and numerical Stackelberg equilibria;
//! * [`frontier`]: risk/cost efficient frontiers;
//! * [`dynamics`]: discrete-time SI/SIS/threshold contagion used to validate
//!   allocations.
//!
//! Nodes are indexed from 0.

pub mod dynamics;
pub mod equil;
pub mod error;
pub mod frontier;
pub mod game;
pub mod graph;
pub mod protect;
pub mod risk;
pub mod stats;

pub use dynamics::{DynamicsParams, Trajectory};
pub use equil::{EquilibriumResult, MVariant, SolverMethod, SolverOptions};
pub use error::{Error, Result};
pub use frontier::FrontierPoint;
pub use game::{CostKind, GameParams, ValueProfiles};
pub use graph::{Network, Topology, TopologySpec};
pub use protect::{OnePointTensor, TwoPointTensor};
pub use risk::{AttackVector, DefenseVector, RiskKind, RiskSpec, RiskVector, WalkMode};
