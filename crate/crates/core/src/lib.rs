//! Optimal decentralized scheduling of deadline-constrained packets over
//! unreliable multi-hop networks.
//!
//! The pipeline: [`model`] describes an instance; [`dp`] solves the
//! per-packet problem for a price vector; [`lp`] solves the network-wide
//! problem directly over occupation measures and reads prices off its duals;
//! [`eval`] evaluates policies exactly and runs price tatonnement; [`sim`]
//! runs slot-level simulations of the resulting policies, their truncations
//! under hard limits, and EDF baselines.

pub mod bundled;
pub mod dp;
pub mod error;
pub mod eval;
pub mod lp;
pub mod model;
pub mod policy;
pub mod sim;
pub mod simplex;

pub use dp::{extract_thresholds, solve_packet_dp, PriceVector, ThresholdTable, ValueTable};
pub use error::{Error, Result};
pub use eval::{dual_function, evaluate, occupation_measure, tatonnement, PerfReport, TatonnementTrace};
pub use lp::{build_lp, extract_policy, extract_prices, solve_lp, LpInstance, LpStatus, OccupationSolution};
pub use model::{parse_spec, validate_spec, Diagnostic, NodeId, ProblemSpec, Severity};
pub use policy::{Action, FlowPolicy, PolicyTable};
pub use sim::{run_sim, PolicyImpl, PolicyKind, SimMetrics};
