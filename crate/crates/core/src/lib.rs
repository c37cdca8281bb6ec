//! Exact finite-horizon dynamic programming for MDPs with continuous
//! and mixed discrete-continuous state spaces.
//!
//! Transition models are rectangular piecewise constant (each cell of a
//! rectangular partition carries a finite outcome distribution); reward
//! models are rectangular piecewise constant or piecewise linear and
//! convex. Value functions are represented exactly as kd-tree partitions
//! whose cells carry sets of linear functions, kept minimal by LP-based
//! dominance pruning. A uniform-grid solver serves as a baseline and a
//! Monte-Carlo rollout simulator as an independent check.

pub mod baseline;
pub mod geometry;
pub mod linprog;
pub mod mc;
pub mod model;
pub mod pwlc;
pub mod rover;
pub mod solver;

#[doc(hidden)]
pub mod testkit;

pub use geometry::{intersect, intersect_map, KdPartition, LeafStats, LeafView, Rect};
pub use linprog::{solve_witness, LpSolution, WitnessLp};
pub use model::{HybridMdp, Outcome, OutcomeKind, OutcomeSet};
pub use pwlc::{LinearFn, PwlcSet};
pub use solver::{
    bellman_backup, eval_value, extract_policy, sigma_a, value_iteration, Policy, SolveOptions,
    SolveResult, ValueFunction,
};
