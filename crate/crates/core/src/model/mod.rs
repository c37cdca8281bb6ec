//! Model types for continuous and mixed discrete-continuous MDPs:
//! actions, rectangular piecewise-constant transition partitions with
//! finite outcome sets, piecewise reward partitions, the discrete-state
//! layer, and validation.
//!
//! A model with one discrete state and constant rewards is the plain
//! continuous piecewise-constant case; one discrete state with linear
//! rewards is the piecewise-linear case. The solver treats both through
//! the same code path.

mod schema;

pub use schema::{load_model, save_model, ModelDoc};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::KdPartition;
use crate::pwlc::PwlcSet;

/// Probability sums are accepted within this of 1.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model document parse error: {0}")]
    Parse(String),
    #[error("model is invalid:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

/// One constraint breach, as data: where plus what.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Rounds a diagnostic quantity so messages read "sum to 0.9" rather
/// than a 17-digit float.
fn compact(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// How a single transition outcome moves the continuous state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    /// The state is shifted by the target vector.
    Relative,
    /// The state jumps to the target point.
    Absolute,
}

/// One possible result of taking an action: a shift or landing point
/// together with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub target: Vec<f64>,
    pub prob: f64,
}

/// The finite distribution over outcomes shared by every state inside
/// one transition-partition cell. Kinds are homogeneous within a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSet {
    pub outcomes: Vec<Outcome>,
}

impl OutcomeSet {
    pub fn relative(pairs: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Self {
        OutcomeSet {
            outcomes: pairs
                .into_iter()
                .map(|(target, prob)| Outcome {
                    kind: OutcomeKind::Relative,
                    target,
                    prob,
                })
                .collect(),
        }
    }

    pub fn absolute(pairs: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Self {
        OutcomeSet {
            outcomes: pairs
                .into_iter()
                .map(|(target, prob)| Outcome {
                    kind: OutcomeKind::Absolute,
                    target,
                    prob,
                })
                .collect(),
        }
    }

    pub fn kind(&self) -> Option<OutcomeKind> {
        self.outcomes.first().map(|o| o.kind)
    }
}

/// Probabilities over successor discrete states, dense over the model's
/// state list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(probs: Vec<f64>) -> Self {
        DiscreteDist { probs }
    }

    /// Point mass on one successor.
    pub fn delta(num_states: usize, successor: usize) -> Self {
        let mut probs = vec![0.0; num_states];
        probs[successor] = 1.0;
        DiscreteDist { probs }
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn successors(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
    }
}

/// Everything attached to one applicable (discrete state, action) pair.
#[derive(Debug, Clone)]
pub struct ActionEntry {
    /// Reward partition; constant rewards are singleton sets with zero
    /// coefficient vectors.
    pub reward: KdPartition<PwlcSet>,
    /// Distribution over successor discrete states, per cell.
    pub discrete: KdPartition<DiscreteDist>,
    /// Continuous conditional per successor discrete state; `None` where
    /// the successor is unreachable under this action.
    pub continuous: Vec<Option<KdPartition<OutcomeSet>>>,
}

/// The full model: discrete states crossed with `[0, 1]^dims`, a finite
/// action set with per-(state, action) applicability, rectangular
/// piecewise-constant transitions, and piecewise rewards.
///
/// Construction is permissive; run [`HybridMdp::validate`] to collect
/// violations. Models are immutable once built.
#[derive(Debug, Clone)]
pub struct HybridMdp {
    dims: usize,
    states: Vec<String>,
    actions: Vec<String>,
    horizon: usize,
    out_of_bounds_value: f64,
    /// `entries[state][action]`, `None` when the action is inapplicable.
    entries: Vec<Vec<Option<ActionEntry>>>,
}

impl HybridMdp {
    pub fn new(
        dims: usize,
        states: Vec<String>,
        actions: Vec<String>,
        horizon: usize,
        out_of_bounds_value: f64,
        entries: Vec<Vec<Option<ActionEntry>>>,
    ) -> Self {
        HybridMdp {
            dims,
            states,
            actions,
            horizon,
            out_of_bounds_value,
            entries,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn out_of_bounds_value(&self) -> f64 {
        self.out_of_bounds_value
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn entry(&self, state: usize, action: usize) -> Option<&ActionEntry> {
        self.entries[state][action].as_ref()
    }

    /// Applicable actions for a discrete state, in declaration order.
    pub fn applicable(&self, state: usize) -> impl Iterator<Item = (usize, &ActionEntry)> {
        self.entries[state]
            .iter()
            .enumerate()
            .filter_map(|(a, e)| e.as_ref().map(|entry| (a, entry)))
    }

    /// Checks every model invariant and reports each breach with the
    /// partition path and field that caused it. An empty list means the
    /// model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        fn report(out: &mut Vec<Violation>, path: String, message: String) {
            out.push(Violation { path, message });
        }

        if self.dims == 0 {
            report(&mut out, "dims".into(), "model needs at least one continuous variable".into());
        }
        if self.horizon == 0 {
            report(&mut out, "horizon".into(), "horizon must be a positive integer".into());
        }
        if self.states.is_empty() {
            report(&mut out, "discrete_states".into(), "at least one discrete state".into());
        }
        if self.actions.is_empty() {
            report(&mut out, "actions".into(), "at least one action".into());
        }
        for (i, s) in self.states.iter().enumerate() {
            if self.states[..i].contains(s) {
                report(&mut out, format!("discrete_states[{i}]"), format!("duplicate state '{s}'"));
            }
        }
        for (i, a) in self.actions.iter().enumerate() {
            if self.actions[..i].contains(a) {
                report(&mut out, format!("actions[{i}]"), format!("duplicate action '{a}'"));
            }
        }

        for (s, row) in self.entries.iter().enumerate() {
            for (a, entry) in row.iter().enumerate() {
                let Some(entry) = entry else { continue };
                let at = |part: &str| format!("{}/{}/{part}", self.states[s], self.actions[a]);
                self.validate_entry(entry, &at, &mut out);
            }
        }
        out
    }

    fn validate_entry(
        &self,
        entry: &ActionEntry,
        at: &impl Fn(&str) -> String,
        out: &mut Vec<Violation>,
    ) {
        let mut report = |path: String, message: String| out.push(Violation { path, message });

        let stats = entry.reward.leaf_stats(|p| p.len());
        if (stats.volume - 1.0).abs() > 1e-12 {
            report(
                at("reward"),
                format!("partition volume {} differs from 1", stats.volume),
            );
        }
        for (i, leaf) in entry.reward.leaves().enumerate() {
            for (j, f) in leaf.payload.fns().iter().enumerate() {
                if f.dims() != self.dims {
                    report(
                        at(&format!("reward[{i}].linear_fns[{j}]")),
                        format!("expected {} coefficients, got {}", self.dims, f.dims()),
                    );
                }
            }
        }

        let mut reachable = vec![false; self.states.len()];
        for (i, leaf) in entry.discrete.leaves().enumerate() {
            let dist = leaf.payload;
            if dist.probs().len() != self.states.len() {
                report(
                    at(&format!("discrete[{i}]")),
                    format!(
                        "distribution over {} states, model has {}",
                        dist.probs().len(),
                        self.states.len()
                    ),
                );
                continue;
            }
            let mut sum = 0.0;
            for (si, &p) in dist.probs().iter().enumerate() {
                if !(0.0..=1.0 + PROB_SUM_TOL).contains(&p) {
                    report(
                        at(&format!("discrete[{i}]")),
                        format!("probability {p} for successor '{}'", self.states[si]),
                    );
                }
                if p > 0.0 {
                    reachable[si] = true;
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                report(
                    at(&format!("discrete[{i}]")),
                    format!("probabilities sum to {}", compact(sum)),
                );
            }
        }

        for (sp, cont) in entry.continuous.iter().enumerate() {
            match cont {
                None => {
                    if reachable[sp] {
                        report(
                            at("continuous"),
                            format!(
                                "successor '{}' is reachable but has no continuous conditional",
                                self.states[sp]
                            ),
                        );
                    }
                }
                Some(partition) => {
                    for (i, leaf) in partition.leaves().enumerate() {
                        let set = leaf.payload;
                        let path =
                            at(&format!("continuous.{}[{i}]", self.states[sp]));
                        if set.outcomes.is_empty() {
                            report(path, "outcome set is empty".into());
                            continue;
                        }
                        let kind = set.outcomes[0].kind;
                        let mut sum = 0.0;
                        for (j, o) in set.outcomes.iter().enumerate() {
                            if o.kind != kind {
                                report(
                                    at(&format!(
                                        "continuous.{}[{i}].outcomes[{j}]",
                                        self.states[sp]
                                    )),
                                    "mixed relative and absolute outcomes in one set".into(),
                                );
                            }
                            if !(o.prob > 0.0 && o.prob <= 1.0 + PROB_SUM_TOL) {
                                report(
                                    at(&format!(
                                        "continuous.{}[{i}].outcomes[{j}]",
                                        self.states[sp]
                                    )),
                                    format!("probability {} outside (0, 1]", o.prob),
                                );
                            }
                            if o.target.len() != self.dims {
                                report(
                                    at(&format!(
                                        "continuous.{}[{i}].outcomes[{j}]",
                                        self.states[sp]
                                    )),
                                    format!(
                                        "target has {} coordinates, model has {}",
                                        o.target.len(),
                                        self.dims
                                    ),
                                );
                                continue;
                            }
                            let range_ok = match o.kind {
                                OutcomeKind::Relative => {
                                    o.target.iter().all(|t| (-1.0..=1.0).contains(t))
                                }
                                OutcomeKind::Absolute => {
                                    o.target.iter().all(|t| (0.0..=1.0).contains(t))
                                }
                            };
                            if !range_ok {
                                report(
                                    at(&format!(
                                        "continuous.{}[{i}].outcomes[{j}]",
                                        self.states[sp]
                                    )),
                                    format!("target {:?} out of range", o.target),
                                );
                            }
                            sum += o.prob;
                        }
                        if (sum - 1.0).abs() > PROB_SUM_TOL {
                            report(path, format!("probabilities sum to {}", compact(sum)));
                        }
                    }
                }
            }
        }
    }
}
