//! Structured dynamic programming over partition-valued value functions:
//! the expected-successor-value projection, the full Bellman backup,
//! value iteration to the horizon, and policy and value queries.
//!
//! The backup never discretizes: transition cells are shifted against
//! the current value partition, refined only where boundaries actually
//! cross, and payloads are combined with cross-sums, unions, and
//! dominance pruning. Rewards of the constant family keep every payload
//! a singleton constant, so the piecewise-constant case is the same code
//! path with trivial pruning.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{intersect, intersect_map, GeometryError, KdPartition, Rect};
use crate::model::{HybridMdp, OutcomeKind, OutcomeSet};
use crate::pwlc::{PwlcError, PwlcSet, DEFAULT_PRUNE_TOL, DUPLICATE_TOL};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pwlc(#[from] PwlcError),
    #[error("no applicable action in discrete state '{state}'")]
    NoApplicableAction { state: String },
    #[error("vector count {vectors} at stage {stage} exceeds cap {cap}")]
    VectorCap {
        stage: usize,
        vectors: usize,
        cap: usize,
    },
    #[error("time budget exhausted at stage {stage}")]
    TimeBudget { stage: usize },
    #[error("stage {stage} outside computed range {available}")]
    StageOutOfRange { stage: usize, available: usize },
    #[error("internal solver invariant broken: {0}")]
    Internal(String),
}

/// Knobs for the structured solver. `merge_tol = 0` keeps merging exact
/// (structural equality at the noise floor); a positive value trades
/// solution quality for smaller partitions.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub prune_tol: f64,
    pub merge_tol: f64,
    /// Overrides the model's horizon when set.
    pub horizon: Option<usize>,
    /// Abort when the total vector count of a stage exceeds this.
    pub max_vectors: Option<usize>,
    /// Abort when a solve runs longer than this.
    pub time_budget: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            prune_tol: DEFAULT_PRUNE_TOL,
            merge_tol: 0.0,
            horizon: None,
            max_vectors: None,
            time_budget: None,
        }
    }
}

impl SolveOptions {
    fn merge_eq(&self) -> impl Fn(&PwlcSet, &PwlcSet) -> bool + '_ {
        let tol = self.merge_tol.max(DUPLICATE_TOL);
        move |a, b| a.approx_eq(b, tol)
    }
}

/// One value function `V^stage`: a pruned piecewise-linear-convex
/// partition per discrete state. `V^0` is identically zero.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    stage: usize,
    partitions: Vec<KdPartition<PwlcSet>>,
}

impl ValueFunction {
    pub fn zero(m: &HybridMdp) -> Self {
        ValueFunction {
            stage: 0,
            partitions: (0..m.num_states())
                .map(|_| KdPartition::from_payload(m.dims(), PwlcSet::zero(m.dims())))
                .collect(),
        }
    }

    pub fn from_partitions(stage: usize, partitions: Vec<KdPartition<PwlcSet>>) -> Self {
        ValueFunction { stage, partitions }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn num_states(&self) -> usize {
        self.partitions.len()
    }

    pub fn partition(&self, state: usize) -> &KdPartition<PwlcSet> {
        &self.partitions[state]
    }

    /// Point query: locate the cell, evaluate the pointwise maximum.
    pub fn eval(&self, state: usize, x: &[f64]) -> Result<f64, GeometryError> {
        Ok(self.partitions[state].locate(x)?.payload.value_at(x))
    }

    /// Total linear-function count across all states.
    pub fn vectors(&self) -> usize {
        self.partitions
            .iter()
            .map(|p| p.leaves().map(|l| l.payload.len()).sum::<usize>())
            .sum()
    }
}

/// Greedy decision rule extracted from one value function. The cell
/// label is the action (and winning linear function) at the cell
/// center, which is exact wherever payloads are constants; ties go to
/// the earliest declared action.
#[derive(Debug, Clone)]
pub struct Policy {
    stage: usize,
    partitions: Vec<KdPartition<PolicyCell>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyCell {
    pub action: usize,
    pub fn_index: usize,
}

impl Policy {
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn partition(&self, state: usize) -> &KdPartition<PolicyCell> {
        &self.partitions[state]
    }

    pub fn action_at(&self, state: usize, x: &[f64]) -> Result<PolicyCell, GeometryError> {
        Ok(*self.partitions[state].locate(x)?.payload)
    }
}

/// Per-stage size and timing counters.
#[derive(Debug, Clone)]
pub struct StageStats {
    pub stage: usize,
    /// `(leaves, vectors)` per discrete state.
    pub per_state: Vec<(usize, usize)>,
    pub seconds: f64,
}

impl StageStats {
    pub fn total_leaves(&self) -> usize {
        self.per_state.iter().map(|(l, _)| l).sum()
    }

    pub fn total_vectors(&self) -> usize {
        self.per_state.iter().map(|(_, v)| v).sum()
    }

    fn capture(v: &ValueFunction, seconds: f64) -> Self {
        StageStats {
            stage: v.stage,
            per_state: v
                .partitions
                .iter()
                .map(|p| {
                    let stats = p.leaf_stats(|set| set.len());
                    let vectors = p.leaves().map(|l| l.payload.len()).sum();
                    (stats.leaves, vectors)
                })
                .collect(),
            seconds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// `values[k]` is the value with `k` steps remaining, `k = 0..=n`.
    pub values: Vec<ValueFunction>,
    pub stats: Vec<StageStats>,
    pub peak_vectors: usize,
}

/// Expected next-stage value for one continuous conditional: pointwise
/// `sum_i prob_i * V(successor of x under outcome i)`, represented as a
/// partition over the source space.
///
/// Relative outcomes shift each transition cell, intersect the shifted
/// region with the value partition, and pull every piece back to source
/// coordinates (both the cell and its linear functions are translated).
/// Probability mass shifted outside the cube contributes
/// `out_of_bounds_value`. Absolute outcomes never subdivide the cell:
/// their contribution is the constant value at the landing point.
pub fn sigma_a(
    v: &ValueFunction,
    successor: usize,
    transitions: &KdPartition<OutcomeSet>,
    out_of_bounds_value: f64,
    opts: &SolveOptions,
) -> Result<KdPartition<PwlcSet>, SolveError> {
    sigma_with_deadline(v, successor, transitions, out_of_bounds_value, opts, None)
}

fn sigma_with_deadline(
    v: &ValueFunction,
    successor: usize,
    transitions: &KdPartition<OutcomeSet>,
    out_of_bounds_value: f64,
    opts: &SolveOptions,
    deadline: Option<Instant>,
) -> Result<KdPartition<PwlcSet>, SolveError> {
    let dims = transitions.dims();
    let vp = &v.partitions[successor];
    let merge_eq = opts.merge_eq();
    let mut pieces: Vec<(Rect, PwlcSet)> = Vec::new();

    for leaf in transitions.leaves() {
        if let Some(deadline) = deadline {
            if Instant::now() >= deadline {
                return Err(SolveError::TimeBudget { stage: v.stage });
            }
        }
        let source = leaf.rect;
        let set = leaf.payload;
        match set.kind() {
            None => {
                return Err(SolveError::Internal(
                    "transition cell with empty outcome set".into(),
                ))
            }
            Some(OutcomeKind::Absolute) => {
                let mut value = 0.0;
                for o in &set.outcomes {
                    value += o.prob * vp.locate(&o.target)?.payload.value_at(&o.target);
                }
                pieces.push((source.clone(), PwlcSet::constant(dims, value)));
            }
            Some(OutcomeKind::Relative) => {
                let mut acc: KdPartition<Option<PwlcSet>> =
                    KdPartition::from_payload(dims, None)
                        .refine(source, |_| Some(PwlcSet::zero(dims)));
                for o in &set.outcomes {
                    let piece_tree =
                        outcome_tree(vp, source, &o.target, o.prob, out_of_bounds_value, dims)?;
                    let mut failure: Option<SolveError> = None;
                    acc = intersect_map(&acc, &piece_tree, |rect, a, b| match (a, b) {
                        (Some(sa), Some(sb)) => {
                            if failure.is_some() {
                                return None;
                            }
                            match sa.cross_sum(sb).prune(rect, opts.prune_tol) {
                                Ok(p) => Some(p),
                                Err(e) => {
                                    failure = Some(e.into());
                                    None
                                }
                            }
                        }
                        (None, None) => None,
                        _ => {
                            failure = Some(SolveError::Internal(
                                "outcome tree coverage mismatch".into(),
                            ));
                            None
                        }
                    });
                    if let Some(e) = failure {
                        return Err(e);
                    }
                    acc = acc.merge_equal_leaves(|a, b| match (a, b) {
                        (Some(x), Some(y)) => merge_eq(x, y),
                        (None, None) => true,
                        _ => false,
                    });
                }
                for cell in acc.leaves() {
                    if let Some(set) = cell.payload {
                        pieces.push((cell.rect.clone(), set.clone()));
                    }
                }
            }
        }
    }

    KdPartition::from_pieces(dims, pieces)
        .map_err(|e| SolveError::Internal(format!("sigma assembly: {e}")))
}

/// Value pieces contributed by a single relative outcome over one
/// source cell, as a partition of the cube: `None` outside the cell,
/// the translated scaled payload where the shifted point stays inside
/// the cube, and the scaled out-of-bounds constant where it leaves.
fn outcome_tree(
    vp: &KdPartition<PwlcSet>,
    source: &Rect,
    delta: &[f64],
    prob: f64,
    out_of_bounds_value: f64,
    dims: usize,
) -> Result<KdPartition<Option<PwlcSet>>, SolveError> {
    let neg: Vec<f64> = delta.iter().map(|d| -d).collect();
    let clipped = PwlcSet::constant(dims, prob * out_of_bounds_value);
    let mut tree =
        KdPartition::from_payload(dims, None).refine(source, |_| Some(clipped.clone()));
    let window = Rect::unit(dims)
        .shift_clip(&neg)
        .and_then(|w| w.intersection(source));
    if let Some(window) = window {
        for (rect, payload) in vp.translated_overlaps(&neg, &window) {
            let pulled = payload
                .translate(delta)
                .scale(prob)
                .map_err(SolveError::Pwlc)?;
            tree = tree.refine(&rect, |_| Some(pulled.clone()));
        }
    }
    Ok(tree)
}

/// Per-action value partitions `Q_a` for one discrete state: the
/// expected successor values weighted by the discrete transition,
/// plus the reward, pruned cell by cell.
fn q_functions(
    v: &ValueFunction,
    m: &HybridMdp,
    state: usize,
    opts: &SolveOptions,
    deadline: Option<Instant>,
) -> Result<Vec<(usize, KdPartition<PwlcSet>)>, SolveError> {
    let dims = m.dims();
    let merge_eq = opts.merge_eq();
    let mut out = Vec::new();

    for (action, entry) in m.applicable(state) {
        if let Some(deadline) = deadline {
            if Instant::now() >= deadline {
                return Err(SolveError::TimeBudget { stage: v.stage });
            }
        }
        let mut acc = entry
            .discrete
            .map(|dist| (dist.clone(), PwlcSet::zero(dims)));
        for (sp, cont) in entry.continuous.iter().enumerate() {
            let Some(transitions) = cont else { continue };
            let sigma = sigma_with_deadline(
                v,
                sp,
                transitions,
                m.out_of_bounds_value(),
                opts,
                deadline,
            )?;
            let mut failure: Option<SolveError> = None;
            acc = intersect_map(&acc, &sigma, |rect, (dist, acc_set), sigma_set| {
                let p = dist.prob(sp);
                if p == 0.0 || failure.is_some() {
                    return (dist.clone(), acc_set.clone());
                }
                let combined = sigma_set
                    .scale(p)
                    .and_then(|scaled| acc_set.cross_sum(&scaled).prune(rect, opts.prune_tol));
                match combined {
                    Ok(set) => (dist.clone(), set),
                    Err(e) => {
                        failure = Some(e.into());
                        (dist.clone(), acc_set.clone())
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            acc = acc.merge_equal_leaves(|(da, sa), (db, sb)| {
                da.probs() == db.probs() && merge_eq(sa, sb)
            });
        }

        let mut failure: Option<SolveError> = None;
        let q = intersect_map(&acc, &entry.reward, |rect, (_, sigma_set), reward_set| {
            if failure.is_some() {
                return sigma_set.clone();
            }
            match sigma_set.cross_sum(reward_set).prune(rect, opts.prune_tol) {
                Ok(set) => set,
                Err(e) => {
                    failure = Some(e.into());
                    sigma_set.clone()
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        out.push((action, q.merge_equal_leaves(&merge_eq)));
    }
    Ok(out)
}

fn backup_state(
    v: &ValueFunction,
    m: &HybridMdp,
    state: usize,
    opts: &SolveOptions,
    deadline: Option<Instant>,
) -> Result<KdPartition<PwlcSet>, SolveError> {
    let q = q_functions(v, m, state, opts, deadline)?;
    let Some(((_, first), rest)) = q.split_first() else {
        return Err(SolveError::NoApplicableAction {
            state: m.states()[state].clone(),
        });
    };

    // Maximize over actions: union the sets cell by cell, prune once
    // after the final union.
    let mut best = first.clone();
    for (_, next) in rest {
        best = intersect(&best, next, |a, b| a.union_max(b));
    }
    let mut failure: Option<SolveError> = None;
    let pruned = best.map_leaves(|rect, set| {
        if failure.is_some() {
            return set.clone();
        }
        match set.prune(rect, opts.prune_tol) {
            Ok(p) => p,
            Err(e) => {
                failure = Some(e.into());
                set.clone()
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(pruned.merge_equal_leaves(opts.merge_eq()))
}

/// One Bellman backup: `V^{k+1}(s, x) = max_a [R_a^s(x) +
/// sum_{s'} T^d(s'|s, x) * sigma_a^{s'}(x)]` for every state, applied
/// structurally. Backups for distinct discrete states are independent
/// and run in parallel; results are assembled in state order so the
/// output is identical for any thread count.
pub fn bellman_backup(
    v: &ValueFunction,
    m: &HybridMdp,
    opts: &SolveOptions,
) -> Result<ValueFunction, SolveError> {
    let deadline = opts.time_budget.map(|b| Instant::now() + b);
    backup_with_deadline(v, m, opts, deadline)
}

fn backup_with_deadline(
    v: &ValueFunction,
    m: &HybridMdp,
    opts: &SolveOptions,
    deadline: Option<Instant>,
) -> Result<ValueFunction, SolveError> {
    let partitions: Vec<KdPartition<PwlcSet>> = (0..m.num_states())
        .into_par_iter()
        .map(|s| backup_state(v, m, s, opts, deadline))
        .collect::<Result<_, _>>()?;
    Ok(ValueFunction {
        stage: v.stage + 1,
        partitions,
    })
}

/// Applies the Bellman backup `horizon` times starting from the zero
/// function, recording per-stage partition sizes and timings.
pub fn value_iteration(m: &HybridMdp, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    let horizon = opts.horizon.unwrap_or(m.horizon());
    let deadline = opts.time_budget.map(|b| Instant::now() + b);
    let mut values = vec![ValueFunction::zero(m)];
    let mut stats = vec![StageStats::capture(&values[0], 0.0)];
    let mut peak_vectors = values[0].vectors();

    for stage in 0..horizon {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                return Err(SolveError::TimeBudget { stage });
            }
        }
        let started = Instant::now();
        let next = backup_with_deadline(values.last().unwrap(), m, opts, deadline)?;
        let seconds = started.elapsed().as_secs_f64();
        let vectors = next.vectors();
        peak_vectors = peak_vectors.max(vectors);
        if let Some(cap) = opts.max_vectors {
            if vectors > cap {
                return Err(SolveError::VectorCap {
                    stage: stage + 1,
                    vectors,
                    cap,
                });
            }
        }
        stats.push(StageStats::capture(&next, seconds));
        values.push(next);
    }
    Ok(SolveResult {
        values,
        stats,
        peak_vectors,
    })
}

/// Greedy policies, one per stage: `policies[k]` maximizes the backup
/// of `values[k]` and is the decision rule when `k + 1` steps remain.
pub fn extract_policy(
    values: &[ValueFunction],
    m: &HybridMdp,
    opts: &SolveOptions,
) -> Result<Vec<Policy>, SolveError> {
    if values.is_empty() {
        return Err(SolveError::Internal("empty stage list".into()));
    }
    let stages = values.len() - 1;
    (0..stages)
        .into_par_iter()
        .map(|k| {
            let partitions = (0..m.num_states())
                .map(|s| policy_state(&values[k], m, s, opts))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Policy {
                stage: k,
                partitions,
            })
        })
        .collect()
}

fn policy_state(
    v: &ValueFunction,
    m: &HybridMdp,
    state: usize,
    opts: &SolveOptions,
) -> Result<KdPartition<PolicyCell>, SolveError> {
    let q = q_functions(v, m, state, opts, None)?;
    let Some(((first_action, first), rest)) = q.split_first() else {
        return Err(SolveError::NoApplicableAction {
            state: m.states()[state].clone(),
        });
    };

    let mut acc: KdPartition<(usize, PwlcSet)> = first.map(|set| (*first_action, set.clone()));
    for (action, tree) in rest {
        acc = intersect_map(&acc, tree, |rect, (best_action, best_set), candidate| {
            let center = rect.center();
            let (best_value, _) = best_set.eval(&center);
            let (cand_value, _) = candidate.eval(&center);
            if cand_value > best_value {
                (*action, candidate.clone())
            } else {
                (*best_action, best_set.clone())
            }
        });
    }
    let labeled = acc.map_leaves(|rect, (action, set)| PolicyCell {
        action: *action,
        fn_index: set.eval(&rect.center()).1,
    });
    Ok(labeled.merge_equal_leaves(|a, b| a == b))
}

/// Point query against a computed stage list.
pub fn eval_value(
    values: &[ValueFunction],
    state: usize,
    x: &[f64],
    stage: usize,
) -> Result<f64, SolveError> {
    let Some(v) = values.get(stage) else {
        return Err(SolveError::StageOutOfRange {
            stage,
            available: values.len(),
        });
    };
    Ok(v.eval(state, x)?)
}
