//! Benchmark generator for a staged planetary-rover domain: a primary
//! plan (approach, servo, dig, back up, spectral imaging) with a
//! high-resolution imaging branch and a low-resolution imaging plus
//! onboard analysis branch, over 1-3 continuous resources consumed
//! according to discretized Gaussians. Minimum-resource preconditions
//! become transition-partition boundaries below which an action leads
//! to a terminal failure state.
//!
//! The shipped defaults are a reconstruction of that plan shape with
//! eleven stages; parameter values are chosen so plausible trajectories
//! stay inside the unit cube, not calibrated against any external data.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use thiserror::Error;

use crate::geometry::{KdPartition, Rect};
use crate::model::{
    ActionEntry, DiscreteDist, HybridMdp, OutcomeSet, Violation,
};
use crate::pwlc::{LinearFn, PwlcSet};

#[derive(Debug, Error)]
pub enum RoverError {
    #[error("invalid rover spec:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    InvalidSpec(Vec<String>),
    #[error("domain parameter out of range: {0}")]
    Domain(String),
    #[error("generated model failed validation:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Generated(Vec<Violation>),
}

/// Reward attached to completing an action: a constant, plus linear
/// coefficients over the resources used by the piecewise-linear reward
/// variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardSpec {
    pub constant: f64,
    #[serde(default)]
    pub linear: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    /// Stages where the action is applicable.
    pub from: Vec<String>,
    pub to: String,
    /// Mean consumption per resource, in normalized units.
    pub mean: Vec<f64>,
    /// Consumption standard deviation per resource.
    pub std: Vec<f64>,
    /// Minimum resource level required to attempt the action; below any
    /// of these the action fails into the terminal failure state.
    pub min_level: Vec<f64>,
    pub reward: RewardSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardVariant {
    /// Constant rewards per cell.
    Pwc,
    /// Linear rewards per cell.
    Pwlc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub resources: usize,
    /// Buckets per resource when discretizing consumption Gaussians.
    pub resolution: usize,
    pub horizon: usize,
    pub variant: RewardVariant,
    /// Cap on the joint outcome count per action; the per-resource
    /// resolution is coarsened until the product fits.
    #[serde(default)]
    pub max_outcomes: Option<usize>,
    pub stages: Vec<String>,
    pub failure_state: String,
    pub actions: Vec<ActionSpec>,
}

impl DomainSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(1..=3).contains(&self.resources) {
            errs.push(format!("resources must be 1..=3, got {}", self.resources));
        }
        if self.resolution < 2 {
            errs.push(format!("resolution must be >= 2, got {}", self.resolution));
        }
        if self.horizon == 0 {
            errs.push("horizon must be positive".into());
        }
        if self.stages.is_empty() {
            errs.push("at least one stage".into());
        }
        for (i, s) in self.stages.iter().enumerate() {
            if self.stages[..i].contains(s) {
                errs.push(format!("duplicate stage '{s}'"));
            }
        }
        if self.stages.contains(&self.failure_state) {
            errs.push(format!(
                "failure state '{}' collides with a stage",
                self.failure_state
            ));
        }
        if let Some(cap) = self.max_outcomes {
            if cap < 2 {
                errs.push(format!("max_outcomes must be >= 2, got {cap}"));
            }
        }
        for a in &self.actions {
            let at = format!("action '{}'", a.name);
            if a.from.is_empty() {
                errs.push(format!("{at}: no applicable stages"));
            }
            for f in &a.from {
                if !self.stages.contains(f) {
                    errs.push(format!("{at}: unknown stage '{f}' in from"));
                }
            }
            if !self.stages.contains(&a.to) {
                errs.push(format!("{at}: unknown or terminal target stage '{}'", a.to));
            }
            for (field, v) in [("mean", &a.mean), ("std", &a.std), ("min_level", &a.min_level)] {
                if v.len() < self.resources {
                    errs.push(format!(
                        "{at}: {field} needs {} entries, got {}",
                        self.resources,
                        v.len()
                    ));
                }
            }
            if a.std.iter().take(self.resources).any(|&s| s <= 0.0) {
                errs.push(format!("{at}: std must be positive"));
            }
            if a
                .min_level
                .iter()
                .take(self.resources)
                .any(|&m| !(0.0..1.0).contains(&m))
            {
                errs.push(format!("{at}: min_level must lie in [0, 1)"));
            }
            if let Some(linear) = &a.reward.linear {
                if linear.len() < self.resources {
                    errs.push(format!(
                        "{at}: reward.linear needs {} entries, got {}",
                        self.resources,
                        linear.len()
                    ));
                }
            }
        }
        let mut names: Vec<&String> = self.actions.iter().map(|a| &a.name).collect();
        names.sort();
        names.dedup();
        if names.len() != self.actions.len() {
            errs.push("action names must be unique".into());
        }
        errs
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Discretizes a consumption Gaussian: support truncated to three
/// standard deviations around the mean and divided into `resolution`
/// equal buckets. Each outcome is the bucket center with the bucket's
/// CDF mass, renormalized over the truncated support. The returned
/// values are consumption amounts; callers negate them into shifts.
pub fn discretize_gaussian(
    mean: f64,
    std: f64,
    resolution: usize,
) -> Result<Vec<(f64, f64)>, RoverError> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(RoverError::Domain(format!("std must be positive, got {std}")));
    }
    if !mean.is_finite() {
        return Err(RoverError::Domain(format!("mean must be finite, got {mean}")));
    }
    if resolution < 2 {
        return Err(RoverError::Domain(format!(
            "resolution must be >= 2, got {resolution}"
        )));
    }
    let low = mean - 3.0 * std;
    let width = 6.0 * std / resolution as f64;
    let total = normal_cdf(3.0) - normal_cdf(-3.0);
    let mut out = Vec::with_capacity(resolution);
    for i in 0..resolution {
        let b0 = low + i as f64 * width;
        let b1 = b0 + width;
        let mass = normal_cdf((b1 - mean) / std) - normal_cdf((b0 - mean) / std);
        out.push((b0 + 0.5 * width, mass / total));
    }
    Ok(out)
}

/// Joint consumption outcomes across independent resources: shift
/// vectors (negative consumption) with product probabilities. The
/// per-resource resolution is lowered until the joint count fits under
/// `max_outcomes`.
fn joint_outcomes(
    action: &ActionSpec,
    resources: usize,
    resolution: usize,
    max_outcomes: Option<usize>,
) -> Result<OutcomeSet, RoverError> {
    let mut effective = resolution.max(2);
    if let Some(cap) = max_outcomes {
        while effective > 2 && effective.pow(resources as u32) > cap {
            effective -= 1;
        }
    }
    let per_resource: Vec<Vec<(f64, f64)>> = (0..resources)
        .map(|r| discretize_gaussian(action.mean[r], action.std[r], effective))
        .collect::<Result<_, _>>()?;

    let mut pairs: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for outcomes in &per_resource {
        let mut next = Vec::with_capacity(pairs.len() * outcomes.len());
        for (prefix, p) in &pairs {
            for &(consumption, q) in outcomes {
                let mut shift = prefix.clone();
                shift.push(-consumption);
                next.push((shift, p * q));
            }
        }
        pairs = next;
    }
    Ok(OutcomeSet::relative(pairs))
}

/// Decomposes the region below any minimum level into slabs, in
/// ascending resource order: slab `k` holds points meeting thresholds
/// `0..k` but short of threshold `k`.
fn precondition_slabs(min_level: &[f64]) -> Vec<Rect> {
    let dims = min_level.len();
    let mut slabs = Vec::new();
    for k in 0..dims {
        if min_level[k] <= 0.0 {
            continue;
        }
        let mut low = vec![0.0; dims];
        let mut high = vec![1.0; dims];
        for (j, &m) in min_level.iter().enumerate().take(k) {
            low[j] = m;
        }
        high[k] = min_level[k];
        if let Ok(rect) = Rect::new(low, high) {
            slabs.push(rect);
        }
    }
    slabs
}

fn good_box(min_level: &[f64]) -> Option<Rect> {
    if min_level.iter().all(|&m| m <= 0.0) {
        None // whole cube
    } else {
        Some(Rect::new(min_level.to_vec(), vec![1.0; min_level.len()]).expect("min_level in [0,1)"))
    }
}

fn reward_set(spec: &ActionSpec, variant: RewardVariant, dims: usize) -> PwlcSet {
    match (variant, &spec.reward.linear) {
        (RewardVariant::Pwlc, Some(linear)) => PwlcSet::new(vec![LinearFn::new(
            linear[..dims].to_vec(),
            spec.reward.constant,
        )
        .expect("finite spec coefficients")])
        .expect("nonempty"),
        _ => PwlcSet::constant(dims, spec.reward.constant),
    }
}

/// Builds the model for a spec: stages plus the terminal failure state,
/// per-action precondition partitions, discretized consumption
/// outcomes, and an auto-generated `wait` self-loop for states with no
/// outgoing action. The result always passes model validation.
pub fn generate(spec: &DomainSpec) -> Result<HybridMdp, RoverError> {
    let errs = spec.validate();
    if !errs.is_empty() {
        return Err(RoverError::InvalidSpec(errs));
    }
    let dims = spec.resources;
    let mut states = spec.stages.clone();
    states.push(spec.failure_state.clone());
    let failure = states.len() - 1;

    let mut actions: Vec<String> = spec.actions.iter().map(|a| a.name.clone()).collect();
    let needs_wait: Vec<usize> = (0..states.len())
        .filter(|&s| {
            s == failure
                || !spec
                    .actions
                    .iter()
                    .any(|a| a.from.contains(&states[s]))
        })
        .collect();
    let wait_index = if needs_wait.is_empty() {
        None
    } else {
        if actions.iter().any(|a| a == "wait") {
            return Err(RoverError::InvalidSpec(vec![
                "action name 'wait' is reserved for the generated self-loop".into(),
            ]));
        }
        actions.push("wait".into());
        Some(actions.len() - 1)
    };

    let mut entries: Vec<Vec<Option<ActionEntry>>> = vec![vec![None; actions.len()]; states.len()];

    for (a_idx, action) in spec.actions.iter().enumerate() {
        let min = &action.min_level[..dims];
        let good = good_box(min);
        let slabs = precondition_slabs(min);
        let to = states
            .iter()
            .position(|s| s == &action.to)
            .expect("validated target stage");
        let outcomes = joint_outcomes(action, dims, spec.resolution, spec.max_outcomes)?;
        let reward = reward_set(action, spec.variant, dims);
        let still = OutcomeSet::relative([(vec![0.0; dims], 1.0)]);

        let entry = match &good {
            None => {
                // No precondition: one cell everywhere.
                let mut continuous = vec![None; states.len()];
                continuous[to] = Some(KdPartition::from_payload(dims, outcomes.clone()));
                ActionEntry {
                    reward: KdPartition::from_payload(dims, reward.clone()),
                    discrete: KdPartition::from_payload(dims, DiscreteDist::delta(states.len(), to)),
                    continuous,
                }
            }
            Some(good) => {
                let mut reward_pieces = vec![(good.clone(), reward.clone())];
                let mut discrete_pieces =
                    vec![(good.clone(), DiscreteDist::delta(states.len(), to))];
                let mut cont_to = vec![(good.clone(), outcomes.clone())];
                let mut cont_fail = Vec::new();
                for slab in &slabs {
                    reward_pieces.push((slab.clone(), PwlcSet::zero(dims)));
                    discrete_pieces
                        .push((slab.clone(), DiscreteDist::delta(states.len(), failure)));
                    cont_to.push((slab.clone(), still.clone()));
                    cont_fail.push((slab.clone(), still.clone()));
                }
                cont_fail.push((good.clone(), still.clone()));
                let mut continuous = vec![None; states.len()];
                continuous[to] = Some(
                    KdPartition::from_pieces(dims, cont_to)
                        .map_err(|e| RoverError::Domain(e.to_string()))?,
                );
                continuous[failure] = Some(
                    KdPartition::from_pieces(dims, cont_fail)
                        .map_err(|e| RoverError::Domain(e.to_string()))?,
                );
                ActionEntry {
                    reward: KdPartition::from_pieces(dims, reward_pieces)
                        .map_err(|e| RoverError::Domain(e.to_string()))?,
                    discrete: KdPartition::from_pieces(dims, discrete_pieces)
                        .map_err(|e| RoverError::Domain(e.to_string()))?,
                    continuous,
                }
            }
        };

        for from in &action.from {
            let s = states.iter().position(|x| x == from).expect("validated");
            entries[s][a_idx] = Some(entry.clone());
        }
    }

    if let Some(wait) = wait_index {
        let still = OutcomeSet::relative([(vec![0.0; dims], 1.0)]);
        for &s in &needs_wait {
            let mut continuous = vec![None; states.len()];
            continuous[s] = Some(KdPartition::from_payload(dims, still.clone()));
            entries[s][wait] = Some(ActionEntry {
                reward: KdPartition::from_payload(dims, PwlcSet::zero(dims)),
                discrete: KdPartition::from_payload(dims, DiscreteDist::delta(states.len(), s)),
                continuous,
            });
        }
    }

    let model = HybridMdp::new(dims, states, actions, spec.horizon, 0.0, entries);
    let violations = model.validate();
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(RoverError::Generated(violations))
    }
}

/// The shipped default plan: eleven stages covering the primary
/// approach-servo-dig-backup-spectral sequence, the high-resolution
/// imaging branch, the low-resolution imaging and onboard analysis
/// branch, and a retreat-to-safe option, plus the terminal failure
/// state added by the generator. Resource 0 is time, 1 is energy, 2 is
/// storage.
pub fn default_spec(resources: usize, resolution: usize, variant: RewardVariant) -> DomainSpec {
    let act = |name: &str,
               from: &[&str],
               to: &str,
               mean: [f64; 3],
               std: [f64; 3],
               min: [f64; 3],
               constant: f64,
               linear: Option<[f64; 3]>| ActionSpec {
        name: name.into(),
        from: from.iter().map(|s| s.to_string()).collect(),
        to: to.into(),
        mean: mean.to_vec(),
        std: std.to_vec(),
        min_level: min.to_vec(),
        reward: RewardSpec {
            constant,
            linear: linear.map(|l| l.to_vec()),
        },
    };

    DomainSpec {
        resources,
        resolution,
        horizon: 6,
        variant,
        max_outcomes: if resources >= 3 { Some(64) } else { None },
        stages: [
            "start",
            "approached",
            "servoed",
            "dug",
            "backed_up",
            "spectral_done",
            "hires_done",
            "lowres_imaged",
            "analyzed",
            "transmitted",
            "safed",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        failure_state: "failed".into(),
        actions: vec![
            act(
                "approach",
                &["start"],
                "approached",
                [0.10, 0.08, 0.02],
                [0.025, 0.020, 0.005],
                [0.05, 0.05, 0.00],
                0.0,
                None,
            ),
            act(
                "visual_servo",
                &["approached"],
                "servoed",
                [0.05, 0.04, 0.01],
                [0.012, 0.010, 0.003],
                [0.03, 0.03, 0.00],
                0.0,
                None,
            ),
            act(
                "dig",
                &["servoed"],
                "dug",
                [0.12, 0.10, 0.02],
                [0.030, 0.025, 0.005],
                [0.30, 0.25, 0.00],
                0.0,
                None,
            ),
            act(
                "backup",
                &["dug"],
                "backed_up",
                [0.04, 0.03, 0.01],
                [0.010, 0.008, 0.003],
                [0.02, 0.02, 0.00],
                0.0,
                None,
            ),
            act(
                "spectral_image",
                &["backed_up"],
                "spectral_done",
                [0.06, 0.08, 0.08],
                [0.015, 0.020, 0.020],
                [0.05, 0.10, 0.05],
                8.0,
                Some([3.0, 2.0, 1.0]),
            ),
            act(
                "hires_image",
                &["backed_up"],
                "hires_done",
                [0.10, 0.14, 0.12],
                [0.025, 0.035, 0.030],
                [0.10, 0.18, 0.10],
                10.0,
                Some([4.0, 3.0, 2.0]),
            ),
            act(
                "lowres_image",
                &["approached"],
                "lowres_imaged",
                [0.03, 0.04, 0.04],
                [0.008, 0.010, 0.010],
                [0.02, 0.04, 0.02],
                0.0,
                None,
            ),
            act(
                "analyze",
                &["lowres_imaged"],
                "analyzed",
                [0.05, 0.09, 0.01],
                [0.012, 0.022, 0.003],
                [0.03, 0.12, 0.00],
                0.0,
                None,
            ),
            act(
                "transmit",
                &["analyzed"],
                "transmitted",
                [0.04, 0.06, 0.10],
                [0.010, 0.015, 0.025],
                [0.02, 0.06, 0.12],
                6.0,
                Some([2.0, 2.0, 3.0]),
            ),
            act(
                "safe",
                &[
                    "start",
                    "approached",
                    "servoed",
                    "dug",
                    "backed_up",
                    "lowres_imaged",
                    "analyzed",
                ],
                "safed",
                [0.01, 0.01, 0.01],
                [0.003, 0.003, 0.003],
                [0.00, 0.00, 0.00],
                0.5,
                None,
            ),
        ],
    }
}
