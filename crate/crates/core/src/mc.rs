//! Monte-Carlo policy rollouts: an independent estimate of the value a
//! policy attains, used to cross-check the solver. Episodes sample the
//! model's own discretized outcome distributions, so the estimate
//! converges to the solver's value of the solved model, not of any
//! underlying continuous dynamics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::model::{HybridMdp, OutcomeKind, OutcomeSet};
use crate::solver::Policy;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("rollout config invalid: {0}")]
    BadConfig(String),
    #[error("policy gap in state '{state}': {detail}")]
    PolicyGap { state: String, detail: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone)]
pub struct RolloutConfig {
    pub start_state: usize,
    pub start_point: Vec<f64>,
    pub episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimResult {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
    pub seed: u64,
}

/// Simulates `cfg.episodes` rollouts of the stage-indexed policies from
/// the start state, accumulating rewards until the horizon or until an
/// outcome leaves the cube (which collects the model's out-of-bounds
/// value and ends the episode).
///
/// Every episode draws from its own counter-indexed RNG stream, so
/// results are bitwise reproducible for a given seed regardless of
/// thread count or episode scheduling.
pub fn simulate(
    m: &HybridMdp,
    policies: &[Policy],
    cfg: &RolloutConfig,
) -> Result<SimResult, SimError> {
    if cfg.episodes == 0 {
        return Err(SimError::BadConfig("episodes must be >= 1".into()));
    }
    if cfg.start_state >= m.num_states() {
        return Err(SimError::BadConfig(format!(
            "start state index {} out of range",
            cfg.start_state
        )));
    }
    if policies.is_empty() {
        return Err(SimError::BadConfig("no policy stages".into()));
    }
    if cfg.start_point.len() != m.dims()
        || cfg.start_point.iter().any(|v| !(0.0..=1.0).contains(v))
    {
        return Err(SimError::BadConfig(format!(
            "start point {:?} outside the unit cube",
            cfg.start_point
        )));
    }

    let returns: Vec<f64> = (0..cfg.episodes)
        .into_par_iter()
        .map(|episode| run_episode(m, policies, cfg, episode as u64))
        .collect::<Result<_, _>>()?;

    let n = returns.len();
    let mean = returns.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(SimResult {
        mean,
        std_error,
        episodes: n,
        seed: cfg.seed,
    })
}

fn run_episode(
    m: &HybridMdp,
    policies: &[Policy],
    cfg: &RolloutConfig,
    episode: u64,
) -> Result<f64, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(episode);

    let n = policies.len();
    let mut state = cfg.start_state;
    let mut x = cfg.start_point.clone();
    let mut total = 0.0;

    for t in 0..n {
        // policies[k] decides with k + 1 steps remaining.
        let k = n - 1 - t;
        let cell = policies[k].action_at(state, &x)?;
        let Some(entry) = m.entry(state, cell.action) else {
            return Err(SimError::PolicyGap {
                state: m.states()[state].clone(),
                detail: format!(
                    "policy picked inapplicable action '{}' at {:?}",
                    m.actions()[cell.action],
                    x
                ),
            });
        };
        total += entry.reward.locate(&x)?.payload.value_at(&x);

        let dist = entry.discrete.locate(&x)?.payload;
        let successor = sample_cumulative(dist.probs(), rng.random::<f64>());
        let Some(cont) = entry.continuous[successor].as_ref() else {
            return Err(SimError::PolicyGap {
                state: m.states()[state].clone(),
                detail: format!(
                    "no continuous conditional for successor '{}'",
                    m.states()[successor]
                ),
            });
        };
        let outcomes = cont.locate(&x)?.payload;
        let outcome = sample_outcome(outcomes, rng.random::<f64>());
        match outcome.0 {
            OutcomeKind::Relative => {
                let y: Vec<f64> = x.iter().zip(outcome.1).map(|(a, b)| a + b).collect();
                if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    total += m.out_of_bounds_value();
                    return Ok(total);
                }
                x = y;
            }
            OutcomeKind::Absolute => {
                x = outcome.1.to_vec();
            }
        }
        state = successor;
    }
    Ok(total)
}

fn sample_cumulative(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    // Round-off can leave acc a hair under 1; charge the tail.
    last_positive
}

fn sample_outcome(set: &OutcomeSet, u: f64) -> (OutcomeKind, &[f64]) {
    let mut acc = 0.0;
    for o in &set.outcomes {
        acc += o.prob;
        if u < acc {
            return (o.kind, &o.target);
        }
    }
    let last = set.outcomes.last().expect("outcome sets are nonempty");
    (last.kind, &last.target)
}
