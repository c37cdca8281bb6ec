//! Naive uniform-grid value iteration: the value function is
//! discretized at a fixed resolution per dimension and the Bellman
//! backup is evaluated at every cell center. Serves as the comparison
//! baseline and, on grid-aligned models, as an exact oracle for the
//! structured solver.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::model::{HybridMdp, OutcomeKind};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("grid of {cells} cells exceeds cap {cap}")]
    GridTooLarge { cells: usize, cap: usize },
    #[error("no applicable action in discrete state '{state}'")]
    NoApplicableAction { state: String },
    #[error("time budget exhausted at stage {stage}")]
    TimeBudget { stage: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone)]
pub struct BaselineOptions {
    /// Memory guard on `resolution^dims * |S|`.
    pub cell_cap: usize,
    pub horizon: Option<usize>,
    pub time_budget: Option<Duration>,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            cell_cap: 20_000_000,
            horizon: None,
            time_budget: None,
        }
    }
}

/// One stage of grid values, flat over `[state][cell]` with dimension 0
/// fastest: `cell = i_0 + i_1 * r + i_2 * r^2 + ...`.
#[derive(Debug, Clone)]
pub struct GridValues {
    pub stage: usize,
    pub resolution: usize,
    pub dims: usize,
    pub num_states: usize,
    values: Vec<f64>,
}

impl GridValues {
    pub fn cells_per_state(&self) -> usize {
        self.resolution.pow(self.dims as u32)
    }

    pub fn value(&self, state: usize, cell: usize) -> f64 {
        self.values[state * self.cells_per_state() + cell]
    }

    /// Value of the cell containing `x`.
    pub fn value_at(&self, state: usize, x: &[f64]) -> f64 {
        let cell = self.cell_of(x).expect("point inside the cube");
        self.value(state, cell)
    }

    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        cell_index(x, self.resolution)
    }

    /// Center of a flat cell index.
    pub fn center(&self, cell: usize) -> Vec<f64> {
        let mut rest = cell;
        (0..self.dims)
            .map(|_| {
                let i = rest % self.resolution;
                rest /= self.resolution;
                (i as f64 + 0.5) / self.resolution as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GridStageStats {
    pub stage: usize,
    pub cells: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub stages: Vec<GridValues>,
    pub stats: Vec<GridStageStats>,
}

fn cell_index(x: &[f64], resolution: usize) -> Option<usize> {
    let r = resolution as f64;
    let mut idx = 0usize;
    let mut stride = 1usize;
    for &xi in x {
        if !(0.0..=1.0).contains(&xi) {
            return None;
        }
        let i = ((xi * r).floor() as usize).min(resolution - 1);
        idx += i * stride;
        stride *= resolution;
    }
    Some(idx)
}

/// Runs the grid backup to the horizon. Rewards and transitions are
/// read at cell centers; relative outcomes land at `center + delta` and
/// read the containing cell, with out-of-cube mass contributing the
/// model's out-of-bounds value.
pub fn grid_value_iteration(
    m: &HybridMdp,
    resolution: usize,
    opts: &BaselineOptions,
) -> Result<GridResult, BaselineError> {
    assert!(resolution >= 1, "resolution must be at least 1");
    let dims = m.dims();
    let cells_per_state = resolution
        .checked_pow(dims as u32)
        .unwrap_or(usize::MAX / m.num_states().max(1));
    let total_cells = cells_per_state.saturating_mul(m.num_states());
    if total_cells > opts.cell_cap {
        return Err(BaselineError::GridTooLarge {
            cells: total_cells,
            cap: opts.cell_cap,
        });
    }

    let horizon = opts.horizon.unwrap_or(m.horizon());
    let deadline = opts.time_budget.map(|b| Instant::now() + b);
    let centers: Vec<Vec<f64>> = {
        let template = GridValues {
            stage: 0,
            resolution,
            dims,
            num_states: m.num_states(),
            values: Vec::new(),
        };
        (0..cells_per_state).map(|c| template.center(c)).collect()
    };

    let mut stages = vec![GridValues {
        stage: 0,
        resolution,
        dims,
        num_states: m.num_states(),
        values: vec![0.0; total_cells],
    }];
    let mut stats = vec![GridStageStats {
        stage: 0,
        cells: total_cells,
        seconds: 0.0,
    }];

    for stage in 0..horizon {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                return Err(BaselineError::TimeBudget { stage });
            }
        }
        let started = Instant::now();
        let prev = stages.last().unwrap();
        let mut values = vec![0.0f64; total_cells];
        for s in 0..m.num_states() {
            if m.applicable(s).next().is_none() {
                return Err(BaselineError::NoApplicableAction {
                    state: m.states()[s].clone(),
                });
            }
            // Deadline checks between blocks keep runaway stages
            // interruptible without per-cell clock reads.
            let block = 1 << 20;
            let row = &mut values[s * cells_per_state..(s + 1) * cells_per_state];
            for (block_idx, chunk) in row.chunks_mut(block).enumerate() {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        return Err(BaselineError::TimeBudget { stage });
                    }
                }
                let base = block_idx * block;
                chunk
                    .par_iter_mut()
                    .enumerate()
                    .try_for_each(|(offset, out)| {
                        let x = &centers[base + offset];
                        *out = backup_cell(m, prev, s, x)?;
                        Ok::<(), BaselineError>(())
                    })?;
            }
        }
        stats.push(GridStageStats {
            stage: stage + 1,
            cells: total_cells,
            seconds: started.elapsed().as_secs_f64(),
        });
        stages.push(GridValues {
            stage: stage + 1,
            resolution,
            dims,
            num_states: m.num_states(),
            values,
        });
    }

    Ok(GridResult { stages, stats })
}

fn backup_cell(
    m: &HybridMdp,
    prev: &GridValues,
    state: usize,
    x: &[f64],
) -> Result<f64, BaselineError> {
    let mut best = f64::NEG_INFINITY;
    for (_, entry) in m.applicable(state) {
        // Accumulation order matches the structured solver so that
        // grid-aligned models agree bitwise: successor terms first in
        // state order, reward added last.
        let mut acc = 0.0f64;
        let dist = entry.discrete.locate(x)?.payload;
        for (sp, p) in dist.successors() {
            let cont = entry.continuous[sp]
                .as_ref()
                .expect("validated models cover reachable successors");
            let outcomes = cont.locate(x)?.payload;
            let mut sigma = 0.0f64;
            for o in &outcomes.outcomes {
                let v = match o.kind {
                    OutcomeKind::Relative => {
                        let y: Vec<f64> = x.iter().zip(&o.target).map(|(a, b)| a + b).collect();
                        match cell_index(&y, prev.resolution) {
                            Some(cell) => prev.value(sp, cell),
                            None => m.out_of_bounds_value(),
                        }
                    }
                    OutcomeKind::Absolute => {
                        let cell = cell_index(&o.target, prev.resolution)
                            .expect("absolute targets are validated inside the cube");
                        prev.value(sp, cell)
                    }
                };
                sigma += o.prob * v;
            }
            acc += p * sigma;
        }
        let q = acc + entry.reward.locate(x)?.payload.value_at(x);
        if q > best {
            best = q;
        }
    }
    Ok(best)
}
