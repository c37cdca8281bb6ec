//! Sets of affine functions representing piecewise-linear-convex
//! functions over a rectangle: evaluation, cross-sum, union, scaling,
//! and LP-based dominance pruning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::linprog::{solve_witness, LpError, WitnessLp};

/// Two functions within this of each other everywhere over the cell are
/// treated as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Default dominance tolerance for [`PwlcSet::prune`].
pub const DEFAULT_PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Error)]
pub enum PwlcError {
    #[error("linear function has a non-finite entry")]
    NonFinite,
    #[error("piecewise set must hold at least one function")]
    Empty,
    #[error("scale factor {0} is negative")]
    NegativeScale(f64),
    #[error("dominance LP failed for function {index}: {source}")]
    Numerical { index: usize, source: LpError },
}

/// An affine function `coeffs . x + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFn {
    coeffs: Vec<f64>,
    offset: f64,
}

impl LinearFn {
    pub fn new(coeffs: Vec<f64>, offset: f64) -> Result<Self, PwlcError> {
        if !offset.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PwlcError::NonFinite);
        }
        Ok(LinearFn { coeffs, offset })
    }

    pub fn constant(dims: usize, value: f64) -> Self {
        LinearFn {
            coeffs: vec![0.0; dims],
            offset: value,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dims(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coeffs.len());
        let mut acc = self.offset;
        for (c, xi) in self.coeffs.iter().zip(x) {
            acc += c * xi;
        }
        acc
    }

    /// Exact minimum over a box: an affine function attains its extremes
    /// at corners, one coordinate at a time.
    pub fn min_over(&self, r: &Rect) -> f64 {
        let mut acc = self.offset;
        for dim in 0..self.coeffs.len() {
            let c = self.coeffs[dim];
            acc += (c * r.low()[dim]).min(c * r.high()[dim]);
        }
        acc
    }

    pub fn max_over(&self, r: &Rect) -> f64 {
        let mut acc = self.offset;
        for dim in 0..self.coeffs.len() {
            let c = self.coeffs[dim];
            acc += (c * r.low()[dim]).max(c * r.high()[dim]);
        }
        acc
    }

    fn add(&self, other: &LinearFn) -> LinearFn {
        debug_assert_eq!(self.dims(), other.dims());
        LinearFn {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
            offset: self.offset + other.offset,
        }
    }

    fn sub(&self, other: &LinearFn) -> LinearFn {
        debug_assert_eq!(self.dims(), other.dims());
        LinearFn {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
            offset: self.offset - other.offset,
        }
    }

    fn scaled(&self, c: f64) -> LinearFn {
        LinearFn {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
            offset: self.offset * c,
        }
    }

    pub fn approx_eq(&self, other: &LinearFn, tol: f64) -> bool {
        self.dims() == other.dims()
            && (self.offset - other.offset).abs() <= tol
            && self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// True iff `l1 >= l2` everywhere on `r`, decided in closed form from
/// the minimum of the affine difference over the box.
pub fn pointwise_dominates(l1: &LinearFn, l2: &LinearFn, r: &Rect) -> bool {
    l1.sub(l2).min_over(r) >= 0.0
}

/// A nonempty finite set of affine functions, read as their pointwise
/// maximum over some rectangle. The constant-zero function is a
/// singleton zero set, never an empty one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlcSet {
    fns: Vec<LinearFn>,
}

impl PwlcSet {
    pub fn new(fns: Vec<LinearFn>) -> Result<Self, PwlcError> {
        if fns.is_empty() {
            return Err(PwlcError::Empty);
        }
        Ok(PwlcSet { fns })
    }

    pub fn zero(dims: usize) -> Self {
        Self::constant(dims, 0.0)
    }

    pub fn constant(dims: usize, value: f64) -> Self {
        PwlcSet {
            fns: vec![LinearFn::constant(dims, value)],
        }
    }

    pub fn fns(&self) -> &[LinearFn] {
        &self.fns
    }

    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }

    pub fn dims(&self) -> usize {
        self.fns[0].dims()
    }

    /// True when the set is a single constant function.
    pub fn is_constant(&self) -> bool {
        self.fns.len() == 1 && self.fns[0].coeffs.iter().all(|&c| c == 0.0)
    }

    /// Pointwise maximum and the index attaining it; ties keep the
    /// lowest index.
    pub fn eval(&self, x: &[f64]) -> (f64, usize) {
        let mut best = self.fns[0].eval(x);
        let mut arg = 0;
        for (i, f) in self.fns.iter().enumerate().skip(1) {
            let v = f.eval(x);
            if v > best {
                best = v;
                arg = i;
            }
        }
        (best, arg)
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.eval(x).0
    }

    /// Pointwise sum: every pairwise sum of members. Sizes multiply;
    /// prune afterwards.
    pub fn cross_sum(&self, other: &PwlcSet) -> PwlcSet {
        let mut fns = Vec::with_capacity(self.fns.len() * other.fns.len());
        for a in &self.fns {
            for b in &other.fns {
                fns.push(a.add(b));
            }
        }
        PwlcSet { fns }
    }

    /// Pointwise maximum: the union of the two sets with exact
    /// duplicates removed (earlier occurrence kept).
    pub fn union_max(&self, other: &PwlcSet) -> PwlcSet {
        let mut fns = self.fns.clone();
        for f in &other.fns {
            if !fns.iter().any(|g| g == f) {
                fns.push(f.clone());
            }
        }
        PwlcSet { fns }
    }

    /// Pre-composes with a translation: the result evaluated at `x`
    /// equals `self` evaluated at `x + delta`.
    pub fn translate(&self, delta: &[f64]) -> PwlcSet {
        PwlcSet {
            fns: self
                .fns
                .iter()
                .map(|f| {
                    let mut shifted = f.offset;
                    for (c, d) in f.coeffs.iter().zip(delta) {
                        shifted += c * d;
                    }
                    LinearFn {
                        coeffs: f.coeffs.clone(),
                        offset: shifted,
                    }
                })
                .collect(),
        }
    }

    /// Scales by a probability (nonnegative so convexity of the max is
    /// preserved). Scaling by zero collapses to the zero set.
    pub fn scale(&self, c: f64) -> Result<PwlcSet, PwlcError> {
        if c < 0.0 || !c.is_finite() {
            return Err(PwlcError::NegativeScale(c));
        }
        if c == 0.0 {
            return Ok(PwlcSet::zero(self.dims()));
        }
        Ok(PwlcSet {
            fns: self.fns.iter().map(|f| f.scaled(c)).collect(),
        })
    }

    /// Removes functions that never attain the maximum over `r` beyond
    /// `tol`. Pairwise closed-form dominance runs first; survivors are
    /// settled by witness LPs, seeding with the best function at the low
    /// corner and admitting the best remaining function at each witness
    /// point. Ties keep the earlier-indexed function, and the result
    /// preserves original ordering.
    pub fn prune(&self, r: &Rect, tol: f64) -> Result<PwlcSet, PwlcError> {
        if self.fns.len() == 1 {
            return Ok(self.clone());
        }

        // Duplicates within DUPLICATE_TOL over r, earliest kept.
        let mut alive: Vec<usize> = Vec::with_capacity(self.fns.len());
        for i in 0..self.fns.len() {
            let dup = alive.iter().any(|&j| {
                let d = self.fns[j].sub(&self.fns[i]);
                d.min_over(r) >= -DUPLICATE_TOL && d.max_over(r) <= DUPLICATE_TOL
            });
            if !dup {
                alive.push(i);
            }
        }

        // Closed-form pairwise dominance.
        let mut dead = vec![false; alive.len()];
        for a in 0..alive.len() {
            if dead[a] {
                continue;
            }
            for b in 0..alive.len() {
                if a == b || dead[b] {
                    continue;
                }
                if pointwise_dominates(&self.fns[alive[a]], &self.fns[alive[b]], r) {
                    dead[b] = true;
                }
            }
        }
        let mut candidates: Vec<usize> = alive
            .into_iter()
            .zip(&dead)
            .filter(|(_, &d)| !d)
            .map(|(i, _)| i)
            .collect();

        if candidates.len() == 2 {
            // Neither dominates the other (the pairwise filter ran), so
            // each attains the maximum somewhere: keep both.
            return Ok(PwlcSet {
                fns: candidates.iter().map(|&i| self.fns[i].clone()).collect(),
            });
        }

        if candidates.len() > 2 {
            // Seed with the winners at the box corners: a corner winner
            // beats every other function right there, so it needs no
            // witness LP. Remaining candidates are settled by LPs.
            let dims = r.dims();
            let mut retained: Vec<usize> = Vec::new();
            if dims <= 12 {
                for mask in 0..(1usize << dims) {
                    let corner: Vec<f64> = (0..dims)
                        .map(|k| {
                            if mask & (1 << k) != 0 {
                                r.high()[k]
                            } else {
                                r.low()[k]
                            }
                        })
                        .collect();
                    let pos = argmax_at(&self.fns, &candidates, &corner);
                    let idx = candidates[pos];
                    if !retained.contains(&idx) {
                        retained.push(idx);
                    }
                }
            } else {
                let corner = r.low().to_vec();
                retained.push(candidates[argmax_at(&self.fns, &candidates, &corner)]);
            }
            candidates.retain(|i| !retained.contains(i));

            while !candidates.is_empty() {
                let probe = candidates[0];
                let rows = retained
                    .iter()
                    .map(|&w| {
                        let d = self.fns[probe].sub(&self.fns[w]);
                        (d.coeffs, d.offset)
                    })
                    .collect();
                let lp = WitnessLp::new(r.low().to_vec(), r.high().to_vec(), rows)
                    .map_err(|source| PwlcError::Numerical { index: probe, source })?;
                let sol = solve_witness(&lp)
                    .map_err(|source| PwlcError::Numerical { index: probe, source })?;
                // Discard anything that never rises more than tol above
                // the retained surface. Keeping sub-tolerance near-ties
                // instead would let cross-sums compound them
                // exponentially across stages; dropping them perturbs
                // values by at most tol.
                if sol.margin <= tol {
                    candidates.remove(0);
                } else {
                    let winner_pos = argmax_at(&self.fns, &candidates, &sol.point);
                    retained.push(candidates.remove(winner_pos));
                }
            }
            retained.sort_unstable();
            candidates = retained;
        }

        Ok(PwlcSet {
            fns: candidates.iter().map(|&i| self.fns[i].clone()).collect(),
        })
    }

    /// Structural comparison with a per-entry tolerance, in order.
    pub fn approx_eq(&self, other: &PwlcSet, tol: f64) -> bool {
        self.fns.len() == other.fns.len()
            && self
                .fns
                .iter()
                .zip(&other.fns)
                .all(|(a, b)| a.approx_eq(b, tol))
    }
}

fn argmax_at(fns: &[LinearFn], candidates: &[usize], x: &[f64]) -> usize {
    let mut best_pos = 0;
    let mut best_val = fns[candidates[0]].eval(x);
    for (pos, &i) in candidates.iter().enumerate().skip(1) {
        let v = fns[i].eval(x);
        if v > best_val {
            best_val = v;
            best_pos = pos;
        }
    }
    best_pos
}
