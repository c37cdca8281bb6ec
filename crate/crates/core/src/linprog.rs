//! Small dense linear programs for dominance witness queries: maximize
//! the margin `m` such that `g_k . x + b_k >= m` for every row, with `x`
//! confined to a box.
//!
//! The solver is a bounded-variable primal simplex over a dense tableau
//! with Bland's rule, sized for problems with a handful of variables and
//! tens of rows. Determinism matters more than speed here: identical
//! inputs always pivot identically.

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Error)]
pub enum LpError {
    #[error("invalid box bounds at dim {dim}: [{low}, {high}]")]
    InvalidBounds { dim: usize, low: f64, high: f64 },
    #[error("witness LP needs at least one constraint row")]
    NoRows,
    #[error("constraint row {row} has a non-finite entry or wrong arity")]
    BadRow { row: usize },
    #[error("iteration limit exceeded after {0} pivots")]
    IterationLimit(usize),
    #[error("objective unbounded; the margin of a compact box is always finite")]
    UnboundedGuard,
    #[error("post-solve feasibility check failed: {0}")]
    FeasibilityCheck(String),
}

/// Maximize `m` subject to `gradient_k . x + offset_k >= m` and
/// `low <= x <= high`.
#[derive(Debug, Clone)]
pub struct WitnessLp {
    low: Vec<f64>,
    high: Vec<f64>,
    rows: Vec<(Vec<f64>, f64)>,
}

impl WitnessLp {
    pub fn new(
        low: Vec<f64>,
        high: Vec<f64>,
        rows: Vec<(Vec<f64>, f64)>,
    ) -> Result<Self, LpError> {
        if low.len() != high.len() || low.is_empty() {
            return Err(LpError::InvalidBounds {
                dim: 0,
                low: f64::NAN,
                high: f64::NAN,
            });
        }
        for dim in 0..low.len() {
            if !(low[dim].is_finite() && high[dim].is_finite()) || low[dim] >= high[dim] {
                return Err(LpError::InvalidBounds {
                    dim,
                    low: low[dim],
                    high: high[dim],
                });
            }
        }
        if rows.is_empty() {
            return Err(LpError::NoRows);
        }
        for (i, (g, b)) in rows.iter().enumerate() {
            if g.len() != low.len() || !b.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(LpError::BadRow { row: i });
            }
        }
        Ok(WitnessLp { low, high, rows })
    }

    pub fn dims(&self) -> usize {
        self.low.len()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.low, &self.high)
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }

    fn row_value(&self, row: usize, x: &[f64]) -> f64 {
        let (g, b) = &self.rows[row];
        let mut acc = *b;
        for (gi, xi) in g.iter().zip(x) {
            acc += gi * xi;
        }
        acc
    }

    /// Range of a row over the box, in closed form.
    fn row_range(&self, row: usize) -> (f64, f64) {
        let (g, b) = &self.rows[row];
        let mut lo = *b;
        let mut hi = *b;
        for dim in 0..g.len() {
            let a = g[dim] * self.low[dim];
            let c = g[dim] * self.high[dim];
            lo += a.min(c);
            hi += a.max(c);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Optimal margin `m*`.
    pub margin: f64,
    /// A point in the box attaining the margin.
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

/// Solves the witness LP. The returned point is feasible within 1e-9
/// (re-checked; a violation is reported as an error instead of being
/// returned silently).
pub fn solve_witness(lp: &WitnessLp) -> Result<LpSolution, LpError> {
    let d = lp.dims();
    let k = lp.rows.len();
    let n = d + 1 + k; // x variables, margin, slacks

    // Safe artificial bounds for the margin variable. The optimum is
    // strictly interior to them, so they never distort the solution.
    let mut m_lo = f64::INFINITY;
    let mut m_hi = f64::INFINITY;
    for row in 0..k {
        let (lo, hi) = lp.row_range(row);
        m_lo = m_lo.min(lo);
        m_hi = m_hi.min(hi);
    }
    let m_lo = m_lo - 1.0;
    let m_hi = m_hi + 1.0;

    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    lower.extend_from_slice(&lp.low);
    upper.extend_from_slice(&lp.high);
    lower.push(m_lo);
    upper.push(m_hi);
    for _ in 0..k {
        lower.push(0.0);
        upper.push(f64::INFINITY);
    }

    // Constraint rows: -g.x + m + s_j = b_j.
    let mut tableau = vec![vec![0.0f64; n]; k];
    let mut rhs = vec![0.0f64; k];
    for (j, (g, b)) in lp.rows.iter().enumerate() {
        for dim in 0..d {
            tableau[j][dim] = -g[dim];
        }
        tableau[j][d] = 1.0;
        tableau[j][d + 1 + j] = 1.0;
        rhs[j] = *b;
    }

    let mut state = vec![VarState::AtLower; n];
    let mut basis: Vec<usize> = (0..k).map(|j| d + 1 + j).collect();
    for &col in &basis {
        state[col] = VarState::Basic;
    }

    let margin_col = d;
    let mut basic_vals = vec![0.0f64; k];

    for _iter in 0..MAX_ITERATIONS {
        // Current nonbasic values and implied basic values.
        let val = |col: usize, state: &[VarState]| -> f64 {
            match state[col] {
                VarState::AtLower => lower[col],
                VarState::AtUpper => upper[col],
                VarState::Basic => 0.0, // not used directly
            }
        };
        for row in 0..k {
            let mut v = rhs[row];
            for col in 0..n {
                if state[col] != VarState::Basic {
                    v -= tableau[row][col] * val(col, &state);
                }
            }
            basic_vals[row] = v;
        }

        // Reduced costs for maximizing the margin variable.
        let margin_row = basis.iter().position(|&c| c == margin_col);
        let reduced = |col: usize| -> f64 {
            let c_j = if col == margin_col { 1.0 } else { 0.0 };
            match margin_row {
                Some(r) => c_j - tableau[r][col],
                None => c_j,
            }
        };

        // Bland: lowest-index improving nonbasic column.
        let mut entering = None;
        for col in 0..n {
            let dir = match state[col] {
                VarState::Basic => continue,
                VarState::AtLower => {
                    if reduced(col) > PIVOT_TOL {
                        1.0
                    } else {
                        continue;
                    }
                }
                VarState::AtUpper => {
                    if reduced(col) < -PIVOT_TOL {
                        -1.0
                    } else {
                        continue;
                    }
                }
            };
            entering = Some((col, dir));
            break;
        }
        let Some((enter_col, dir)) = entering else {
            // Optimal: assemble the solution.
            let mut values = vec![0.0f64; n];
            for col in 0..n {
                values[col] = match state[col] {
                    VarState::AtLower => lower[col],
                    VarState::AtUpper => upper[col],
                    VarState::Basic => 0.0,
                };
            }
            for row in 0..k {
                values[basis[row]] = basic_vals[row];
            }
            let point: Vec<f64> = values[..d].to_vec();
            let margin = values[margin_col];
            check_solution(lp, &point, margin)?;
            return Ok(LpSolution { margin, point });
        };

        // Ratio test: how far the entering variable can move.
        let mut theta = upper[enter_col] - lower[enter_col]; // bound flip
        let mut leaving: Option<(usize, VarState)> = None;
        for row in 0..k {
            let delta = -tableau[row][enter_col] * dir;
            if delta > PIVOT_TOL {
                if upper[basis[row]].is_finite() {
                    let room = (upper[basis[row]] - basic_vals[row]) / delta;
                    if room < theta - PIVOT_TOL
                        || (room < theta + PIVOT_TOL
                            && smaller_bland(&leaving, &basis, row))
                    {
                        theta = room.max(0.0);
                        leaving = Some((row, VarState::AtUpper));
                    }
                }
            } else if delta < -PIVOT_TOL {
                let room = (basic_vals[row] - lower[basis[row]]) / -delta;
                if room < theta - PIVOT_TOL
                    || (room < theta + PIVOT_TOL && smaller_bland(&leaving, &basis, row))
                {
                    theta = room.max(0.0);
                    leaving = Some((row, VarState::AtLower));
                }
            }
        }

        match leaving {
            None => {
                if !theta.is_finite() {
                    return Err(LpError::UnboundedGuard);
                }
                // Bound flip: no basis change.
                state[enter_col] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
            }
            Some((pivot_row, exit_state)) => {
                // Gauss-Jordan pivot on (pivot_row, enter_col).
                let pivot = tableau[pivot_row][enter_col];
                if pivot.abs() <= PIVOT_TOL {
                    return Err(LpError::FeasibilityCheck(format!(
                        "degenerate pivot element {pivot}"
                    )));
                }
                let inv = 1.0 / pivot;
                for col in 0..n {
                    tableau[pivot_row][col] *= inv;
                }
                rhs[pivot_row] *= inv;
                for row in 0..k {
                    if row == pivot_row {
                        continue;
                    }
                    let factor = tableau[row][enter_col];
                    if factor != 0.0 {
                        for col in 0..n {
                            tableau[row][col] -= factor * tableau[pivot_row][col];
                        }
                        rhs[row] -= factor * rhs[pivot_row];
                    }
                }
                state[basis[pivot_row]] = exit_state;
                state[enter_col] = VarState::Basic;
                basis[pivot_row] = enter_col;
            }
        }
    }

    Err(LpError::IterationLimit(MAX_ITERATIONS))
}

fn smaller_bland(current: &Option<(usize, VarState)>, basis: &[usize], row: usize) -> bool {
    match current {
        None => true,
        Some((r, _)) => basis[row] < basis[*r],
    }
}

fn check_solution(lp: &WitnessLp, point: &[f64], margin: f64) -> Result<(), LpError> {
    for dim in 0..lp.dims() {
        if point[dim] < lp.low[dim] - FEASIBILITY_TOL || point[dim] > lp.high[dim] + FEASIBILITY_TOL
        {
            return Err(LpError::FeasibilityCheck(format!(
                "witness coordinate {dim} = {} outside [{}, {}]",
                point[dim], lp.low[dim], lp.high[dim]
            )));
        }
    }
    for row in 0..lp.rows.len() {
        let v = lp.row_value(row, point);
        if v < margin - FEASIBILITY_TOL {
            return Err(LpError::FeasibilityCheck(format!(
                "row {row} value {v} below margin {margin}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_row_margin_is_its_offset() {
        let lp = WitnessLp::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![(vec![0.0, 0.0], 5.0)])
            .unwrap();
        let sol = solve_witness(&lp).unwrap();
        assert!((sol.margin - 5.0).abs() < 1e-9);
        assert!(sol.point.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn affine_difference_peaks_at_corner() {
        // l = x, l' = 1 - x: their difference 2x - 1 peaks at x = 1.
        let lp = WitnessLp::new(vec![0.0], vec![1.0], vec![(vec![2.0], -1.0)]).unwrap();
        let sol = solve_witness(&lp).unwrap();
        assert!((sol.margin - 1.0).abs() < 1e-9);
        assert!((sol.point[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_rows_meet_in_the_middle() {
        // max min(x, 1 - x) = 0.5 at x = 0.5.
        let lp = WitnessLp::new(
            vec![0.0],
            vec![1.0],
            vec![(vec![1.0], 0.0), (vec![-1.0], 1.0)],
        )
        .unwrap();
        let sol = solve_witness(&lp).unwrap();
        assert!((sol.margin - 0.5).abs() < 1e-9);
        assert!((sol.point[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(WitnessLp::new(vec![0.0], vec![0.0], vec![(vec![1.0], 0.0)]).is_err());
        assert!(WitnessLp::new(vec![0.0], vec![1.0], vec![]).is_err());
        assert!(WitnessLp::new(vec![0.0], vec![1.0], vec![(vec![1.0, 2.0], 0.0)]).is_err());
    }
}
