//! Test support: seeded random instances (partitions, function sets,
//! models) and independent evaluation oracles. Everything here is
//! deliberately written against the public query surface (locate plus
//! set evaluation), never against the structured backup internals, so
//! it can serve as an oracle for them.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{KdPartition, Rect};
use crate::linprog::WitnessLp;
use crate::model::{
    ActionEntry, DiscreteDist, HybridMdp, OutcomeKind, OutcomeSet,
};
use crate::pwlc::{LinearFn, PwlcSet};
use crate::solver::ValueFunction;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random partition built by repeatedly splitting a random leaf at a
/// random interior plane, then assigning payloads in leaf order.
pub fn random_partition<P>(
    dims: usize,
    leaves: usize,
    rng: &mut ChaCha8Rng,
    mut payload: impl FnMut(&mut ChaCha8Rng) -> P,
) -> KdPartition<P>
where
    P: Clone,
{
    let mut tree: KdPartition<u32> = KdPartition::from_payload(dims, 0);
    let mut count = 1;
    while count < leaves {
        let rects: Vec<Rect> = tree.leaves().map(|l| l.rect.clone()).collect();
        let pick = rng.random_range(0..rects.len());
        let rect = &rects[pick];
        let dim = rng.random_range(0..dims);
        let (lo, hi) = (rect.low()[dim], rect.high()[dim]);
        if hi - lo < 1e-6 {
            continue;
        }
        let at = lo + (hi - lo) * rng.random_range(0.2..0.8);
        if at <= lo || at >= hi {
            continue;
        }
        // Refining with the low half of the chosen leaf introduces
        // exactly one split.
        let half = Rect::new(rect.low().to_vec(), {
            let mut high = rect.high().to_vec();
            high[dim] = at;
            high
        })
        .unwrap();
        tree = tree.refine(&half, |p| *p);
        count += 1;
    }
    tree.map(|_| payload(rng))
}

/// Random function set with moderate coefficients.
pub fn random_pwlc(dims: usize, count: usize, rng: &mut ChaCha8Rng) -> PwlcSet {
    let fns = (0..count.max(1))
        .map(|_| {
            let coeffs = (0..dims).map(|_| rng.random_range(-2.0..2.0)).collect();
            LinearFn::new(coeffs, rng.random_range(-1.0..3.0)).unwrap()
        })
        .collect();
    PwlcSet::new(fns).unwrap()
}

/// Witness LP whose rows are gentle enough that a 200-per-dimension
/// grid brute force is valid within 2e-3.
pub fn random_witness_lp(dims: usize, rows: usize, rng: &mut ChaCha8Rng) -> WitnessLp {
    let low: Vec<f64> = (0..dims).map(|_| rng.random_range(0.0..0.3)).collect();
    let high: Vec<f64> = low
        .iter()
        .map(|&l| l + rng.random_range(0.3..0.7))
        .collect();
    let rows = (0..rows.max(1))
        .map(|_| {
            let g: Vec<f64> = (0..dims).map(|_| rng.random_range(-0.25..0.25)).collect();
            (g, rng.random_range(-0.5..0.5))
        })
        .collect();
    WitnessLp::new(low, high, rows).unwrap()
}

/// Brute-force margin: max over a corner-inclusive grid of the minimum
/// row value. Underestimates the true optimum by at most the row
/// Lipschitz constant times half the grid spacing.
pub fn grid_witness_margin(lp: &WitnessLp, per_dim: usize) -> f64 {
    let dims = lp.dims();
    let total: usize = per_dim.pow(dims as u32);
    let rows = lp.rows();
    let mut best = f64::NEG_INFINITY;
    let mut x = vec![0.0; dims];
    for flat in 0..total {
        let mut rest = flat;
        for (k, xk) in x.iter_mut().enumerate() {
            let i = rest % per_dim;
            rest /= per_dim;
            let (lo, hi) = (low_of(lp, k), high_of(lp, k));
            *xk = lo + (hi - lo) * i as f64 / (per_dim - 1) as f64;
        }
        let mut margin = f64::INFINITY;
        for (g, b) in rows {
            let mut v = *b;
            for (gi, xi) in g.iter().zip(&x) {
                v += gi * xi;
            }
            if v < margin {
                margin = v;
                if margin <= best {
                    break;
                }
            }
        }
        if margin > best {
            best = margin;
        }
    }
    best
}

fn low_of(lp: &WitnessLp, dim: usize) -> f64 {
    lp.bounds().0[dim]
}

fn high_of(lp: &WitnessLp, dim: usize) -> f64 {
    lp.bounds().1[dim]
}

/// Direct Bellman right-hand side at one point: an explicit loop over
/// actions, successors, and outcomes, reading the input value function
/// through point queries only.
pub fn bellman_oracle(m: &HybridMdp, v: &ValueFunction, state: usize, x: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (_, entry) in m.applicable(state) {
        let mut acc = 0.0;
        let dist = entry.discrete.locate(x).unwrap().payload;
        for (sp, p) in dist.successors() {
            let cont = entry.continuous[sp].as_ref().unwrap();
            let outcomes = cont.locate(x).unwrap().payload;
            let mut sigma = 0.0;
            for o in &outcomes.outcomes {
                let value = match o.kind {
                    OutcomeKind::Relative => {
                        let y: Vec<f64> = x.iter().zip(&o.target).map(|(a, b)| a + b).collect();
                        if y.iter().any(|t| !(0.0..=1.0).contains(t)) {
                            m.out_of_bounds_value()
                        } else {
                            v.eval(sp, &y).unwrap()
                        }
                    }
                    OutcomeKind::Absolute => v.eval(sp, &o.target).unwrap(),
                };
                sigma += o.prob * value;
            }
            acc += p * sigma;
        }
        let q = acc + entry.reward.locate(x).unwrap().payload.value_at(x);
        if q > best {
            best = q;
        }
    }
    best
}

/// Points strictly inside a cell, at jittered interior fractions. Cells
/// thinner than 1e-12 in any dimension have no representable interior
/// to sample and yield an empty list.
pub fn interior_points(rect: &Rect, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    if rect
        .low()
        .iter()
        .zip(rect.high())
        .any(|(lo, hi)| hi - lo < 1e-12)
    {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x: Vec<f64> = rect
            .low()
            .iter()
            .zip(rect.high())
            .map(|(lo, hi)| lo + (hi - lo) * rng.random_range(0.1..0.9))
            .collect();
        if x
            .iter()
            .zip(rect.low().iter().zip(rect.high()))
            .all(|(xi, (lo, hi))| xi > lo && xi < hi)
        {
            out.push(x);
        }
    }
    out
}

/// A uniformly random point in the open cube.
pub fn random_point(dims: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dims).map(|_| rng.random_range(0.0..1.0)).collect()
}

const GRID_STEP: f64 = 0.1;

fn grid_coord(i: i64) -> f64 {
    i as f64 * GRID_STEP
}

/// Random single-discrete-state instance whose partitions and shifts
/// all sit on a 10-per-dimension grid, with constant rewards. On this
/// family the uniform-grid solver at resolution 10 is exact, which
/// makes it an oracle for the structured solver.
pub fn aligned_m1(dims: usize, rng: &mut ChaCha8Rng) -> HybridMdp {
    let num_actions = rng.random_range(2..=3usize);
    let mut entries_row = Vec::new();
    for _ in 0..num_actions {
        let reward = aligned_partition(dims, rng, &mut |rng| {
            PwlcSet::constant(dims, rng.random_range(-1.0..4.0))
        });
        let transition = aligned_partition(dims, rng, &mut |rng| {
            let count = rng.random_range(1..=3usize);
            let parts = dyadic_probs(count, rng);
            OutcomeSet::relative((0..count).map(|i| {
                let delta: Vec<f64> = (0..dims)
                    .map(|_| grid_coord(rng.random_range(-3..=3i64)))
                    .collect();
                (delta, parts[i])
            }))
        });
        let mut continuous = vec![None];
        continuous[0] = Some(transition);
        entries_row.push(Some(ActionEntry {
            reward,
            discrete: KdPartition::from_payload(dims, DiscreteDist::delta(1, 0)),
            continuous,
        }));
    }
    HybridMdp::new(
        dims,
        vec!["s0".into()],
        (0..num_actions).map(|a| format!("a{a}")).collect(),
        5,
        0.0,
        vec![entries_row],
    )
}

/// Probabilities that are exact multiples of 1/64 and sum to exactly 1.
fn dyadic_probs(count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut parts = vec![1u32; count];
    let mut left = 64 - count as u32;
    for p in parts.iter_mut().take(count - 1) {
        let take = rng.random_range(0..=left);
        *p += take;
        left -= take;
    }
    parts[count - 1] += left;
    parts.iter().map(|&p| p as f64 / 64.0).collect()
}

/// Random partition whose boundaries are grid multiples.
fn aligned_partition<P: Clone>(
    dims: usize,
    rng: &mut ChaCha8Rng,
    payload: &mut impl FnMut(&mut ChaCha8Rng) -> P,
) -> KdPartition<P> {
    let mut cuts_per_dim: Vec<Vec<f64>> = Vec::new();
    for _ in 0..dims {
        let n = rng.random_range(0..=2usize);
        let mut cuts = Vec::new();
        while cuts.len() < n {
            let c = grid_coord(rng.random_range(1..=9i64));
            if !cuts.contains(&c) {
                cuts.push(c);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts_per_dim.push(cuts);
    }
    let mut pieces: Vec<(Rect, P)> = Vec::new();
    let mut idx = vec![0usize; dims];
    loop {
        let mut low = Vec::with_capacity(dims);
        let mut high = Vec::with_capacity(dims);
        for k in 0..dims {
            let edges = &cuts_per_dim[k];
            let lo = if idx[k] == 0 { 0.0 } else { edges[idx[k] - 1] };
            let hi = if idx[k] == edges.len() { 1.0 } else { edges[idx[k]] };
            low.push(lo);
            high.push(hi);
        }
        pieces.push((Rect::new(low, high).unwrap(), payload(rng)));
        let mut k = 0;
        loop {
            if k == dims {
                return KdPartition::from_pieces(dims, pieces).unwrap();
            }
            idx[k] += 1;
            if idx[k] <= cuts_per_dim[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Random mixed-state instance: up to `max_states` discrete states,
/// unaligned partitions, piecewise-linear rewards, and a blend of
/// relative and absolute outcome sets.
pub fn random_hybrid(dims: usize, max_states: usize, rng: &mut ChaCha8Rng) -> HybridMdp {
    random_hybrid_with(dims, max_states, false, rng)
}

/// Like [`random_hybrid`], optionally forcing rewards nonnegative over
/// the whole cube (and a zero out-of-bounds value) so value functions
/// grow monotonically with the horizon.
///
/// All relative outcomes draw from a small per-model pool of shift
/// vectors. Reusing shifts is what real domains do, and it is what
/// keeps exact backups from splintering: every distinct shift multiplies
/// the boundary count per stage.
pub fn random_hybrid_with(
    dims: usize,
    max_states: usize,
    nonneg: bool,
    rng: &mut ChaCha8Rng,
) -> HybridMdp {
    let num_states = rng.random_range(1..=max_states.max(1));
    let num_actions = rng.random_range(2..=3usize);
    let oob = if nonneg || rng.random_bool(0.5) { 0.0 } else { -0.5 };
    let shift_pool: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..dims).map(|_| rng.random_range(-0.4..0.4)).collect())
        .collect();

    let mut entries = Vec::new();
    for _ in 0..num_states {
        let mut row = Vec::new();
        for a in 0..num_actions {
            let applicable = a == 0 || rng.random_bool(0.8);
            if !applicable {
                row.push(None);
                continue;
            }
            let leaves = rng.random_range(1..=4);
            let reward = random_partition(dims, leaves, rng, |rng| {
                if nonneg {
                    random_nonneg_pwlc(dims, rng.random_range(1..=3), rng)
                } else {
                    random_pwlc(dims, rng.random_range(1..=3), rng)
                }
            });
            let leaves = rng.random_range(1..=2);
            let discrete = random_partition(dims, leaves, rng, |rng| {
                // Sparse successor support keeps the backup from
                // folding every state's value function into every cell.
                let support = rng.random_range(1..=2.min(num_states));
                let mut probs = vec![0.0; num_states];
                let mut picked = Vec::new();
                while picked.len() < support {
                    let s = rng.random_range(0..num_states);
                    if !picked.contains(&s) {
                        picked.push(s);
                    }
                }
                let weights: Vec<f64> =
                    (0..support).map(|_| rng.random_range(0.1..1.0)).collect();
                let total: f64 = weights.iter().sum();
                for (i, &s) in picked.iter().enumerate() {
                    probs[s] = weights[i] / total;
                }
                DiscreteDist::new(probs)
            });
            let continuous = (0..num_states)
                .map(|_| {
                    let leaves = rng.random_range(1..=2);
                    Some(random_partition(dims, leaves, rng, |rng| {
                        random_outcome_set(dims, &shift_pool, rng)
                    }))
                })
                .collect();
            row.push(Some(ActionEntry {
                reward,
                discrete,
                continuous,
            }));
        }
        entries.push(row);
    }
    HybridMdp::new(
        dims,
        (0..num_states).map(|s| format!("s{s}")).collect(),
        (0..num_actions).map(|a| format!("a{a}")).collect(),
        4,
        oob,
        entries,
    )
}

/// A set whose pointwise maximum is nonnegative on the whole cube.
pub fn random_nonneg_pwlc(dims: usize, count: usize, rng: &mut ChaCha8Rng) -> PwlcSet {
    let fns = (0..count.max(1))
        .map(|_| {
            let coeffs: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
            let slack: f64 = coeffs.iter().map(|c| (-c).max(0.0)).sum();
            LinearFn::new(coeffs.clone(), slack + rng.random_range(0.0..2.0)).unwrap()
        })
        .collect();
    PwlcSet::new(fns).unwrap()
}

/// Same model with every reward scaled by a positive factor.
pub fn scale_rewards(m: &HybridMdp, factor: f64) -> HybridMdp {
    let entries = (0..m.num_states())
        .map(|s| {
            (0..m.actions().len())
                .map(|a| {
                    m.entry(s, a).map(|entry| ActionEntry {
                        reward: entry.reward.map(|set| set.scale(factor).unwrap()),
                        discrete: entry.discrete.clone(),
                        continuous: entry.continuous.clone(),
                    })
                })
                .collect()
        })
        .collect();
    HybridMdp::new(
        m.dims(),
        m.states().to_vec(),
        m.actions().to_vec(),
        m.horizon(),
        m.out_of_bounds_value(),
        entries,
    )
}

/// Same model with the action list permuted by `perm` (new index ->
/// old index). Values must be unaffected; only tie-broken labels may
/// shift.
pub fn permute_actions(m: &HybridMdp, perm: &[usize]) -> HybridMdp {
    assert_eq!(perm.len(), m.actions().len());
    let actions = perm.iter().map(|&a| m.actions()[a].clone()).collect();
    let entries = (0..m.num_states())
        .map(|s| {
            perm.iter()
                .map(|&a| m.entry(s, a).cloned())
                .collect()
        })
        .collect();
    HybridMdp::new(
        m.dims(),
        m.states().to_vec(),
        actions,
        m.horizon(),
        m.out_of_bounds_value(),
        entries,
    )
}

fn random_outcome_set(
    dims: usize,
    shift_pool: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> OutcomeSet {
    if rng.random_bool(0.8) {
        // One or two pool shifts, possibly alongside a zero shift.
        let mut shifts: Vec<Vec<f64>> = vec![shift_pool[rng.random_range(0..shift_pool.len())].clone()];
        if rng.random_bool(0.5) {
            let other = shift_pool[rng.random_range(0..shift_pool.len())].clone();
            if other != shifts[0] {
                shifts.push(other);
            }
        }
        if rng.random_bool(0.3) {
            shifts.push(vec![0.0; dims]);
        }
        let weights: Vec<f64> = (0..shifts.len()).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = weights.iter().sum();
        OutcomeSet::relative(
            shifts
                .into_iter()
                .zip(weights)
                .map(|(delta, w)| (delta, w / total)),
        )
    } else {
        let count = rng.random_range(1..=2usize);
        let weights: Vec<f64> = (0..count).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = weights.iter().sum();
        OutcomeSet::absolute((0..count).map(|i| {
            let target: Vec<f64> = (0..dims).map(|_| rng.random_range(0.0..1.0)).collect();
            (target, weights[i] / total)
        }))
    }
}
