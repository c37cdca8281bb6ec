use super::{GeometryError, Rect};

/// Binary space partition node. Splits are axis-orthogonal; leaves carry
/// the payload for their cell.
#[derive(Debug, Clone)]
enum Node<P> {
    Leaf {
        rect: Rect,
        payload: P,
    },
    Split {
        dim: usize,
        at: f64,
        low: Box<Node<P>>,
        high: Box<Node<P>>,
    },
}

/// A kd-tree whose leaves form a rectangular partition of `[0, 1]^d`.
///
/// Leaf cells are pairwise disjoint under the half-open membership
/// convention of [`Rect`] and cover the whole cube. Every split
/// coordinate lies strictly inside the box implied by the path from the
/// root, so no operation can create zero-volume cells. Coordinate
/// comparisons are exact; split planes carry whatever machine reals the
/// model and shift arithmetic produced. Partitions are plain immutable
/// values; all operations build new trees.
#[derive(Debug, Clone)]
pub struct KdPartition<P> {
    dims: usize,
    root: Node<P>,
}

/// Borrowed view of one leaf.
#[derive(Debug)]
pub struct LeafView<'a, P> {
    pub rect: &'a Rect,
    pub payload: &'a P,
}

/// Summary counters for a partition, used for reporting and sanity
/// checks (total volume of a valid partition is 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LeafStats {
    pub leaves: usize,
    pub volume: f64,
    pub max_payload_size: usize,
}

impl<P> KdPartition<P> {
    /// Single-leaf partition covering the unit cube.
    pub fn from_payload(dims: usize, payload: P) -> Self {
        KdPartition {
            dims,
            root: Node::Leaf {
                rect: Rect::unit(dims),
                payload,
            },
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Leaves in depth-first order, low child before high child.
    pub fn leaves(&self) -> Leaves<'_, P> {
        Leaves {
            stack: vec![&self.root],
        }
    }

    /// The unique leaf containing `x` under the half-open membership
    /// convention with a closed top face at 1.0.
    pub fn locate(&self, x: &[f64]) -> Result<LeafView<'_, P>, GeometryError> {
        if x.len() != self.dims {
            return Err(GeometryError::DimMismatch {
                expected: self.dims,
                got: x.len(),
            });
        }
        Rect::check_point(x)?;
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { rect, payload } => {
                    debug_assert!(rect.contains(x));
                    return Ok(LeafView { rect, payload });
                }
                Node::Split { dim, at, low, high } => {
                    node = if x[*dim] < *at { low } else { high };
                }
            }
        }
    }

    /// Same-structure payload transform.
    pub fn map<Q>(&self, mut f: impl FnMut(&P) -> Q) -> KdPartition<Q> {
        KdPartition {
            dims: self.dims,
            root: map_node(&self.root, &mut f),
        }
    }

    /// Payload transform with access to each leaf's cell.
    pub fn map_leaves<Q>(&self, mut f: impl FnMut(&Rect, &P) -> Q) -> KdPartition<Q> {
        KdPartition {
            dims: self.dims,
            root: map_leaves_node(&self.root, &mut f),
        }
    }

    /// Merges sibling leaves whose payloads satisfy `eq`, bottom-up.
    /// The result represents the same payload-as-function-of-point and
    /// never has more leaves than the input. Only structurally adjacent
    /// siblings merge, so the rectangular-partition property is kept.
    pub fn merge_equal_leaves(self, eq: impl Fn(&P, &P) -> bool) -> Self {
        KdPartition {
            dims: self.dims,
            root: merge_node(self.root, &eq),
        }
    }

    pub fn leaf_stats(&self, payload_size: impl Fn(&P) -> usize) -> LeafStats {
        let mut leaves = 0usize;
        let mut max_payload_size = 0usize;
        // Neumaier summation: leaf volumes must add to 1 within 1e-12
        // even for partitions with many cells.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for leaf in self.leaves() {
            leaves += 1;
            max_payload_size = max_payload_size.max(payload_size(leaf.payload));
            let v = leaf.rect.volume();
            let t = sum + v;
            comp += if sum.abs() >= v.abs() {
                (sum - t) + v
            } else {
                (v - t) + sum
            };
            sum = t;
        }
        LeafStats {
            leaves,
            volume: sum + comp,
            max_payload_size,
        }
    }

    /// Leaf rects translated by `shift` and clipped to `window`, with a
    /// reference to each source payload. Pieces with no volume inside
    /// the window are dropped. Each translated boundary is computed once
    /// per source coordinate, so adjacent pieces share bounds exactly.
    pub fn translated_overlaps(&self, shift: &[f64], window: &Rect) -> Vec<(Rect, &P)> {
        assert_eq!(shift.len(), self.dims);
        let mut out = Vec::new();
        collect_translated(&self.root, shift, window, &mut out);
        out
    }
}

impl<P: Clone> KdPartition<P> {
    /// Splits leaves so that `region` is tiled exactly by whole leaves,
    /// then maps the payloads of leaves inside `region` through `f`.
    /// Leaves outside keep their payload; a leaf is split only when it
    /// straddles a face of `region`.
    pub fn refine(self, region: &Rect, mut f: impl FnMut(&P) -> P) -> Self {
        assert_eq!(region.dims(), self.dims);
        let bounds = Rect::unit(self.dims);
        KdPartition {
            dims: self.dims,
            root: refine_node(self.root, &bounds, region, &mut f),
        }
    }

    /// Builds a partition from a list of disjoint cells covering the
    /// cube. Fails when pieces overlap or leave a gap. Piece lists that
    /// admit kd splits (everything this crate produces) yield balanced
    /// trees; others fall back to insertion order.
    pub fn from_pieces(
        dims: usize,
        pieces: impl IntoIterator<Item = (Rect, P)>,
    ) -> Result<Self, GeometryError> {
        let pieces: Vec<(Rect, P)> = pieces.into_iter().collect();
        for (rect, _) in &pieces {
            if rect.dims() != dims {
                return Err(GeometryError::DimMismatch {
                    expected: dims,
                    got: rect.dims(),
                });
            }
        }
        let bounds = Rect::unit(dims);
        let root = build_balanced(pieces, &bounds)?;
        Ok(KdPartition { dims, root })
    }
}

/// Common refinement of two partitions. Each output leaf is a nonempty
/// intersection of one leaf from each input, with payload
/// `f(payload_a, payload_b)`.
pub fn intersect<A, B, C>(
    a: &KdPartition<A>,
    b: &KdPartition<B>,
    mut f: impl FnMut(&A, &B) -> C,
) -> KdPartition<C> {
    intersect_map(a, b, |_, pa, pb| f(pa, pb))
}

/// [`intersect`] with access to each output leaf's cell, for payload
/// combinations that depend on the region (e.g. per-cell pruning).
pub fn intersect_map<A, B, C>(
    a: &KdPartition<A>,
    b: &KdPartition<B>,
    mut f: impl FnMut(&Rect, &A, &B) -> C,
) -> KdPartition<C> {
    assert_eq!(a.dims(), b.dims(), "partition dimension mismatch");
    let bounds = Rect::unit(a.dims());
    KdPartition {
        dims: a.dims(),
        root: merge_trees(&a.root, &b.root, bounds, &mut f),
    }
}

fn map_node<P, Q>(node: &Node<P>, f: &mut impl FnMut(&P) -> Q) -> Node<Q> {
    match node {
        Node::Leaf { rect, payload } => Node::Leaf {
            rect: rect.clone(),
            payload: f(payload),
        },
        Node::Split { dim, at, low, high } => Node::Split {
            dim: *dim,
            at: *at,
            low: Box::new(map_node(low, f)),
            high: Box::new(map_node(high, f)),
        },
    }
}

fn map_leaves_node<P, Q>(node: &Node<P>, f: &mut impl FnMut(&Rect, &P) -> Q) -> Node<Q> {
    match node {
        Node::Leaf { rect, payload } => Node::Leaf {
            rect: rect.clone(),
            payload: f(rect, payload),
        },
        Node::Split { dim, at, low, high } => Node::Split {
            dim: *dim,
            at: *at,
            low: Box::new(map_leaves_node(low, f)),
            high: Box::new(map_leaves_node(high, f)),
        },
    }
}

fn merge_node<P>(node: Node<P>, eq: &impl Fn(&P, &P) -> bool) -> Node<P> {
    match node {
        leaf @ Node::Leaf { .. } => leaf,
        Node::Split { dim, at, low, high } => {
            let low = merge_node(*low, eq);
            let high = merge_node(*high, eq);
            if let (Node::Leaf { rect: rl, payload: pl }, Node::Leaf { rect: rh, payload: ph }) =
                (&low, &high)
            {
                if eq(pl, ph) {
                    let merged = rl.with_bound(dim, rh.high()[dim], true);
                    let Node::Leaf { payload, .. } = low else { unreachable!() };
                    return Node::Leaf {
                        rect: merged,
                        payload,
                    };
                }
            }
            Node::Split {
                dim,
                at,
                low: Box::new(low),
                high: Box::new(high),
            }
        }
    }
}

fn refine_node<P: Clone>(
    node: Node<P>,
    bounds: &Rect,
    region: &Rect,
    f: &mut impl FnMut(&P) -> P,
) -> Node<P> {
    if bounds.disjoint(region) {
        return node;
    }
    if region.contains_rect(bounds) {
        let mut node = node;
        apply_in_place(&mut node, f);
        return node;
    }
    match node {
        Node::Split { dim, at, low, high } => {
            let low_bounds = bounds.with_bound(dim, at, true);
            let high_bounds = bounds.with_bound(dim, at, false);
            Node::Split {
                dim,
                at,
                low: Box::new(refine_node(*low, &low_bounds, region, f)),
                high: Box::new(refine_node(*high, &high_bounds, region, f)),
            }
        }
        Node::Leaf { rect, payload } => {
            // The leaf straddles the region boundary: cut along the first
            // crossing face, ascending dimensions, low face before high.
            let (dim, at) =
                crossing_face(&rect, region).expect("straddling leaf has a crossing face");
            let low_rect = rect.with_bound(dim, at, true);
            let high_rect = rect.with_bound(dim, at, false);
            let low = Node::Leaf {
                rect: low_rect.clone(),
                payload: payload.clone(),
            };
            let high = Node::Leaf {
                rect: high_rect.clone(),
                payload,
            };
            Node::Split {
                dim,
                at,
                low: Box::new(refine_node(low, &low_rect, region, f)),
                high: Box::new(refine_node(high, &high_rect, region, f)),
            }
        }
    }
}

fn crossing_face(rect: &Rect, region: &Rect) -> Option<(usize, f64)> {
    for dim in 0..rect.dims() {
        let (lo, hi) = (rect.low()[dim], rect.high()[dim]);
        if region.low()[dim] > lo && region.low()[dim] < hi {
            return Some((dim, region.low()[dim]));
        }
        if region.high()[dim] > lo && region.high()[dim] < hi {
            return Some((dim, region.high()[dim]));
        }
    }
    None
}

fn apply_in_place<P>(node: &mut Node<P>, f: &mut impl FnMut(&P) -> P) {
    match node {
        Node::Leaf { payload, .. } => *payload = f(payload),
        Node::Split { low, high, .. } => {
            apply_in_place(low, f);
            apply_in_place(high, f);
        }
    }
}

fn merge_trees<A, B, C>(
    a: &Node<A>,
    b: &Node<B>,
    bounds: Rect,
    f: &mut impl FnMut(&Rect, &A, &B) -> C,
) -> Node<C> {
    match a {
        Node::Split { dim, at, low, high } => {
            let (dim, at) = (*dim, *at);
            // Splits outside the current bounds were already resolved by
            // the other tree's planes; skip to the relevant side.
            if at <= bounds.low()[dim] {
                merge_trees(high, b, bounds, f)
            } else if at >= bounds.high()[dim] {
                merge_trees(low, b, bounds, f)
            } else {
                let low_bounds = bounds.with_bound(dim, at, true);
                let high_bounds = bounds.with_bound(dim, at, false);
                Node::Split {
                    dim,
                    at,
                    low: Box::new(merge_trees(low, b, low_bounds, f)),
                    high: Box::new(merge_trees(high, b, high_bounds, f)),
                }
            }
        }
        Node::Leaf { payload: pa, .. } => match b {
            Node::Split { dim, at, low, high } => {
                let (dim, at) = (*dim, *at);
                if at <= bounds.low()[dim] {
                    merge_trees(a, high, bounds, f)
                } else if at >= bounds.high()[dim] {
                    merge_trees(a, low, bounds, f)
                } else {
                    let low_bounds = bounds.with_bound(dim, at, true);
                    let high_bounds = bounds.with_bound(dim, at, false);
                    Node::Split {
                        dim,
                        at,
                        low: Box::new(merge_trees(a, low, low_bounds, f)),
                        high: Box::new(merge_trees(a, high, high_bounds, f)),
                    }
                }
            }
            Node::Leaf { payload: pb, .. } => Node::Leaf {
                payload: f(&bounds, pa, pb),
                rect: bounds,
            },
        },
    }
}

fn collect_translated<'a, P>(
    node: &'a Node<P>,
    shift: &[f64],
    window: &Rect,
    out: &mut Vec<(Rect, &'a P)>,
) {
    match node {
        Node::Leaf { rect, payload } => {
            if let Some(piece) = rect.shift_clip(shift).and_then(|r| r.intersection(window)) {
                out.push((piece, payload));
            }
        }
        Node::Split { dim, at, low, high } => {
            let at_shifted = at + shift[*dim];
            if at_shifted > window.low()[*dim] {
                collect_translated(low, shift, window, out);
            }
            if at_shifted < window.high()[*dim] {
                collect_translated(high, shift, window, out);
            }
        }
    }
}

fn build_balanced<P: Clone>(
    pieces: Vec<(Rect, P)>,
    bounds: &Rect,
) -> Result<Node<P>, GeometryError> {
    if pieces.len() == 1 {
        let (rect, payload) = pieces.into_iter().next().unwrap();
        if &rect != bounds {
            // A single piece that does not fill its box leaves a gap.
            return Err(GeometryError::CoverageGap {
                rect: format!("{bounds:?}"),
            });
        }
        return Ok(Node::Leaf { rect, payload });
    }
    if pieces.is_empty() {
        return Err(GeometryError::CoverageGap {
            rect: format!("{bounds:?}"),
        });
    }
    match split_plane(&pieces, bounds) {
        Some((dim, at)) => {
            let (mut low_pieces, mut high_pieces) = (Vec::new(), Vec::new());
            for (rect, payload) in pieces {
                if rect.high()[dim] <= at {
                    low_pieces.push((rect, payload));
                } else {
                    high_pieces.push((rect, payload));
                }
            }
            let low_bounds = bounds.with_bound(dim, at, true);
            let high_bounds = bounds.with_bound(dim, at, false);
            Ok(Node::Split {
                dim,
                at,
                low: Box::new(build_balanced(low_pieces, &low_bounds)?),
                high: Box::new(build_balanced(high_pieces, &high_bounds)?),
            })
        }
        // Rectangular tilings without a clean kd plane (pinwheels) are
        // still insertable one refine at a time.
        None => build_by_refinement(pieces, bounds),
    }
}

/// Picks a split plane no piece straddles, preferring the candidate
/// closest to the median boundary of each dimension.
fn split_plane<P>(pieces: &[(Rect, P)], bounds: &Rect) -> Option<(usize, f64)> {
    for dim in 0..bounds.dims() {
        let mut cuts: Vec<f64> = pieces
            .iter()
            .map(|(r, _)| r.low()[dim])
            .filter(|&c| c > bounds.low()[dim] && c < bounds.high()[dim])
            .collect();
        cuts.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        if cuts.is_empty() {
            continue;
        }
        // Walk candidates outward from the median.
        let mid = cuts.len() / 2;
        let order = (0..cuts.len()).map(|i| {
            let offset = i.div_ceil(2);
            if i % 2 == 0 { mid.saturating_sub(offset) } else { (mid + offset).min(cuts.len() - 1) }
        });
        for idx in order {
            let at = cuts[idx];
            let straddled = pieces
                .iter()
                .any(|(r, _)| r.low()[dim] < at && at < r.high()[dim]);
            if !straddled {
                return Some((dim, at));
            }
        }
    }
    None
}

fn build_by_refinement<P: Clone>(
    pieces: Vec<(Rect, P)>,
    bounds: &Rect,
) -> Result<Node<P>, GeometryError> {
    let mut node: Node<Option<P>> = Node::Leaf {
        rect: bounds.clone(),
        payload: None,
    };
    for (index, (rect, payload)) in pieces.into_iter().enumerate() {
        let mut clashed = false;
        node = refine_node(node, bounds, &rect, &mut |old| {
            if old.is_some() {
                clashed = true;
            }
            Some(payload.clone())
        });
        if clashed {
            return Err(GeometryError::OverlappingPieces { index });
        }
    }
    let mut gap: Option<String> = None;
    check_filled(&node, &mut gap);
    if let Some(rect) = gap {
        return Err(GeometryError::CoverageGap { rect });
    }
    Ok(map_node(&node, &mut |p: &Option<P>| {
        p.clone().expect("gaps checked above")
    }))
}

fn check_filled<P>(node: &Node<Option<P>>, gap: &mut Option<String>) {
    if gap.is_some() {
        return;
    }
    match node {
        Node::Leaf { rect, payload } => {
            if payload.is_none() {
                *gap = Some(format!("{rect:?}"));
            }
        }
        Node::Split { low, high, .. } => {
            check_filled(low, gap);
            check_filled(high, gap);
        }
    }
}

/// Depth-first leaf iterator.
pub struct Leaves<'a, P> {
    stack: Vec<&'a Node<P>>,
}

impl<'a, P> Iterator for Leaves<'a, P> {
    type Item = LeafView<'a, P>;

    fn next(&mut self) -> Option<Self::Item> {
        while let Some(node) = self.stack.pop() {
            match node {
                Node::Leaf { rect, payload } => return Some(LeafView { rect, payload }),
                Node::Split { low, high, .. } => {
                    self.stack.push(high);
                    self.stack.push(low);
                }
            }
        }
        None
    }
}
