// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Multi-dimensional partitioning: a balanced k-d tree over the optimization
//! sample, per-node variance oracles and greedy expansion of the node with
//! the largest worst-case variance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Range;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::window_variance;
use crate::model::{AggregateKind, Dataset, Rect};
use crate::optimizer1d::{
    build_avg_window_index, max_var_fast_avg, max_var_fast_sum, midpoint_cut, AvgWindowIndex,
    PrefixSums, DEFAULT_DELTA,
};
use crate::scalar::Scalar;
use crate::synopsis::Layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fanout {
    /// Two children, split dimension cycling with depth.
    Binary,
    /// Up to `2^d` children: a median split on every dimension in turn.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdConfig {
    /// Leaf budget.
    pub k: usize,
    pub fanout: Fanout,
    pub depth_gap_limit: usize,
    pub delta: f64,
    /// Optimization sample size; 0 uses the full data.
    pub m: usize,
    pub objective: AggregateKind,
    /// Smallest tree node in sample points; raised to `max(1, ceil(2 delta m))`.
    pub min_leaf_samples: usize,
    pub seed: u64,
}

impl Default for KdConfig {
    fn default() -> Self {
        Self {
            k: 64,
            fanout: Fanout::Binary,
            depth_gap_limit: 2,
            delta: DEFAULT_DELTA,
            m: 10_000,
            objective: AggregateKind::Sum,
            min_leaf_samples: 1,
            seed: 0,
        }
    }
}

impl KdConfig {
    pub fn effective_m(&self, n: usize) -> usize {
        if self.m == 0 {
            n
        } else {
            self.m.min(n)
        }
    }

    pub fn delta_count(&self, m: usize) -> usize {
        ((self.delta * m as f64).ceil() as usize).max(1)
    }

    pub fn min_leaf(&self, m: usize) -> usize {
        let floor = ((2.0 * self.delta * m as f64).ceil() as usize).max(1);
        self.min_leaf_samples.max(floor)
    }

    pub fn fanout_width(&self, d: usize) -> usize {
        match self.fanout {
            Fanout::Binary => 2,
            Fanout::Full => 1 << d,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.depth_gap_limit == 0 {
            return Err(Error::Config("depth gap limit must be at least 1".into()));
        }
        if self.k < self.fanout_width(d) {
            return Err(Error::Config(format!(
                "k = {} is below the fanout {}",
                self.k,
                self.fanout_width(d)
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} outside (0, 1)", self.delta)));
        }
        if matches!(self.objective, AggregateKind::Min | AggregateKind::Max) {
            return Err(Error::Config(format!(
                "{} is not a variance objective",
                self.objective
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdNode<T> {
    /// Canonical box; outer faces are infinite.
    pub rect: Rect<T>,
    /// Positions in [`KdTree::order`].
    pub range: Range<usize>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    pub depth: usize,
}

impl<T> KdNode<T> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Balanced k-d tree over sample points, nodes in preorder.
#[derive(Debug, Clone)]
pub struct KdTree<T> {
    dimension: usize,
    points: Vec<T>,
    values: Vec<T>,
    order: Vec<usize>,
    nodes: Vec<KdNode<T>>,
    fanout: Fanout,
}

impl<T: Scalar> KdTree<T> {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes(&self) -> &[KdNode<T>] {
        &self.nodes
    }

    pub fn fanout(&self) -> Fanout {
        self.fanout
    }

    /// Sample indices in tree order; every node owns a contiguous run.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn value(&self, i: usize) -> T {
        self.values[i]
    }

    pub fn sample_len(&self) -> usize {
        self.values.len()
    }

    pub fn members(&self, id: usize) -> &[usize] {
        &self.order[self.nodes[id].range.clone()]
    }

    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0) + 1
    }
}

/// Builds tree U by recursive median splits; a node with fewer than
/// `2 * min_leaf` points, or whose points cannot be separated, is a leaf.
///
/// With one dimension the root order is ascending by coordinate and then
/// value, which matches the one-dimensional optimizer's sample order.
pub fn build_balanced_kd<T: Scalar>(
    dimension: usize,
    points: Vec<T>,
    values: Vec<T>,
    fanout: Fanout,
    min_leaf: usize,
) -> Result<KdTree<T>> {
    if dimension == 0 || points.len() != values.len() * dimension {
        return Err(Error::DimensionMismatch {
            expected: values.len() * dimension.max(1),
            actual: points.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut tree = KdTree {
        dimension,
        order: (0..values.len()).collect(),
        points,
        values,
        nodes: Vec::new(),
        fanout,
    };
    if dimension == 1 {
        let (pts, vals) = (&tree.points, &tree.values);
        tree.order
            .sort_by(|&a, &b| pts[a].order(&pts[b]).then(vals[a].order(&vals[b])));
    }
    let n = tree.values.len();
    grow(&mut tree, Rect::unbounded(dimension), 0..n, None, 0, min_leaf.max(1));
    Ok(tree)
}

fn grow<T: Scalar>(
    tree: &mut KdTree<T>,
    rect: Rect<T>,
    range: Range<usize>,
    parent: Option<usize>,
    depth: usize,
    min_leaf: usize,
) -> usize {
    let id = tree.nodes.len();
    tree.nodes.push(KdNode {
        rect: rect.clone(),
        range: range.clone(),
        children: Vec::new(),
        parent,
        depth,
    });
    if range.len() < 2 * min_leaf || range.len() < 2 {
        return id;
    }
    let d = tree.dimension;
    let parts: Vec<(Rect<T>, Range<usize>)> = match tree.fanout {
        Fanout::Binary => (0..d)
            .map(|off| (depth + off) % d)
            .find_map(|dim| split_at_median(tree, &rect, range.clone(), dim))
            .map(|[a, b]| vec![a, b])
            .unwrap_or_default(),
        Fanout::Full => {
            let mut groups = vec![(rect.clone(), range.clone())];
            for dim in 0..d {
                groups = groups
                    .into_iter()
                    .flat_map(|(r, g)| match split_at_median(tree, &r, g.clone(), dim) {
                        Some([a, b]) => vec![a, b],
                        None => vec![(r, g)],
                    })
                    .collect();
            }
            if groups.len() < 2 {
                Vec::new()
            } else {
                groups
            }
        }
    };
    for (r, g) in parts {
        let child = grow(tree, r, g, Some(id), depth + 1, min_leaf);
        tree.nodes[id].children.push(child);
    }
    id
}

/// Sorts `range` of the order along `dim` and splits near its middle at a
/// position between distinct coordinates (nearest to the middle, lower on
/// ties).
fn split_at_median<T: Scalar>(
    tree: &mut KdTree<T>,
    rect: &Rect<T>,
    range: Range<usize>,
    dim: usize,
) -> Option<[(Rect<T>, Range<usize>); 2]> {
    let d = tree.dimension;
    let (pts, vals) = (&tree.points, &tree.values);
    let slice = &mut tree.order[range.clone()];
    slice.sort_by(|&a, &b| {
        pts[a * d + dim]
            .order(&pts[b * d + dim])
            .then(vals[a].order(&vals[b]))
            .then(a.cmp(&b))
    });
    let coord = |i: usize| pts[slice[i] * d + dim];
    let n = slice.len();
    let mid = n.div_ceil(2);
    let separable = |s: usize| coord(s - 1) < coord(s);
    let s = (0..n)
        .flat_map(|off| [mid.checked_sub(off), mid.checked_add(off)])
        .flatten()
        .find(|&s| s >= 1 && s < n && separable(s))?;
    let cut = midpoint_cut(coord(s - 1), coord(s));
    let left = rect.with_bounds(dim, rect.lo()[dim], cut).ok()?;
    let right = rect.with_bounds(dim, cut.next_up(), rect.hi()[dim]).ok()?;
    Some([
        (left, range.start..range.start + s),
        (right, range.start + s..range.end),
    ])
}

/// Estimated worst query of a node and the sample points it selects.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafVariance<T> {
    pub variance: T,
    pub cell: Option<Vec<usize>>,
}

impl<T: Scalar> LeafVariance<T> {
    fn none() -> Self {
        Self {
            variance: T::zero(),
            cell: None,
        }
    }
}

/// Approximate per-node oracle. SUM/COUNT use a median split along the
/// node's next dimension; AVG scores cells of exactly `D` points. With one
/// dimension both defer to the one-dimensional fast oracles.
pub struct LeafOracle<'a, T> {
    tree: &'a KdTree<T>,
    kind: AggregateKind,
    d: usize,
    line: Option<(PrefixSums<T>, AvgWindowIndex<T>)>,
}

impl<'a, T: Scalar> LeafOracle<'a, T> {
    pub fn new(tree: &'a KdTree<T>, kind: AggregateKind, d: usize) -> Self {
        let line = (tree.dimension == 1).then(|| {
            let prefix = PrefixSums::new(tree.order.iter().map(|&i| tree.values[i]).collect());
            let index = build_avg_window_index(&prefix, d);
            (prefix, index)
        });
        Self {
            tree,
            kind,
            d: d.max(1),
            line,
        }
    }

    pub fn leaf_max_variance(&self, id: usize) -> LeafVariance<T> {
        let node = &self.tree.nodes[id];
        if let Some((prefix, index)) = &self.line {
            let w = match self.kind {
                AggregateKind::Avg => max_var_fast_avg(index, prefix, node.range.clone()),
                kind => max_var_fast_sum(kind, prefix, node.range.clone()),
            };
            return LeafVariance {
                variance: w.variance,
                cell: w.window.map(|r| self.tree.order[r].to_vec()),
            };
        }
        let members = self.tree.members(id);
        match self.kind {
            AggregateKind::Avg => self.avg_cells(members, node.depth),
            kind => self.median_halves(kind, members, node.depth),
        }
    }

    fn sorted_along(&self, members: &[usize], dim: usize) -> Vec<usize> {
        let t = self.tree;
        let mut out = members.to_vec();
        out.sort_by(|&a, &b| {
            t.point(a)[dim]
                .order(&t.point(b)[dim])
                .then(t.values[a].order(&t.values[b]))
                .then(a.cmp(&b))
        });
        out
    }

    fn moments(&self, idx: &[usize]) -> (T, T) {
        match self.kind {
            AggregateKind::Count => {
                let c = T::from_count(idx.len());
                (c, c)
            }
            _ => idx.iter().fold((T::zero(), T::zero()), |(s, s2), &i| {
                let t = self.tree.values[i];
                (s + t, s2 + t * t)
            }),
        }
    }

    fn median_halves(&self, kind: AggregateKind, members: &[usize], depth: usize) -> LeafVariance<T> {
        let n = members.len();
        if n == 0 {
            return LeafVariance::none();
        }
        let sorted = self.sorted_along(members, depth % self.tree.dimension);
        let mid = if n == 1 { 1 } else { n.div_ceil(2) };
        let mut best = LeafVariance::none();
        for half in [&sorted[..mid], &sorted[mid..]] {
            if half.is_empty() {
                continue;
            }
            let (s, s2) = self.moments(half);
            let v = window_variance(kind, n, half.len(), s, s2);
            if best.cell.is_none() || v > best.variance {
                best = LeafVariance {
                    variance: v,
                    cell: Some(half.to_vec()),
                };
            }
        }
        best
    }

    fn avg_cells(&self, members: &[usize], depth: usize) -> LeafVariance<T> {
        let n = members.len();
        let d = self.d;
        if n < 2 * d {
            return LeafVariance::none();
        }
        let mut cells = Vec::new();
        self.collect_cells(members.to_vec(), depth, &mut cells);
        let mut best: Option<(T, Vec<usize>)> = None;
        for cell in cells {
            let (_, s2) = self.moments(&cell);
            if best.as_ref().is_none_or(|(b, _)| s2 > *b) {
                best = Some((s2, cell));
            }
        }
        let (_, cell) = best.expect("at least one cell");
        let (s, s2) = self.moments(&cell);
        LeafVariance {
            variance: window_variance(AggregateKind::Avg, n, d, s, s2),
            cell: Some(cell),
        }
    }

    /// Median splits down to groups of `D..2D` points; each group yields its
    /// first and last `D` points along the next dimension.
    fn collect_cells(&self, group: Vec<usize>, depth: usize, out: &mut Vec<Vec<usize>>) {
        let d = self.d;
        let sorted = self.sorted_along(&group, depth % self.tree.dimension);
        if sorted.len() < 2 * d {
            out.push(sorted[..d].to_vec());
            if sorted.len() > d {
                out.push(sorted[sorted.len() - d..].to_vec());
            }
            return;
        }
        let mid = sorted.len().div_ceil(2);
        let right = sorted[mid..].to_vec();
        let mut left = sorted;
        left.truncate(mid);
        self.collect_cells(left, depth + 1, out);
        self.collect_cells(right, depth + 1, out);
    }
}

/// Exact maximum over every axis-aligned box selecting at least `d` of the
/// given sample points. Cost grows as `n^(2 dim)`; meant for small inputs.
pub fn exhaustive_rect_variance<T: Scalar>(
    tree: &KdTree<T>,
    members: &[usize],
    kind: AggregateKind,
    d: usize,
) -> T {
    let n = members.len();
    let d = d.max(1);
    if n < d {
        return T::zero();
    }
    let mut best = T::zero();
    rect_search(tree, members.to_vec(), 0, n, kind, d, &mut best);
    best
}

fn rect_search<T: Scalar>(
    tree: &KdTree<T>,
    points: Vec<usize>,
    dim: usize,
    n: usize,
    kind: AggregateKind,
    d: usize,
    best: &mut T,
) {
    if points.len() < d {
        return;
    }
    let coord = |i: usize| tree.point(i)[dim];
    let mut sorted = points;
    sorted.sort_by(|&a, &b| coord(a).order(&coord(b)));
    // group boundaries between distinct coordinates
    let mut starts = vec![0];
    starts.extend((1..sorted.len()).filter(|&i| coord(sorted[i - 1]) < coord(sorted[i])));
    let mut ends: Vec<usize> = starts[1..].to_vec();
    ends.push(sorted.len());
    let last = dim + 1 == tree.dimension;
    let value = |i: usize| match kind {
        AggregateKind::Count => T::one(),
        _ => tree.values[i],
    };
    let (mut y, mut z) = (vec![T::zero()], vec![T::zero()]);
    if last {
        for &i in &sorted {
            let t = value(i);
            y.push(*y.last().unwrap() + t);
            z.push(*z.last().unwrap() + t * t);
        }
    }
    for &a in &starts {
        for &b in ends.iter().filter(|&&e| e > a) {
            if b - a < d {
                continue;
            }
            if last {
                let v = window_variance(kind, n, b - a, y[b] - y[a], z[b] - z[a]);
                if v > *best {
                    *best = v;
                }
            } else {
                rect_search(tree, sorted[a..b].to_vec(), dim + 1, n, kind, d, best);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem<T> {
    variance: T,
    id: usize,
}

impl<T: Scalar> Eq for HeapItem<T> {}

impl<T: Scalar> Ord for HeapItem<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.variance
            .order(&other.variance)
            .then(other.id.cmp(&self.id))
    }
}

impl<T: Scalar> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Frontier of U chosen by greedy expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion<T> {
    /// Node ids of the chosen leaves in preorder.
    pub leaves: Vec<usize>,
    pub leaf_variance: Vec<T>,
    /// Expanded (internal) nodes in expansion order.
    pub expanded: Vec<usize>,
    /// Largest leaf variance after each expansion, starting with the root.
    pub history: Vec<T>,
}

impl<T: Scalar> Expansion<T> {
    pub fn max_variance(&self) -> T {
        self.leaf_variance.iter().copied().fold(T::zero(), Scalar::max_of)
    }
}

/// Starting from the root, repeatedly replaces the leaf with the largest
/// oracle value by its children in U, until the next expansion would exceed
/// `k` leaves or no leaf can be expanded. A leaf at least `depth_gap_limit`
/// levels shallower than the one about to be expanded goes first.
pub fn greedy_expand<T: Scalar>(
    tree: &KdTree<T>,
    k: usize,
    depth_gap_limit: usize,
    oracle: impl Fn(usize) -> T,
) -> Expansion<T> {
    let nodes = tree.nodes();
    let mut variance: Vec<Option<T>> = vec![None; nodes.len()];
    let mut score = |id: usize| *variance[id].get_or_insert_with(|| oracle(id));
    let mut leaf = vec![false; nodes.len()];
    let mut heap = BinaryHeap::new();
    let mut leaf_count = 1;
    let mut expanded = Vec::new();
    leaf[0] = true;
    let root = score(0);
    heap.push(HeapItem {
        variance: root,
        id: 0,
    });
    let mut history = vec![root];

    let mut expand = |id: usize,
                      leaf: &mut Vec<bool>,
                      heap: &mut BinaryHeap<HeapItem<T>>,
                      leaf_count: &mut usize,
                      score: &mut dyn FnMut(usize) -> T|
     -> bool {
        let extra = nodes[id].children.len() - 1;
        if *leaf_count + extra > k {
            return false;
        }
        leaf[id] = false;
        expanded.push(id);
        *leaf_count += extra;
        for &c in &nodes[id].children {
            leaf[c] = true;
            heap.push(HeapItem {
                variance: score(c),
                id: c,
            });
        }
        true
    };

    'outer: while let Some(top) = heap.pop() {
        if !leaf[top.id] || nodes[top.id].is_leaf() {
            continue;
        }
        // shallow expandable leaves first
        loop {
            let shallow = (0..nodes.len()).find(|&v| {
                leaf[v]
                    && v != top.id
                    && !nodes[v].is_leaf()
                    && nodes[top.id].depth >= nodes[v].depth.saturating_add(depth_gap_limit)
            });
            let Some(v) = shallow else { break };
            if !expand(v, &mut leaf, &mut heap, &mut leaf_count, &mut score) {
                break 'outer;
            }
        }
        if !expand(top.id, &mut leaf, &mut heap, &mut leaf_count, &mut score) {
            break;
        }
        let current = (0..nodes.len())
            .filter(|&v| leaf[v])
            .map(&mut score)
            .fold(T::zero(), Scalar::max_of);
        history.push(current);
    }

    let leaves: Vec<usize> = (0..nodes.len()).filter(|&v| leaf[v]).collect();
    let leaf_variance = leaves.iter().map(|&v| score(v)).collect();
    Expansion {
        leaves,
        leaf_variance,
        expanded,
        history,
    }
}

/// Partition-tree layout of an expansion: expanded nodes become internal
/// nodes with their U children.
pub fn to_layout<T: Scalar>(tree: &KdTree<T>, expansion: &Expansion<T>) -> Layout<T> {
    let mut internal = vec![false; tree.nodes().len()];
    for &e in &expansion.expanded {
        internal[e] = true;
    }
    fn walk<T: Scalar>(tree: &KdTree<T>, internal: &[bool], id: usize) -> Layout<T> {
        let node = &tree.nodes()[id];
        if !internal[id] {
            return Layout::leaf(node.rect.clone());
        }
        Layout {
            rect: node.rect.clone(),
            children: node.children.iter().map(|&c| walk(tree, internal, c)).collect(),
        }
    }
    walk(tree, &internal, 0)
}

/// Result of a k-d optimization run.
#[derive(Debug, Clone)]
pub struct KdOptimized<T> {
    pub layout: Layout<T>,
    pub tree: KdTree<T>,
    pub expansion: Expansion<T>,
}

/// Samples `m` tuples, builds U, expands greedily with the approximate
/// oracle and returns the partition-tree layout.
pub fn optimize<T: Scalar>(data: &Dataset<T>, cfg: &KdConfig) -> Result<KdOptimized<T>> {
    let dim = data.dimension();
    cfg.validate(dim)?;
    let m = cfg.effective_m(data.len());
    if m < cfg.fanout_width(dim) {
        return Err(Error::Config(format!("m = {m} is below the fanout")));
    }
    let rows: Vec<usize> = if m == data.len() {
        (0..m).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        index::sample(&mut rng, data.len(), m).into_vec()
    };
    let mut points = Vec::with_capacity(m * dim);
    let mut values = Vec::with_capacity(m);
    for &r in &rows {
        points.extend_from_slice(data.point(r));
        values.push(data.value(r));
    }
    let tree = build_balanced_kd(dim, points, values, cfg.fanout, cfg.min_leaf(m))?;
    let oracle = LeafOracle::new(&tree, cfg.objective, cfg.delta_count(m));
    let expansion = greedy_expand(&tree, cfg.k, cfg.depth_gap_limit, |id| {
        oracle.leaf_max_variance(id).variance
    });
    let layout = to_layout(&tree, &expansion);
    Ok(KdOptimized {
        layout,
        tree,
        expansion,
    })
}
