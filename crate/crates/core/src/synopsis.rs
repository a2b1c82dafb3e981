// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! The partition tree: exact aggregates at every node, a stratified sample at
//! every leaf, minimal-coverage-frontier traversal and the query pipeline.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    combine_strata, hard_bounds, stratum_estimate, Estimate, EstimatorConfig, StratumEstimate,
    StratumSample,
};
use crate::model::{classify_unchecked, AggregateKind, Dataset, Overlap, Query, Rect};
use crate::scalar::Scalar;

/// SUM, COUNT, MIN and MAX of one partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateSummary<T> {
    pub sum: T,
    pub count: usize,
    pub min: T,
    pub max: T,
}

impl<T: Scalar> AggregateSummary<T> {
    pub fn of_values<I: IntoIterator<Item = T>>(values: I) -> Option<Self> {
        values.into_iter().fold(None, |acc: Option<Self>, v| {
            Some(match acc {
                None => Self {
                    sum: v,
                    count: 1,
                    min: v,
                    max: v,
                },
                Some(s) => Self {
                    sum: s.sum + v,
                    count: s.count + 1,
                    min: s.min.min_of(v),
                    max: s.max.max_of(v),
                },
            })
        })
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            sum: self.sum + other.sum,
            count: self.count + other.count,
            min: self.min.min_of(other.min),
            max: self.max.max_of(other.max),
        }
    }

    pub fn average(&self) -> T {
        self.sum / T::from_count(self.count)
    }

    /// All values identical.
    pub fn is_constant(&self) -> bool {
        self.min == self.max
    }
}

/// Shape of a partition tree before any data is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout<T> {
    pub rect: Rect<T>,
    pub children: Vec<Layout<T>>,
}

impl<T: Scalar> Layout<T> {
    pub fn leaf(rect: Rect<T>) -> Self {
        Self {
            rect,
            children: Vec::new(),
        }
    }

    /// Balanced `fanout`-ary tree over `leaves` in the given order. Internal
    /// boxes are the bounding boxes of their children.
    pub fn balanced(leaves: Vec<Rect<T>>, fanout: usize) -> Result<Self> {
        if fanout < 2 {
            return Err(Error::Config("fanout must be at least 2".into()));
        }
        if leaves.is_empty() {
            return Err(Error::Build("no leaves".into()));
        }
        let d = leaves[0].dimension();
        if let Some(r) = leaves.iter().find(|r| r.dimension() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: r.dimension(),
            });
        }
        let mut leaves: Vec<Option<Rect<T>>> = leaves.into_iter().map(Some).collect();
        Ok(Self::balanced_range(&mut leaves, fanout))
    }

    fn balanced_range(leaves: &mut [Option<Rect<T>>], fanout: usize) -> Self {
        if leaves.len() == 1 {
            return Self::leaf(leaves[0].take().expect("leaf consumed once"));
        }
        let groups = fanout.min(leaves.len());
        let base = leaves.len() / groups;
        let extra = leaves.len() % groups;
        let mut children = Vec::with_capacity(groups);
        let mut start = 0;
        for g in 0..groups {
            let len = base + usize::from(g < extra);
            children.push(Self::balanced_range(&mut leaves[start..start + len], fanout));
            start += len;
        }
        let rect = bounding_box(children.iter().map(|c| &c.rect));
        Self { rect, children }
    }

    pub fn leaf_count(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.iter().map(Layout::leaf_count).sum()
        }
    }
}

fn bounding_box<'a, T: Scalar>(mut rects: impl Iterator<Item = &'a Rect<T>>) -> Rect<T> {
    let first = rects.next().expect("at least one rect");
    let (mut lo, mut hi) = (first.lo().to_vec(), first.hi().to_vec());
    for r in rects {
        for j in 0..lo.len() {
            lo[j] = lo[j].min_of(r.lo()[j]);
            hi[j] = hi[j].max_of(r.hi()[j]);
        }
    }
    Rect::new(lo, hi).expect("bounding box of valid rects")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionNode<T> {
    pub rect: Rect<T>,
    pub summary: AggregateSummary<T>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub sample: Option<StratumSample<T>>,
    pub depth: usize,
    /// Range of this node's tuples in leaf order.
    pub span: Range<usize>,
}

impl<T> PartitionNode<T> {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// How the leaf partitioning was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildMetadata {
    pub method: String,
    pub delta: f64,
    pub optimization_samples: usize,
    pub seed: u64,
    pub sample_budget: usize,
}

/// Nodes returned by the minimal coverage frontier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Frontier {
    /// Nodes entirely inside the query.
    pub covered: Vec<usize>,
    /// Leaves overlapping the query boundary.
    pub partial: Vec<usize>,
    /// Partially overlapped constant-valued nodes (AVG only). Their value is
    /// exact and adds no variance; only their weight comes from samples.
    pub constant: Vec<usize>,
    pub visited: usize,
}

/// The synopsis: an immutable partition tree stored in preorder (root at 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Synopsis<T> {
    pub(crate) nodes: Vec<PartitionNode<T>>,
    pub(crate) leaves: Vec<usize>,
    pub(crate) dimension: usize,
    pub(crate) dataset_size: usize,
    pub(crate) estimator: EstimatorConfig,
    pub(crate) value_shift: T,
    pub(crate) metadata: BuildMetadata,
}

/// splitmix64 step, used to derive independent per-leaf seeds.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<T: Scalar> Synopsis<T> {
    /// Balanced tree of the given fanout over ordered leaf boxes. A tuple
    /// lying in several boxes belongs to the earliest one.
    pub fn build(
        data: &Dataset<T>,
        leaf_rects: Vec<Rect<T>>,
        sample_budget: usize,
        fanout: usize,
        cfg: EstimatorConfig,
        seed: u64,
    ) -> Result<Self> {
        let layout = Layout::balanced(leaf_rects, fanout)?;
        Self::build_from_layout(data, &layout, sample_budget, cfg, seed)
    }

    /// Materializes an arbitrary layout: routes every tuple to its first
    /// containing leaf (preorder), aggregates bottom-up and samples leaves.
    pub fn build_from_layout(
        data: &Dataset<T>,
        layout: &Layout<T>,
        sample_budget: usize,
        cfg: EstimatorConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if layout.rect.dimension() != data.dimension() {
            return Err(Error::DimensionMismatch {
                expected: data.dimension(),
                actual: layout.rect.dimension(),
            });
        }
        let leaf_count = layout.leaf_count();
        if sample_budget < leaf_count {
            return Err(Error::Config(format!(
                "sample budget {sample_budget} is smaller than the leaf count {leaf_count}"
            )));
        }

        // flatten to preorder
        let mut nodes: Vec<PartitionNode<T>> = Vec::new();
        let mut leaves = Vec::new();
        flatten(layout, None, 0, &mut nodes, &mut leaves);

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (row, (point, _)) in data.iter().enumerate() {
            let leaf = route(&nodes, 0, point).ok_or_else(|| {
                Error::Build(format!("tuple {row} is not covered by any leaf"))
            })?;
            members[leaf].push(row);
        }
        if let Some(&empty) = leaves.iter().find(|&&l| members[l].is_empty()) {
            return Err(Error::Build(format!(
                "leaf {} ({:?}..{:?}) holds no tuples",
                leaves.iter().position(|&l| l == empty).unwrap_or(0),
                nodes[empty].rect.lo(),
                nodes[empty].rect.hi()
            )));
        }

        let base = sample_budget / leaf_count;
        let extra = sample_budget % leaf_count;
        let mut offset = 0;
        for (i, &leaf) in leaves.iter().enumerate() {
            let rows = &members[leaf];
            let size = base + usize::from(i < extra);
            let sample = StratumSample::draw(data, rows, size, derive_seed(seed, i as u64))?;
            let node = &mut nodes[leaf];
            node.summary = AggregateSummary::of_values(rows.iter().map(|&r| data.value(r)))
                .expect("leaf is nonempty");
            node.sample = Some(sample);
            node.span = offset..offset + rows.len();
            offset += rows.len();
        }
        // preorder: children always follow their parent
        for id in (0..nodes.len()).rev() {
            if nodes[id].is_leaf() {
                continue;
            }
            let children = nodes[id].children.clone();
            let mut summary = nodes[children[0]].summary;
            for &c in &children[1..] {
                summary = summary.merge(&nodes[c].summary);
            }
            let start = nodes[children[0]].span.start;
            let end = nodes[*children.last().unwrap()].span.end;
            nodes[id].summary = summary;
            nodes[id].span = start..end;
        }

        let min_value = nodes[0].summary.min;
        Ok(Self {
            nodes,
            leaves,
            dimension: data.dimension(),
            dataset_size: data.len(),
            estimator: cfg,
            value_shift: (-min_value).max(T::zero()),
            metadata: BuildMetadata {
                seed,
                sample_budget,
                ..BuildMetadata::default()
            },
        })
    }

    pub fn with_metadata(mut self, metadata: BuildMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn metadata(&self) -> &BuildMetadata {
        &self.metadata
    }

    pub fn nodes(&self) -> &[PartitionNode<T>] {
        &self.nodes
    }

    pub fn root(&self) -> &PartitionNode<T> {
        &self.nodes[0]
    }

    /// Node ids of the leaves in order.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn dataset_size(&self) -> usize {
        self.dataset_size
    }

    pub fn estimator_config(&self) -> &EstimatorConfig {
        &self.estimator
    }

    /// Offset that would make every aggregated value nonnegative.
    pub fn value_shift(&self) -> T {
        self.value_shift
    }

    /// Number of levels (a single leaf has height 1).
    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0) + 1
    }

    pub fn total_sample_size(&self) -> usize {
        self.leaves
            .iter()
            .filter_map(|&l| self.nodes[l].sample.as_ref())
            .map(StratumSample::len)
            .sum()
    }

    /// Minimal coverage frontier of `rect`. For AVG, partially overlapped
    /// constant-valued nodes are returned in `constant` instead of descending.
    pub fn mcf(&self, rect: &Rect<T>, kind: AggregateKind) -> Result<Frontier> {
        if rect.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: rect.dimension(),
            });
        }
        let mut out = Frontier::default();
        self.mcf_visit(0, rect, kind == AggregateKind::Avg, &mut out);
        Ok(out)
    }

    fn mcf_visit(&self, id: usize, rect: &Rect<T>, zero_variance_rule: bool, out: &mut Frontier) {
        out.visited += 1;
        let node = &self.nodes[id];
        match classify_unchecked(&node.rect, rect) {
            Overlap::Contained => out.covered.push(id),
            Overlap::Disjoint => {}
            Overlap::Partial if zero_variance_rule && node.summary.is_constant() => {
                out.constant.push(id)
            }
            Overlap::Partial if node.is_leaf() => out.partial.push(id),
            Overlap::Partial => {
                for &c in &node.children {
                    self.mcf_visit(c, rect, zero_variance_rule, out);
                }
            }
        }
    }

    /// Answers `query` from exact covered aggregates plus stratified samples
    /// of the partially overlapped leaves.
    ///
    /// The point estimate is clamped into the deterministic bounds.
    pub fn answer(&self, query: &Query<T>) -> Result<Estimate<T>> {
        query.check_dimension(self.dimension)?;
        let kind = query.kind;
        let frontier = self.mcf(&query.rect, kind)?;
        let covered: Vec<AggregateSummary<T>> = frontier
            .covered
            .iter()
            .map(|&i| self.nodes[i].summary)
            .collect();
        // constant nodes may hold no matching tuple, so the bounds treat them
        // as partial
        let uncertain: Vec<AggregateSummary<T>> = frontier
            .partial
            .iter()
            .chain(&frontier.constant)
            .map(|&i| self.nodes[i].summary)
            .collect();
        let (lb, ub) = hard_bounds(kind, &covered, &uncertain);
        let bounds = Some((lb.as_f64(), ub.as_f64()));

        let partial_population: usize = frontier
            .partial
            .iter()
            .map(|&i| self.nodes[i].summary.count)
            .sum();
        let mut sample_points_used = 0;
        let mut strata = Vec::with_capacity(covered.len() + frontier.partial.len());

        let value = match kind {
            AggregateKind::Min | AggregateKind::Max => {
                let mut best: Option<T> = None;
                let pick = |a: T, b: T| {
                    if kind == AggregateKind::Min {
                        a.min_of(b)
                    } else {
                        a.max_of(b)
                    }
                };
                for s in &covered {
                    let v = if kind == AggregateKind::Min { s.min } else { s.max };
                    best = Some(best.map_or(v, |b| pick(b, v)));
                }
                for &leaf in &frontier.partial {
                    let sample = self.leaf_sample(leaf)?;
                    sample_points_used += sample.len();
                    if let Ok(s) = stratum_estimate(sample, query, &self.estimator) {
                        best = Some(best.map_or(s.value, |b| pick(b, s.value)));
                    }
                }
                let v = best.ok_or(Error::NoMatchingSample { bounds })?;
                Estimate {
                    value: v,
                    ci_half_width: T::zero(),
                    lb,
                    ub,
                    sample_points_used,
                    partial_leaf_count: frontier.partial.len(),
                    skipped_population: self.dataset_size - partial_population,
                }
            }
            _ => {
                for s in &covered {
                    let v = match kind {
                        AggregateKind::Sum => s.sum,
                        AggregateKind::Count => T::from_count(s.count),
                        _ => s.average(),
                    };
                    strata.push(StratumEstimate::exact(v, s.count));
                }
                for &c in &frontier.constant {
                    let value = self.nodes[c].summary.min;
                    let mut stack = vec![c];
                    while let Some(id) = stack.pop() {
                        let node = &self.nodes[id];
                        if !node.is_leaf() {
                            stack.extend(&node.children);
                            continue;
                        }
                        match classify_unchecked(&node.rect, &query.rect) {
                            Overlap::Disjoint => {}
                            Overlap::Contained => {
                                strata.push(StratumEstimate::exact(value, node.summary.count))
                            }
                            Overlap::Partial => {
                                // exact value, weight from the matching share of the sample
                                let sample = self.leaf_sample(id)?;
                                sample_points_used += sample.len();
                                strata.push(StratumEstimate {
                                    value,
                                    variance: T::zero(),
                                    population: sample.population(),
                                    sample_size: sample.len(),
                                    matched: sample.matching(&query.rect),
                                    covered: false,
                                });
                            }
                        }
                    }
                }
                for &leaf in &frontier.partial {
                    let sample = self.leaf_sample(leaf)?;
                    sample_points_used += sample.len();
                    let est = match stratum_estimate(sample, query, &self.estimator) {
                        Ok(e) => e,
                        Err(Error::NoMatchingSample { .. }) => {
                            StratumEstimate::no_match(sample.population(), sample.len())
                        }
                        Err(e) => return Err(e),
                    };
                    strata.push(est);
                }
                if strata.is_empty() {
                    return match kind {
                        AggregateKind::Avg => Err(Error::NoMatchingSample { bounds }),
                        _ => Ok(Estimate {
                            value: T::zero(),
                            ci_half_width: T::zero(),
                            lb,
                            ub,
                            sample_points_used,
                            partial_leaf_count: 0,
                            skipped_population: self.dataset_size,
                        }),
                    };
                }
                let combined = combine_strata(kind, &strata, &self.estimator).map_err(|e| match e {
                    Error::NoMatchingSample { .. } => Error::NoMatchingSample { bounds },
                    other => other,
                })?;
                Estimate {
                    lb,
                    ub,
                    sample_points_used,
                    partial_leaf_count: frontier.partial.len(),
                    skipped_population: self.dataset_size - partial_population,
                    ..combined
                }
            }
        };
        Ok(Estimate {
            value: clamp(value.value, lb, ub),
            ..value
        })
    }

    fn leaf_sample(&self, leaf: usize) -> Result<&StratumSample<T>> {
        self.nodes[leaf]
            .sample
            .as_ref()
            .ok_or_else(|| Error::Build(format!("leaf {leaf} has no sample")))
    }

    /// Verifies the structural invariants against the source dataset.
    pub fn check_invariants(&self, data: &Dataset<T>) -> Result<()> {
        let fail = |msg: String| Err(Error::Build(msg));
        if data.len() != self.dataset_size || self.nodes[0].summary.count != data.len() {
            return fail("root does not account for every tuple".into());
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if node.summary.count == 0 || node.span.len() != node.summary.count {
                return fail(format!("node {id}: span and count disagree"));
            }
            if node.is_leaf() {
                let s = match &node.sample {
                    Some(s) => s,
                    None => return fail(format!("leaf {id} has no sample")),
                };
                if s.population() != node.summary.count {
                    return fail(format!("leaf {id}: sample population mismatch"));
                }
                if s.iter().any(|(p, _)| !node.rect.contains_unchecked(p)) {
                    return fail(format!("leaf {id}: sample outside leaf box"));
                }
                continue;
            }
            let kids: Vec<&PartitionNode<T>> = node.children.iter().map(|&c| &self.nodes[c]).collect();
            let count: usize = kids.iter().map(|k| k.summary.count).sum();
            let sum = kids
                .iter()
                .skip(1)
                .fold(kids[0].summary.sum, |acc, k| acc + k.summary.sum);
            let min = kids.iter().map(|k| k.summary.min).fold(T::infinity(), Scalar::min_of);
            let max = kids.iter().map(|k| k.summary.max).fold(T::neg_infinity(), Scalar::max_of);
            if count != node.summary.count || sum != node.summary.sum {
                return fail(format!("node {id}: children do not add up"));
            }
            if min != node.summary.min || max != node.summary.max {
                return fail(format!("node {id}: extrema differ from children"));
            }
            let mut cursor = node.span.start;
            for (k, &c) in kids.iter().zip(&node.children) {
                if !k.rect.is_subset_of(&node.rect) {
                    return fail(format!("node {c} is not inside its parent {id}"));
                }
                if k.span.start != cursor {
                    return fail(format!("node {id}: children tuple sets overlap or leave gaps"));
                }
                cursor = k.span.end;
            }
            if cursor != node.span.end {
                return fail(format!("node {id}: children do not cover the parent"));
            }
        }
        // leaf membership agrees with routing
        let mut counts = vec![0usize; self.nodes.len()];
        for (point, _) in data.iter() {
            match route(&self.nodes, 0, point) {
                Some(l) => counts[l] += 1,
                None => return fail("tuple routes to no leaf".into()),
            }
        }
        for &l in &self.leaves {
            if counts[l] != self.nodes[l].summary.count {
                return fail(format!("leaf {l}: routed population differs"));
            }
        }
        Ok(())
    }

    /// Leaf id a point belongs to.
    pub fn locate(&self, point: &[T]) -> Option<usize> {
        if point.len() != self.dimension {
            return None;
        }
        route(&self.nodes, 0, point)
    }
}

fn clamp<T: Scalar>(v: T, lb: T, ub: T) -> T {
    if v < lb {
        lb
    } else if v > ub {
        ub
    } else {
        v
    }
}

fn flatten<T: Scalar>(
    layout: &Layout<T>,
    parent: Option<usize>,
    depth: usize,
    nodes: &mut Vec<PartitionNode<T>>,
    leaves: &mut Vec<usize>,
) -> usize {
    let id = nodes.len();
    nodes.push(PartitionNode {
        rect: layout.rect.clone(),
        summary: AggregateSummary {
            sum: T::zero(),
            count: 0,
            min: T::infinity(),
            max: T::neg_infinity(),
        },
        parent,
        children: Vec::new(),
        sample: None,
        depth,
        span: 0..0,
    });
    if layout.children.is_empty() {
        leaves.push(id);
    }
    for child in &layout.children {
        let c = flatten(child, Some(id), depth + 1, nodes, leaves);
        nodes[id].children.push(c);
    }
    id
}

/// First leaf in preorder whose box and ancestors' boxes contain `point`.
pub(crate) fn route<T: Scalar>(nodes: &[PartitionNode<T>], id: usize, point: &[T]) -> Option<usize> {
    let node = &nodes[id];
    if !node.rect.contains_unchecked(point) {
        return None;
    }
    if node.is_leaf() {
        return Some(id);
    }
    node.children.iter().find_map(|&c| route(nodes, c, point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tuple;

    fn line_data(values: &[f64]) -> Dataset<f64> {
        let tuples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Tuple::new(vec![i as f64], v))
            .collect();
        Dataset::new(1, tuples).unwrap()
    }

    /// Leaves [.., 3], [4, 7], [8, 11], [12, ..] over integer coordinates.
    fn four_leaves() -> Vec<Rect<f64>> {
        vec![
            Rect::interval(f64::NEG_INFINITY, 3.0).unwrap(),
            Rect::interval(4.0, 7.0).unwrap(),
            Rect::interval(8.0, 11.0).unwrap(),
            Rect::interval(12.0, f64::INFINITY).unwrap(),
        ]
    }

    fn sixteen() -> Dataset<f64> {
        line_data(&(0..16).map(|i| (i % 5) as f64 + 1.0).collect::<Vec<_>>())
    }

    #[test]
    fn single_leaf_tree() {
        let data = line_data(&[1.0, 2.0, 3.0]);
        let s = Synopsis::build(&data, vec![Rect::unbounded(1)], 3, 2, EstimatorConfig::default(), 1).unwrap();
        assert_eq!(s.nodes().len(), 1);
        assert_eq!(s.height(), 1);
        assert_eq!(s.root().summary, AggregateSummary { sum: 6.0, count: 3, min: 1.0, max: 3.0 });
        s.check_invariants(&data).unwrap();
    }

    #[test]
    fn four_leaf_binary_tree() {
        let data = sixteen();
        let s = Synopsis::build(&data, four_leaves(), 8, 2, EstimatorConfig::default(), 3).unwrap();
        assert_eq!(s.nodes().len(), 7);
        assert_eq!(s.nodes().iter().filter(|n| !n.is_leaf()).count(), 3);
        assert_eq!(s.height(), 3);
        assert!(s.height() <= 2 + 1);
        let all = AggregateSummary::of_values(data.values().iter().copied()).unwrap();
        assert_eq!(s.root().summary, all);
        s.check_invariants(&data).unwrap();
    }

    #[test]
    fn full_sampling_when_budget_matches() {
        let data = line_data(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let leaves = vec![
            Rect::interval(f64::NEG_INFINITY, 1.5).unwrap(),
            Rect::interval(1.5f64.next_up(), 3.5).unwrap(),
            Rect::interval(3.5f64.next_up(), 5.5).unwrap(),
            Rect::interval(5.5f64.next_up(), f64::INFINITY).unwrap(),
        ];
        let s = Synopsis::build(&data, leaves, 8, 2, EstimatorConfig::default(), 0).unwrap();
        for &l in s.leaves() {
            let sample = s.nodes()[l].sample.as_ref().unwrap();
            assert_eq!(sample.len(), 2);
            assert_eq!(sample.population(), 2);
        }
        assert_eq!(s.total_sample_size(), 8);
    }

    #[test]
    fn remainder_goes_to_earliest_leaves() {
        let data = sixteen();
        let s = Synopsis::build(&data, four_leaves(), 10, 2, EstimatorConfig::default(), 0).unwrap();
        let sizes: Vec<usize> = s
            .leaves()
            .iter()
            .map(|&l| s.nodes()[l].sample.as_ref().unwrap().len())
            .collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
    }

    #[test]
    fn empty_leaf_is_rejected() {
        let data = line_data(&[1.0, 2.0]);
        let leaves = vec![
            Rect::interval(f64::NEG_INFINITY, 5.0).unwrap(),
            Rect::interval(5.0f64.next_up(), f64::INFINITY).unwrap(),
        ];
        let r = Synopsis::build(&data, leaves, 4, 2, EstimatorConfig::default(), 0);
        assert!(matches!(r, Err(Error::Build(_))));
    }

    #[test]
    fn uncovered_tuple_is_rejected() {
        let data = line_data(&[1.0, 2.0]);
        let r = Synopsis::build(&data, vec![Rect::interval(0.0, 0.5).unwrap()], 4, 2, EstimatorConfig::default(), 0);
        assert!(matches!(r, Err(Error::Build(_))));
    }

    #[test]
    fn budget_below_leaf_count_is_rejected() {
        let data = sixteen();
        assert!(Synopsis::build(&data, four_leaves(), 3, 2, EstimatorConfig::default(), 0).is_err());
    }

    #[test]
    fn mcf_examples() {
        let data = sixteen();
        let s = Synopsis::build(&data, four_leaves(), 8, 2, EstimatorConfig::default(), 0).unwrap();
        let leaf_ids = s.leaves().to_vec();

        let f = s.mcf(&s.root().rect.clone(), AggregateKind::Sum).unwrap();
        assert_eq!(f.covered, vec![0]);
        assert!(f.partial.is_empty());

        let f = s.mcf(&Rect::interval(4.0, 11.0).unwrap(), AggregateKind::Sum).unwrap();
        assert_eq!(f.covered, vec![leaf_ids[1], leaf_ids[2]]);
        assert!(f.partial.is_empty());

        let f = s.mcf(&Rect::interval(2.0, 6.0).unwrap(), AggregateKind::Sum).unwrap();
        assert!(f.covered.is_empty());
        assert_eq!(f.partial, vec![leaf_ids[0], leaf_ids[1]]);
    }

    #[test]
    fn aligned_query_is_exact() {
        let data = sixteen();
        let s = Synopsis::build(&data, four_leaves(), 8, 2, EstimatorConfig::default(), 0).unwrap();
        let rect = Rect::interval(4.0, 11.0).unwrap();
        let truth_sum: f64 = (4..12).map(|i| data.value(i)).sum();
        let e = s.answer(&Query::new(AggregateKind::Sum, rect.clone())).unwrap();
        assert_eq!(e.value, truth_sum);
        assert_eq!(e.ci_half_width, 0.0);
        assert_eq!((e.lb, e.ub), (truth_sum, truth_sum));
        assert_eq!(e.partial_leaf_count, 0);
        assert_eq!(e.skipped_population, 16);

        let e = s.answer(&Query::new(AggregateKind::Min, rect.clone())).unwrap();
        assert_eq!(e.value, 1.0);
        let e = s.answer(&Query::new(AggregateKind::Avg, rect)).unwrap();
        assert_eq!(e.value, truth_sum / 8.0);
    }

    #[test]
    fn count_over_everything() {
        let data = sixteen();
        let s = Synopsis::build(&data, four_leaves(), 8, 2, EstimatorConfig::default(), 0).unwrap();
        let e = s.answer(&Query::new(AggregateKind::Count, Rect::unbounded(1))).unwrap();
        assert_eq!(e.value, 16.0);
        assert_eq!(e.ci_half_width, 0.0);
    }

    #[test]
    fn zero_variance_rule_for_avg() {
        // second leaf is constant 9
        let mut vals: Vec<f64> = (0..16).map(|i| (i % 3) as f64).collect();
        for v in &mut vals[4..8] {
            *v = 9.0;
        }
        let data = line_data(&vals);
        let s = Synopsis::build(&data, four_leaves(), 8, 2, EstimatorConfig::default(), 0).unwrap();
        let constant_leaf = s.leaves()[1];
        let rect = Rect::interval(5.0, 11.0).unwrap();
        let f = s.mcf(&rect, AggregateKind::Avg).unwrap();
        assert_eq!(f.constant, vec![constant_leaf]);
        assert!(f.partial.is_empty());
        let e = s.answer(&Query::new(AggregateKind::Avg, rect.clone())).unwrap();
        assert_eq!(e.ci_half_width, 0.0);
        // for SUM the leaf is sampled as usual
        let f = s.mcf(&rect, AggregateKind::Sum).unwrap();
        assert_eq!(f.partial, vec![constant_leaf]);
    }

    #[test]
    fn avg_weights_become_exact_with_full_samples() {
        let mut vals: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64).collect();
        for v in &mut vals[4..8] {
            *v = 9.0;
        }
        let data = line_data(&vals);
        let s = Synopsis::build(&data, four_leaves(), 16, 2, EstimatorConfig::default(), 3).unwrap();
        for (lo, hi) in [(5.0, 11.0), (1.0, 6.0), (2.0, 13.0), (6.0, 6.0)] {
            let q = Query::new(AggregateKind::Avg, Rect::interval(lo, hi).unwrap());
            let e = s.answer(&q).unwrap();
            let t = crate::oracle::scan(&data, &q).unwrap();
            assert!((e.value - t).abs() < 1e-12, "[{lo}, {hi}]: {} vs {t}", e.value);
            assert_eq!(e.ci_half_width, 0.0);
        }
    }

    #[test]
    fn avg_without_matches_reports_bounds() {
        let data = sixteen();
        let s = Synopsis::build(&data, four_leaves(), 4, 2, EstimatorConfig::default(), 0).unwrap();
        // tiny window inside the first leaf, almost surely unsampled
        let rect = Rect::interval(0.2, 0.8).unwrap();
        match s.answer(&Query::new(AggregateKind::Avg, rect)) {
            Err(Error::NoMatchingSample { bounds: Some((lb, ub)) }) => assert!(lb <= ub),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mcf_rejects_wrong_dimension() {
        let data = sixteen();
        let s = Synopsis::build(&data, four_leaves(), 8, 2, EstimatorConfig::default(), 0).unwrap();
        assert!(s.mcf(&Rect::unbounded(2), AggregateKind::Sum).is_err());
        assert!(s.answer(&Query::new(AggregateKind::Sum, Rect::unbounded(2))).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }
}
