// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Brute-force reference implementations used to check the fast paths:
//! full scans, cut enumeration and frontier enumeration.

use crate::model::{AggregateKind, Dataset, Query, Rect};
use crate::optimizer1d::{Partitioning, VarianceOracle};
use crate::optimizer_kd::KdTree;
use crate::scalar::Scalar;

/// Rows whose predicate lies in `rect`.
pub fn scan_rows<T: Scalar>(data: &Dataset<T>, rect: &Rect<T>) -> Vec<usize> {
    (0..data.len())
        .filter(|&i| rect.contains(data.point(i)).unwrap_or(false))
        .collect()
}

/// Exact answer by full scan; `None` for AVG/MIN/MAX over an empty match.
/// SUM and AVG add in row order.
pub fn scan<T: Scalar>(data: &Dataset<T>, query: &Query<T>) -> Option<T> {
    let rows = scan_rows(data, &query.rect);
    let values = rows.iter().map(|&i| data.value(i));
    match query.kind {
        AggregateKind::Count => Some(T::from_count(rows.len())),
        AggregateKind::Sum => Some(values.fold(T::zero(), |a, v| a + v)),
        AggregateKind::Avg if rows.is_empty() => None,
        AggregateKind::Avg => Some(values.fold(T::zero(), |a, v| a + v) / T::from_count(rows.len())),
        AggregateKind::Min => values.reduce(Scalar::min_of),
        AggregateKind::Max => values.reduce(Scalar::max_of),
    }
}

/// Every cut vector `0 = c_0 < ... < c_k = m` with buckets of at least
/// `min_size`.
pub fn all_partitionings(m: usize, k: usize, min_size: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, left: usize, min: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let start = *acc.last().unwrap();
        if left == 1 {
            if m - start >= min {
                acc.push(m);
                out.push(acc.clone());
                acc.pop();
            }
            return;
        }
        let mut c = start + min;
        while c + min * (left - 1) <= m {
            acc.push(c);
            rec(m, left - 1, min, acc, out);
            acc.pop();
            c += 1;
        }
    }
    let mut out = Vec::new();
    if k >= 1 && m >= k * min_size.max(1) {
        rec(m, k, min_size.max(1), &mut vec![0], &mut out);
    }
    out
}

/// Best minimax over every cut placement, first best on ties.
pub fn best_partitioning<T: Scalar>(
    m: usize,
    k: usize,
    min_size: usize,
    oracle: &impl VarianceOracle<T>,
) -> Option<Partitioning<T>> {
    all_partitionings(m, k, min_size)
        .into_iter()
        .map(|cuts| Partitioning::from_cuts(cuts, oracle))
        .fold(None, |best: Option<Partitioning<T>>, p| match best {
            Some(b) if b.minimax <= p.minimax => Some(b),
            _ => Some(p),
        })
}

/// Every frontier of U (set of nodes disjointly covering the root) with at
/// most `k` nodes, each in preorder.
pub fn all_frontiers<T: Scalar>(tree: &KdTree<T>, k: usize) -> Vec<Vec<usize>> {
    fn rec<T: Scalar>(tree: &KdTree<T>, id: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![id]];
        let children = &tree.nodes()[id].children;
        if children.is_empty() || children.len() > k {
            return out;
        }
        // product of the children's frontiers, pruned by size
        let mut partial: Vec<Vec<usize>> = vec![Vec::new()];
        for (i, &c) in children.iter().enumerate() {
            let remaining = children.len() - i - 1;
            let options = rec(tree, c, k - remaining);
            let mut next = Vec::new();
            for p in &partial {
                for o in &options {
                    if p.len() + o.len() + remaining <= k {
                        let mut v = p.clone();
                        v.extend_from_slice(o);
                        next.push(v);
                    }
                }
            }
            partial = next;
        }
        out.extend(partial);
        out
    }
    rec(tree, 0, k)
}

/// Smallest achievable maximum of `score` over frontiers of at most `k` nodes.
pub fn best_frontier<T: Scalar>(tree: &KdTree<T>, k: usize, score: impl Fn(usize) -> T) -> T {
    let scores: Vec<T> = (0..tree.nodes().len()).map(&score).collect();
    all_frontiers(tree, k)
        .iter()
        .map(|f| f.iter().map(|&i| scores[i]).fold(T::zero(), Scalar::max_of))
        .fold(T::infinity(), Scalar::min_of)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tuple;
    use crate::optimizer_kd::{build_balanced_kd, Fanout};

    #[test]
    fn scan_examples() {
        let data = Dataset::new(1, vec![Tuple::new(vec![1.0], 2.0), Tuple::new(vec![3.0], 5.0)]).unwrap();
        let all = Rect::unbounded(1);
        let none = Rect::interval(10.0, 11.0).unwrap();
        assert_eq!(scan(&data, &Query::new(AggregateKind::Count, all.clone())), Some(2.0));
        assert_eq!(scan(&data, &Query::new(AggregateKind::Sum, none.clone())), Some(0.0));
        assert_eq!(scan(&data, &Query::new(AggregateKind::Avg, none)), None);
        assert_eq!(scan(&data, &Query::new(AggregateKind::Max, all)), Some(5.0));
    }

    #[test]
    fn partitioning_counts() {
        // C(11, 2) placements of two interior cuts in 12 points
        assert_eq!(all_partitionings(12, 3, 1).len(), 55);
        assert_eq!(all_partitionings(6, 3, 2), vec![vec![0, 2, 4, 6]]);
        assert!(all_partitionings(5, 3, 2).is_empty());
    }

    #[test]
    fn frontier_counts() {
        let coords: Vec<f64> = (0..4).map(f64::from).collect();
        let t = build_balanced_kd(1, coords, vec![1.0; 4], Fanout::Binary, 1).unwrap();
        // perfect binary tree with 4 leaves: 1 + (1 + 1)(1 + 1) = 5 frontiers
        assert_eq!(all_frontiers(&t, 4).len(), 5);
        assert_eq!(all_frontiers(&t, 2).len(), 2);
        assert_eq!(all_frontiers(&t, 1), vec![vec![0]]);
    }
}
