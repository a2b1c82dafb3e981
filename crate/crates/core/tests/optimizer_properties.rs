// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

mod common;

use common::{random_values, rng};
use pass_core::estimators::optimizer_variance;
use pass_core::model::AggregateKind;
use pass_core::optimizer1d::{
    all_cuts, build_avg_window_index, dp_monotone, dp_naive, equal_count_partition,
    max_var_exhaustive, max_var_fast_avg, max_var_fast_sum, ExhaustiveOracle, FastOracle,
    Partitioning, PrefixSums, VarianceOracle,
};
use pass_core::optimizer_kd::{
    build_balanced_kd, exhaustive_rect_variance, greedy_expand, Fanout, KdTree, LeafOracle,
};
use pass_core::oracle::{all_partitionings, best_frontier, best_partitioning};
use proptest::prelude::*;
use rand::Rng;

fn values(seed: u64, n: usize) -> Vec<f64> {
    random_values(&mut rng(seed), n)
}

fn point_tree(seed: u64, n: usize, d: usize, fanout: Fanout, min_leaf: usize) -> KdTree<f64> {
    let mut r = rng(seed);
    let pts: Vec<f64> = (0..n * d).map(|_| r.random_range(0.0..1.0)).collect();
    build_balanced_kd(d, pts, random_values(&mut r, n), fanout, min_leaf).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn avg_variance_grows_with_partition(seed in any::<u64>(), n in 2usize..30) {
        let vals = values(seed, n);
        let mut r = rng(seed ^ 1);
        let y0 = r.random_range(0..n);
        let y1 = r.random_range(y0 + 1..=n);
        let x0 = r.random_range(y0..y1);
        let x1 = r.random_range(x0 + 1..=y1);
        let q0 = r.random_range(x0..x1);
        let q1 = r.random_range(q0 + 1..=x1);
        let inner = optimizer_variance(AggregateKind::Avg, &vals[x0..x1], q0 - x0..q1 - x0).unwrap();
        let outer = optimizer_variance(AggregateKind::Avg, &vals[y0..y1], q0 - y0..q1 - y0).unwrap();
        prop_assert!(inner <= outer * (1.0 + 1e-12) + 1e-12, "{inner} > {outer}");
    }

    #[test]
    fn dp_naive_is_optimal(seed in any::<u64>(), m in 2usize..16, k in 1usize..5, avg in any::<bool>()) {
        prop_assume!(k <= m);
        let kind = if avg { AggregateKind::Avg } else { AggregateKind::Sum };
        let pre = PrefixSums::new(values(seed, m));
        let d = 1 + (seed % 3) as usize;
        let oracle = ExhaustiveOracle { kind, prefix: &pre, d };
        let brute = best_partitioning(m, k, 1, &oracle).unwrap();
        let naive = dp_naive(m, k, 1, &all_cuts(m), &oracle).unwrap();
        prop_assert_eq!(naive.minimax, brute.minimax);
        let mono = dp_monotone(m, k, 1, &all_cuts(m), &oracle).unwrap();
        prop_assert_eq!(mono.minimax, naive.minimax);
    }

    #[test]
    fn monotone_matches_naive_on_larger_instances(seed in any::<u64>(), m in 10usize..40, k in 2usize..6) {
        let pre = PrefixSums::new(values(seed, m));
        for kind in [AggregateKind::Avg, AggregateKind::Sum, AggregateKind::Count] {
            let oracle = ExhaustiveOracle { kind, prefix: &pre, d: 2 };
            let naive = dp_naive(m, k, 1, &all_cuts(m), &oracle).unwrap();
            let mono = dp_monotone(m, k, 1, &all_cuts(m), &oracle).unwrap();
            prop_assert_eq!(mono.minimax, naive.minimax, "{}", kind);
        }
    }

    #[test]
    fn fast_oracles_are_within_a_quarter(seed in any::<u64>(), d in 1usize..6, extra in 0usize..200) {
        let n = 2 * d + extra;
        let pre = PrefixSums::new(values(seed, n));
        let sum_star = max_var_exhaustive(AggregateKind::Sum, &pre, 0..n, d);
        let sum_fast = max_var_fast_sum(AggregateKind::Sum, &pre, 0..n);
        prop_assert!(sum_fast.variance >= 0.25 * sum_star.variance);
        let avg_star = max_var_exhaustive(AggregateKind::Avg, &pre, 0..n, d);
        let index = build_avg_window_index(&pre, d);
        let avg_fast = max_var_fast_avg(&index, &pre, 0..n);
        prop_assert!(avg_fast.variance >= 0.25 * avg_star.variance);
        let w = avg_star.window.unwrap();
        prop_assert!(w.len() < 2 * d, "window {:?} with D = {}", w, d);
    }

    #[test]
    fn fast_dp_error_within_two_root_two(seed in any::<u64>(), m in 8usize..40, k in 2usize..5) {
        let pre = PrefixSums::new(values(seed, m));
        let exact = ExhaustiveOracle { kind: AggregateKind::Sum, prefix: &pre, d: 1 };
        let best = dp_naive(m, k, 1, &all_cuts(m), &exact).unwrap();
        let fast = dp_monotone(m, k, 1, &all_cuts(m), &FastOracle::new(AggregateKind::Sum, &pre, 1)).unwrap();
        let realized = Partitioning::from_cuts(fast.cuts, &exact).minimax;
        prop_assert!(realized.sqrt() <= 2.0 * 2f64.sqrt() * best.minimax.sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn equal_count_is_minimax_for_count(n in 1usize..31, k in 1usize..5) {
        prop_assume!(k <= n);
        let pre = PrefixSums::new(vec![0.0; n]);
        let oracle = ExhaustiveOracle { kind: AggregateKind::Count, prefix: &pre, d: 1 };
        let equal = Partitioning::from_cuts(equal_count_partition(n, k).unwrap(), &oracle);
        for cuts in all_partitionings(n, k, 1) {
            prop_assert!(equal.minimax <= Partitioning::from_cuts(cuts, &oracle).minimax);
        }
    }

    #[test]
    fn multi_bucket_error_within_root_two(seed in any::<u64>(), m in 6usize..24, k in 2usize..4) {
        let pre = PrefixSums::new(values(seed, m));
        let d = 2;
        for kind in [AggregateKind::Sum, AggregateKind::Count, AggregateKind::Avg] {
            let oracle = ExhaustiveOracle { kind, prefix: &pre, d };
            let Ok(part) = dp_naive(m, k, 2 * d, &all_cuts(m), &oracle) else { continue };
            let buckets: Vec<_> = part.buckets().collect();
            for g in 0..m {
                for w in g + 1..=m {
                    // per-bucket overlaps of the query [g, w); covered buckets are exact
                    let mut parts = Vec::new();
                    let mut meaningful = true;
                    for b in &buckets {
                        let lo = g.max(b.start);
                        let hi = w.min(b.end);
                        if lo >= hi {
                            continue;
                        }
                        if hi - lo < d {
                            meaningful = false;
                        }
                        parts.push((b.clone(), lo..hi));
                    }
                    if !meaningful {
                        continue;
                    }
                    let total: usize = parts.iter().map(|(_, q)| q.len()).sum();
                    let var: f64 = parts
                        .iter()
                        .filter(|(b, q)| b != q)
                        .map(|(b, q)| {
                            let v = pre.variance(kind, b.clone(), q.clone());
                            if kind == AggregateKind::Avg {
                                let wt = q.len() as f64 / total as f64;
                                wt * wt * v
                            } else {
                                v
                            }
                        })
                        .sum();
                    let factor = if kind == AggregateKind::Avg { 1.0 } else { 2.0 };
                    prop_assert!(var <= factor * part.minimax * (1.0 + 1e-9) + 1e-12, "{kind}: {var} vs {}", part.minimax);
                }
            }
        }
    }

    #[test]
    fn greedy_leaves_form_a_frontier(seed in any::<u64>(), n in 20usize..200, k in 2usize..20, d in 1usize..4, full in any::<bool>()) {
        let fanout = if full { Fanout::Full } else { Fanout::Binary };
        let t = point_tree(seed, n, d, fanout, 2);
        let width = if full { 1 << d } else { 2 };
        prop_assume!(k >= width);
        let oracle = LeafOracle::new(&t, AggregateKind::Sum, 2);
        let e = greedy_expand(&t, k, 2, |id| oracle.leaf_max_variance(id).variance);
        prop_assert!(e.leaves.len() <= k);
        let mut ranges: Vec<_> = e.leaves.iter().map(|&l| t.nodes()[l].range.clone()).collect();
        ranges.sort_by_key(|r| r.start);
        let mut cursor = 0;
        for r in ranges {
            prop_assert_eq!(r.start, cursor);
            cursor = r.end;
        }
        prop_assert_eq!(cursor, n);
        // depth gap among leaves that could still be expanded
        let max_depth = e.leaves.iter().map(|&l| t.nodes()[l].depth).max().unwrap();
        if let Some(min_open) = e.leaves.iter().filter(|&&l| !t.nodes()[l].is_leaf()).map(|&l| t.nodes()[l].depth).min() {
            prop_assert!(max_depth - min_open <= 2, "{} vs {}", max_depth, min_open);
        }
    }

    #[test]
    fn greedy_with_exact_oracle_is_optimal(seed in any::<u64>(), n in 4usize..12, k in 2usize..9, avg in any::<bool>()) {
        let kind = if avg { AggregateKind::Avg } else { AggregateKind::Sum };
        let t = point_tree(seed, n, 2, Fanout::Binary, 1);
        prop_assert!(t.nodes().len() <= 23);
        let exact = |id: usize| exhaustive_rect_variance(&t, t.members(id), kind, 1);
        let e = greedy_expand(&t, k, usize::MAX, exact);
        prop_assert_eq!(e.max_variance(), best_frontier(&t, k, exact));
        for h in e.history.windows(2) {
            prop_assert!(h[1] <= h[0]);
        }
    }

    #[test]
    fn greedy_with_fast_oracle_within_factor(seed in any::<u64>(), n in 8usize..40, k in 2usize..9) {
        let t = point_tree(seed, n, 2, Fanout::Binary, 1);
        let exact = |id: usize| exhaustive_rect_variance(&t, t.members(id), AggregateKind::Sum, 1);
        let oracle = LeafOracle::new(&t, AggregateKind::Sum, 1);
        let e = greedy_expand(&t, k, usize::MAX, |id| oracle.leaf_max_variance(id).variance);
        let realized = e.leaves.iter().map(|&l| exact(l)).fold(0.0, f64::max);
        let best = best_frontier(&t, k, exact);
        prop_assert!(realized <= 4.0 * best * (1.0 + 1e-12) + 1e-12, "{realized} vs {best}");
    }
}

#[test]
fn exact_oracle_table_agrees_with_direct_formula() {
    let vals = values(7, 15);
    let pre = PrefixSums::new(vals.clone());
    for kind in [AggregateKind::Sum, AggregateKind::Count, AggregateKind::Avg] {
        let oracle = ExhaustiveOracle { kind, prefix: &pre, d: 3 };
        for a in 0..15 {
            for b in a + 3..=15 {
                let got = oracle.max_variance(a..b).variance;
                let mut want = 0.0f64;
                for g in a..b {
                    for w in g + 3..=b {
                        want = want.max(optimizer_variance(kind, &vals[a..b], g - a..w - a).unwrap());
                    }
                }
                assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{kind} {a}..{b}");
            }
        }
    }
}
