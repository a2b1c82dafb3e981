// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

#![allow(dead_code)]

use pass_core::model::{Dataset, Rect, Tuple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer-valued coordinates and values, so sums are exact in f64.
pub fn integer_dataset(seed: u64, n: usize, d: usize, coord_range: i64, value_lo: i64, value_hi: i64) -> Dataset<f64> {
    let mut r = rng(seed);
    let tuples = (0..n)
        .map(|_| {
            let p = (0..d).map(|_| r.random_range(0..coord_range) as f64).collect();
            Tuple::new(p, r.random_range(value_lo..=value_hi) as f64)
        })
        .collect();
    Dataset::new(d, tuples).unwrap()
}

/// Random box with integer-ish endpoints drawn around the coordinate range.
pub fn random_rect(r: &mut ChaCha8Rng, d: usize, coord_range: i64) -> Rect<f64> {
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for _ in 0..d {
        let a = r.random_range(-2..coord_range + 2) as f64 + if r.random_bool(0.5) { 0.5 } else { 0.0 };
        let b = r.random_range(-2..coord_range + 2) as f64;
        lo.push(a.min(b));
        hi.push(a.max(b));
    }
    Rect::new(lo, hi).unwrap()
}

pub fn random_values(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // mixture: mostly small, some large spikes, some zeros
    (0..n)
        .map(|_| match r.random_range(0..4) {
            0 => 0.0,
            1 => r.random_range(0.0..1.0),
            2 => r.random_range(0.0..10.0),
            _ => r.random_range(50.0..200.0),
        })
        .collect()
}
