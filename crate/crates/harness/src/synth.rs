// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Synthetic datasets.

use pass_core::Dataset;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::Result;

/// Fraction of leading zero-valued tuples in [`adversarial`].
pub const ZERO_FRACTION: f64 = 0.875;
pub const TAIL_MEAN: f64 = 10.0;
pub const TAIL_STD: f64 = 3.0;

/// `n` tuples with distinct predicates `0, 1, ..., n - 1`; the first 87.5%
/// have value 0, the rest are normal.
pub fn adversarial(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(TAIL_MEAN, TAIL_STD).expect("valid normal");
    let zeros = (n as f64 * ZERO_FRACTION).round() as usize;
    let coords: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let values: Vec<f64> = (0..n)
        .map(|i| if i < zeros { 0.0 } else { normal.sample(&mut rng) })
        .collect();
    Ok(Dataset::from_columns(1, coords, values)?)
}

/// Integer coordinates in `[0, coord_range)` per dimension (so ties occur)
/// and a skewed mix of values of both signs.
pub fn mixed(n: usize, d: usize, coord_range: u32, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(20.0, 5.0).expect("valid normal");
    let exp = Exp::new(0.01).expect("valid exponential");
    let mut coords = Vec::with_capacity(n * d);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..d {
            coords.push(rng.random_range(0..coord_range) as f64);
        }
        let u: f64 = rng.random();
        values.push(if u < 0.6 {
            normal.sample(&mut rng)
        } else if u < 0.85 {
            rng.random_range(-50.0..50.0)
        } else {
            exp.sample(&mut rng)
        });
    }
    Ok(Dataset::from_columns(d, coords, values)?)
}

/// Writes `data` as CSV with columns `x0..x{d-1}` and `value`.
pub fn write_csv<W: std::io::Write>(data: &Dataset, out: W) -> Result<()> {
    let d = data.dimension();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    for (p, v) in data.iter() {
        let mut rec: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        rec.push(v.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
