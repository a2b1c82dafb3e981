// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Pieces of the `pass` command line that are worth testing directly.

use pass_core::{Error, Estimate, Query, Rect, Synopsis};
use serde_json::{json, Value};

use crate::error::{HarnessError, Result};

/// One `DIM:LO:HI` restriction; `inf` and `-inf` are accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeArg {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
}

impl std::str::FromStr for RangeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.splitn(3, ':').collect();
        let [dim, lo, hi] = parts[..] else {
            return Err(format!("expected DIM:LO:HI, got {s:?}"));
        };
        let dim = dim.trim().parse().map_err(|_| format!("bad dimension in {s:?}"))?;
        let num = |x: &str| -> std::result::Result<f64, String> {
            let v: f64 = x.trim().parse().map_err(|_| format!("bad bound {x:?} in {s:?}"))?;
            if v.is_nan() {
                return Err(format!("NaN bound in {s:?}"));
            }
            Ok(v)
        };
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        Ok(Self { dim, lo, hi })
    }
}

/// Box over `d` dimensions; unrestricted dimensions are unbounded.
pub fn query_rect(d: usize, ranges: &[RangeArg]) -> Result<Rect> {
    let mut rect = Rect::unbounded(d);
    let mut seen = vec![false; d];
    for r in ranges {
        if r.dim >= d {
            return Err(HarnessError::Config(format!(
                "range on dimension {} but the synopsis has d = {d}",
                r.dim
            )));
        }
        if std::mem::replace(&mut seen[r.dim], true) {
            return Err(HarnessError::Config(format!("dimension {} restricted twice", r.dim)));
        }
        rect = rect.with_bounds(r.dim, r.lo, r.hi)?;
    }
    Ok(rect)
}

fn number(x: f64) -> Value {
    if x == f64::INFINITY {
        json!("inf")
    } else if x == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(x)
    }
}

fn estimate_json(e: &Estimate, n: usize) -> Value {
    json!({
        "value": number(e.value),
        "ci": number(e.ci_half_width),
        "lb": number(e.lb),
        "ub": number(e.ub),
        "partial_leaves": e.partial_leaf_count,
        "skip_rate": e.skipped_population as f64 / n as f64,
    })
}

/// The `query` subcommand's output object. A query no sample matches keeps
/// its hard bounds and reports a null value.
pub fn answer_json(synopsis: &Synopsis, query: &Query) -> Result<Value> {
    match synopsis.answer(query) {
        Ok(e) => Ok(estimate_json(&e, synopsis.dataset_size())),
        Err(Error::NoMatchingSample { bounds }) => {
            let (lb, ub) = bounds.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            Ok(json!({
                "value": null,
                "ci": null,
                "lb": number(lb),
                "ub": number(ub),
                "partial_leaves": null,
                "skip_rate": null,
            }))
        }
        Err(e) => Err(e.into()),
    }
}
