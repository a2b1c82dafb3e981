// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Tuples, datasets, rectangles, queries and geometric predicate classification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One row: `d` predicate coordinates plus the aggregated value.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuple<T> {
    pub predicate: Vec<T>,
    pub value: T,
}

impl<T: Scalar> Tuple<T> {
    pub fn new(predicate: Vec<T>, value: T) -> Self {
        Self { predicate, value }
    }
}

/// In-memory table of tuples sharing one predicate dimension.
///
/// Stored column-major: predicate coordinates are packed row by row in one
/// buffer with stride `dimension`, values in a parallel buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    dimension: usize,
    coords: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(dimension: usize, tuples: Vec<Tuple<T>>) -> Result<Self> {
        let mut coords = Vec::with_capacity(tuples.len() * dimension);
        let mut values = Vec::with_capacity(tuples.len());
        for t in tuples {
            if t.predicate.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: t.predicate.len(),
                });
            }
            coords.extend_from_slice(&t.predicate);
            values.push(t.value);
        }
        Self::from_columns(dimension, coords, values)
    }

    /// Builds a dataset from a packed row-major coordinate buffer.
    pub fn from_columns(dimension: usize, coords: Vec<T>, values: Vec<T>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if coords.len() != values.len() * dimension {
            return Err(Error::DimensionMismatch {
                expected: values.len() * dimension,
                actual: coords.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            let row = &coords[i * dimension..(i + 1) * dimension];
            if !v.is_finite() || row.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(Self {
            dimension,
            coords,
            values,
        })
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dimension..(i + 1) * self.dimension]
    }

    #[inline]
    pub fn value(&self, i: usize) -> T {
        self.values[i]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn tuple(&self, i: usize) -> Tuple<T> {
        Tuple::new(self.point(i).to_vec(), self.values[i])
    }

    /// `(point, value)` pairs in row order.
    pub fn iter(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.coords
            .chunks_exact(self.dimension)
            .zip(self.values.iter().copied())
    }
}

/// Axis-aligned closed box `lo[j] <= c[j] <= hi[j]`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> Rect<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::Config("rectangle needs at least one dimension".into()));
        }
        for (j, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(Error::InvalidRect { dim: j });
            }
        }
        Ok(Self { lo, hi })
    }

    /// The whole space `(-inf, +inf)^d`.
    pub fn unbounded(dimension: usize) -> Self {
        Self {
            lo: vec![T::neg_infinity(); dimension],
            hi: vec![T::infinity(); dimension],
        }
    }

    /// One-dimensional interval `[lo, hi]`.
    pub fn interval(lo: T, hi: T) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    #[inline]
    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    /// Copy of this box with dimension `dim` restricted to `[lo, hi]`.
    pub fn with_bounds(&self, dim: usize, lo: T, hi: T) -> Result<Self> {
        let mut r = self.clone();
        r.lo[dim] = lo;
        r.hi[dim] = hi;
        Rect::new(r.lo, r.hi)
    }

    /// Closed-interval membership test.
    pub fn contains(&self, point: &[T]) -> Result<bool> {
        self.check_dim(point.len())?;
        Ok(self.contains_unchecked(point))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, point: &[T]) -> bool {
        point
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (l, h))| l <= c && c <= h)
    }

    pub fn is_subset_of(&self, other: &Rect<T>) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .all(|((l, h), (ol, oh))| ol <= l && h <= oh)
    }

    pub fn intersects(&self, other: &Rect<T>) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .all(|((l, h), (ol, oh))| l <= oh && ol <= h)
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual,
            });
        }
        Ok(())
    }
}

/// Relationship between a partition box and a query box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlap {
    Disjoint,
    Contained,
    Partial,
}

/// Classifies `partition` against `query` purely geometrically. `Partial` is
/// conservative: the overlap may hold no actual tuple.
pub fn classify<T: Scalar>(partition: &Rect<T>, query: &Rect<T>) -> Result<Overlap> {
    query.check_dim(partition.dimension())?;
    Ok(classify_unchecked(partition, query))
}

#[inline]
pub(crate) fn classify_unchecked<T: Scalar>(partition: &Rect<T>, query: &Rect<T>) -> Overlap {
    if partition.is_subset_of(query) {
        Overlap::Contained
    } else if !partition.intersects(query) {
        Overlap::Disjoint
    } else {
        Overlap::Partial
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateKind {
    Sum,
    Count,
    Avg,
    Min,
    Max,
}

impl AggregateKind {
    pub const ALL: [AggregateKind; 5] = [
        AggregateKind::Sum,
        AggregateKind::Count,
        AggregateKind::Avg,
        AggregateKind::Min,
        AggregateKind::Max,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AggregateKind::Sum => "sum",
            AggregateKind::Count => "count",
            AggregateKind::Avg => "avg",
            AggregateKind::Min => "min",
            AggregateKind::Max => "max",
        }
    }
}

impl fmt::Display for AggregateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(AggregateKind::Sum),
            "count" => Ok(AggregateKind::Count),
            "avg" => Ok(AggregateKind::Avg),
            "min" => Ok(AggregateKind::Min),
            "max" => Ok(AggregateKind::Max),
            other => Err(Error::Config(format!("unknown aggregate kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query<T> {
    pub kind: AggregateKind,
    pub rect: Rect<T>,
}

impl<T: Scalar> Query<T> {
    pub fn new(kind: AggregateKind, rect: Rect<T>) -> Self {
        Self { kind, rect }
    }

    pub fn check_dimension(&self, dimension: usize) -> Result<()> {
        self.rect.check_dim(dimension)
    }
}
