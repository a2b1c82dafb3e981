// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Floating point scalar abstraction used by every numeric routine in the crate.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the synopsis is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Smallest representable value strictly greater than `self`.
    fn next_up(self) -> Self;

    /// Smallest representable value strictly less than `self`.
    fn next_down(self) -> Self;

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable as float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    /// Ordering of non-NaN values.
    #[inline]
    fn order(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).expect("NaN in ordered comparison")
    }

    /// `max` keeping `self` on ties.
    #[inline]
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn next_up(self) -> Self {
        f64::next_up(self)
    }

    #[inline]
    fn next_down(self) -> Self {
        f64::next_down(self)
    }
}

impl Scalar for f32 {
    #[inline]
    fn next_up(self) -> Self {
        f32::next_up(self)
    }

    #[inline]
    fn next_down(self) -> Self {
        f32::next_down(self)
    }
}
