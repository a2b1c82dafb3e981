// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

use pass_core::oracle::scan;
use pass_core::{Dataset, Query};

use crate::error::{HarnessError, Result};

/// Exact answer by full scan. AVG/MIN/MAX over an empty match is
/// [`HarnessError::NoMatch`].
pub fn ground_truth(data: &Dataset, query: &Query) -> Result<f64> {
    query.check_dimension(data.dimension())?;
    scan(data, query).ok_or(HarnessError::NoMatch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pass_core::{AggregateKind, Rect, Tuple};

    fn data() -> Dataset {
        Dataset::new(1, (0..10).map(|i| Tuple::new(vec![i as f64], i as f64 * 2.0)).collect()).unwrap()
    }

    #[test]
    fn examples() {
        let d = data();
        let all = Rect::unbounded(1);
        let empty = Rect::interval(20.0, 30.0).unwrap();
        assert_eq!(ground_truth(&d, &Query::new(AggregateKind::Count, all.clone())).unwrap(), 10.0);
        assert_eq!(ground_truth(&d, &Query::new(AggregateKind::Sum, empty.clone())).unwrap(), 0.0);
        assert!(matches!(ground_truth(&d, &Query::new(AggregateKind::Avg, empty.clone())), Err(HarnessError::NoMatch)));
        assert!(matches!(ground_truth(&d, &Query::new(AggregateKind::Min, empty)), Err(HarnessError::NoMatch)));
        assert_eq!(ground_truth(&d, &Query::new(AggregateKind::Avg, Rect::interval(2.0, 4.0).unwrap())).unwrap(), 6.0);
    }

    #[test]
    fn dimension_checked() {
        let q = Query::new(AggregateKind::Sum, Rect::unbounded(2));
        assert!(matches!(ground_truth(&data(), &q), Err(HarnessError::Core(_))));
    }
}
