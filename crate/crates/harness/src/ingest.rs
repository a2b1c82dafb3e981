// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! RFC 4180 CSV ingestion with a mandatory header row.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use pass_core::Dataset;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Skip rows with a missing or non-finite used field instead of failing.
    pub lenient: bool,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    /// Rows dropped in lenient mode.
    pub skipped: usize,
}

pub fn ingest_csv(
    path: impl AsRef<Path>,
    predicate_columns: &[String],
    aggregate_column: &str,
    options: IngestOptions,
) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    ingest_reader(file, predicate_columns, aggregate_column, options)
}

enum Field {
    Value(f64),
    Unusable(String),
}

fn parse_field(raw: &str) -> std::result::Result<Field, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(Field::Unusable("missing value".into()));
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Field::Value(v)),
        Ok(_) => Ok(Field::Unusable(format!("non-finite value {s:?}"))),
        Err(_) => Err(format!("not a number: {s:?}")),
    }
}

pub fn ingest_reader<R: Read>(
    reader: R,
    predicate_columns: &[String],
    aggregate_column: &str,
    options: IngestOptions,
) -> Result<Ingested> {
    if predicate_columns.is_empty() {
        return Err(HarnessError::Schema("at least one predicate column is required".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| HarnessError::Schema(format!("column {name:?} not found")))
    };
    let mut columns: Vec<(usize, &str)> = Vec::with_capacity(predicate_columns.len() + 1);
    for name in predicate_columns {
        columns.push((find(name)?, name));
    }
    columns.push((find(aggregate_column)?, aggregate_column));

    let d = predicate_columns.len();
    let mut coords = Vec::new();
    let mut values = Vec::new();
    let mut skipped = 0;
    let mut parsed = Vec::with_capacity(d + 1);
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| HarnessError::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        parsed.clear();
        let mut unusable = None;
        for &(idx, name) in &columns {
            let raw = record.get(idx).unwrap_or("");
            let field = parse_field(raw).map_err(|message| HarnessError::Parse {
                row,
                column: name.to_string(),
                message,
            })?;
            match field {
                Field::Value(v) => parsed.push(v),
                Field::Unusable(msg) => {
                    unusable = Some((name, msg));
                    break;
                }
            }
        }
        if let Some((name, message)) = unusable {
            if options.lenient {
                skipped += 1;
                continue;
            }
            return Err(HarnessError::Parse {
                row,
                column: name.to_string(),
                message,
            });
        }
        coords.extend_from_slice(&parsed[..d]);
        values.push(parsed[d]);
    }
    let dataset = Dataset::from_columns(d, coords, values)?;
    Ok(Ingested { dataset, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn ingest(text: &str, lenient: bool) -> Result<Ingested> {
        ingest_reader(text.as_bytes(), &cols(&["t"]), "v", IngestOptions { lenient })
    }

    #[test]
    fn three_rows() {
        let got = ingest("t,v,other\n1,2.5,x\n2,3,y\n3,-1,z\n", false).unwrap();
        assert_eq!(got.dataset.len(), 3);
        assert_eq!(got.dataset.dimension(), 1);
        assert_eq!(got.dataset.values(), &[2.5, 3.0, -1.0]);
    }

    #[test]
    fn header_only_is_empty() {
        let err = ingest("t,v\n", false).unwrap_err();
        assert!(matches!(err, HarnessError::Core(pass_core::Error::EmptyDataset)));
    }

    #[test]
    fn nan_is_rejected_with_row() {
        let err = ingest("t,v\n1,2\n2,NaN\n", false).unwrap_err();
        match err {
            HarnessError::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "v");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn lenient_counts_skips() {
        let got = ingest("t,v\n1,2\n2,NaN\n,4\n5,inf\n6,1\n", true).unwrap();
        assert_eq!(got.dataset.len(), 2);
        assert_eq!(got.skipped, 3);
    }

    #[test]
    fn garbage_fails_even_when_lenient() {
        assert!(matches!(ingest("t,v\n1,abc\n", true), Err(HarnessError::Parse { row: 1, .. })));
    }

    #[test]
    fn missing_column() {
        assert!(matches!(ingest("t,w\n1,2\n", false), Err(HarnessError::Schema(_))));
    }

    #[test]
    fn quoted_fields_and_multiple_predicates() {
        let text = "\"a\",\"b\",v\n\"1\",2,\"3\"\n4,5,6\n";
        let got = ingest_reader(text.as_bytes(), &cols(&["b", "a"]), "v", IngestOptions::default()).unwrap();
        assert_eq!(got.dataset.dimension(), 2);
        assert_eq!(got.dataset.point(0), &[2.0, 1.0]);
    }

    #[test]
    fn ragged_rows_are_parse_errors() {
        assert!(matches!(ingest("t,v\n1,2\n3\n", false), Err(HarnessError::Parse { row: 2, .. })));
    }
}
