//! CSV ingestion into a [`Dataset`].

use std::fs::File;
use std::io::Read;
use std::path::Path;

use drcfs_core::{Dataset, DrcfsError};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OnMissing {
    #[default]
    Error,
    Drop,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("outcome column {requested:?} not found; available columns: {available}")]
    MissingOutcome { requested: String, available: String },
    #[error("line {line}: expected {expected} fields, found {got}")]
    Ragged { line: u64, expected: usize, got: usize },
    #[error("line {line}, column {column:?}: cannot use value {value:?}")]
    BadCell { line: u64, column: String, value: String },
    #[error("no usable rows")]
    NoUsableRows,
    #[error("need at least one feature column besides the outcome")]
    NoFeatures,
    #[error(transparent)]
    Invalid(#[from] DrcfsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Column name, or a zero-based index when no header matches.
    pub outcome: String,
    pub has_header: bool,
    pub on_missing: OnMissing,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            outcome: "Y".into(),
            has_header: true,
            on_missing: OnMissing::Error,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<Ingested, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_reader(file, options)
}

fn parse_cell(raw: &str) -> Option<f64> {
    let v: f64 = raw.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

pub fn ingest_reader<R: Read>(reader: R, options: &IngestOptions) -> Result<Ingested, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .from_reader(reader);

    let header: Option<Vec<String>> = if options.has_header {
        Some(rdr.headers()?.iter().map(|h| h.trim().to_string()).collect())
    } else {
        None
    };

    let mut records = rdr.records().peekable();
    let width = match (&header, records.peek()) {
        (Some(h), _) => h.len(),
        (None, Some(Ok(r))) => r.len(),
        (None, Some(Err(_))) => return Err(records.next().unwrap().unwrap_err().into()),
        (None, None) => return Err(IngestError::NoUsableRows),
    };
    let names: Vec<String> = header.clone().unwrap_or_else(|| (0..width).map(|i| format!("X{}", i + 1)).collect());

    let outcome = match names.iter().position(|n| *n == options.outcome) {
        Some(i) => i,
        None => match options.outcome.parse::<usize>() {
            Ok(i) if i < width => i,
            _ => {
                return Err(IngestError::MissingOutcome {
                    requested: options.outcome.clone(),
                    available: names.join(", "),
                })
            }
        },
    };
    if width < 2 {
        return Err(IngestError::NoFeatures);
    }

    let mut values = Vec::new();
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(IngestError::Ragged { line, expected: width, got: record.len() });
        }
        rows_read += 1;
        let parsed: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if let Some(bad) = parsed.iter().position(Option::is_none) {
            match options.on_missing {
                OnMissing::Error => {
                    return Err(IngestError::BadCell {
                        line,
                        column: names[bad].clone(),
                        value: record[bad].to_string(),
                    })
                }
                OnMissing::Drop => {
                    rows_dropped += 1;
                    continue;
                }
            }
        }
        values.push(parsed.into_iter().map(Option::unwrap).collect::<Vec<f64>>());
    }
    if rows_dropped > 0 {
        log::warn!("dropped {rows_dropped} of {rows_read} rows with missing or non-numeric cells");
    }
    if values.is_empty() {
        return Err(IngestError::NoUsableRows);
    }

    let feature_cols: Vec<usize> = (0..width).filter(|&c| c != outcome).collect();
    let features = DMatrix::from_fn(values.len(), feature_cols.len(), |r, c| values[r][feature_cols[c]]);
    let y = values.iter().map(|row| row[outcome]).collect();
    let column_names = feature_cols.iter().map(|&c| names[c].clone()).collect();
    Ok(Ingested {
        dataset: Dataset::new(features, y, column_names)?,
        rows_read,
        rows_dropped,
    })
}

/// Writes features and outcome as a headed CSV with the outcome last.
pub fn write_csv<W: std::io::Write>(writer: W, data: &Dataset, outcome_name: &str) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = data.column_names.clone();
    header.push(outcome_name.to_string());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for r in 0..data.n_rows() {
        row.clear();
        row.extend((0..data.n_features()).map(|c| data.features[(r, c)].to_string()));
        row.push(data.outcome[r].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str, options: &IngestOptions) -> Result<Ingested, IngestError> {
        ingest_reader(text.as_bytes(), options)
    }

    #[test]
    fn outcome_by_name() {
        let got = ingest("A,Y,B\n1,2,3\n4,5,6\n", &IngestOptions::default()).unwrap();
        assert_eq!(got.dataset.column_names, ["A", "B"]);
        assert_eq!(got.dataset.outcome, [2.0, 5.0]);
        assert_eq!(got.dataset.features[(1, 1)], 6.0);
    }

    #[test]
    fn missing_outcome_lists_columns() {
        let opts = IngestOptions { outcome: "Z".into(), ..Default::default() };
        let err = ingest("A,B,C\n1,2,3\n", &opts).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("A, B, C"), "{msg}");
    }

    #[test]
    fn drop_policy_counts_rows() {
        let opts = IngestOptions { on_missing: OnMissing::Drop, ..Default::default() };
        let got = ingest("X1,X2,Y\n1,2,3\nNaN,1,1\n4,5,6\n", &opts).unwrap();
        assert_eq!(got.dataset.n_rows(), 2);
        assert_eq!(got.rows_dropped, 1);
        assert!(matches!(ingest("X1,X2,Y\n1,,3\n", &IngestOptions::default()), Err(IngestError::BadCell { .. })));
    }

    #[test]
    fn ragged_and_empty_files() {
        assert!(matches!(ingest("X1,Y\n1,2\n3\n", &IngestOptions::default()), Err(IngestError::Ragged { .. })));
        assert!(matches!(ingest("X1,Y\n", &IngestOptions::default()), Err(IngestError::NoUsableRows)));
    }

    #[test]
    fn headerless_index() {
        let opts = IngestOptions { outcome: "0".into(), has_header: false, ..Default::default() };
        let got = ingest("9,1,2\n8,3,4\n", &opts).unwrap();
        assert_eq!(got.dataset.outcome, [9.0, 8.0]);
        assert_eq!(got.dataset.column_names, ["X2", "X3"]);
    }

    #[test]
    fn round_trip() {
        let got = ingest("a,b,Y\n1.5,2,3\n4,5,6.25\n", &IngestOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &got.dataset, "Y").unwrap();
        let again = ingest_reader(buf.as_slice(), &IngestOptions::default()).unwrap();
        assert_eq!(again.dataset, got.dataset);
    }
}
