//! Incomplete matched-pairs data: `n_c` complete pairs followed by `n_u`
//! subjects whose second component is missing.
//!
//! The CSV layout read by [`read_csv`] is UTF-8 with the header `x1,x2`, one
//! subject per row. An empty `x2` field marks the second component as
//! missing; `x1` must always be present.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Smallest number of complete pairs accepted anywhere in the crate.
pub const MIN_COMPLETE: usize = 2;

/// One ingested subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord {
    pub x1: Option<f64>,
    pub x2: Option<f64>,
}

impl RawRecord {
    pub fn pair(x1: f64, x2: f64) -> Self {
        Self {
            x1: Some(x1),
            x2: Some(x2),
        }
    }

    pub fn first_only(x1: f64) -> Self {
        Self { x1: Some(x1), x2: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub n_c: usize,
    pub n_u: usize,
    /// Subjects, `n_c + n_u`.
    pub n: usize,
    /// Observed values, `2·n_c + n_u`.
    pub total_obs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncompletePairedSample {
    complete: Vec<(f64, f64)>,
    incomplete_first: Vec<f64>,
}

impl IncompletePairedSample {
    pub fn new(complete: Vec<(f64, f64)>, incomplete_first: Vec<f64>) -> Result<Self> {
        if complete.len() < MIN_COMPLETE {
            return Err(Error::TooFewComplete {
                n_c: complete.len(),
                required: MIN_COMPLETE,
            });
        }
        if incomplete_first.is_empty() {
            return Err(Error::NoIncomplete);
        }
        if let Some(i) = complete
            .iter()
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(Error::NonFinite { row: i + 1 });
        }
        if let Some(i) = incomplete_first.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: complete.len() + i + 1,
            });
        }
        Ok(Self {
            complete,
            incomplete_first,
        })
    }

    /// Splits records into complete pairs and first-only observations,
    /// preserving input order within each group. Row numbers in errors are
    /// 1-based record indices.
    pub fn from_records(records: &[RawRecord]) -> Result<Self> {
        if records.len() < 3 {
            return Err(Error::TooFewRecords {
                found: records.len(),
                required: 3,
            });
        }
        let mut complete = Vec::new();
        let mut incomplete = Vec::new();
        for (i, rec) in records.iter().enumerate() {
            let row = i + 1;
            let x1 = rec.x1.ok_or(Error::MissingFirstComponent { row })?;
            if !x1.is_finite() {
                return Err(Error::NonFinite { row });
            }
            match rec.x2 {
                Some(x2) if !x2.is_finite() => return Err(Error::NonFinite { row }),
                Some(x2) => complete.push((x1, x2)),
                None => incomplete.push(x1),
            }
        }
        Self::new(complete, incomplete)
    }

    pub fn complete(&self) -> &[(f64, f64)] {
        &self.complete
    }

    pub fn incomplete_first(&self) -> &[f64] {
        &self.incomplete_first
    }

    pub fn counts(&self) -> Counts {
        let n_c = self.complete.len();
        let n_u = self.incomplete_first.len();
        Counts {
            n_c,
            n_u,
            n: n_c + n_u,
            total_obs: 2 * n_c + n_u,
        }
    }

    /// All `n` first components, complete pairs first.
    pub fn first_components(&self) -> impl Iterator<Item = f64> + '_ {
        self.complete
            .iter()
            .map(|&(x1, _)| x1)
            .chain(self.incomplete_first.iter().copied())
    }

    /// Applies `f` to every observed value.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.complete.iter().map(|&(a, b)| (f(a), f(b))).collect(),
            self.incomplete_first.iter().map(|&x| f(x)).collect(),
        )
    }

    pub fn to_records(&self) -> Vec<RawRecord> {
        self.complete
            .iter()
            .map(|&(a, b)| RawRecord::pair(a, b))
            .chain(self.incomplete_first.iter().map(|&x| RawRecord::first_only(x)))
            .collect()
    }
}

fn parse_field(field: &str, line: usize, name: &str) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {name} value {field:?}"),
    })
}

/// Reads raw records; does not validate the sample-level invariants.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["x1", "x2"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `x1,x2`, found `{}`", names.join(",")),
        });
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        let x1 = parse_field(&rec[0], line, "x1")?;
        let x2 = parse_field(&rec[1], line, "x2")?;
        records.push(RawRecord { x1, x2 });
    }
    Ok(records)
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Reads and validates a sample. Errors name the offending data row
/// (1-based, header excluded).
pub fn read_csv<R: Read>(reader: R) -> Result<IncompletePairedSample> {
    let records = read_records(reader)?;
    IncompletePairedSample::from_records(&records)
}

pub fn write_csv<W: Write>(sample: &IncompletePairedSample, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("{other:?}")),
    };
    w.write_record(["x1", "x2"]).map_err(io)?;
    for rec in sample.to_records() {
        let x1 = rec.x1.map(|v| v.to_string()).unwrap_or_default();
        let x2 = rec.x2.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([x1, x2]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
