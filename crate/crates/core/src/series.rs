//! Univariate series: ingestion, monthly resampling, min-max scaling and windowing.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered univariate observations. Timestamps are strictly increasing and
/// every value is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    timestamps: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl Series {
    pub fn new(timestamps: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Dimension {
                expected: timestamps.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at position {}",
                i + 1
            )));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries(format!(
                "timestamps not strictly increasing at position {}",
                i + 2
            )));
        }
        Ok(Self { timestamps, values })
    }

    /// Monthly series starting at `start` (snapped to the first of its month).
    pub fn monthly(start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let first = start.with_day(1).expect("day 1 always exists");
        let timestamps = (0..values.len())
            .map(|i| first + Months::new(i as u32))
            .collect();
        Self::new(timestamps, values)
    }

    /// Monthly series with an arbitrary fixed origin, for windows that carry no dates.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::monthly(NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), values)
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Contiguous sub-series `[start, start + len)` in storage (0-based) indexing.
    pub fn slice(&self, start: usize, len: usize) -> Result<Series> {
        if start + len > self.len() {
            return Err(Error::InsufficientHistory {
                needed: start + len,
                available: self.len(),
            });
        }
        Ok(Series {
            timestamps: self.timestamps[start..start + len].to_vec(),
            values: self.values[start..start + len].to_vec(),
        })
    }

    /// Same timestamps, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Series> {
        Series::new(self.timestamps.clone(), values)
    }
}

/// Reads a CSV with a header row. Rows are sorted by timestamp; duplicate
/// timestamps are rejected.
pub fn load_csv(path: impl AsRef<Path>, time_column: &str, value_column: &str) -> Result<Series> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, time_column, value_column)
}

pub fn read_csv<R: std::io::Read>(reader: R, time_column: &str, value_column: &str) -> Result<Series> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Config(format!("cannot read CSV header: {e}")))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in CSV header")))
    };
    let time_idx = find(time_column)?;
    let value_idx = find(value_column)?;

    let mut rows: Vec<(NaiveDate, f64, usize)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Ingestion {
            row,
            message: e.to_string(),
        })?;
        let field = |idx: usize| {
            record.get(idx).map(str::trim).ok_or_else(|| Error::Ingestion {
                row,
                message: "missing field".into(),
            })
        };
        let raw_date = field(time_idx)?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| Error::Ingestion {
            row,
            message: format!("unparseable date `{raw_date}`: {e}"),
        })?;
        let raw_value = field(value_idx)?;
        let value: f64 = raw_value.parse().map_err(|_| Error::Ingestion {
            row,
            message: format!("non-numeric value `{raw_value}`"),
        })?;
        if !value.is_finite() {
            return Err(Error::Ingestion {
                row,
                message: format!("non-finite value `{raw_value}`"),
            });
        }
        rows.push((date, value, row));
    }

    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Ingestion {
            row: w[1].2,
            message: format!("duplicate timestamp {}", w[1].0),
        });
    }
    let (timestamps, values): (Vec<_>, Vec<_>) = rows.into_iter().map(|(d, v, _)| (d, v)).unzip();
    Series::new(timestamps, values)
}

/// Writes `date,value` rows with a header.
pub fn write_csv<W: std::io::Write>(series: &Series, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "value"]).map_err(csv_io)?;
    for (d, v) in series.timestamps.iter().zip(&series.values) {
        w.write_record([d.format("%Y-%m-%d").to_string(), v.to_string()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Averages observations per calendar month, indexed by the first day of the month.
/// A month with no observations inside the covered range is an error.
pub fn resample_monthly(s: &Series) -> Result<Series> {
    if s.is_empty() {
        return Ok(s.clone());
    }
    let mut buckets: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for (d, v) in s.timestamps.iter().zip(&s.values) {
        let key = d.with_day(1).unwrap();
        let e = buckets.entry(key).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let first = *buckets.keys().next().unwrap();
    let last = *buckets.keys().next_back().unwrap();
    let mut timestamps = Vec::with_capacity(buckets.len());
    let mut values = Vec::with_capacity(buckets.len());
    let mut month = first;
    while month <= last {
        let (sum, count) = buckets
            .get(&month)
            .ok_or_else(|| Error::Gap(month.format("%Y-%m").to_string()))?;
        timestamps.push(month);
        values.push(sum / *count as f64);
        month = month + Months::new(1);
    }
    Series::new(timestamps, values)
}

/// Affine map fitted on one series and applied to others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationState {
    pub min: f64,
    pub max: f64,
}

impl NormalizationState {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Err(Error::InsufficientHistory {
                needed: 1,
                available: 0,
            });
        }
        if max <= min {
            return Err(Error::DegenerateRange(min));
        }
        Ok(Self { min, max })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }

    pub fn normalize(&self, s: &Series) -> Series {
        Series {
            timestamps: s.timestamps.clone(),
            values: s.values.iter().map(|&v| self.apply(v)).collect(),
        }
    }

    pub fn denormalize(&self, s: &Series) -> Series {
        Series {
            timestamps: s.timestamps.clone(),
            values: s.values.iter().map(|&v| self.invert(v)).collect(),
        }
    }
}

/// Scales values into [0, 1] using the series' own range.
pub fn minmax_normalize(s: &Series) -> Result<(Series, NormalizationState)> {
    let state = NormalizationState::fit(&s.values)?;
    Ok((state.normalize(s), state))
}

/// The final `q` observations.
pub fn last_window(s: &Series, q: usize) -> Result<Series> {
    if q == 0 {
        return Err(Error::Config("window length must be positive".into()));
    }
    if q > s.len() {
        return Err(Error::InsufficientHistory {
            needed: q,
            available: s.len(),
        });
    }
    s.slice(s.len() - q, q)
}
