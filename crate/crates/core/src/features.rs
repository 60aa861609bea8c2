//! Interpretable auxiliary features evaluated at a 1-based time index `t`.
//!
//! All three features read only `y_1 .. y_{t-1}`, so they can be evaluated at
//! the forecast time `t = q + 1` of a length-`q` window.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y_{t-k}` if `k < t`.
pub fn lag(values: &[f64], t: usize, k: usize) -> Option<f64> {
    if k == 0 || k >= t {
        return None;
    }
    values.get(t - k - 1).copied()
}

/// Mean of `y_{t-k-w+1} .. y_{t-k}` if `k < t` and `w <= t - k`.
pub fn rolling_window(values: &[f64], t: usize, k: usize, w: usize) -> Option<f64> {
    if k == 0 || w == 0 || k >= t || w > t - k {
        return None;
    }
    let end = t - k; // 1-based, inclusive
    let start = end + 1 - w;
    mean(values.get(start - 1..end)?)
}

/// Mean of `y_{t-w} .. y_{t-1}` if `w < t`. Fixed width, despite the name.
pub fn expanding_window(values: &[f64], t: usize, w: usize) -> Option<f64> {
    if w == 0 || w >= t {
        return None;
    }
    mean(values.get(t - w - 1..t - 1)?)
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Lag { k: usize },
    RollingWindow { k: usize, w: usize },
    ExpandingWindow { w: usize },
}

impl FeatureKind {
    pub fn eval(&self, values: &[f64], t: usize) -> Option<f64> {
        match *self {
            FeatureKind::Lag { k } => lag(values, t, k),
            FeatureKind::RollingWindow { k, w } => rolling_window(values, t, k, w),
            FeatureKind::ExpandingWindow { w } => expanding_window(values, t, w),
        }
    }

    /// Whether the feature is defined at `t`, independent of the values.
    pub fn defined_at(&self, t: usize) -> bool {
        match *self {
            FeatureKind::Lag { k } => k >= 1 && k < t,
            FeatureKind::RollingWindow { k, w } => k >= 1 && w >= 1 && k < t && w <= t - k,
            FeatureKind::ExpandingWindow { w } => w >= 1 && w < t,
        }
    }

    pub fn family(&self) -> FeatureFamily {
        match self {
            FeatureKind::Lag { .. } => FeatureFamily::Lag,
            FeatureKind::RollingWindow { .. } => FeatureFamily::RollingWindow,
            FeatureKind::ExpandingWindow { .. } => FeatureFamily::ExpandingWindow,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Lag { k } => write!(f, "lag:{k}"),
            FeatureKind::RollingWindow { k, w } => write!(f, "rw:{k}:{w}"),
            FeatureKind::ExpandingWindow { w } => write!(f, "ew:{w}"),
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |x: &str| -> Result<usize> {
            match x.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::Config(format!(
                    "feature `{s}`: `{x}` is not a positive integer"
                ))),
            }
        };
        match parts.as_slice() {
            ["lag", k] => Ok(FeatureKind::Lag { k: num(k)? }),
            ["rw", k, w] => Ok(FeatureKind::RollingWindow { k: num(k)?, w: num(w)? }),
            ["ew", w] => Ok(FeatureKind::ExpandingWindow { w: num(w)? }),
            _ => Err(Error::Config(format!(
                "unrecognised feature `{s}`; expected lag:k, rw:k:w or ew:w"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSpec {
    #[serde(flatten)]
    pub kind: FeatureKind,
    pub label: String,
}

impl FeatureSpec {
    pub fn new(kind: FeatureKind) -> Self {
        let label = match kind {
            FeatureKind::Lag { k } => format!("Lag_{k}"),
            FeatureKind::RollingWindow { k, w } => format!("RollingWindow_{k},{w}"),
            FeatureKind::ExpandingWindow { w } => format!("ExpandingWindow_{w}"),
        };
        Self { kind, label }
    }

    pub fn with_label(kind: FeatureKind, label: impl Into<String>) -> Self {
        Self {
            kind,
            label: label.into(),
        }
    }

    pub fn lag(k: usize) -> Self {
        Self::new(FeatureKind::Lag { k })
    }

    pub fn rolling(k: usize, w: usize) -> Self {
        Self::new(FeatureKind::RollingWindow { k, w })
    }

    pub fn expanding(w: usize) -> Self {
        Self::new(FeatureKind::ExpandingWindow { w })
    }
}

/// Parses `lag:1,lag:2,rw:1:3,ew:5`. Labels must come out unique.
pub fn parse_feature_specs(s: &str) -> Result<Vec<FeatureSpec>> {
    let specs = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse().map(FeatureSpec::new))
        .collect::<Result<Vec<_>>>()?;
    if specs.is_empty() {
        return Err(Error::Config("empty feature list".into()));
    }
    check_unique_labels(&specs)?;
    Ok(specs)
}

pub fn format_feature_specs(specs: &[FeatureSpec]) -> String {
    specs
        .iter()
        .map(|s| s.kind.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn check_unique_labels(specs: &[FeatureSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in specs {
        if !seen.insert(s.label.as_str()) {
            return Err(Error::Config(format!("duplicate feature label `{}`", s.label)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureFamily {
    Lag,
    RollingWindow,
    ExpandingWindow,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 3] = [
        FeatureFamily::Lag,
        FeatureFamily::RollingWindow,
        FeatureFamily::ExpandingWindow,
    ];

    /// Default set for windows of length `q`: lags 1..=q, rolling windows
    /// k = 1..=3 with w = 3, expanding windows w = 1..=5. Members undefined at
    /// `q + 1` are dropped.
    pub fn default_specs(&self, q: usize) -> Vec<FeatureSpec> {
        let t = q + 1;
        let all: Vec<FeatureSpec> = match self {
            FeatureFamily::Lag => (1..=q).map(FeatureSpec::lag).collect(),
            FeatureFamily::RollingWindow => (1..=3).map(|k| FeatureSpec::rolling(k, 3)).collect(),
            FeatureFamily::ExpandingWindow => (1..=5).map(FeatureSpec::expanding).collect(),
        };
        all.into_iter().filter(|s| s.kind.defined_at(t)).collect()
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            FeatureFamily::Lag => "Lag",
            FeatureFamily::RollingWindow => "RW",
            FeatureFamily::ExpandingWindow => "EW",
        }
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for FeatureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lag" => Ok(FeatureFamily::Lag),
            "rw" | "rolling" | "rollingwindow" => Ok(FeatureFamily::RollingWindow),
            "ew" | "expanding" | "expandingwindow" => Ok(FeatureFamily::ExpandingWindow),
            _ => Err(Error::Config(format!("unknown feature family `{s}`"))),
        }
    }
}

/// Feature evaluations at `t = q + 1`, one row per sample, columns in spec order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub specs: Vec<FeatureSpec>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.specs.len()
    }
}

/// Fails with the first spec that is undefined at `t = q + 1`.
pub fn validate_specs(specs: &[FeatureSpec], q: usize) -> Result<()> {
    let t = q + 1;
    for s in specs {
        if !s.kind.defined_at(t) {
            return Err(Error::SpecValidation {
                label: s.label.clone(),
                t,
            });
        }
    }
    Ok(())
}

/// Feature row for one window at `t = q + 1`.
pub fn feature_row(window: &[f64], specs: &[FeatureSpec]) -> Result<Vec<f64>> {
    let t = window.len() + 1;
    specs
        .iter()
        .map(|s| {
            s.kind.eval(window, t).ok_or_else(|| Error::SpecValidation {
                label: s.label.clone(),
                t,
            })
        })
        .collect()
}

pub fn build_feature_matrix(samples: &[Vec<f64>], specs: &[FeatureSpec]) -> Result<FeatureMatrix> {
    check_unique_labels(specs)?;
    let q = samples.first().map(Vec::len).unwrap_or(0);
    validate_specs(specs, q)?;
    let rows = samples
        .iter()
        .map(|s| {
            if s.len() != q {
                return Err(Error::Dimension {
                    expected: q,
                    actual: s.len(),
                });
            }
            feature_row(s, specs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        rows,
        specs: specs.to_vec(),
    })
}
