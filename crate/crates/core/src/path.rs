// SPDX-License-Identifier: Apache-2.0

//! Sampled paths and their CSV/JSON forms.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;

/// Real values sampled on every point of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub label: String,
}

impl ScalarPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!("path has {} values for a grid of {} points", values.len(), grid.len())));
        }
        Ok(Self { grid, values, label: label.into() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }

    /// `(time, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &v)| (self.grid.time(k), v))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_columns_csv(out, &[self.label.as_str()], &self.grid, &[&self.values])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: ScalarPath = serde_json::from_str(s)?;
        if p.values.len() != p.grid.len() {
            return Err(invalid("decoded path length does not match its grid"));
        }
        Ok(p)
    }
}

/// Writes `time,<names...>` followed by one row per grid point.
///
/// Values are printed with Rust's shortest round-trip formatting, so the file
/// carries full double precision.
pub fn write_columns_csv<W: Write>(mut out: W, names: &[&str], grid: &TimeGrid, columns: &[&[f64]]) -> Result<()> {
    if names.len() != columns.len() {
        return Err(invalid("column names and columns differ in count"));
    }
    if let Some(c) = columns.iter().find(|c| c.len() != grid.len()) {
        return Err(invalid(format!("column of length {} on a grid of {}", c.len(), grid.len())));
    }
    let io = |source| Error::Io { path: "<csv stream>".into(), source };
    let mut line = String::with_capacity(32 * (names.len() + 1));
    line.push_str("time");
    for n in names {
        line.push(',');
        line.push_str(n);
    }
    line.push('\n');
    out.write_all(line.as_bytes()).map_err(io)?;
    for k in 0..grid.len() {
        line.clear();
        let _ = write!(line, "{}", grid.time(k));
        for c in columns {
            let _ = write!(line, ",{}", c[k]);
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io)?;
    }
    Ok(())
}
