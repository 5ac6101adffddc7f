use serde::{Deserialize, Serialize};

use crate::error::{Result, RlenError};

/// `N x J` collection of equal-length series; each column is one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMatrix {
    columns: Vec<Vec<f64>>,
    names: Option<Vec<String>>,
}

impl SeriesMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(RlenError::arg("matrix needs at least one column"));
        };
        let n = first.len();
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(RlenError::arg(format!(
                "column {j} has length {}, expected {n}",
                c.len()
            )));
        }
        Ok(SeriesMatrix {
            columns,
            names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.columns.len() {
            return Err(RlenError::arg(format!(
                "{} names for {} columns",
                names.len(),
                self.columns.len()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    /// Series length `N`.
    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    /// Number of series `J`.
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn is_unit_interval(&self) -> bool {
        self.columns
            .iter()
            .flatten()
            .all(|v| (0.0..=1.0).contains(v))
    }

    /// Applies `f` to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SeriesMatrix {
        SeriesMatrix {
            columns: self
                .columns
                .iter()
                .map(|c| c.iter().map(|&v| f(v)).collect())
                .collect(),
            names: self.names.clone(),
        }
    }

    /// Columns `range` as a new matrix.
    pub fn select(&self, cols: std::ops::Range<usize>) -> Result<SeriesMatrix> {
        if cols.is_empty() || cols.end > self.n_cols() {
            return Err(RlenError::arg(format!(
                "column range {cols:?} invalid for {} columns",
                self.n_cols()
            )));
        }
        Ok(SeriesMatrix {
            columns: self.columns[cols.clone()].to_vec(),
            names: self.names.as_ref().map(|n| n[cols].to_vec()),
        })
    }
}
