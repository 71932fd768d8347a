//! Contingency tables of counts. The canonical vector order is row-major
//! (left to right along each row), shared with every model in the crate.

use crate::error::{Error, Result};
use crate::mechanisms::Histogram;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(rows: Vec<Vec<u64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Shape("a table needs at least 2 rows".into()));
        }
        let cols = rows[0].len();
        if cols < 2 {
            return Err(Error::Shape("a table needs at least 2 columns".into()));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("table rows have unequal lengths".into()));
        }
        Ok(ContingencyTable {
            rows: rows.len(),
            cols,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_flat(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Shape("a table needs at least 2 rows and columns".into()));
        }
        if counts.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} counts cannot fill a {rows}x{cols} table",
                counts.len()
            )));
        }
        Ok(ContingencyTable { rows, cols, counts })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_margins(&self) -> Vec<u64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).sum())
            .collect()
    }

    pub fn col_margins(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// Flatten to a histogram in row-major cell order.
    pub fn to_histogram(&self) -> Result<Histogram> {
        Histogram::new(self.counts.clone())
    }
}
