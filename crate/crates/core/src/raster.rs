//! Row-major rasters and the burn-grid series built on top of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense row-major grid. Row 0 is the northernmost row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Raster<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Raster {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("raster must have at least one row and one column"));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "raster body has {} values, header declares {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Raster { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        let idx = self.index(row, col);
        self.data[idx] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.rows && col < self.cols
    }

    pub fn same_shape<U>(&self, other: &Raster<U>) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub(crate) fn check_shape<U>(&self, other: &Raster<U>) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_rows: self.rows,
                expected_cols: self.cols,
                rows: other.rows,
                cols: other.cols,
            })
        }
    }
}

/// Binary burn matrix: `true` marks a cell burned (or burning) by the grid's time.
pub type BurnGrid = Raster<bool>;

impl BurnGrid {
    pub fn burned_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// True when every burned cell of `self` is also burned in `other`.
    pub fn is_subset_of(&self, other: &BurnGrid) -> bool {
        self.same_shape(other) && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}

/// Cumulative burn grids at strictly increasing report times (minutes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScarSeries {
    grids: Vec<BurnGrid>,
    timestamps: Vec<u32>,
}

impl ScarSeries {
    pub fn new(grids: Vec<BurnGrid>, timestamps: Vec<u32>) -> Result<Self> {
        if grids.len() != timestamps.len() {
            return Err(Error::invalid(format!(
                "{} scar grids but {} timestamps",
                grids.len(),
                timestamps.len()
            )));
        }
        if let Some(first) = grids.first() {
            for g in &grids[1..] {
                first.check_shape(g)?;
            }
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("scar timestamps must be strictly increasing"));
        }
        Ok(ScarSeries { grids, timestamps })
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn grids(&self) -> &[BurnGrid] {
        &self.grids
    }

    pub fn timestamps(&self) -> &[u32] {
        &self.timestamps
    }

    pub fn last(&self) -> Option<&BurnGrid> {
        self.grids.last()
    }

    /// The first `n` grids of the series.
    pub fn prefix(&self, n: usize) -> ScarSeries {
        let n = n.min(self.len());
        ScarSeries {
            grids: self.grids[..n].to_vec(),
            timestamps: self.timestamps[..n].to_vec(),
        }
    }

    /// True when each grid contains the previous one.
    pub fn is_monotone(&self) -> bool {
        self.grids.windows(2).all(|w| w[0].is_subset_of(&w[1]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &BurnGrid)> {
        self.timestamps.iter().copied().zip(&self.grids)
    }
}
