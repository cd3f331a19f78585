//! Dense real matrices with mass, block density, and normalization.
//!
//! Densities are always taken over index subsets of the two axes; the
//! normalized companion of a matrix rescales entries so the mean absolute
//! value is exactly one, which makes density thresholds scale-free.

use crate::error::{Error, Result};

/// Sorted, duplicate-free set of indices into one matrix axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subset {
    indices: Vec<usize>,
}

impl Subset {
    /// Builds a subset from arbitrary indices; sorts and deduplicates.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Subset { indices }
    }

    /// The full axis 0..n.
    pub fn full(n: usize) -> Self {
        Subset {
            indices: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Largest index, if any; subsets are sorted so this is the last element.
    pub fn max(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    /// Checks every index is below `len`.
    pub fn check_bounds(&self, len: usize) -> Result<()> {
        match self.max() {
            Some(m) if m >= len => Err(Error::IndexOutOfBounds { index: m, len }),
            _ => Ok(()),
        }
    }
}

impl From<Vec<usize>> for Subset {
    fn from(v: Vec<usize>) -> Self {
        Subset::new(v)
    }
}

/// Dense row-major matrix of finite f64 entries, at least 1x1.
///
/// The total mass (sum of absolute entries) is computed once at
/// construction and cached; every density query reuses it.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    mass: f64,
}

impl RealMatrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for {}x{}, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        for (pos, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: pos / cols,
                    col: pos % cols,
                });
            }
        }
        let mass = data.iter().map(|v| v.abs()).sum();
        Ok(RealMatrix {
            rows,
            cols,
            data,
            mass,
        })
    }

    /// Builds from a rectangular vector of rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        RealMatrix::new(m, n, rows.into_iter().flatten().collect())
    }

    /// Builds entry by entry from a closure.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for x in 0..rows {
            for y in 0..cols {
                data.push(f(x, y));
            }
        }
        RealMatrix::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Row slice, useful for tight inner loops.
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Sum of absolute values over all entries (cached).
    pub fn total_mass(&self) -> f64 {
        self.mass
    }

    /// True when every entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.mass == 0.0
    }

    /// Signed entry sum over the block `rows x cols`.
    pub fn block_weight(&self, rows: &Subset, cols: &Subset) -> Result<f64> {
        rows.check_bounds(self.rows)?;
        cols.check_bounds(self.cols)?;
        let mut sum = 0.0;
        for x in rows.iter() {
            let row = self.row(x);
            for y in cols.iter() {
                sum += row[y];
            }
        }
        Ok(sum)
    }

    /// Average entry over the block; errors on an empty side.
    pub fn block_density(&self, rows: &Subset, cols: &Subset) -> Result<f64> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::EmptyBlock(
                "density requires nonempty row and column sets".into(),
            ));
        }
        let w = self.block_weight(rows, cols)?;
        Ok(w / (rows.len() as f64 * cols.len() as f64))
    }

    /// Rescales so total mass equals rows*cols (mean absolute entry 1).
    ///
    /// Each entry is divided by the mass and multiplied by the entry count
    /// in that order, so matrices differing by a positive scalar factor
    /// normalize to bit-identical results.
    pub fn normalize(&self) -> Result<RealMatrix> {
        if self.mass == 0.0 {
            return Err(Error::ZeroMass);
        }
        let count = (self.rows * self.cols) as f64;
        let data: Vec<f64> = self
            .data
            .iter()
            .map(|&v| (v / self.mass) * count)
            .collect();
        RealMatrix::new(self.rows, self.cols, data)
    }
}
