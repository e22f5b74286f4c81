//! Magnetic pixel matrices and the constructions used to design them.
//!
//! A [`PixelGrid`] stores normalized remanent flux per pixel: `+1` is a fully
//! saturated North pixel, `-1` a fully saturated South pixel and `0` a
//! demagnetized one. Intermediate values describe partially programmed pixels.
//!
//! Hadamard matrices are built with the Sylvester doubling
//! `H(2n) = [[H(n), H(n)], [H(n), -H(n)]]`, which only covers power-of-two
//! orders.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular grid of normalized pixel magnetizations with an optional write mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    write_mask: Option<Vec<bool>>,
}

impl PixelGrid {
    /// Builds a grid from row-major values.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "grid must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} values for a {rows}x{cols} grid, got {}",
                rows * cols,
                values.len()
            )));
        }
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(Error::Validation {
                    row: idx / cols,
                    col: idx % cols,
                    value: v,
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            values,
            write_mask: None,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    /// Builds a grid from nested rows; ragged input is a shape error.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {ncols}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(nrows, ncols, values)
    }

    /// Attaches an explicit write mask (row-major).
    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.values.len() {
            return Err(Error::Shape(format!(
                "mask has {} entries, grid has {}",
                mask.len(),
                self.values.len()
            )));
        }
        self.write_mask = Some(mask);
        Ok(self)
    }

    pub fn without_mask(mut self) -> Self {
        self.write_mask = None;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn explicit_mask(&self) -> Option<&[bool]> {
        self.write_mask.as_deref()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::OutOfRange(format!(
                "cell ({row}, {col}) outside {}x{} grid",
                self.rows, self.cols
            )));
        }
        if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
            return Err(Error::Validation { row, col, value });
        }
        self.values[row * self.cols + col] = value;
        Ok(())
    }

    /// Whether a cell should be programmed. Without an explicit mask every
    /// nonzero cell is written and zeros are skipped.
    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        let idx = row * self.cols + col;
        match &self.write_mask {
            Some(mask) => mask[idx],
            None => self.values[idx] != 0.0,
        }
    }

    pub fn masked_count(&self) -> usize {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| self.is_masked(r, c))
            .count()
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn mask_rows(&self) -> Option<Vec<Vec<bool>>> {
        self.write_mask
            .as_ref()
            .map(|m| m.chunks(self.cols).map(<[bool]>::to_vec).collect())
    }

    /// True when every value is exactly `+1` or `-1`.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0 || v == -1.0)
    }

    /// Copies an equally sized block out of the grid.
    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<PixelGrid> {
        if row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(Error::OutOfRange(format!(
                "block {rows}x{cols} at ({row0}, {col0}) exceeds {}x{} grid",
                self.rows, self.cols
            )));
        }
        let values = (row0..row0 + rows)
            .flat_map(|r| self.row(r)[col0..col0 + cols].iter().copied())
            .collect();
        PixelGrid::new(rows, cols, values)
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> PixelGrid {
        PixelGrid {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
            write_mask: self.write_mask.clone(),
        }
    }
}

/// A validated bijection on `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n || seen[i] {
                return Err(Error::Permutation(format!(
                    "{indices:?} is not a bijection on 0..{n}"
                )));
            }
            seen[i] = true;
        }
        Ok(Self(indices))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut v: Vec<usize> = (0..n).collect();
        v.shuffle(rng);
        Self(v)
    }

    /// Cyclic shift: entry `i` maps to `(i + shift) % n`.
    pub fn rotation(n: usize, shift: usize) -> Self {
        Self((0..n).map(|i| (i + shift) % n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn fixed_points(&self) -> usize {
        self.0.iter().enumerate().filter(|(i, &p)| *i == p).count()
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

/// A Sylvester Hadamard matrix with its rows reordered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HadamardSpec {
    pub order: usize,
    pub row_permutation: Permutation,
}

impl HadamardSpec {
    pub fn new(order: usize, row_permutation: Permutation) -> Result<Self> {
        check_power_of_two(order)?;
        if row_permutation.len() != order {
            return Err(Error::Permutation(format!(
                "permutation of length {} for order {order}",
                row_permutation.len()
            )));
        }
        Ok(Self {
            order,
            row_permutation,
        })
    }

    pub fn sylvester(order: usize) -> Result<Self> {
        Self::new(order, Permutation::identity(order))
    }

    pub fn build(&self) -> Result<PixelGrid> {
        permute_rows(&sylvester_hadamard(self.order)?, &self.row_permutation)
    }
}

fn check_power_of_two(order: usize) -> Result<()> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::Size(format!(
            "Hadamard order must be a power of two, got {order}"
        )));
    }
    Ok(())
}

/// Sylvester-normal Hadamard matrix of the given power-of-two order.
pub fn sylvester_hadamard(order: usize) -> Result<PixelGrid> {
    check_power_of_two(order)?;
    let mut h = vec![1.0f64];
    let mut n = 1;
    while n < order {
        let m = 2 * n;
        let mut next = vec![0.0; m * m];
        for r in 0..n {
            for c in 0..n {
                let v = h[r * n + c];
                next[r * m + c] = v;
                next[r * m + c + n] = v;
                next[(r + n) * m + c] = v;
                next[(r + n) * m + c + n] = -v;
            }
        }
        h = next;
        n = m;
    }
    PixelGrid::new(order, order, h)
}

/// Element-wise negation. `0` stays `0` and the mask is carried over.
pub fn complement(grid: &PixelGrid) -> PixelGrid {
    // `0.0 - v` keeps demagnetized cells at +0.0 rather than -0.0.
    grid.map_values(|v| 0.0 - v)
}

/// Output row `i` is input row `perm[i]`.
pub fn permute_rows(grid: &PixelGrid, perm: &Permutation) -> Result<PixelGrid> {
    if perm.len() != grid.rows() {
        return Err(Error::Permutation(format!(
            "permutation of length {} for a grid with {} rows",
            perm.len(),
            grid.rows()
        )));
    }
    let values = perm
        .as_slice()
        .iter()
        .flat_map(|&src| grid.row(src).iter().copied())
        .collect();
    let write_mask = grid.write_mask.as_ref().map(|mask| {
        perm.as_slice()
            .iter()
            .flat_map(|&src| mask[src * grid.cols..(src + 1) * grid.cols].iter().copied())
            .collect()
    });
    Ok(PixelGrid {
        rows: grid.rows,
        cols: grid.cols,
        values,
        write_mask,
    })
}

/// `(-1)^(row + col)`, starting with North in the top-left corner.
pub fn checkerboard(rows: usize, cols: usize) -> Result<PixelGrid> {
    let values = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| if (r + c) % 2 == 0 { 1.0 } else { -1.0 }))
        .collect();
    PixelGrid::new(rows, cols, values)
}

/// Largest normalized |dot product| between distinct rows or distinct columns.
///
/// Zero exactly when the grid is a Hadamard matrix.
pub fn orthogonality_defect(grid: &PixelGrid) -> Result<f64> {
    let n = grid.rows();
    if grid.cols() != n {
        return Err(Error::Domain(format!(
            "orthogonality defect needs a square grid, got {}x{}",
            grid.rows(),
            grid.cols()
        )));
    }
    if !grid.is_binary() {
        return Err(Error::Domain(
            "orthogonality defect needs a +/-1 grid".into(),
        ));
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let row_dot: f64 = (0..n).map(|k| grid.get(i, k) * grid.get(j, k)).sum();
            let col_dot: f64 = (0..n).map(|k| grid.get(k, i) * grid.get(k, j)).sum();
            worst = worst.max(row_dot.abs()).max(col_dot.abs());
        }
    }
    Ok(worst / n as f64)
}
