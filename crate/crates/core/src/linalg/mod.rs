//! Dense small-matrix kernel: exponentials, real matrix powers, spectral projectors.

mod expm;
mod flow;
mod spectral;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use expm::mat_exp;
pub use flow::MatrixFlow;
pub use spectral::{default_group_tol, spectral_decompose, SpectralDecomposition};

/// Largest supported matrix order.
pub const MAX_ORDER: usize = 16;

/// A finite real square matrix of order 1..=16.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix(DMatrix<f64>);

impl SquareMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return invalid(format!("matrix is {}x{}, not square", m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 || m.nrows() > MAX_ORDER {
            return invalid(format!("matrix order {} outside 1..={MAX_ORDER}", m.nrows()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return invalid("matrix has non-finite entries");
        }
        Ok(SquareMatrix(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("ragged or non-square row list");
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        SquareMatrix(DMatrix::identity(n, n))
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        SquareMatrix(self.0.transpose())
    }

    pub fn scaled(&self, c: f64) -> Self {
        SquareMatrix(&self.0 * c)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.order())
            .map(|i| (0..self.order()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.order();
        (0..n).map(|i| (0..n).map(|j| self.0[(i, j)] * x[j]).sum()).collect()
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, ij: (usize, usize)) -> &f64 {
        &self.0[ij]
    }
}

/// `c^E = exp(ln(c) E)`.
pub fn mat_power(c: f64, e: &SquareMatrix) -> Result<SquareMatrix> {
    if !(c > 0.0) || !c.is_finite() {
        return invalid(format!("matrix power base must be positive and finite, got {c}"));
    }
    if c == 1.0 {
        return Ok(SquareMatrix::identity(e.order()));
    }
    mat_exp(&e.scaled(c.ln()))
}

pub fn trace(m: &SquareMatrix) -> f64 {
    m.0.trace()
}

/// Block structure of the parameter space: `R^d = R^{d_1} x ... x R^{d_m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub blocks: Vec<Vec<Vec<f64>>>,
}

impl BlockLayout {
    pub fn new(blocks: Vec<SquareMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return invalid("layout needs at least one block");
        }
        let total: usize = blocks.iter().map(|b| b.order()).sum();
        if total > MAX_ORDER {
            return invalid(format!("total dimension {total} exceeds {MAX_ORDER}"));
        }
        Ok(BlockLayout { blocks: blocks.iter().map(|b| b.rows()).collect() })
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn d(&self) -> usize {
        self.dims().iter().sum()
    }

    /// Coordinate offset of block `j` inside `R^d`.
    pub fn offset(&self, j: usize) -> usize {
        self.dims()[..j].iter().sum()
    }

    pub fn block(&self, j: usize) -> Result<SquareMatrix> {
        SquareMatrix::from_rows(&self.blocks[j])
    }

    /// Splits a point of `R^d` into its block components.
    pub fn split<'a>(&self, x: &'a [f64]) -> Vec<&'a [f64]> {
        let mut out = Vec::with_capacity(self.m());
        let mut at = 0;
        for dj in self.dims() {
            out.push(&x[at..at + dj]);
            at += dj;
        }
        out
    }
}

/// Embeds the blocks as `E_j` (zero outside block `j`) and returns them with `E = sum E_j`.
pub fn embed_blocks(layout: &BlockLayout) -> Result<(Vec<SquareMatrix>, SquareMatrix)> {
    let d = layout.d();
    let mut total = DMatrix::zeros(d, d);
    let mut list = Vec::with_capacity(layout.m());
    for j in 0..layout.m() {
        let b = layout.block(j)?;
        let off = layout.offset(j);
        let mut ej = DMatrix::zeros(d, d);
        for r in 0..b.order() {
            for c in 0..b.order() {
                ej[(off + r, off + c)] = b[(r, c)];
                total[(off + r, off + c)] = b[(r, c)];
            }
        }
        list.push(SquareMatrix::new(ej)?);
    }
    Ok((list, SquareMatrix::new(total)?))
}

/// `c^{E_j} x`: applies the power of block `j` to the block-`j` coordinates only, leaving the
/// remaining coordinates bit-for-bit unchanged.
pub fn block_power_apply(layout: &BlockLayout, j: usize, c: f64, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != layout.d() {
        return invalid(format!("point has {} coordinates, layout has {}", x.len(), layout.d()));
    }
    let p = mat_power(c, &layout.block(j)?)?;
    let off = layout.offset(j);
    let mut out = x.to_vec();
    let yj = p.apply(&x[off..off + p.order()]);
    out[off..off + p.order()].copy_from_slice(&yj);
    Ok(out)
}
