use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

use super::SquareMatrix;
use crate::error::{invalid, Error, Result};

/// Grouping of the spectrum by real part with the matching oblique projectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Distinct real parts `a_1 < ... < a_p`.
    pub exponents: Vec<f64>,
    /// Projector onto `V_i` along the sum of the other subspaces.
    pub projectors: Vec<SquareMatrix>,
    /// `dim V_i`.
    pub dims: Vec<usize>,
    /// Columns: a basis of `R^d` adapted to the direct sum, block `i` spanning `V_i`.
    pub basis: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn p(&self) -> usize {
        self.exponents.len()
    }

    pub fn a_min(&self) -> f64 {
        self.exponents[0]
    }

    pub fn a_max(&self) -> f64 {
        *self.exponents.last().unwrap()
    }

    pub fn require_positive(self) -> Result<Self> {
        if self.exponents[0] <= 0.0 {
            return Err(Error::Domain(format!(
                "scaling matrix has eigenvalue real part {} <= 0",
                self.exponents[0]
            )));
        }
        Ok(self)
    }
}

/// Default clustering tolerance, `1e-6 (1 + ||A||_F)`.
///
/// Defective eigenvalues are perturbed at order sqrt(machine epsilon) by any Schur solver, so a
/// tighter default splits Jordan blocks.
pub fn default_group_tol(a: &SquareMatrix) -> f64 {
    1e-6 * (1.0 + a.frobenius())
}

pub fn spectral_decompose(a: &SquareMatrix, group_tol: f64) -> Result<SpectralDecomposition> {
    if !(group_tol > 0.0) {
        return invalid("group tolerance must be positive");
    }
    let n = a.order();
    let m = a.as_dmatrix();
    let eig: Vec<Complex64> = if n == 1 {
        vec![Complex64::new(m[(0, 0)], 0.0)]
    } else {
        let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
        schur.complex_eigenvalues().iter().copied().collect()
    };
    let mut eig = eig;
    eig.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap()));

    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for z in eig {
        match clusters.last_mut() {
            Some(c) if (z.re - c.last().unwrap().re).abs() <= group_tol => c.push(z),
            _ => clusters.push(vec![z]),
        }
    }

    let ident = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::zeros(n, n);
    let mut dims = Vec::new();
    let mut exponents = Vec::new();
    let mut col = 0;
    let imag_tol = 1e-7 * (1.0 + a.frobenius());
    for c in &clusters {
        let k = c.len();
        let mut f = ident.clone();
        for z in c {
            if z.im.abs() <= imag_tol {
                f = &f * (m - &ident * z.re);
            } else if z.im > 0.0 {
                f = &f * (m * m - m * (2.0 * z.re) + &ident * z.norm_sqr());
            }
        }
        let kernel = null_space(&f, k)?;
        for (i, v) in kernel.column_iter().enumerate() {
            basis.set_column(col + i, &v);
        }
        col += k;
        dims.push(k);
        exponents.push(c.iter().map(|z| z.re).sum::<f64>() / k as f64);
    }
    let inv = basis
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("invariant subspaces are not complementary".into()))?;
    let mut projectors = Vec::new();
    let mut at = 0;
    for &k in &dims {
        let mut sel = DMatrix::<f64>::zeros(n, n);
        for i in at..at + k {
            sel[(i, i)] = 1.0;
        }
        projectors.push(SquareMatrix::new(&basis * sel * &inv)?);
        at += k;
    }
    Ok(SpectralDecomposition { exponents, projectors, dims, basis })
}

/// Orthonormal basis of the `k`-dimensional (numerical) kernel of `f`.
fn null_space(f: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    if k == n {
        return Ok(DMatrix::identity(n, n));
    }
    let svd = f.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
    let mut out = DMatrix::zeros(n, k);
    for (c, &i) in idx.iter().take(k).enumerate() {
        out.set_column(c, &vt.row(i).transpose());
    }
    Ok(out)
}
