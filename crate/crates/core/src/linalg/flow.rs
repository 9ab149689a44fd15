use nalgebra::DMatrix;

use super::{mat_exp, SquareMatrix};
use crate::error::Result;

/// Fast evaluation of the one-parameter group `s -> exp(s A)`.
///
/// Orders 1 and 2 use closed forms; larger orders fall back to Padé.
#[derive(Debug, Clone)]
pub enum MatrixFlow {
    Scalar(f64),
    /// Real distinct eigenvalues `l1 > l2` with spectral projectors.
    TwoReal { l1: f64, l2: f64, p1: [f64; 4], p2: [f64; 4] },
    /// `exp(s mu) (c(s) I + S(s) (A - mu I))` with `c, S` from `delta^2` (cosh/sinh or cos/sin).
    TwoShifted { mu: f64, delta2: f64, b: [f64; 4] },
    General(SquareMatrix),
}

impl MatrixFlow {
    pub fn new(a: &SquareMatrix) -> Self {
        match a.order() {
            1 => MatrixFlow::Scalar(a[(0, 0)]),
            2 => {
                let (p, q, r, t) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
                let mu = 0.5 * (p + t);
                let delta2 = 0.25 * (p - t) * (p - t) + q * r;
                let b = [p - mu, q, r, t - mu];
                let thr = 1e-3 * (1.0 + mu.abs());
                if delta2 > thr * thr {
                    let dl = delta2.sqrt();
                    let (l1, l2) = (mu + dl, mu - dl);
                    let inv = 1.0 / (2.0 * dl);
                    let p1 = [(p - l2) * inv, q * inv, r * inv, (t - l2) * inv];
                    let p2 = [(l1 - p) * inv, -q * inv, -r * inv, (l1 - t) * inv];
                    MatrixFlow::TwoReal { l1, l2, p1, p2 }
                } else {
                    MatrixFlow::TwoShifted { mu, delta2, b }
                }
            }
            _ => MatrixFlow::General(a.clone()),
        }
    }

    pub fn order(&self) -> usize {
        match self {
            MatrixFlow::Scalar(_) => 1,
            MatrixFlow::TwoReal { .. } | MatrixFlow::TwoShifted { .. } => 2,
            MatrixFlow::General(a) => a.order(),
        }
    }

    /// Row-major entries of `exp(s A)` for order 2.
    #[inline]
    pub fn two(&self, s: f64) -> [f64; 4] {
        match *self {
            MatrixFlow::TwoReal { l1, l2, p1, p2 } => {
                let (e1, e2) = ((s * l1).exp(), (s * l2).exp());
                [
                    e1 * p1[0] + e2 * p2[0],
                    e1 * p1[1] + e2 * p2[1],
                    e1 * p1[2] + e2 * p2[2],
                    e1 * p1[3] + e2 * p2[3],
                ]
            }
            MatrixFlow::TwoShifted { mu, delta2, b } => {
                let (c, sh) = if delta2 > 0.0 {
                    let dl = delta2.sqrt();
                    ((s * dl).cosh(), (s * dl).sinh() / dl)
                } else if delta2 < 0.0 {
                    let w = (-delta2).sqrt();
                    ((s * w).cos(), (s * w).sin() / w)
                } else {
                    (1.0, s)
                };
                let e = (s * mu).exp();
                [e * (c + sh * b[0]), e * sh * b[1], e * sh * b[2], e * (c + sh * b[3])]
            }
            _ => panic!("two() called on a flow of order {}", self.order()),
        }
    }

    pub fn matrix(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok(match self {
            MatrixFlow::Scalar(a) => DMatrix::from_element(1, 1, (s * a).exp()),
            MatrixFlow::General(a) => mat_exp(&a.scaled(s))?.into_dmatrix(),
            _ => {
                let m = self.two(s);
                DMatrix::from_row_slice(2, 2, &m)
            }
        })
    }

    /// `exp(s A) x` written into `out`.
    pub fn apply(&self, s: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            MatrixFlow::Scalar(a) => out[0] = (s * a).exp() * x[0],
            MatrixFlow::General(_) => {
                let m = self.matrix(s)?;
                for i in 0..x.len() {
                    out[i] = (0..x.len()).map(|j| m[(i, j)] * x[j]).sum();
                }
            }
            _ => {
                let m = self.two(s);
                out[0] = m[0] * x[0] + m[1] * x[1];
                out[1] = m[2] * x[0] + m[3] * x[1];
            }
        }
        Ok(())
    }
}
