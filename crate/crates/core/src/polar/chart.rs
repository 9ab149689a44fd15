use std::f64::consts::PI;

use super::PolarContext;
use crate::error::{Error, Result};
use crate::linalg::MatrixFlow;
use crate::linalg::SquareMatrix;

const TABLE: usize = 16384;

/// Angular parameterisation of the unit sphere `{tau = 1}` of a 2x2 scaling matrix.
///
/// `u(theta) = basis (cos theta, sin theta)` has unit adapted norm, `n(theta) = ||u(theta)||_0`
/// and `l(theta) = u(theta) / n(theta)`. The polar measure is `J(theta) dtheta` with
/// `J = |det[A l, l']|`, so that `dxi = tau^{q-1} dtau J dtheta`.
#[derive(Debug, Clone)]
pub struct PolarChart2 {
    basis: [f64; 4],
    a: [f64; 4],
    /// `n` and `n'` on `theta_k = k pi / TABLE`, `k = 0..=TABLE`.
    n: Vec<f64>,
    dn: Vec<f64>,
}

impl PolarChart2 {
    pub fn new(ctx: &PolarContext) -> Result<Self> {
        if ctx.dim() != 2 {
            return Err(Error::Unsupported("polar chart needs a 2x2 matrix".into()));
        }
        let b = &ctx.spectral().basis;
        let basis = [b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]];
        let m = ctx.matrix();
        let a = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
        let mut n = Vec::with_capacity(TABLE + 1);
        let mut dn = Vec::with_capacity(TABLE + 1);
        for k in 0..=TABLE {
            let th = PI * k as f64 / TABLE as f64;
            let (u, du) = Self::u_raw(&basis, th);
            let (nv, dv) = ctx.norm_with_derivative(&u, &du);
            n.push(nv);
            dn.push(dv);
        }
        Ok(PolarChart2 { basis, a, n, dn })
    }

    fn u_raw(b: &[f64; 4], th: f64) -> ([f64; 2], [f64; 2]) {
        let (s, c) = th.sin_cos();
        ([b[0] * c + b[1] * s, b[2] * c + b[3] * s], [-b[0] * s + b[1] * c, -b[2] * s + b[3] * c])
    }

    /// `(n(theta), n'(theta))` by cubic Hermite interpolation; `n` has period `pi`.
    #[inline]
    pub fn n(&self, th: f64) -> (f64, f64) {
        let t = th.rem_euclid(PI) * (TABLE as f64 / PI);
        let k = (t.floor() as usize).min(TABLE - 1);
        let f = t - k as f64;
        let h = PI / TABLE as f64;
        let (y0, y1) = (self.n[k], self.n[k + 1]);
        let (m0, m1) = (self.dn[k] * h, self.dn[k + 1] * h);
        let f2 = f * f;
        let f3 = f2 * f;
        let v = (2.0 * f3 - 3.0 * f2 + 1.0) * y0
            + (f3 - 2.0 * f2 + f) * m0
            + (-2.0 * f3 + 3.0 * f2) * y1
            + (f3 - f2) * m1;
        let dv = ((6.0 * f2 - 6.0 * f) * y0
            + (3.0 * f2 - 4.0 * f + 1.0) * m0
            + (-6.0 * f2 + 6.0 * f) * y1
            + (3.0 * f2 - 2.0 * f) * m1)
            / h;
        (v, dv)
    }

    /// Point `l(theta)` of the unit sphere.
    pub fn l(&self, th: f64) -> [f64; 2] {
        let (u, _) = Self::u_raw(&self.basis, th);
        let (n, _) = self.n(th);
        [u[0] / n, u[1] / n]
    }

    /// Density of the polar measure on the sphere with respect to `dtheta`.
    pub fn jacobian(&self, th: f64) -> f64 {
        let (u, du) = Self::u_raw(&self.basis, th);
        let (n, dn) = self.n(th);
        let l = [u[0] / n, u[1] / n];
        let dl = [du[0] / n - u[0] * dn / (n * n), du[1] / n - u[1] * dn / (n * n)];
        let al = [self.a[0] * l[0] + self.a[1] * l[1], self.a[2] * l[0] + self.a[3] * l[1]];
        (al[0] * dl[1] - al[1] * dl[0]).abs()
    }
}

/// Fast radial part for 2x2 matrices: Newton in `s = ln tau` on the tabulated norm.
#[derive(Debug, Clone)]
pub struct FastRadial2 {
    chart: PolarChart2,
    /// `W`: adapted coordinates `z = W x` (with `x = basis z`).
    w: [f64; 4],
    /// Flow of `-C`, `C = W A W^{-1}`, acting on adapted coordinates.
    flow: MatrixFlow,
    c: [f64; 4],
    a_mid: f64,
}

impl FastRadial2 {
    pub fn new(ctx: &PolarContext) -> Result<Self> {
        let chart = PolarChart2::new(ctx)?;
        let w = ctx.whiten();
        let wm = [w[(0, 0)], w[(0, 1)], w[(1, 0)], w[(1, 1)]];
        let cm = w * ctx.matrix().as_dmatrix() * &ctx.spectral().basis;
        let c = [cm[(0, 0)], cm[(0, 1)], cm[(1, 0)], cm[(1, 1)]];
        let flow = MatrixFlow::new(&SquareMatrix::new(-cm)?);
        let sp = ctx.spectral();
        let a_mid = 0.5 * (sp.a_min() + sp.a_max());
        Ok(FastRadial2 { chart, w: wm, flow, c, a_mid })
    }

    pub fn chart(&self) -> &PolarChart2 {
        &self.chart
    }

    #[inline]
    fn log_norm0(&self, z: [f64; 2]) -> (f64, f64) {
        // ln ||z||_0 and d/ds along dz/ds = -C z
        let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
        let th = z[1].atan2(z[0]);
        let (n, dn) = self.chart.n(th);
        let zh = [z[0] / r, z[1] / r];
        let zp = [-zh[1], zh[0]];
        let dz = [-(self.c[0] * z[0] + self.c[1] * z[1]), -(self.c[2] * z[0] + self.c[3] * z[1])];
        let grad = [n * zh[0] + dn * zp[0], n * zh[1] + dn * zp[1]];
        ((r * n).ln(), (grad[0] * dz[0] + grad[1] * dz[1]) / (r * n))
    }

    /// `ln tau(x)`; `-inf` at the origin.
    pub fn log_tau(&self, x: [f64; 2]) -> f64 {
        let z0 = [self.w[0] * x[0] + self.w[1] * x[1], self.w[2] * x[0] + self.w[3] * x[1]];
        if z0[0] == 0.0 && z0[1] == 0.0 {
            return f64::NEG_INFINITY;
        }
        let (g0, _) = self.log_norm0(z0);
        let mut s = g0 / self.a_mid;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..60 {
            let m = self.flow.two(s);
            let z = [m[0] * z0[0] + m[1] * z0[1], m[2] * z0[0] + m[3] * z0[1]];
            let (g, dg) = self.log_norm0(z);
            if g.abs() < 1e-13 {
                return s;
            }
            if g > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let mut next = if dg < 0.0 { s - g / dg } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else if lo.is_finite() {
                    lo + 1.0
                } else {
                    hi - 1.0
                };
            }
            if (next - s).abs() < 1e-14 * (1.0 + s.abs()) {
                return next;
            }
            s = next;
        }
        s
    }

    pub fn tau(&self, x: [f64; 2]) -> f64 {
        self.log_tau(x).exp()
    }
}
