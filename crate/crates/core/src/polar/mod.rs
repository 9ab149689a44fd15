//! Polar coordinates `x = tau_A(x)^A l_A(x)` with respect to a scaling matrix `A`.
//!
//! The unit sphere is the unit sphere of the homogeneous norm
//! `||x||_0 = int_0^1 ||t^A x|| dt/t = int_0^inf ||exp(-sA) x|| ds`, taken in the adapted inner
//! product in which the spectral subspaces of `A` are orthogonal.

mod chart;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{default_group_tol, spectral_decompose, MatrixFlow, SpectralDecomposition, SquareMatrix};
use crate::quad::CompositeRule;

pub use chart::{FastRadial2, PolarChart2};

const BASE_PANELS: usize = 32;
const PANEL_ORDER: usize = 8;
const MAX_NODES: usize = 16384;
const R_MIN: f64 = 1e-30;
const R_MAX: f64 = 1e30;

/// Quadrature settings of the homogeneous norm.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadSettings {
    pub nodes: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone)]
pub struct PolarContext {
    a: SquareMatrix,
    spectral: SpectralDecomposition,
    /// `W` with `||x|| = |W x|_2`; the metric is `W^T W`.
    whiten: DMatrix<f64>,
    flow: MatrixFlow,
    quad: QuadSettings,
    /// `W exp(-s_k A)` at every quadrature node, with its weight.
    node_maps: Vec<(f64, DMatrix<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarDecomposition {
    pub tau: f64,
    pub direction: Vec<f64>,
}

impl PolarContext {
    pub fn new(a: &SquareMatrix) -> Result<Self> {
        let spectral = spectral_decompose(a, default_group_tol(a))?.require_positive()?;
        let whiten = spectral
            .basis
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("adapted basis is singular".into()))?;
        let horizon = 60.0 / spectral.a_min();
        let flow = MatrixFlow::new(&a.scaled(-1.0));
        let mut ctx = PolarContext {
            a: a.clone(),
            spectral,
            whiten,
            flow,
            quad: QuadSettings { nodes: 0, horizon },
            node_maps: Vec::new(),
        };
        ctx.calibrate()?;
        Ok(ctx)
    }

    fn build_nodes(&self, panels: usize) -> Result<Vec<(f64, DMatrix<f64>)>> {
        let rule = CompositeRule::new(0.0, self.quad.horizon, panels, PANEL_ORDER);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&s, &w)| Ok((w, &self.whiten * self.flow.matrix(s)?)))
            .collect()
    }

    /// Doubles the node count until successive rules agree to 1e-9 on a probe set.
    fn calibrate(&mut self) -> Result<()> {
        let d = self.dim();
        let mut probes: Vec<Vec<f64>> = (0..d)
            .map(|i| self.spectral.basis.column(i).iter().copied().collect())
            .collect();
        probes.push(vec![1.0; d]);
        probes.push((0..d).map(|i| if i % 2 == 0 { 0.7 } else { -1.3 }).collect());
        let mut panels = BASE_PANELS;
        self.node_maps = self.build_nodes(panels)?;
        loop {
            let coarse: Vec<f64> = probes.iter().map(|p| self.norm_raw(p)).collect();
            if panels * PANEL_ORDER * 2 > MAX_NODES {
                return Err(Error::Numerical("homogeneous norm quadrature did not converge".into()));
            }
            panels *= 2;
            self.node_maps = self.build_nodes(panels)?;
            let ok = probes
                .iter()
                .zip(&coarse)
                .all(|(p, &c)| (self.norm_raw(p) - c).abs() <= 1e-9 * c.abs());
            if ok {
                self.quad.nodes = panels * PANEL_ORDER;
                return Ok(());
            }
        }
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn quad(&self) -> QuadSettings {
        self.quad
    }

    pub fn dim(&self) -> usize {
        self.a.order()
    }

    /// Symmetric positive definite Gram matrix of the adapted inner product.
    pub fn metric(&self) -> DMatrix<f64> {
        self.whiten.transpose() * &self.whiten
    }

    pub fn whiten(&self) -> &DMatrix<f64> {
        &self.whiten
    }

    /// Norm of the adapted inner product.
    pub fn norm(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            let v: f64 = (0..d).map(|j| self.whiten[(i, j)] * x[j]).sum();
            s += v * v;
        }
        s.sqrt()
    }

    /// `||u||_0` and its derivative along `du`.
    pub fn norm_with_derivative(&self, u: &[f64], du: &[f64]) -> (f64, f64) {
        let d = self.dim();
        let (mut n, mut dn) = (0.0, 0.0);
        let mut v = [0.0; crate::linalg::MAX_ORDER];
        let mut dv = [0.0; crate::linalg::MAX_ORDER];
        for (w, m) in &self.node_maps {
            for i in 0..d {
                v[i] = (0..d).map(|j| m[(i, j)] * u[j]).sum();
                dv[i] = (0..d).map(|j| m[(i, j)] * du[j]).sum();
            }
            let len = (0..d).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
            n += w * len;
            if len > 0.0 {
                dn += w * (0..d).map(|i| v[i] * dv[i]).sum::<f64>() / len;
            }
        }
        (n, dn)
    }

    fn norm_raw(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut total = 0.0;
        for (w, m) in &self.node_maps {
            let mut s = 0.0;
            for i in 0..d {
                let mut v = 0.0;
                for j in 0..d {
                    v += m[(i, j)] * x[j];
                }
                s += v * v;
            }
            total += w * s.sqrt();
        }
        total
    }

    /// `||x||_0`.
    pub fn homogeneous_norm(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite coordinates");
        }
        Ok(self.norm_raw(x))
    }

    /// `exp(-s A) x`.
    pub fn flow_apply(&self, s: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.flow.apply(s, x, &mut out)?;
        Ok(out)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return invalid(format!("vector of length {} for a matrix of order {}", x.len(), self.dim()));
        }
        Ok(())
    }

    /// `ln tau_A(x)` for `x != 0`.
    fn log_tau(&self, x: &[f64]) -> Result<f64> {
        let g = |s: f64| -> Result<f64> { Ok(self.norm_raw(&self.flow_apply(s, x)?)) };
        let nx = self.norm(x);
        let mut s = (nx.ln() / self.spectral.a_min()).clamp(R_MIN.ln(), R_MAX.ln());
        let (ln2, smin, smax) = (std::f64::consts::LN_2, R_MIN.ln(), R_MAX.ln());
        let mut gs = g(s)?;
        // bracket [lo, hi] with g(lo) >= 1 >= g(hi)
        let (mut lo, mut glo, mut hi, mut ghi);
        if gs >= 1.0 {
            lo = s;
            glo = gs;
            loop {
                let t = lo + ln2;
                if t > smax {
                    return Err(Error::Numerical("radial part bracket exceeds 1e30".into()));
                }
                let gt = g(t)?;
                if gt > glo {
                    return Err(Error::Numerical("homogeneous norm not decreasing along the flow".into()));
                }
                if gt <= 1.0 {
                    hi = t;
                    ghi = gt;
                    break;
                }
                lo = t;
                glo = gt;
            }
        } else {
            hi = s;
            ghi = gs;
            loop {
                let t = hi - ln2;
                if t < smin {
                    return Err(Error::Numerical("radial part bracket below 1e-30".into()));
                }
                let gt = g(t)?;
                if gt < ghi {
                    return Err(Error::Numerical("homogeneous norm not decreasing along the flow".into()));
                }
                if gt >= 1.0 {
                    lo = t;
                    glo = gt;
                    break;
                }
                hi = t;
                ghi = gt;
            }
        }
        // safeguarded Newton on ln g, using d/ds g(s) = -||exp(-sA) x||
        s = lo + (hi - lo) * glo.ln() / (glo.ln() - ghi.ln()).max(f64::MIN_POSITIVE);
        for _ in 0..100 {
            let y = self.flow_apply(s, x)?;
            gs = self.norm_raw(&y);
            let lg = gs.ln();
            if lg.abs() < 1e-14 {
                return Ok(s);
            }
            if gs > 1.0 {
                lo = s;
            } else {
                hi = s;
            }
            let slope = self.norm(&y) / gs;
            let mut next = s + lg / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() < 1e-15 * (1.0 + s.abs()) || hi - lo < 1e-15 * (1.0 + s.abs()) {
                return Ok(next);
            }
            s = next;
        }
        Ok(s)
    }

    /// `tau_A(x)`, with `tau_A(0) = 0`.
    pub fn radial_part(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite coordinates");
        }
        Ok(self.log_tau(x)?.exp())
    }

    /// `l_A(x) = tau_A(x)^{-A} x`.
    pub fn direction(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.polar(x)?.direction)
    }

    pub fn polar(&self, x: &[f64]) -> Result<PolarDecomposition> {
        self.check_len(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::Domain("direction of the zero vector".into()));
        }
        let s = self.log_tau(x)?;
        Ok(PolarDecomposition { tau: s.exp(), direction: self.flow_apply(s, x)? })
    }

    /// `r^A x`.
    pub fn power_apply(&self, r: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(r > 0.0) {
            return invalid("power base must be positive");
        }
        self.flow_apply(-r.ln(), x)
    }

    /// Empirical constants of the two-sided growth bounds of `tau_A` against `||x||`.
    pub fn verify_growth_bounds(&self, samples: usize, eps: f64, seed: u64) -> Result<BoundReport> {
        let a1 = self.spectral.a_min();
        let ap = self.spectral.a_max();
        if !(eps > 0.0 && eps < a1.min(1.0 / a1) / 10.0) {
            return invalid(format!("eps must lie in (0, {})", a1.min(1.0 / a1) / 10.0));
        }
        if samples == 0 {
            return invalid("need at least one sample");
        }
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo_exp, hi_exp) = (1.0 / a1 + eps, 1.0 / ap - eps);
        let mut rep = BoundReport {
            samples,
            eps,
            k1: f64::INFINITY,
            k2: 0.0,
            k3: f64::INFINITY,
            k4: 0.0,
            n_small: 0,
            n_large: 0,
            small_norm_tau_max: 0.0,
        };
        for _ in 0..samples {
            let mut u: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let un = self.norm(&u);
            if un == 0.0 {
                continue;
            }
            let r = 10f64.powf(rng.random::<f64>() * 12.0 - 6.0);
            u.iter_mut().for_each(|v| *v *= r / un);
            let n = self.norm(&u);
            let t = self.radial_part(&u)?;
            if n <= 1e-5 {
                rep.small_norm_tau_max = rep.small_norm_tau_max.max(t);
            }
            if t <= 1.0 {
                rep.n_small += 1;
                rep.k1 = rep.k1.min(t / n.powf(lo_exp));
                rep.k2 = rep.k2.max(t / n.powf(hi_exp));
            }
            if t >= 1.0 {
                rep.n_large += 1;
                rep.k3 = rep.k3.min(t / n.powf(hi_exp));
                rep.k4 = rep.k4.max(t / n.powf(lo_exp));
            }
        }
        if rep.n_small + rep.n_large == 0 {
            return invalid("degenerate sampling");
        }
        Ok(rep)
    }
}

/// Extremes of `tau(x) / ||x||^e` in the regions `tau <= 1` and `tau >= 1`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub samples: usize,
    pub eps: f64,
    /// `min tau/||x||^{1/a_1+eps}` over `tau <= 1`.
    pub k1: f64,
    /// `max tau/||x||^{1/a_p-eps}` over `tau <= 1`.
    pub k2: f64,
    /// `min tau/||x||^{1/a_p-eps}` over `tau >= 1`.
    pub k3: f64,
    /// `max tau/||x||^{1/a_1+eps}` over `tau >= 1`.
    pub k4: f64,
    pub n_small: usize,
    pub n_large: usize,
    /// Largest radial part seen among samples with `||x|| <= 1e-5`.
    pub small_norm_tau_max: f64,
}

impl BoundReport {
    pub fn constants(&self) -> [f64; 4] {
        [self.k1, self.k2, self.k3, self.k4]
    }

    pub fn all_finite_positive(&self) -> bool {
        self.n_small > 0
            && self.n_large > 0
            && self.constants().iter().all(|k| k.is_finite() && *k > 0.0)
    }
}
