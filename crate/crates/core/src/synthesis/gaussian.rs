//! Gaussian (`alpha = 2`) synthesis on a frequency lattice evaluated by FFT.
//!
//! Each block `j` gets a lattice with `L_a` classes per axis and spacing `dxi_a = 2 pi / (L_a dx_a)`.
//! On grid points every alias `xi + n L dxi` of a class has the same phase, so the spectral
//! mass of all images is folded into the class weight. The origin cell is replaced by `d_j`
//! linear modes carrying its exact second moment.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::rng::{complex_normal, positioned, CHUNK};
use super::{FieldRealization, GridSpec, Method, SynthParams};
use crate::error::{invalid, Error, Result};
use crate::quad::{adaptive_breaks, Adaptive};
use crate::scale::SheetSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianOptions {
    /// Minimum lattice size per axis (at least 16).
    pub nfreq: usize,
    /// Lattice period as a multiple of the smallest admissible one (`2 x extent`).
    pub oversample: usize,
    /// Alias images folded on each side for one-dimensional blocks.
    pub images_1d: usize,
    /// Alias images folded on each side for two-dimensional blocks.
    pub images_2d: usize,
    /// Budget on the number of complex lattice coefficients.
    pub max_cells: usize,
}

impl Default for GaussianOptions {
    fn default() -> Self {
        GaussianOptions { nfreq: 16, oversample: 4, images_1d: 64, images_2d: 2, max_cells: 1 << 25 }
    }
}

/// Which grid indices of a block are produced.
#[derive(Debug, Clone)]
pub(crate) enum Selection {
    All,
    /// A single point, given by its per-axis grid indices.
    One(Vec<usize>),
}

struct BlockLattice {
    /// Grid axes covered by the block.
    axes: Vec<usize>,
    n: Vec<usize>,
    l: Vec<usize>,
    offset: Vec<i64>,
    dx: Vec<f64>,
    dxi: Vec<f64>,
    /// Square-root class weights, row-major over `l`; the origin class is 0.
    sw: Vec<f64>,
    /// Rows `r` of `R^T` with `R R^T` the origin-cell second moment.
    lin: Vec<Vec<f64>>,
    ffts: Vec<Arc<dyn Fft<f64>>>,
    omega: Vec<f64>,
}

impl BlockLattice {
    fn dim(&self) -> usize {
        self.axes.len()
    }

    fn classes(&self) -> usize {
        self.l.iter().product()
    }

    fn coeffs(&self) -> usize {
        self.classes() + self.dim()
    }

    fn outputs(&self, sel: &Selection) -> usize {
        match sel {
            Selection::All => self.n.iter().product(),
            Selection::One(_) => 1,
        }
    }

    fn coord(&self, a: usize, i: usize) -> f64 {
        (self.offset[a] + i as i64) as f64 * self.dx[a]
    }

    fn class_index(&self, a: usize, i: usize) -> usize {
        (self.offset[a] + i as i64).rem_euclid(self.l[a] as i64) as usize
    }

    fn grid_points(&self, sel: &Selection) -> Vec<Vec<usize>> {
        match sel {
            Selection::One(ix) => vec![ix.clone()],
            Selection::All => {
                if self.dim() == 1 {
                    (0..self.n[0]).map(|i| vec![i]).collect()
                } else {
                    let mut v = Vec::with_capacity(self.n[0] * self.n[1]);
                    for i in 0..self.n[0] {
                        for k in 0..self.n[1] {
                            v.push(vec![i, k]);
                        }
                    }
                    v
                }
            }
        }
    }

    fn linear(&self, lin: &[Complex64], ix: &[usize]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (r, row) in self.lin.iter().enumerate() {
            let proj: f64 = row.iter().enumerate().map(|(a, c)| c * self.coord(a, ix[a])).sum();
            acc += lin[r] * proj;
        }
        Complex64::new(-acc.im, acc.re)
    }

    /// Maps one fiber of coefficients to block values `sum_k c_k (e^{i<x, xi_k>} - 1) + linear`.
    fn apply(&self, fiber: &[Complex64], sel: &Selection) -> Vec<Complex64> {
        let nc = self.classes();
        let (cls, lin) = fiber.split_at(nc);
        let mut buf = cls.to_vec();
        let pts = self.grid_points(sel);
        if self.dim() == 1 {
            let mut scratch = vec![Complex64::new(0.0, 0.0); self.ffts[0].get_inplace_scratch_len()];
            self.ffts[0].process_with_scratch(&mut buf, &mut scratch);
            let f0 = buf[0];
            pts.iter().map(|ix| buf[self.class_index(0, ix[0])] - f0 + self.linear(lin, ix)).collect()
        } else {
            let (l0, l1) = (self.l[0], self.l[1]);
            let f1 = &self.ffts[1];
            buf.par_chunks_mut(l1).for_each_init(
                || vec![Complex64::new(0.0, 0.0); f1.get_inplace_scratch_len()],
                |s, row| f1.process_with_scratch(row, s),
            );
            let mut t = vec![Complex64::new(0.0, 0.0); nc];
            transpose(&buf, &mut t, l0, l1);
            let f0 = &self.ffts[0];
            t.par_chunks_mut(l0).for_each_init(
                || vec![Complex64::new(0.0, 0.0); f0.get_inplace_scratch_len()],
                |s, col| f0.process_with_scratch(col, s),
            );
            let at = |i0: usize, i1: usize| t[i1 * l0 + i0];
            let base = at(0, 0);
            pts.iter()
                .map(|ix| at(self.class_index(0, ix[0]), self.class_index(1, ix[1])) - base + self.linear(lin, ix))
                .collect()
        }
    }

    /// `sum_k w_k |e^{i<x, xi_k>} - 1|^2 + |R^T x|^2` at one grid point.
    fn power(&self, ix: &[usize]) -> f64 {
        let x: Vec<f64> = (0..self.dim()).map(|a| self.coord(a, ix[a])).collect();
        let mut lin = 0.0;
        for row in &self.lin {
            let p: f64 = row.iter().zip(&x).map(|(c, v)| c * v).sum();
            lin += p * p;
        }
        let mut acc = 0.0;
        let nc = self.classes();
        for c in 0..nc {
            let w = self.sw[c];
            if w == 0.0 {
                continue;
            }
            let ph = if self.dim() == 1 {
                x[0] * signed(c, self.l[0]) as f64 * self.dxi[0]
            } else {
                let (c0, c1) = (c / self.l[1], c % self.l[1]);
                x[0] * signed(c0, self.l[0]) as f64 * self.dxi[0] + x[1] * signed(c1, self.l[1]) as f64 * self.dxi[1]
            };
            acc += w * w * 2.0 * (1.0 - ph.cos());
        }
        acc + lin
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const T: usize = 32;
    for rb in (0..rows).step_by(T) {
        for cb in (0..cols).step_by(T) {
            for r in rb..(rb + T).min(rows) {
                for c in cb..(cb + T).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// FFT class index to signed frequency index.
#[inline]
fn signed(k: usize, l: usize) -> i64 {
    if k < l / 2 {
        k as i64
    } else {
        k as i64 - l as i64
    }
}

/// Reusable Gaussian synthesizer for one `(spec, grid, options)`.
pub struct GaussianPlan {
    params: crate::scale::SheetParams,
    grid: GridSpec,
    opts: GaussianOptions,
    blocks: Vec<BlockLattice>,
}

impl GaussianPlan {
    pub fn new(spec: &SheetSpec, grid: &GridSpec, opts: GaussianOptions) -> Result<Self> {
        if spec.alpha() != 2.0 {
            return invalid("the spectral synthesizer needs alpha = 2; use the LePage path");
        }
        if grid.d() != spec.d() {
            return invalid(format!("grid has {} axes, sheet has {}", grid.d(), spec.d()));
        }
        if opts.nfreq < 16 {
            return invalid("nfreq must be at least 16");
        }
        if opts.oversample == 0 || opts.images_1d == 0 || opts.images_2d == 0 {
            return invalid("oversample and image counts must be positive");
        }
        let mut blocks = Vec::with_capacity(spec.m());
        let mut cells = 1usize;
        for j in 0..spec.m() {
            let off = spec.layout().offset(j);
            let dj = spec.dims()[j];
            if dj > 2 {
                return Err(Error::Unsupported("spectral synthesis supports blocks of dimension <= 2".into()));
            }
            let axes: Vec<usize> = (off..off + dj).collect();
            let mut l = Vec::new();
            let mut offset = Vec::new();
            let mut dx = Vec::new();
            let mut n = Vec::new();
            for &a in &axes {
                let o = grid.lattice_offset(a)?;
                let reach = o.abs().max((o + grid.counts[a] as i64 - 1).abs()).max(1) as usize;
                let li = (2 * reach * opts.oversample).next_power_of_two().max(opts.nfreq.next_power_of_two());
                l.push(li);
                offset.push(o);
                dx.push(grid.spacing(a));
                n.push(grid.counts[a]);
            }
            let c: usize = l.iter().product::<usize>() + dj;
            cells = cells.saturating_mul(c);
            if cells > opts.max_cells {
                return Err(Error::Resource(format!("{cells} lattice coefficients exceed the budget {}", opts.max_cells)));
            }
            let dxi: Vec<f64> = l.iter().zip(&dx).map(|(li, h)| std::f64::consts::TAU / (*li as f64 * h)).collect();
            let mut planner = FftPlanner::new();
            let ffts = l.iter().map(|&li| planner.plan_fft_inverse(li)).collect();
            let images = if dj == 1 { opts.images_1d } else { opts.images_2d };
            let omega = l.iter().zip(&dxi).map(|(li, h)| (images as f64 + 0.5) * *li as f64 * h).collect();
            let mut b = BlockLattice { axes, n, l, offset, dx, dxi, sw: Vec::new(), lin: Vec::new(), ffts, omega };
            let weights = Weights::new(spec, j, &b, images)?;
            b.sw = weights.sw;
            b.lin = weights.lin;
            blocks.push(b);
        }
        Ok(GaussianPlan { params: spec.params().clone(), grid: grid.clone(), opts, blocks })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Per-axis lattice sizes.
    pub fn nfreq(&self) -> Vec<usize> {
        self.blocks.iter().flat_map(|b| b.l.iter().copied()).collect()
    }

    /// Per-axis folding cutoff beyond which the spectral tail is estimated, not summed.
    pub fn omega(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.omega.iter().copied()).collect()
    }

    /// Exact variance of the synthesized value at a grid point (multi-index over all axes).
    pub fn variance_at(&self, ix: &[usize]) -> f64 {
        let mut v = 0.5;
        for b in &self.blocks {
            let local: Vec<usize> = b.axes.iter().map(|&a| ix[a]).collect();
            v *= b.power(&local);
        }
        v
    }

    pub fn synthesize(&self, seed: u64) -> Result<FieldRealization> {
        let sel = vec![Selection::All; self.blocks.len()];
        let values = self.realize(seed, &sel);
        Ok(FieldRealization {
            params: self.params.clone(),
            grid: self.grid.clone(),
            values,
            seed,
            method: Method::GaussianSpectral,
            synth: SynthParams::Gaussian { nfreq: self.nfreq(), omega: self.omega(), options: self.opts },
            tail_indicator: None,
        })
    }

    fn coefficients(&self, seed: u64) -> Vec<Complex64> {
        let dims: Vec<usize> = self.blocks.iter().map(|b| b.coeffs()).collect();
        let total: usize = dims.iter().product();
        let mut out = vec![Complex64::new(0.0, 0.0); total];
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
            let start = ci * CHUNK;
            let mut rng = positioned(seed, 0, start as u64);
            for (o, slot) in chunk.iter_mut().enumerate() {
                let z = complex_normal(&mut rng);
                let mut rem = start + o;
                let mut w = 1.0;
                for (b, d) in self.blocks.iter().zip(&dims).rev() {
                    let k = rem % d;
                    rem /= d;
                    if k < b.classes() {
                        w *= b.sw[k];
                    }
                }
                *slot = z * w;
            }
        });
        out
    }

    pub(crate) fn realize(&self, seed: u64, sel: &[Selection]) -> Vec<f64> {
        let mut t = self.coefficients(seed);
        let mut shape: Vec<usize> = self.blocks.iter().map(|b| b.coeffs()).collect();
        for (j, b) in self.blocks.iter().enumerate() {
            let prefix: usize = shape[..j].iter().product();
            let suffix: usize = shape[j + 1..].iter().product();
            let cj = shape[j];
            let oj = b.outputs(&sel[j]);
            let mut next = vec![Complex64::new(0.0, 0.0); prefix * oj * suffix];
            if suffix == 1 {
                next.par_chunks_mut(oj).zip(t.par_chunks(cj)).for_each(|(dst, src)| {
                    dst.copy_from_slice(&b.apply(src, &sel[j]));
                });
            } else {
                let fibers: Vec<Vec<Complex64>> = (0..prefix * suffix)
                    .into_par_iter()
                    .map(|f| {
                        let (p, s) = (f / suffix, f % suffix);
                        let base = p * cj * suffix + s;
                        let fiber: Vec<Complex64> = (0..cj).map(|c| t[base + c * suffix]).collect();
                        b.apply(&fiber, &sel[j])
                    })
                    .collect();
                for (f, vals) in fibers.into_iter().enumerate() {
                    let (p, s) = (f / suffix, f % suffix);
                    let base = p * oj * suffix + s;
                    for (o, v) in vals.into_iter().enumerate() {
                        next[base + o * suffix] = v;
                    }
                }
            }
            t = next;
            shape[j] = oj;
        }
        t.into_iter().map(|c| c.re).collect()
    }
}

/// Folded class weights and origin-cell factor for one block.
struct Weights {
    sw: Vec<f64>,
    lin: Vec<Vec<f64>>,
}

impl Weights {
    fn new(spec: &SheetSpec, j: usize, b: &BlockLattice, images: usize) -> Result<Self> {
        let h = spec.hurst()[j];
        let q = spec.q(j);
        let beta = 2.0 * h + q;
        let psi = spec.psi(j);
        let f = |xi: &[f64]| psi.eval_fast(xi).powf(-beta);
        let a = images as i64;
        if b.dim() == 1 {
            let l = b.l[0];
            let dxi = b.dxi[0];
            let e = spec.layout().block(j)?[(0, 0)];
            let (pp, pm) = (psi.eval_fast(&[1.0]).powf(-beta), psi.eval_fast(&[-1.0]).powf(-beta));
            let kc = (a as f64 + 0.5) * l as f64 * dxi;
            let s = beta / e;
            let tail = (pp + pm) * kc.powf(1.0 - s) / (s - 1.0) / l as f64;
            let sw: Vec<f64> = (0..l)
                .into_par_iter()
                .map(|k| {
                    let kk = signed(k, l);
                    if kk == 0 {
                        return 0.0;
                    }
                    let mut w = 0.0;
                    for n in -a..=a {
                        let m = kk + n * l as i64;
                        w += dxi * f(&[m as f64 * dxi]);
                    }
                    (w + tail).sqrt()
                })
                .collect();
            let hh = 0.5 * dxi;
            let m = (pp + pm) * hh.powf(3.0 - s) / (3.0 - s);
            return Ok(Weights { sw, lin: vec![vec![m.sqrt()]] });
        }
        let (l0, l1) = (b.l[0], b.l[1]);
        let (d0, d1) = (b.dxi[0], b.dxi[1]);
        let amax = spec.spectral(j).a_max();
        let gamma = 2.0 * h / amax;
        let af = a as f64;
        let ring_tail = af.powf(1.0 + gamma) * (af + 0.5).powf(-gamma) / gamma;
        let sw: Vec<f64> = (0..l0 * l1)
            .into_par_iter()
            .map(|c| {
                let (k0, k1) = (signed(c / l1, l0), signed(c % l1, l1));
                if k0 == 0 && k1 == 0 {
                    return 0.0;
                }
                let (mut inner, mut ring) = (0.0, 0.0);
                for n0 in -a..=a {
                    for n1 in -a..=a {
                        let (m0, m1) = (k0 + n0 * l0 as i64, k1 + n1 * l1 as i64);
                        let v = d0 * d1 * f(&[m0 as f64 * d0, m1 as f64 * d1]);
                        if n0.abs().max(n1.abs()) == a {
                            ring += v;
                        } else {
                            inner += v;
                        }
                    }
                }
                (inner + ring * (1.0 + ring_tail)).sqrt()
            })
            .collect();
        let mom = origin_moment_2d(&f, 0.5 * d0, 0.5 * d1);
        let r = nalgebra::Matrix2::new(mom[0], mom[1], mom[1], mom[2])
            .cholesky()
            .ok_or_else(|| Error::Numerical("origin-cell moment is not positive definite".into()))?
            .l();
        let rt = r.transpose();
        Ok(Weights { sw, lin: vec![vec![rt[(0, 0)], rt[(0, 1)]], vec![rt[(1, 0)], rt[(1, 1)]]] })
    }
}

/// `int xi xi^T f(xi)` over `[-h0, h0] x [-h1, h1]`, as `[m00, m01, m11]`.
fn origin_moment_2d(f: &(impl Fn(&[f64]) -> f64 + Sync), h0: f64, h1: f64) -> [f64; 3] {
    let geo = |h: f64| -> Vec<f64> {
        let mut v: Vec<f64> = (0..40).rev().map(|k| h * 0.5f64.powi(k)).collect();
        v.insert(0, 0.0);
        v
    };
    let outer_breaks = geo(h0);
    let pos = geo(h1);
    let mut inner_breaks: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
    inner_breaks.extend_from_slice(&pos[1..]);
    let opts = Adaptive { abs_tol: 0.0, rel_tol: 1e-8, max_panels: 2000 };
    let inner = |x0: f64, p: usize, abs_tol: f64| {
        let g = |x1: f64| {
            let w = match p {
                0 => x0 * x0,
                1 => x0 * x1,
                _ => x1 * x1,
            };
            if w == 0.0 {
                0.0
            } else {
                w * f(&[x0, x1])
            }
        };
        adaptive_breaks(g, &inner_breaks, Adaptive { abs_tol, ..opts }).0
    };
    let diag: Vec<f64> = [0usize, 2]
        .into_par_iter()
        .map(|p| 2.0 * adaptive_breaks(|x0| inner(x0, p, 0.0), &outer_breaks, opts).0)
        .collect();
    // the cross moment may vanish by symmetry; bound it through Cauchy-Schwarz
    let cross = |x0: f64| {
        let b = (inner(x0, 0, 0.0) * inner(x0, 2, 0.0)).sqrt();
        inner(x0, 1, 1e-10 * b)
    };
    let scale = (diag[0] * diag[1]).sqrt();
    let m01 = 2.0 * adaptive_breaks(cross, &outer_breaks, Adaptive { abs_tol: 1e-10 * scale, ..opts }).0;
    [diag[0], m01, diag[1]]
}
