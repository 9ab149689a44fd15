use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{gamma_block, BlockModel, ScaleValue, SheetSpec};
use crate::error::{invalid, Error, Result};
use crate::homogeneous::PsiSpec;

/// Randomised quasi-Monte-Carlo settings: `shifts` Cranley–Patterson shifts of a Halton set of `points`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QmcOptions {
    pub shifts: usize,
    pub points: usize,
    pub seed: u64,
}

impl Default for QmcOptions {
    fn default() -> Self {
        QmcOptions { shifts: 16, points: 8192, seed: 0x5151_0a0b }
    }
}

fn check_points(spec: &SheetSpec, x: &[f64], y: &[f64]) -> Result<()> {
    let d = spec.d();
    if x.len() != d || y.len() != d {
        return invalid(format!("points must have {d} coordinates"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return invalid("non-finite coordinates");
    }
    Ok(())
}

/// Orders the pair so that `sigma(x, y)` and `sigma(y, x)` run the same arithmetic.
fn canonical<'a>(x: &'a [f64], y: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    for (a, b) in x.iter().zip(y) {
        if a < b {
            return (x, y);
        }
        if a > b {
            return (y, x);
        }
    }
    (x, y)
}

struct Split {
    /// Blocks where the points differ.
    differ: Vec<usize>,
    /// Product of `Gamma^i(x_i)` over the shared blocks, with its relative error.
    shared: f64,
    shared_rel: f64,
}

fn split(spec: &SheetSpec, x: &[f64], y: &[f64]) -> Result<Split> {
    let xs = spec.layout().split(x);
    let ys = spec.layout().split(y);
    let mut differ = Vec::new();
    let mut shared = 1.0;
    let mut shared_rel = 0.0;
    for j in 0..spec.m() {
        if xs[j] != ys[j] {
            differ.push(j);
        } else {
            let g = gamma_block(spec, j, xs[j])?;
            shared *= g.value;
            if g.value > 0.0 {
                shared_rel += g.est_abs_error / g.value;
            }
        }
    }
    Ok(Split { differ, shared, shared_rel })
}

fn root(spec: &SheetSpec, power: f64, abs_err: f64) -> ScaleValue {
    let a = spec.alpha();
    let value = power.max(0.0).powf(1.0 / a);
    let est_abs_error = if power > 0.0 { value * abs_err / (a * power) } else { abs_err.powf(1.0 / a) };
    ScaleValue { value, est_abs_error }
}

/// `sigma(x, y) = (E|X(x) - X(y)|^alpha)^{1/alpha}` in scale terms.
///
/// Exact reductions: a single differing block factorises, and `alpha = 2` polarises into
/// `Gamma` values. Other cases use [`sigma_qmc`] with its statistical error.
pub fn sigma(spec: &SheetSpec, x: &[f64], y: &[f64]) -> Result<ScaleValue> {
    check_points(spec, x, y)?;
    let (x, y) = canonical(x, y);
    let sp = split(spec, x, y)?;
    if sp.differ.is_empty() || sp.shared == 0.0 {
        return Ok(ScaleValue::ZERO);
    }
    let xs = spec.layout().split(x);
    let ys = spec.layout().split(y);
    if sp.differ.len() == 1 {
        let j = sp.differ[0];
        let diff: Vec<f64> = xs[j].iter().zip(ys[j]).map(|(a, b)| a - b).collect();
        let g = gamma_block(spec, j, &diff)?;
        let p = sp.shared * g.value;
        let err = p * sp.shared_rel + sp.shared * g.est_abs_error;
        return Ok(root(spec, p, err));
    }
    if spec.alpha() == 2.0 {
        return polarised(spec, &sp, &xs, &ys);
    }
    sigma_qmc(spec, x, y, QmcOptions::default())
}

fn polarised(spec: &SheetSpec, sp: &Split, xs: &[&[f64]], ys: &[&[f64]]) -> Result<ScaleValue> {
    let (mut px, mut py, mut pc) = (1.0, 1.0, 1.0);
    let mut abs = 0.0;
    for &j in &sp.differ {
        let gx = gamma_block(spec, j, xs[j])?;
        let gy = gamma_block(spec, j, ys[j])?;
        let diff: Vec<f64> = xs[j].iter().zip(ys[j]).map(|(a, b)| a - b).collect();
        let gd = gamma_block(spec, j, &diff)?;
        px *= gx.value;
        py *= gy.value;
        pc *= 0.5 * (gx.value + gy.value - gd.value);
        abs += gx.est_abs_error + gy.est_abs_error + gd.est_abs_error;
    }
    let p = sp.shared * (px + py - 2.0 * pc);
    let err = p.abs() * sp.shared_rel + sp.shared * abs * (px + py).max(1.0);
    Ok(root(spec, p, err))
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// One block's sampler: `tau = tau_c t` with `t` from a two-sided power density and an angle.
pub(crate) struct BlockSampler<'a> {
    b: &'a BlockModel,
    h: f64,
    alpha: f64,
    tau_c: f64,
    beta0: f64,
    beta1: f64,
    w0: f64,
}

impl<'a> BlockSampler<'a> {
    fn new(spec: &'a SheetSpec, j: usize, xj: &[f64], yj: &[f64]) -> Result<Self> {
        let b = spec.block_model(j);
        let tx = b.tau_ctx.radial_part(xj)?;
        let ty = b.tau_ctx.radial_part(yj)?;
        Self::with_tau_c(spec, j, 1.0 / tx.max(ty))
    }

    pub(crate) fn with_tau_c(spec: &'a SheetSpec, j: usize, tau_c: f64) -> Result<Self> {
        let b = spec.block_model(j);
        let h = spec.hurst()[j];
        let alpha = spec.alpha();
        let beta0 = alpha * (b.spectral.a_min() - h);
        let beta1 = alpha * h;
        if !(beta0 > 0.0 && beta1 > 0.0) {
            return Err(Error::Divergence("sigma integrand is not integrable for these Hurst indices".into()));
        }
        let w0 = (1.0 / beta0) / (1.0 / beta0 + 1.0 / beta1);
        Ok(BlockSampler { b, h, alpha, tau_c, beta0, beta1, w0 })
    }

    /// Maps `(u_radial, u_angle)` to `(xi, weight)` where `weight` is integrand measure over sampling density.
    pub(crate) fn sample(&self, ur: f64, ua: f64) -> ([f64; 2], f64) {
        let ur = ur.clamp(1e-300, 1.0 - 1e-16);
        let (t, pt) = if ur < self.w0 {
            let t = (ur / self.w0).powf(1.0 / self.beta0);
            (t, self.w0 * self.beta0 * t.powf(self.beta0 - 1.0))
        } else {
            let t = ((1.0 - ur) / (1.0 - self.w0)).powf(-1.0 / self.beta1);
            (t, (1.0 - self.w0) * self.beta1 * t.powf(-self.beta1 - 1.0))
        };
        let tau = self.tau_c * t;
        let density = pt / self.tau_c;
        let expo = -self.alpha * self.h - self.b.q;
        let (l, sphere_w) = if self.b.dim() == 1 {
            let (l0, mass) = self.b.sphere_1d();
            // two atoms of mass `mass`, each picked with probability 1/2
            ([if ua < 0.5 { l0 } else { -l0 }, 0.0], 2.0 * mass)
        } else {
            let chart = self.b.chart().unwrap();
            let th = 2.0 * std::f64::consts::PI * ua;
            let l = chart.l(th);
            (l, chart.jacobian(th) * 2.0 * std::f64::consts::PI)
        };
        let psi_l = match self.b.psi.spec() {
            PsiSpec::RadialTau => 1.0,
            _ => self.b.psi.eval_fast(&l[..self.b.dim()]),
        };
        let s = tau.ln();
        let xi = if self.b.dim() == 1 {
            [tau.powf(self.b.matrix[(0, 0)]) * l[0], 0.0]
        } else {
            let m = self.b.flow_t.two(s);
            [m[0] * l[0] + m[1] * l[1], m[2] * l[0] + m[3] * l[1]]
        };
        let w = tau.powf(-self.alpha * self.h - 1.0) * psi_l.powf(expo) * sphere_w / density;
        (xi, w)
    }
}

/// Randomised QMC estimate of `sigma(x, y)`; `est_abs_error` is one standard error over the shifts.
pub fn sigma_qmc(spec: &SheetSpec, x: &[f64], y: &[f64], opts: QmcOptions) -> Result<ScaleValue> {
    check_points(spec, x, y)?;
    if opts.shifts < 2 || opts.points == 0 {
        return invalid("QMC needs at least two shifts and one point");
    }
    let (x, y) = canonical(x, y);
    let sp = split(spec, x, y)?;
    if sp.differ.is_empty() || sp.shared == 0.0 {
        return Ok(ScaleValue::ZERO);
    }
    let xs = spec.layout().split(x);
    let ys = spec.layout().split(y);
    if 2 * sp.differ.len() > PRIMES.len() {
        return Err(Error::Unsupported("too many differing blocks for the Halton set".into()));
    }
    if sp.differ.iter().any(|&j| spec.block_model(j).dim() > 2) {
        return Err(Error::Unsupported("QMC sampler supports blocks of dimension <= 2".into()));
    }
    let samplers = sp
        .differ
        .iter()
        .map(|&j| BlockSampler::new(spec, j, xs[j], ys[j]))
        .collect::<Result<Vec<_>>>()?;
    let dim = 2 * samplers.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shifts: Vec<Vec<f64>> = (0..opts.shifts).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let alpha = spec.alpha();
    let means: Vec<f64> = shifts
        .par_iter()
        .map(|shift| {
            let mut acc = 0.0;
            for k in 1..=opts.points as u64 {
                let mut a = Complex64::new(1.0, 0.0);
                let mut b = Complex64::new(1.0, 0.0);
                let mut w = 1.0;
                for (i, s) in samplers.iter().enumerate() {
                    let ur = (radical_inverse(k, PRIMES[2 * i]) + shift[2 * i]).fract();
                    let ua = (radical_inverse(k, PRIMES[2 * i + 1]) + shift[2 * i + 1]).fract();
                    let (xi, wi) = s.sample(ur, ua);
                    let j = sp.differ[i];
                    let px: f64 = xs[j].iter().zip(&xi).map(|(u, v)| u * v).sum();
                    let py: f64 = ys[j].iter().zip(&xi).map(|(u, v)| u * v).sum();
                    a *= Complex64::from_polar(1.0, px) - 1.0;
                    b *= Complex64::from_polar(1.0, py) - 1.0;
                    w *= wi;
                }
                acc += (a - b).norm().powf(alpha) * w;
            }
            acc / opts.points as f64
        })
        .collect();
    let r = means.len() as f64;
    let mean = means.iter().sum::<f64>() / r;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let p = sp.shared * mean;
    let err = p * sp.shared_rel + sp.shared * (var / r).sqrt();
    Ok(root(spec, p, err))
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub pairs: usize,
    /// Smallest observed `sigma(x, y) / tau_{E_1}(x_1 - y_1)^{H_1}`.
    pub infimum: f64,
    pub witness_x: Vec<f64>,
    pub witness_y: Vec<f64>,
    pub median: f64,
}

/// Samples pairs in `[1/2, 1)^d` and reports the infimum of `sigma(x, y) / tau_{E_1}(x_1 - y_1)^{H_1}`.
pub fn sigma_lower_bound_scan(spec: &SheetSpec, pairs: usize, seed: u64) -> Result<LowerBoundReport> {
    if pairs == 0 {
        return invalid("need at least one pair");
    }
    let d = spec.d();
    let d1 = spec.dims()[0];
    let h1 = spec.hurst()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| 0.5 + 0.5 * rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..d).map(|_| 0.5 + 0.5 * rng.random::<f64>()).collect();
            (x, y)
        })
        .collect();
    let ratios = pts
        .par_iter()
        .map(|(x, y)| {
            let diff: Vec<f64> = x[..d1].iter().zip(&y[..d1]).map(|(a, b)| a - b).collect();
            let t = spec.tau_context(0).radial_part(&diff)?;
            if t == 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(sigma(spec, x, y)?.value / t.powf(h1))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mut best, mut at) = (f64::INFINITY, 0);
    for (i, r) in ratios.iter().enumerate() {
        if *r < best {
            best = *r;
            at = i;
        }
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(LowerBoundReport {
        pairs,
        infimum: best,
        witness_x: pts[at].0.clone(),
        witness_y: pts[at].1.clone(),
        median: sorted[sorted.len() / 2],
    })
}
