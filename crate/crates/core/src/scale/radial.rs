//! One-dimensional radial integrals `R(x, l) = int_R g(<x, e^{sB} l>) e^{-alpha H s} ds`
//! with `g(u) = |e^{iu} - 1|^alpha = (2 |sin(u/2)|)^alpha`.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::linalg::MatrixFlow;
use crate::quad::{adaptive, adaptive_breaks, gauss_legendre, Adaptive};

const TABLE: usize = 4096;
/// Numerical integration stops once `|phi|` exceeds this many periods.
const PERIODS: f64 = 32.0;
/// Without monotone growth (rotations) the tail has no correction and needs a longer run.
const PERIODS_ROTATING: f64 = 64.0;

#[inline]
pub(crate) fn kernel_power(u: f64, alpha: f64) -> f64 {
    let s = (2.0 * (0.5 * u).sin()).abs();
    if alpha == 2.0 {
        s * s
    } else {
        s.powf(alpha)
    }
}

/// Period mean of `g` and tabulated zero-mean antiderivatives `G = int (g - c)`, `G2 = int G - mean`.
#[derive(Debug, Clone)]
pub(crate) struct Oscillation {
    alpha: f64,
    pub mean: f64,
    g1: Vec<f64>,
    g2: Vec<f64>,
}

impl Oscillation {
    pub fn new(alpha: f64) -> Self {
        let mean = 2f64.powf(alpha) * gamma((alpha + 1.0) / 2.0) / (PI.sqrt() * gamma(alpha / 2.0 + 1.0));
        let h = 2.0 * PI / TABLE as f64;
        let (gx, gw) = gauss_legendre(8);
        let mut g1 = vec![0.0; TABLE + 1];
        for k in 0..TABLE {
            let a = k as f64 * h;
            let cell: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| 0.5 * h * w * (kernel_power(a + 0.5 * h * (x + 1.0), alpha) - mean))
                .sum();
            g1[k + 1] = g1[k] + cell;
        }
        let mut osc = Oscillation { alpha, mean, g1, g2: vec![0.0; TABLE + 1] };
        // G2 by integrating the Hermite interpolant of G cellwise
        let mut g2 = vec![0.0; TABLE + 1];
        for k in 0..TABLE {
            let a = k as f64 * h;
            let cell: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| 0.5 * h * w * osc.big_g(a + 0.5 * h * (x + 1.0)))
                .sum();
            g2[k + 1] = g2[k] + cell;
        }
        let m2 = g2.iter().take(TABLE).sum::<f64>() / TABLE as f64;
        osc.g2 = g2.iter().map(|v| v - m2).collect();
        osc
    }

    /// Odd, `2 pi`-periodic `G(u) = int_0^u (g - c)`.
    pub fn big_g(&self, u: f64) -> f64 {
        let sgn = if u < 0.0 { -1.0 } else { 1.0 };
        let t = u.abs().rem_euclid(2.0 * PI);
        let h = 2.0 * PI / TABLE as f64;
        let k = ((t / h) as usize).min(TABLE - 1);
        let f = t / h - k as f64;
        let a = k as f64 * h;
        let d0 = (kernel_power(a, self.alpha) - self.mean) * h;
        let d1 = (kernel_power(a + h, self.alpha) - self.mean) * h;
        sgn * hermite(self.g1[k], self.g1[k + 1], d0, d1, f)
    }

    /// Even, zero-mean, `2 pi`-periodic antiderivative of `G`.
    pub fn big_g2(&self, u: f64) -> f64 {
        let t = u.abs().rem_euclid(2.0 * PI);
        let h = 2.0 * PI / TABLE as f64;
        let k = ((t / h) as usize).min(TABLE - 1);
        let f = t / h - k as f64;
        let a = k as f64 * h;
        hermite(self.g2[k], self.g2[k + 1], self.big_g(a) * h, self.big_g(a + h) * h, f)
    }
}

#[inline]
fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, f: f64) -> f64 {
    let f2 = f * f;
    let f3 = f2 * f;
    (2.0 * f3 - 3.0 * f2 + 1.0) * y0 + (f3 - 2.0 * f2 + f) * m0 + (-2.0 * f3 + 3.0 * f2) * y1 + (f3 - f2) * m1
}

/// Data of one radial integral along the ray `s -> e^{sB} l`.
pub(crate) struct Ray<'a> {
    pub flow: &'a MatrixFlow,
    /// Flow of `B - a_1 I`.
    pub shifted: &'a MatrixFlow,
    /// `x`, `B^T x`, `(B^2)^T x`.
    pub x: [f64; 2],
    pub bx: [f64; 2],
    pub bbx: [f64; 2],
    pub l: [f64; 2],
    pub dim: usize,
    pub alpha: f64,
    pub h: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// True when `B` has real spectrum, so `phi` is eventually monotone.
    pub real_spectrum: bool,
}

impl Ray<'_> {
    #[inline]
    fn phi(&self, s: f64) -> (f64, f64, f64) {
        let v = if self.dim == 1 {
            let MatrixFlow::Scalar(b) = *self.flow else { unreachable!() };
            [(s * b).exp() * self.l[0], 0.0]
        } else {
            let m = self.flow.two(s);
            [m[0] * self.l[0] + m[1] * self.l[1], m[2] * self.l[0] + m[3] * self.l[1]]
        };
        let dot = |a: &[f64; 2]| a[0] * v[0] + a[1] * v[1];
        (dot(&self.x), dot(&self.bx), dot(&self.bbx))
    }

    /// `e^{-a_1 s} phi(s)`, free of underflow as `s -> -inf`.
    #[inline]
    fn phi_scaled(&self, s: f64) -> f64 {
        let v = if self.dim == 1 {
            [self.l[0], 0.0]
        } else {
            let m = self.shifted.two(s);
            [m[0] * self.l[0] + m[1] * self.l[1], m[2] * self.l[0] + m[3] * self.l[1]]
        };
        self.x[0] * v[0] + self.x[1] * v[1]
    }

    #[inline]
    fn integrand(&self, s: f64) -> f64 {
        let (p, _, _) = self.phi(s);
        kernel_power(p, self.alpha) * (-self.alpha * self.h * s).exp()
    }
}

/// Returns `(value, error estimate)`.
pub(crate) fn radial_integral(ray: &Ray, osc: &Oscillation, rel_tol: f64) -> Result<(f64, f64)> {
    let xn = ray.x[0].hypot(ray.x[1]);
    let ln = ray.l[0].hypot(ray.l[1]);
    if xn == 0.0 || ln == 0.0 {
        return Ok((0.0, 0.0));
    }
    let step = 0.5 / ray.a_max;
    // split point where |phi| is about one
    let mut s0 = -(xn * ln).ln() / ray.a_max;
    for _ in 0..400 {
        if ray.phi(s0).0.abs() <= 1.0 {
            break;
        }
        s0 -= step;
    }
    // march upward until |phi| is large and escaping
    let periods = if ray.real_spectrum { PERIODS } else { PERIODS_ROTATING };
    let target = 2.0 * PI * periods;
    let mut s_hi = s0;
    let mut breaks = vec![s0];
    let mut escaped = false;
    for _ in 0..20_000 {
        s_hi += step;
        breaks.push(s_hi);
        let (p, dp, _) = ray.phi(s_hi);
        if p.abs() >= target && (!ray.real_spectrum || p * dp > 0.0) {
            escaped = true;
            break;
        }
    }
    let opts = Adaptive { abs_tol: 0.0, rel_tol, max_panels: 40_000 };
    let f = |s: f64| ray.integrand(s);

    let with_crossings = ray.alpha != 2.0 || !ray.real_spectrum;
    if with_crossings {
        // g has cusps where phi crosses 2 pi Z; make them panel ends
        let mut cusps = Vec::new();
        for w in breaks.windows(2) {
            crossings(ray, w[0], w[1], 6, &mut cusps);
        }
        breaks.extend(cusps);
        breaks.sort_by(f64::total_cmp);
    }
    let (upper, e_up) = integrate_panels(f, &breaks, with_crossings, opts);
    let mut tail_hi = 0.0;
    if escaped {
        let ah = ray.alpha * ray.h;
        if ah <= 0.0 {
            return divergence_upper(ray, osc, s_hi, upper);
        }
        let w = (-ah * s_hi).exp();
        tail_hi = osc.mean * w / ah;
        if ray.real_spectrum {
            let (p, dp, ddp) = ray.phi(s_hi);
            let v = w / dp;
            let dv = -ah * v - w * ddp / (dp * dp);
            tail_hi += -osc.big_g(p) * v + osc.big_g2(p) * dv / dp;
        }
    } else if upper == 0.0 {
        return Ok((0.0, 0.0));
    }

    // lower part: f = e^{kappa s} |phi~|^alpha |sinc(phi/2)|^alpha with phi~ = e^{-a_1 s} phi,
    // integrated in t = e^{kappa (s - s0)} over (0, 1]
    let kappa = ray.alpha * (ray.a_min - ray.h);
    if kappa <= 0.0 {
        return divergence_lower(ray, s0, upper);
    }
    let s_of = |t: f64| s0 + t.max(1e-300).ln() / kappa;
    let lower_f = |t: f64| {
        let s = s_of(t);
        let pt = ray.phi_scaled(s);
        let p = (ray.a_min * s).exp() * pt;
        let half = 0.5 * p;
        let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
        (pt * sinc).abs().powf(ray.alpha)
    };
    let mut tb: Vec<f64> = (0..48).map(|k| 0.5f64.powi(k)).collect();
    tb.push(0.0);
    if ray.alpha != 2.0 {
        // zeros of phi~ are cusps of |phi~|^alpha
        let step = 0.25 / ray.a_max;
        let s_min = s0 + (1e-16f64).ln() / kappa;
        let mut hi = s0;
        let mut v_hi = ray.phi_scaled(hi);
        for _ in 0..2000 {
            let lo = hi - step;
            if lo < s_min {
                break;
            }
            let v_lo = ray.phi_scaled(lo);
            if v_lo * v_hi < 0.0 {
                let (mut a, mut b, mut va) = (lo, hi, v_lo);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let vm = ray.phi_scaled(m);
                    if vm * va <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        va = vm;
                    }
                }
                tb.push((kappa * (0.5 * (a + b) - s0)).exp());
            }
            hi = lo;
            v_hi = v_lo;
        }
    }
    tb.sort_by(f64::total_cmp);
    tb.dedup();
    let (lower_t, e_lo_t) = integrate_panels(lower_f, &tb, ray.alpha != 2.0, opts);
    let factor = (kappa * s0).exp() / kappa;
    let value = upper + factor * lower_t + tail_hi;
    Ok((value, e_up + factor * e_lo_t))
}

/// Integrates over sorted `breaks`. With `smooth`, each panel is remapped by a quintic
/// smoothstep so that `|s - s_k|^alpha` cusps at panel ends become high-order zeros.
fn integrate_panels(f: impl Fn(f64) -> f64, breaks: &[f64], smooth: bool, opts: Adaptive) -> (f64, f64) {
    if !smooth {
        return adaptive_breaks(f, breaks, opts);
    }
    let n = breaks.len() - 1;
    let g = |u: f64| {
        let k = (u.floor() as usize).min(n - 1);
        let t = u - k as f64;
        let (a, b) = (breaks[k], breaks[k + 1]);
        let psi = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let dpsi = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        if dpsi == 0.0 {
            return 0.0;
        }
        f(a + (b - a) * psi) * (b - a) * dpsi
    };
    let idx: Vec<f64> = (0..=n).map(|k| k as f64).collect();
    adaptive_breaks(g, &idx, opts)
}

/// Appends the points of `(a, b)` where `phi` crosses a multiple of `2 pi`.
fn crossings(ray: &Ray, a: f64, b: f64, depth: u32, out: &mut Vec<f64>) {
    let (pa, da, _) = ray.phi(a);
    let (pb, db, _) = ray.phi(b);
    if da * db <= 0.0 && depth > 0 {
        let m = 0.5 * (a + b);
        crossings(ray, a, m, depth - 1, out);
        crossings(ray, m, b, depth - 1, out);
        return;
    }
    let tp = 2.0 * PI;
    let (lo, hi) = (pa.min(pb), pa.max(pb));
    let k0 = (lo / tp).ceil() as i64;
    let k1 = (hi / tp).floor() as i64;
    for k in k0..=k1 {
        let target = k as f64 * tp;
        if let Some(r) = solve_phi(ray, a, b, target) {
            if r > a && r < b {
                out.push(r);
            }
        }
    }
}

/// Safeguarded Newton for `phi(s) = target` on a bracketing interval.
fn solve_phi(ray: &Ray, mut a: f64, mut b: f64, target: f64) -> Option<f64> {
    let fa = ray.phi(a).0 - target;
    let fb = ray.phi(b).0 - target;
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 {
        return None;
    }
    let up = fa < 0.0;
    let mut s = 0.5 * (a + b);
    for _ in 0..100 {
        let (p, dp, _) = ray.phi(s);
        let fs = p - target;
        if fs == 0.0 {
            return Some(s);
        }
        if (fs < 0.0) == up {
            a = s;
        } else {
            b = s;
        }
        let mut next = s - fs / dp;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - s).abs() <= 1e-15 * (1.0 + s.abs()) || b - a <= 1e-15 * (1.0 + s.abs()) {
            return Some(next);
        }
        s = next;
    }
    Some(s)
}

fn enlargement_diverges(mut estimate: impl FnMut(f64) -> f64, lengths: &[f64]) -> bool {
    let mut prev = estimate(lengths[0]);
    let mut growth = 0;
    for &len in &lengths[1..] {
        let cur = estimate(len);
        if cur > 1.1 * prev {
            growth += 1;
        } else {
            growth = 0;
        }
        prev = cur;
        if growth >= 3 {
            return true;
        }
    }
    false
}

fn divergence_lower(ray: &Ray, s0: f64, upper: f64) -> Result<(f64, f64)> {
    let opts = Adaptive { abs_tol: 0.0, rel_tol: 1e-8, max_panels: 4000 };
    let lens: Vec<f64> = (0..6).map(|k| 8.0 * 2f64.powi(k) / ray.a_min).collect();
    if enlargement_diverges(|len| upper + adaptive(|s| ray.integrand(s), s0 - len, s0, 8, opts).0, &lens) {
        return Err(Error::Divergence(format!(
            "small-frequency part grows without bound (H = {} >= a_1 = {})",
            ray.h, ray.a_min
        )));
    }
    Err(Error::Numerical("radial integral did not settle".into()))
}

fn divergence_upper(ray: &Ray, osc: &Oscillation, s_hi: f64, upper: f64) -> Result<(f64, f64)> {
    let lens: Vec<f64> = (0..6).map(|k| 8.0 * 2f64.powi(k) / ray.a_max).collect();
    // mean-value growth of the oscillatory part
    let ah = ray.alpha * ray.h;
    let est = |len: f64| upper + osc.mean * if ah == 0.0 { len } else { ((-ah * (s_hi + len)).exp() - (-ah * s_hi).exp()) / -ah };
    if enlargement_diverges(est, &lens) {
        return Err(Error::Divergence(format!("high-frequency part grows without bound (H = {} <= 0)", ray.h)));
    }
    Err(Error::Numerical("radial integral did not settle".into()))
}
