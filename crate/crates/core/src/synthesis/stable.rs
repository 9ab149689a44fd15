//! LePage series for `alpha < 2`:
//! `X(x) = Re sum_k Gamma_k^{-1/alpha} e^{i Theta_k} g(xi_k) prod_j (e^{i<x_j, xi_kj>} - 1)`
//! with Poisson arrivals `Gamma_k`, uniform phases and frequencies drawn from a polar importance
//! density whose two power laws match the integrand near the origin and at infinity.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{positioned, uniform_pair};
use super::{FieldRealization, GridSpec, Method, SynthParams};
use crate::error::{invalid, Error, Result};
use crate::scale::{BlockSampler, SheetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StableOptions {
    /// Series length `N` (at least 1000).
    pub nterms: usize,
    /// Radial crossover of the importance density.
    pub tau_c: f64,
}

impl Default for StableOptions {
    fn default() -> Self {
        StableOptions { nterms: 4096, tau_c: 1.0 }
    }
}

struct Term {
    coef: Complex64,
    /// `|coef| Gamma_k^{1/alpha}`, the arrival-free magnitude.
    mag: f64,
    xi: Vec<[f64; 2]>,
}

/// One drawn series; evaluating it is deterministic per point.
pub(crate) struct StableSeries {
    terms: Vec<Term>,
    dims: Vec<usize>,
    alpha: f64,
}

impl StableSeries {
    pub(crate) fn draw(spec: &SheetSpec, opts: StableOptions, seed: u64) -> Result<Self> {
        let alpha = spec.alpha();
        if alpha >= 2.0 {
            return invalid("alpha = 2 goes through the Gaussian spectral synthesizer");
        }
        if opts.nterms < 1000 {
            return invalid("the LePage series needs at least 1000 terms");
        }
        if !(opts.tau_c > 0.0 && opts.tau_c.is_finite()) {
            return invalid("tau_c must be positive");
        }
        if spec.dims().iter().any(|&d| d > 2) {
            return Err(Error::Unsupported("LePage sampler supports blocks of dimension <= 2".into()));
        }
        let samplers = (0..spec.m())
            .map(|j| BlockSampler::with_tau_c(spec, j, opts.tau_c))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = positioned(seed, 1, 0);
        let mut arrival = 0.0;
        let mut terms = Vec::with_capacity(opts.nterms);
        for _ in 0..opts.nterms {
            let (ue, ut) = uniform_pair(&mut rng);
            arrival -= ue.ln();
            let mut g = 1.0;
            let mut xi = Vec::with_capacity(samplers.len());
            for s in &samplers {
                let (ur, ua) = uniform_pair(&mut rng);
                let (x, w) = s.sample(ur, ua);
                g *= w.powf(1.0 / alpha);
                xi.push(x);
            }
            let coef = Complex64::from_polar(arrival.powf(-1.0 / alpha) * g, std::f64::consts::TAU * ut);
            terms.push(Term { coef, mag: g, xi });
        }
        Ok(StableSeries { terms, dims: spec.dims(), alpha })
    }

    /// Value at `x` and a truncation indicator: the standard deviation of the Gaussian
    /// approximation to the discarded remainder.
    pub(crate) fn eval(&self, x: &[f64]) -> (f64, f64) {
        let mut val = 0.0;
        let mut m2 = 0.0;
        for t in &self.terms {
            let mut k = Complex64::new(1.0, 0.0);
            let mut at = 0;
            for (j, &dj) in self.dims.iter().enumerate() {
                let ph: f64 = (0..dj).map(|a| x[at + a] * t.xi[j][a]).sum();
                k *= Complex64::from_polar(1.0, ph) - 1.0;
                at += dj;
            }
            val += (t.coef * k).re;
            m2 += t.mag * t.mag * k.norm_sqr();
        }
        let n = self.terms.len() as f64;
        let p = 2.0 / self.alpha - 1.0;
        let ind = (n.powf(-p) / p * (m2 / n) * 0.5).sqrt();
        (val, ind)
    }
}

/// Truncated LePage synthesis of `X_alpha` on `grid` for `0 < alpha < 2`.
pub fn synthesize_stable(spec: &SheetSpec, grid: &GridSpec, opts: StableOptions, seed: u64) -> Result<FieldRealization> {
    if grid.d() != spec.d() {
        return invalid(format!("grid has {} axes, sheet has {}", grid.d(), spec.d()));
    }
    let series = StableSeries::draw(spec, opts, seed)?;
    let out: Vec<(f64, f64)> = (0..grid.len()).into_par_iter().map(|i| series.eval(&grid.point(i))).collect();
    let (values, tail) = out.into_iter().unzip();
    Ok(FieldRealization {
        params: spec.params().clone(),
        grid: grid.clone(),
        values,
        seed,
        method: Method::LePage,
        synth: SynthParams::LePage { options: opts },
        tail_indicator: Some(tail),
    })
}
