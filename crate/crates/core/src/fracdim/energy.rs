use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GraphView;
use crate::error::{invalid, Result};
use crate::synthesis::rng::{derive_seed, positioned};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Finite,
    Diverging,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyOptions {
    /// Independent batches per sample size; each estimate is the median of the batch means.
    pub batches: usize,
    /// Growth exponent of the estimates in `n` above which the trend counts as diverging.
    pub slope_threshold: f64,
    /// Vertical unit; the value range when absent.
    pub unit: Option<f64>,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        EnergyOptions { batches: 1024, slope_threshold: 0.1, unit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub gamma: f64,
    /// Estimate at `n_pairs`.
    pub value: f64,
    pub n_pairs: usize,
    /// Estimates at `n_pairs / 4`, `n_pairs / 2` and `n_pairs`.
    pub estimates: [f64; 3],
    /// Fitted growth exponent of the estimates in `n`.
    pub slope: f64,
    pub trend: Trend,
}

/// Monte-Carlo `gamma`-energy of the occupation measure,
/// `int int (|x - y|^2 + |f(x) - f(y)|^2)^(-gamma/2) dx dy`, over uniform pairs of distinct grid points.
///
/// A finite energy is estimated consistently at every sample size; a divergent one makes the
/// typical batch mean grow like a power of `n`, faster than any multiple of `log n`.
pub fn energy_estimate(view: GraphView<'_>, gamma: f64, n_pairs: usize, seed: u64, opts: EnergyOptions) -> Result<EnergyEstimate> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return invalid(format!("gamma must be positive, got {gamma}"));
    }
    if n_pairs < 10_000 {
        return invalid(format!("n_pairs must be at least 10000, got {n_pairs}"));
    }
    if opts.batches == 0 {
        return invalid("at least one batch is needed");
    }
    let (_, unit) = view.vertical(opts.unit)?;
    let g = view.grid();
    let n = g.len();
    let pts: Vec<Vec<f64>> = (0..g.d())
        .map(|a| (0..g.counts[a]).map(|i| (g.coord(a, i) - g.lower[a]) / (g.upper[a] - g.lower[a])).collect())
        .collect();
    let coords = |mut f: usize, out: &mut [f64]| {
        for a in (0..g.d()).rev() {
            out[a] = pts[a][f % g.counts[a]];
            f /= g.counts[a];
        }
    };
    let values = view.values();
    let mut estimates = [0.0; 3];
    for (s, est) in estimates.iter_mut().enumerate() {
        let size = n_pairs >> (2 - s);
        let sub = derive_seed(seed, s as u64);
        let mut means: Vec<f64> = (0..opts.batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = positioned(sub, b as u64, 0);
                let mut x = vec![0.0; g.d()];
                let mut y = vec![0.0; g.d()];
                let mut acc = 0.0;
                for _ in 0..size {
                    let i = rng.random_range(0..n);
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    coords(i, &mut x);
                    coords(j, &mut y);
                    let dv = (values[i] - values[j]) / unit;
                    let r2: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>() + dv * dv;
                    acc += r2.powf(-0.5 * gamma);
                }
                acc / size as f64
            })
            .collect();
        means.sort_by(f64::total_cmp);
        let k = means.len();
        *est = if k % 2 == 1 { means[k / 2] } else { 0.5 * (means[k / 2 - 1] + means[k / 2]) };
    }
    let slope = (estimates[2] / estimates[0]).ln() / 4f64.ln();
    let trend = if slope > opts.slope_threshold { Trend::Diverging } else { Trend::Finite };
    Ok(EnergyEstimate { gamma, value: estimates[2], n_pairs, estimates, slope, trend })
}
