//! Estimators on sampled graphs: box counting, oscillation exponents and the
//! occupation-measure energy diagnostic.
//!
//! The parameter cube of a grid is mapped to `[0, 1]^d`, so a box of level `l` has side
//! `2^-l` on every axis. Values are shifted to start at 0 and divided by a vertical unit
//! (by default their range) before counting.

mod energy;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::synthesis::{FieldRealization, GridSpec, SliceField};

pub use energy::{energy_estimate, EnergyEstimate, EnergyOptions, Trend};

/// A gridded function `x -> f(x)` over a cube.
#[derive(Debug, Clone, Copy)]
pub struct GraphView<'a> {
    grid: &'a GridSpec,
    values: &'a [f64],
}

impl<'a> GraphView<'a> {
    pub fn new(grid: &'a GridSpec, values: &'a [f64]) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return invalid(format!("{} values for a grid of {} points", values.len(), grid.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("graph values must be finite");
        }
        Ok(GraphView { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.values
    }

    pub fn d(&self) -> usize {
        self.grid.d()
    }

    /// Finest level with at least four grid intervals per box side on every axis.
    pub fn max_level(&self) -> u32 {
        let n = self.grid.counts.iter().map(|c| c - 1).min().unwrap_or(0);
        let mut l = 0;
        while (1usize << (l + 1)) * 4 <= n {
            l += 1;
        }
        l
    }

    fn value_range(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    }

    /// `(offset, unit)` of the affine map to vertical box units; `unit` defaults to the range.
    pub fn vertical(&self, unit: Option<f64>) -> Result<(f64, f64)> {
        let (lo, hi) = self.value_range();
        let u = match unit {
            Some(u) if u.is_finite() && u > 0.0 => u,
            Some(u) => return invalid(format!("vertical unit must be positive, got {u}")),
            None if hi > lo => hi - lo,
            None => 1.0,
        };
        Ok((lo, u))
    }

    fn check_level(&self, l: u32) -> Result<()> {
        if l > self.max_level() {
            return invalid(format!("level {l} is finer than the grid allows (max {})", self.max_level()));
        }
        Ok(())
    }

    /// Min and max over the boxes of a partition. `levels[a] = Some(l)` splits axis `a`
    /// into `2^l` closed windows; `None` keeps every grid index separate. With `per`,
    /// each window is read at `per + 1` equispaced samples instead of all of them.
    pub(crate) fn extrema(&self, levels: &[Option<u32>], per: Option<usize>) -> (Vec<f64>, Vec<f64>) {
        let mut shape = self.grid.counts.clone();
        let mut lo = self.values.to_vec();
        let mut hi = self.values.to_vec();
        for (a, lev) in levels.iter().enumerate() {
            let Some(l) = lev else { continue };
            let k = 1usize << l;
            let n = shape[a];
            let inner: usize = shape[a + 1..].iter().product();
            let outer: usize = shape[..a].iter().product();
            let picks: Vec<Vec<usize>> = (0..k)
                .map(|b| {
                    let (s, e) = window(b, k, n);
                    match per {
                        Some(m) if m < e - s => (0..=m).map(|t| s + ((t * (e - s)) as f64 / m as f64).round() as usize).collect(),
                        _ => (s..=e).collect(),
                    }
                })
                .collect();
            let mut nlo = vec![f64::INFINITY; outer * k * inner];
            let mut nhi = vec![f64::NEG_INFINITY; outer * k * inner];
            for o in 0..outer {
                for (b, idx) in picks.iter().enumerate() {
                    let dst = (o * k + b) * inner;
                    for &i in idx {
                        let src = (o * n + i) * inner;
                        for t in 0..inner {
                            nlo[dst + t] = nlo[dst + t].min(lo[src + t]);
                            nhi[dst + t] = nhi[dst + t].max(hi[src + t]);
                        }
                    }
                }
            }
            lo = nlo;
            hi = nhi;
            shape[a] = k;
        }
        (lo, hi)
    }

    /// Samples per window side at level `l` on the coarsest axis.
    fn per_window(&self, l: u32, axes: impl Iterator<Item = usize>) -> usize {
        axes.map(|a| (self.grid.counts[a] - 1) >> l).min().unwrap_or(1).max(1)
    }
}

/// Inclusive grid index range of window `b` out of `k` on an axis with `n` samples.
fn window(b: usize, k: usize, n: usize) -> (usize, usize) {
    let m = n - 1;
    ((b * m) / k, ((b + 1) * m).div_ceil(k))
}

impl<'a> From<&'a FieldRealization> for GraphView<'a> {
    fn from(f: &'a FieldRealization) -> Self {
        GraphView { grid: &f.grid, values: &f.values }
    }
}

impl<'a> From<&'a SliceField> for GraphView<'a> {
    fn from(f: &'a SliceField) -> Self {
        GraphView { grid: &f.grid, values: &f.values }
    }
}

/// Number of `(d+1)`-dimensional boxes of side `2^-l` meeting the graph.
pub fn box_count(view: GraphView<'_>, l: u32, unit: Option<f64>) -> Result<u64> {
    view.check_level(l)?;
    let (off, u) = view.vertical(unit)?;
    let (lo, hi) = view.extrema(&vec![Some(l); view.d()], None);
    Ok(count_boxes(&lo, &hi, off, u, l))
}

fn count_boxes(lo: &[f64], hi: &[f64], off: f64, unit: f64, l: u32) -> u64 {
    let k = (1u64 << l) as f64;
    let cell = |v: f64| ((v - off) / unit * k).floor();
    lo.iter().zip(hi).map(|(a, b)| (cell(*b) - cell(*a)) as u64 + 1).sum()
}

/// Least-squares fit of `y` against `x`: `(slope, stderr, r2)`.
pub fn regress(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let stderr = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    (slope, stderr, r2)
}

/// Levels used by the regressions. `None` drops the two coarsest and two finest admissible levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelOptions {
    pub levels: Option<(u32, u32)>,
    /// Vertical unit for box counting; the value range when absent.
    pub unit: Option<f64>,
    /// Oscillation estimators read every window at the sample density of the finest level,
    /// so the discretisation deficit of a self-similar graph is the same at every scale.
    pub equal_sampling: bool,
}

impl Default for LevelOptions {
    fn default() -> Self {
        LevelOptions { levels: None, unit: None, equal_sampling: true }
    }
}

impl LevelOptions {
    fn range(&self, view: &GraphView<'_>) -> Result<(u32, u32)> {
        let (a, b) = match self.levels {
            Some(r) => r,
            None => (2, view.max_level().saturating_sub(2)),
        };
        if b < a + 3 {
            return invalid(format!("level range {a}..={b} needs at least 4 levels"));
        }
        view.check_level(b)?;
        Ok((a, b))
    }

    fn per(&self, view: &GraphView<'_>, finest: u32, axes: impl Iterator<Item = usize>) -> Option<usize> {
        self.equal_sampling.then(|| view.per_window(finest, axes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub stderr: f64,
    pub scale_range: (u32, u32),
    pub r2: f64,
    /// `(level, count)` for every level of the range.
    pub counts: Vec<(u32, u64)>,
    pub unit: f64,
    /// The raw slope left `[d, d+1]` and was clamped.
    pub clamped: bool,
}

fn dimension_from(view: &GraphView<'_>, range: (u32, u32), unit: f64, counts: Vec<(u32, u64)>, ys: Vec<f64>) -> DimensionEstimate {
    let xs: Vec<f64> = counts.iter().map(|(l, _)| *l as f64).collect();
    let (slope, stderr, r2) = regress(&xs, &ys);
    let d = view.d() as f64;
    let value = slope.clamp(d, d + 1.0);
    DimensionEstimate { value, stderr, scale_range: range, r2, counts, unit, clamped: value != slope }
}

/// Slope of `log2 M(2^-l)` against `l`.
pub fn box_dimension(view: GraphView<'_>, opts: LevelOptions) -> Result<DimensionEstimate> {
    let range = opts.range(&view)?;
    let (off, u) = view.vertical(opts.unit)?;
    let counts: Vec<(u32, u64)> = (range.0..=range.1)
        .map(|l| {
            let (lo, hi) = view.extrema(&vec![Some(l); view.d()], None);
            (l, count_boxes(&lo, &hi, off, u, l))
        })
        .collect();
    let ys = counts.iter().map(|(_, c)| (*c as f64).log2()).collect();
    Ok(dimension_from(&view, range, u, counts, ys))
}

/// Variation estimator: boxes are counted as `sum osc / eps` without the `+1` per column,
/// which removes the coarse-scale bias of [`box_dimension`] on rough graphs.
pub fn oscillation_dimension(view: GraphView<'_>, opts: LevelOptions) -> Result<DimensionEstimate> {
    let range = opts.range(&view)?;
    let (_, u) = view.vertical(opts.unit)?;
    let per = opts.per(&view, range.1, 0..view.d());
    let mut counts = Vec::new();
    let mut ys = Vec::new();
    for l in range.0..=range.1 {
        let (lo, hi) = view.extrema(&vec![Some(l); view.d()], per);
        let v: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).sum::<f64>() * (1u64 << l) as f64 / u;
        if v <= 0.0 {
            return invalid("the graph is flat: oscillation dimension undefined");
        }
        counts.push((l, v.ceil() as u64));
        ys.push(v.log2());
    }
    Ok(dimension_from(&view, range, u, counts, ys))
}

/// How oscillations of one level are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    /// Average oscillation over windows.
    #[default]
    Mean,
    /// Largest oscillation over windows.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub value: f64,
    pub stderr: f64,
    pub scale_range: (u32, u32),
    pub r2: f64,
    /// Axis whose windows produced the estimate.
    pub axis: usize,
    /// Pooled oscillation per level.
    pub oscillation: Vec<(u32, f64)>,
}

/// Exponent along one axis: windows are segments of side `2^-l` on every line parallel to `axis`,
/// and `-slope` of `log2` of the pooled oscillation against `l` is returned.
pub fn holder_exponent_axis(view: GraphView<'_>, axis: usize, opts: LevelOptions, pool: Pool) -> Result<HolderEstimate> {
    let d = view.d();
    if axis >= d {
        return invalid(format!("axis {axis} out of range"));
    }
    let range = opts.range(&view)?;
    let per = opts.per(&view, range.1, std::iter::once(axis));
    let mut osc = Vec::new();
    for l in range.0..=range.1 {
        let levels: Vec<Option<u32>> = (0..d).map(|a| (a == axis).then_some(l)).collect();
        let (lo, hi) = view.extrema(&levels, per);
        let it = lo.iter().zip(&hi).map(|(a, b)| b - a);
        let v = match pool {
            Pool::Mean => it.sum::<f64>() / lo.len() as f64,
            Pool::Max => it.fold(0.0, f64::max),
        };
        osc.push((l, v));
    }
    if osc.iter().all(|(_, v)| *v == 0.0) {
        // constant along the axis
        return Ok(HolderEstimate { value: 1.0, stderr: 0.0, scale_range: range, r2: 1.0, axis, oscillation: osc });
    }
    if osc.iter().any(|(_, v)| *v <= 0.0) {
        return invalid("the graph is flat at some scales but not others: Holder exponent undefined");
    }
    let xs: Vec<f64> = osc.iter().map(|(l, _)| *l as f64).collect();
    let ys: Vec<f64> = osc.iter().map(|(_, v)| v.log2()).collect();
    let (slope, stderr, r2) = regress(&xs, &ys);
    let value = (-slope).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(HolderEstimate { value, stderr, scale_range: range, r2, axis, oscillation: osc })
}

/// Critical exponent of the whole graph: the smallest directional exponent over the axes.
/// A direction with a component along the roughest spectral subspace already sees the smallest
/// exponent, so generic axes suffice.
pub fn holder_exponent(view: GraphView<'_>, opts: LevelOptions, pool: Pool) -> Result<HolderEstimate> {
    let mut best: Option<HolderEstimate> = None;
    for a in 0..view.d() {
        let e = holder_exponent_axis(view, a, opts, pool)?;
        if best.as_ref().is_none_or(|b| e.value < b.value) {
            best = Some(e);
        }
    }
    Ok(best.expect("a grid has at least one axis"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_nest_and_cover() {
        for n in [9, 17, 100, 1025] {
            for l in 0..4u32 {
                let k = 1usize << l;
                assert_eq!(window(0, k, n).0, 0);
                assert_eq!(window(k - 1, k, n).1, n - 1);
                for b in 0..k {
                    let (s, e) = window(b, k, n);
                    assert_eq!(window(2 * b, 2 * k, n).0, s);
                    assert_eq!(window(2 * b + 1, 2 * k, n).1, e);
                }
            }
        }
    }

    #[test]
    fn regression_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, e, r2) = regress(&x, &y);
        assert!((s - 2.5).abs() < 1e-12 && e < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
