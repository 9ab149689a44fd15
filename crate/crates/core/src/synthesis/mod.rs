//! Sample paths of `X_alpha` on regular grids: a spectral FFT synthesizer for `alpha = 2`
//! and a LePage series for `alpha < 2`, both reproducible from a 64-bit seed.

mod gaussian;
mod io;
pub mod rng;
mod stable;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scale::{SheetParams, SheetSpec};

pub use gaussian::{GaussianOptions, GaussianPlan};
pub use io::{read_field, read_meta, sidecar_path, write_field, write_field_labeled, FieldMeta, MAGIC, VERSION};
pub use stable::{synthesize_stable, StableOptions};

use gaussian::Selection;
use stable::StableSeries;

/// Largest grid accepted by [`GridSpec::new`].
pub const MAX_GRID_POINTS: usize = 1 << 26;

/// Regular grid over an axis-aligned box, row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl GridSpec {
    pub fn new(counts: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let g = GridSpec { counts, lower, upper };
        g.validate()?;
        Ok(g)
    }

    /// `counts` points per axis over `[0, 1]^d`.
    pub fn unit(counts: Vec<usize>) -> Result<Self> {
        let d = counts.len();
        Self::new(counts, vec![0.0; d], vec![1.0; d])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.counts.len();
        if d == 0 || self.lower.len() != d || self.upper.len() != d {
            return invalid("grid needs matching counts, lower and upper per axis");
        }
        if self.counts.iter().any(|&n| n < 2) {
            return invalid("every axis needs at least 2 samples");
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return invalid("grid axes need finite lower < upper");
            }
        }
        let total = self.counts.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match total {
            Some(t) if t <= MAX_GRID_POINTS => Ok(()),
            _ => Err(crate::Error::Resource(format!("grid exceeds {MAX_GRID_POINTS} points"))),
        }
    }

    pub fn d(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, a: usize) -> f64 {
        (self.upper[a] - self.lower[a]) / (self.counts[a] - 1) as f64
    }

    pub fn coord(&self, a: usize, i: usize) -> f64 {
        if i + 1 == self.counts[a] {
            self.upper[a]
        } else {
            self.lower[a] + i as f64 * self.spacing(a)
        }
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut ix = vec![0; self.d()];
        for a in (0..self.d()).rev() {
            ix[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        ix
    }

    pub fn flat_index(&self, ix: &[usize]) -> usize {
        ix.iter().zip(&self.counts).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    /// Index of `lower` on the lattice `dx Z`; the spectral synthesizer needs it to be integral.
    pub fn lattice_offset(&self, a: usize) -> Result<i64> {
        let dx = self.spacing(a);
        let o = (self.lower[a] / dx).round();
        if (self.lower[a] - o * dx).abs() > 1e-9 * dx {
            return invalid(format!("axis {a}: lower corner {} is not a multiple of the spacing {dx}", self.lower[a]));
        }
        Ok(o as i64)
    }

    /// Grid index of `v` on axis `a`, if `v` is a grid coordinate.
    pub fn index_of(&self, a: usize, v: f64) -> Option<usize> {
        let dx = self.spacing(a);
        let r = ((v - self.lower[a]) / dx).round();
        if r < 0.0 || r as usize >= self.counts[a] || (self.lower[a] + r * dx - v).abs() > 1e-9 * dx {
            return None;
        }
        Some(r as usize)
    }

    /// Sub-grid made of the given axes.
    pub fn restrict(&self, axes: &[usize]) -> GridSpec {
        GridSpec {
            counts: axes.iter().map(|&a| self.counts[a]).collect(),
            lower: axes.iter().map(|&a| self.lower[a]).collect(),
            upper: axes.iter().map(|&a| self.upper[a]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GaussianSpectral,
    LePage,
}

/// Discretisation parameters recorded with every realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthParams {
    Gaussian { nfreq: Vec<usize>, omega: Vec<f64>, options: GaussianOptions },
    LePage { options: StableOptions },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRealization {
    pub params: SheetParams,
    pub grid: GridSpec,
    /// Row-major values, one per grid point.
    pub values: Vec<f64>,
    pub seed: u64,
    pub method: Method,
    pub synth: SynthParams,
    /// Per-point truncation indicator (LePage only; not persisted).
    #[serde(skip)]
    pub tail_indicator: Option<Vec<f64>>,
}

impl FieldRealization {
    pub fn spec(&self) -> Result<SheetSpec> {
        SheetSpec::new(self.params.clone())
    }

    pub fn value_at(&self, ix: &[usize]) -> f64 {
        self.values[self.grid.flat_index(ix)]
    }
}

/// Either synthesizer with its options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Synthesizer {
    Gaussian(GaussianOptions),
    Stable(StableOptions),
}

impl Synthesizer {
    /// Gaussian for `alpha = 2`, LePage otherwise, with default options.
    pub fn for_spec(spec: &SheetSpec) -> Self {
        if spec.alpha() == 2.0 {
            Synthesizer::Gaussian(GaussianOptions::default())
        } else {
            Synthesizer::Stable(StableOptions::default())
        }
    }

    pub fn synthesize(&self, spec: &SheetSpec, grid: &GridSpec, seed: u64) -> Result<FieldRealization> {
        match self {
            Synthesizer::Gaussian(o) => synthesize_gaussian(spec, grid, *o, seed),
            Synthesizer::Stable(o) => synthesize_stable(spec, grid, *o, seed),
        }
    }
}

/// Spectral synthesis of the Gaussian sheet (`alpha = 2`) on `grid`.
pub fn synthesize_gaussian(spec: &SheetSpec, grid: &GridSpec, opts: GaussianOptions, seed: u64) -> Result<FieldRealization> {
    GaussianPlan::new(spec, grid, opts)?.synthesize(seed)
}

/// The one-block field `x -> X(u_1, .., u_{j-1}, x, u_{j+1}, .., u_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub block: usize,
    /// A full point of `R^d`; the coordinates of `block` are ignored.
    pub anchor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceField {
    pub block: usize,
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// The anchor has a zero block besides `block`: the slice is identically zero.
    pub degenerate: bool,
}

struct SliceAxes {
    axes: Vec<usize>,
    degenerate: bool,
}

fn slice_axes(spec: &SheetSpec, grid: &GridSpec, s: &SliceSpec) -> Result<SliceAxes> {
    if s.block >= spec.m() {
        return invalid(format!("block {} out of range", s.block));
    }
    if s.anchor.len() != spec.d() || grid.d() != spec.d() {
        return invalid("anchor and grid must have one coordinate per axis");
    }
    let parts = spec.layout().split(&s.anchor);
    let degenerate = parts.iter().enumerate().any(|(i, p)| i != s.block && p.iter().all(|v| *v == 0.0));
    let off = spec.layout().offset(s.block);
    Ok(SliceAxes { axes: (off..off + spec.dims()[s.block]).collect(), degenerate })
}

/// Extracts a slice from a stored realization; the anchor must lie on its grid.
pub fn slice(field: &FieldRealization, s: &SliceSpec) -> Result<SliceField> {
    let spec = SheetSpec::unchecked(field.params.clone())?;
    let sa = slice_axes(&spec, &field.grid, s)?;
    let g = &field.grid;
    let mut base = vec![0; g.d()];
    for a in 0..g.d() {
        if !sa.axes.contains(&a) {
            base[a] = g.index_of(a, s.anchor[a]).ok_or_else(|| crate::Error::InvalidInput(format!("anchor coordinate {a} is off the grid")))?;
        }
    }
    let sub = g.restrict(&sa.axes);
    let values = (0..sub.len())
        .map(|f| {
            let local = sub.multi_index(f);
            let mut ix = base.clone();
            for (k, &a) in sa.axes.iter().enumerate() {
                ix[a] = local[k];
            }
            field.value_at(&ix)
        })
        .collect();
    Ok(SliceField { block: s.block, grid: sub, values, degenerate: sa.degenerate })
}

/// Evaluates the generator with the same lattice and seed as a full synthesis on `grid`,
/// but only along the slice. Agrees bitwise with [`slice`] of that synthesis.
pub fn slice_generated(spec: &SheetSpec, grid: &GridSpec, synth: &Synthesizer, seed: u64, s: &SliceSpec) -> Result<SliceField> {
    let sa = slice_axes(spec, grid, s)?;
    let sub = grid.restrict(&sa.axes);
    let values = match synth {
        Synthesizer::Gaussian(o) => {
            let plan = GaussianPlan::new(spec, grid, *o)?;
            let mut sel = Vec::with_capacity(spec.m());
            for j in 0..spec.m() {
                if j == s.block {
                    sel.push(Selection::All);
                } else {
                    let off = spec.layout().offset(j);
                    let ix = (off..off + spec.dims()[j])
                        .map(|a| grid.index_of(a, s.anchor[a]).ok_or_else(|| crate::Error::InvalidInput(format!("anchor coordinate {a} is off the grid"))))
                        .collect::<Result<Vec<_>>>()?;
                    sel.push(Selection::One(ix));
                }
            }
            plan.realize(seed, &sel)
        }
        Synthesizer::Stable(o) => {
            let series = StableSeries::draw(spec, *o, seed)?;
            use rayon::prelude::*;
            (0..sub.len())
                .into_par_iter()
                .map(|f| {
                    let local = sub.multi_index(f);
                    let mut x = s.anchor.clone();
                    for (k, &a) in sa.axes.iter().enumerate() {
                        x[a] = grid.coord(a, local[k]);
                    }
                    series.eval(&x).0
                })
                .collect()
        }
    };
    Ok(SliceField { block: s.block, grid: sub, values, degenerate: sa.degenerate })
}
