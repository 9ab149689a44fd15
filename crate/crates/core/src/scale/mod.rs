//! Stable scale functionals of the sheet: `Gamma_alpha^j`, `Gamma_alpha`, `sigma(x, y)`,
//! the existence criterion and numerical checks of the scaling laws.

mod radial;
mod sigma;
mod verify;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::homogeneous::{Psi, PsiSpec};
use crate::linalg::{spectral_decompose, default_group_tol, trace, BlockLayout, MatrixFlow, SpectralDecomposition, SquareMatrix};
use crate::polar::{PolarChart2, PolarContext};
use crate::quad::{adaptive, Adaptive};

pub(crate) use sigma::BlockSampler;
pub use sigma::{sigma, sigma_lower_bound_scan, sigma_qmc, LowerBoundReport, QmcOptions};
pub use verify::{verify_scaling_laws, ScalingReport};

use radial::{radial_integral, Oscillation, Ray};

/// Plain parameters of a sheet, as read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetParams {
    pub layout: BlockLayout,
    pub hurst: Vec<f64>,
    pub alpha: f64,
    /// One entry per block; an empty list means `radial_tau` everywhere.
    #[serde(default)]
    pub psi: Vec<PsiSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleValue {
    pub value: f64,
    pub est_abs_error: f64,
}

impl ScaleValue {
    pub const ZERO: ScaleValue = ScaleValue { value: 0.0, est_abs_error: 0.0 };
}

#[derive(Debug, Clone, Serialize)]
pub struct ExistenceReport {
    pub ok: bool,
    /// `a_1^j - H_j` per block.
    pub margins: Vec<f64>,
    pub hurst: Vec<f64>,
}

/// Per-block data shared by all scale computations.
#[derive(Debug, Clone)]
pub(crate) struct BlockModel {
    pub matrix: SquareMatrix,
    pub q: f64,
    pub spectral: SpectralDecomposition,
    pub psi: Psi,
    /// Polar context of `E_j` itself.
    pub tau_ctx: PolarContext,
    /// Flow of `E_j^T`.
    pub flow_t: MatrixFlow,
    /// Flow of `E_j^T - a_1 I`.
    pub flow_shifted: MatrixFlow,
    pub real_spectrum: bool,
}

impl BlockModel {
    fn new(matrix: SquareMatrix, psi: PsiSpec) -> Result<Self> {
        let spectral = spectral_decompose(&matrix, default_group_tol(&matrix))?.require_positive()?;
        let q = trace(&matrix);
        let psi = Psi::new(psi, &matrix)?;
        let tau_ctx = PolarContext::new(&matrix)?;
        let flow_t = MatrixFlow::new(&matrix.transpose());
        let real_spectrum = !matches!(flow_t, MatrixFlow::TwoShifted { delta2, .. } if delta2 < 0.0);
        let n = matrix.order();
        let shifted = SquareMatrix::new(matrix.transpose().into_dmatrix() - nalgebra::DMatrix::identity(n, n) * spectral.a_min())?;
        let flow_shifted = MatrixFlow::new(&shifted);
        Ok(BlockModel { matrix, q, spectral, psi, tau_ctx, flow_t, flow_shifted, real_spectrum })
    }

    pub fn dim(&self) -> usize {
        self.matrix.order()
    }

    pub fn chart(&self) -> Option<&PolarChart2> {
        self.psi.fast_radial().map(|f| f.chart())
    }

    /// Unit-sphere point for 1-d blocks, `l_0 = 1 / ||1||_0`, and the mass `b l_0` of each of `+-l_0`.
    pub fn sphere_1d(&self) -> (f64, f64) {
        let n = self.psi.ctx().homogeneous_norm(&[1.0]).unwrap_or(1.0);
        let l0 = 1.0 / n;
        (l0, self.matrix[(0, 0)] * l0)
    }
}

/// A validated sheet `X_alpha` with its per-block numerical models.
#[derive(Debug, Clone)]
pub struct SheetSpec {
    params: SheetParams,
    blocks: Vec<BlockModel>,
    osc: Oscillation,
}

impl SheetSpec {
    /// Builds a spec and rejects it unless `0 < H_j < a_1^j` for every block.
    pub fn new(params: SheetParams) -> Result<Self> {
        let spec = Self::unchecked(params)?;
        let rep = existence_check(&spec);
        if !rep.ok {
            return Err(Error::Domain(format!(
                "existence requires 0 < H_j < a_1^j; hurst {:?}, margins {:?}",
                rep.hurst, rep.margins
            )));
        }
        Ok(spec)
    }

    /// Builds a structurally valid spec without the existence criterion (for counterexamples).
    pub fn unchecked(mut params: SheetParams) -> Result<Self> {
        let m = params.layout.m();
        if !(params.alpha > 0.0 && params.alpha <= 2.0) {
            return invalid(format!("alpha must lie in (0, 2], got {}", params.alpha));
        }
        if params.hurst.len() != m {
            return invalid(format!("{} Hurst indices for {m} blocks", params.hurst.len()));
        }
        if params.hurst.iter().any(|h| !h.is_finite()) {
            return invalid("Hurst indices must be finite");
        }
        if params.psi.is_empty() {
            params.psi = vec![PsiSpec::RadialTau; m];
        }
        if params.psi.len() != m {
            return invalid(format!("{} psi specs for {m} blocks", params.psi.len()));
        }
        let blocks = (0..m)
            .map(|j| BlockModel::new(params.layout.block(j)?, params.psi[j].clone()))
            .collect::<Result<Vec<_>>>()?;
        let osc = Oscillation::new(params.alpha);
        Ok(SheetSpec { params, blocks, osc })
    }

    pub fn params(&self) -> &SheetParams {
        &self.params
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.params.layout
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn m(&self) -> usize {
        self.params.layout.m()
    }

    pub fn d(&self) -> usize {
        self.params.layout.d()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.params.layout.dims()
    }

    pub fn hurst(&self) -> &[f64] {
        &self.params.hurst
    }

    /// `H = sum_j H_j`.
    pub fn total_hurst(&self) -> f64 {
        self.params.hurst.iter().sum()
    }

    /// `q_j = trace(E_j)`.
    pub fn q(&self, j: usize) -> f64 {
        self.blocks[j].q
    }

    pub fn spectral(&self, j: usize) -> &SpectralDecomposition {
        &self.blocks[j].spectral
    }

    pub fn psi(&self, j: usize) -> &Psi {
        &self.blocks[j].psi
    }

    /// Polar context of block `j` (radial part `tau_{E_j}`).
    pub fn tau_context(&self, j: usize) -> &PolarContext {
        &self.blocks[j].tau_ctx
    }

    /// Critical Holder exponent `min_j H_j / a_{p_j}^j`.
    pub fn critical_exponent(&self) -> f64 {
        self.blocks
            .iter()
            .zip(&self.params.hurst)
            .map(|(b, h)| h / b.spectral.a_max())
            .fold(f64::INFINITY, f64::min)
    }

    /// Predicted graph dimension `d + 1 - min_j H_j / a_{p_j}^j`.
    pub fn predicted_dimension(&self) -> f64 {
        self.d() as f64 + 1.0 - self.critical_exponent()
    }

    pub(crate) fn block_model(&self, j: usize) -> &BlockModel {
        &self.blocks[j]
    }
}

pub fn existence_check(spec: &SheetSpec) -> ExistenceReport {
    let margins: Vec<f64> = spec
        .blocks
        .iter()
        .zip(&spec.params.hurst)
        .map(|(b, h)| b.spectral.a_min() - h)
        .collect();
    let ok = margins.iter().all(|m| *m > 0.0) && spec.params.hurst.iter().all(|h| *h > 0.0);
    ExistenceReport { ok, margins, hurst: spec.params.hurst.clone() }
}

const RADIAL_TOL: f64 = 1e-9;
const ANGULAR_TOL: f64 = 1e-6;

/// `Gamma_alpha^j(x_j) = int |e^{i<x_j, xi>} - 1|^alpha psi_j(xi)^{-alpha H_j - q_j} dxi`.
pub fn gamma_block(spec: &SheetSpec, j: usize, xj: &[f64]) -> Result<ScaleValue> {
    if j >= spec.m() {
        return invalid(format!("block index {j} out of range"));
    }
    let b = &spec.blocks[j];
    let dj = b.dim();
    if xj.len() != dj {
        return invalid(format!("block {j} has dimension {dj}, got {} coordinates", xj.len()));
    }
    if xj.iter().any(|v| !v.is_finite()) {
        return invalid("non-finite coordinates");
    }
    if xj.iter().all(|v| *v == 0.0) {
        return Ok(ScaleValue::ZERO);
    }
    if dj > 2 {
        return Err(Error::Unsupported(format!("scale quadrature supports blocks of dimension <= 2, got {dj}")));
    }
    let alpha = spec.alpha();
    let h = spec.hurst()[j];
    let expo = -alpha * h - b.q;
    let mut x = [0.0; 2];
    let mut bx = [0.0; 2];
    let mut bbx = [0.0; 2];
    x[..dj].copy_from_slice(xj);
    // B = E^T, so B^T x = E x
    let ex = b.matrix.apply(xj);
    let eex = b.matrix.apply(&ex);
    bx[..dj].copy_from_slice(&ex);
    bbx[..dj].copy_from_slice(&eex);
    let ray = |l: [f64; 2]| Ray {
        flow: &b.flow_t,
        shifted: &b.flow_shifted,
        x,
        bx,
        bbx,
        l,
        dim: dj,
        alpha,
        h,
        a_min: b.spectral.a_min(),
        a_max: b.spectral.a_max(),
        real_spectrum: b.real_spectrum,
    };
    if dj == 1 {
        let (l0, mass) = b.sphere_1d();
        let w = mass * b.psi.eval_fast(&[l0]).powf(expo);
        // g is even, so both directions give the same radial integral
        let (r, e) = radial_integral(&ray([l0, 0.0]), &spec.osc, RADIAL_TOL)?;
        return Ok(ScaleValue { value: 2.0 * w * r, est_abs_error: 2.0 * w * e });
    }
    let chart = b.chart().expect("2x2 block has a chart");
    let mut failure: Option<Error> = None;
    let mut inner_err = 0.0f64;
    let f = |th: f64| {
        if failure.is_some() {
            return 0.0;
        }
        let l = chart.l(th);
        let psi_l = match b.psi.spec() {
            PsiSpec::RadialTau => 1.0,
            _ => b.psi.eval_fast(&l),
        };
        match radial_integral(&ray(l), &spec.osc, RADIAL_TOL) {
            Ok((r, e)) => {
                let w = chart.jacobian(th) * psi_l.powf(expo);
                inner_err = inner_err.max(w * e);
                w * r
            }
            Err(err) => {
                failure = Some(err);
                0.0
            }
        }
    };
    let opts = Adaptive { abs_tol: 0.0, rel_tol: ANGULAR_TOL, max_panels: 400 };
    let (val, err) = adaptive(f, 0.0, std::f64::consts::PI, 16, opts);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ScaleValue { value: 2.0 * val, est_abs_error: 2.0 * (err + inner_err * std::f64::consts::PI) })
}

/// `Gamma_alpha(x) = prod_j Gamma_alpha^j(x_j)`: the `alpha`-th power of the scale of `X_alpha(x)`.
pub fn gamma(spec: &SheetSpec, x: &[f64]) -> Result<ScaleValue> {
    if x.len() != spec.d() {
        return invalid(format!("point has {} coordinates, spec has d = {}", x.len(), spec.d()));
    }
    let parts = spec.layout().split(x);
    if parts.iter().any(|p| p.iter().all(|v| *v == 0.0)) {
        return Ok(ScaleValue::ZERO);
    }
    let mut value = 1.0;
    let mut rel = 0.0;
    for (j, xj) in parts.iter().enumerate() {
        let g = gamma_block(spec, j, xj)?;
        value *= g.value;
        rel += g.est_abs_error / g.value;
    }
    Ok(ScaleValue { value, est_abs_error: value * rel })
}
