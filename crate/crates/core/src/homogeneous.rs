//! Spectral shape functions `psi_j`: continuous, `E_j^T`-homogeneous, positive off the origin.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::SquareMatrix;
use crate::polar::{FastRadial2, PolarContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    /// `psi = tau_{E^T}`.
    #[default]
    RadialTau,
    /// `psi(xi) = (sum_k |<xi, theta_k>|^{rho / b_k})^{1/rho}`.
    PowerSum { directions: Vec<Vec<f64>>, exponents: Vec<f64>, rho: f64 },
}

/// A shape function bound to its block, with the polar context of `E_j^T`.
#[derive(Debug, Clone)]
pub struct Psi {
    spec: PsiSpec,
    ctx: PolarContext,
    /// Tabulated radial part of 2x2 blocks, built on first use.
    fast: OnceLock<FastRadial2>,
    /// `||1||_0` for one-dimensional blocks.
    unit_norm: f64,
}

impl Psi {
    /// `block` is `E_j` itself; the context is built on its transpose.
    pub fn new(spec: PsiSpec, block: &SquareMatrix) -> Result<Self> {
        let ctx = PolarContext::new(&block.transpose())?;
        Self::with_context(spec, ctx)
    }

    pub fn with_context(spec: PsiSpec, ctx: PolarContext) -> Result<Self> {
        let d = ctx.dim();
        if let PsiSpec::PowerSum { directions, exponents, rho } = &spec {
            if directions.is_empty() || directions.len() != exponents.len() {
                return invalid("power-sum psi needs one exponent per direction");
            }
            if directions.iter().any(|t| t.len() != d) {
                return invalid(format!("power-sum directions must have length {d}"));
            }
            if exponents.iter().any(|b| !(*b > 0.0)) || !(*rho >= 1.0) {
                return invalid("power-sum exponents must be positive and rho >= 1");
            }
            let m = nalgebra::DMatrix::from_fn(directions.len(), d, |i, j| directions[i][j]);
            if m.rank(1e-10) < d {
                return invalid("power-sum directions do not span the block");
            }
        }
        let fast = OnceLock::new();
        let unit_norm = if d == 1 { ctx.homogeneous_norm(&[1.0])? } else { 0.0 };
        Ok(Psi { spec, ctx, fast, unit_norm })
    }

    pub fn spec(&self) -> &PsiSpec {
        &self.spec
    }

    /// Polar context of `E_j^T`.
    pub fn ctx(&self) -> &PolarContext {
        &self.ctx
    }

    pub fn fast_radial(&self) -> Option<&FastRadial2> {
        (self.dim() == 2).then(|| self.fast.get_or_init(|| FastRadial2::new(&self.ctx).expect("2x2 polar context")))
    }

    pub fn dim(&self) -> usize {
        self.ctx.dim()
    }

    /// Exact evaluation (root solve for the radial kind).
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        match &self.spec {
            PsiSpec::RadialTau => self.ctx.radial_part(xi),
            PsiSpec::PowerSum { .. } => {
                if xi.len() != self.dim() {
                    return invalid("wrong vector length");
                }
                Ok(self.power_sum(xi))
            }
        }
    }

    /// Evaluation through the tabulated radial part (relative accuracy about 1e-10).
    #[inline]
    pub fn eval_fast(&self, xi: &[f64]) -> f64 {
        match &self.spec {
            PsiSpec::RadialTau => match self.dim() {
                1 => {
                    let b = self.ctx.matrix()[(0, 0)];
                    (xi[0].abs() * self.unit_norm).powf(1.0 / b)
                }
                2 => self.fast_radial().unwrap().tau([xi[0], xi[1]]),
                _ => self.ctx.radial_part(xi).unwrap_or(f64::NAN),
            },
            PsiSpec::PowerSum { .. } => self.power_sum(xi),
        }
    }

    fn power_sum(&self, xi: &[f64]) -> f64 {
        let PsiSpec::PowerSum { directions, exponents, rho } = &self.spec else { unreachable!() };
        let s: f64 = directions
            .iter()
            .zip(exponents)
            .map(|(t, b)| {
                let ip: f64 = t.iter().zip(xi).map(|(a, x)| a * x).sum();
                ip.abs().powf(rho / b)
            })
            .sum();
        s.powf(1.0 / rho)
    }

    /// Worst relative homogeneity error over random `(xi, c)`, with positivity checks.
    pub fn validate(&self, trials: usize, seed: u64) -> Result<ValidationReport> {
        if trials == 0 {
            return invalid("need at least one trial");
        }
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut witness = String::new();
        for _ in 0..trials {
            let mut xi: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let nrm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 {
                continue;
            }
            let r = 10f64.powf(rng.random::<f64>() * 12.0 - 6.0);
            xi.iter_mut().for_each(|v| *v *= r / nrm);
            let c = 10f64.powf(rng.random::<f64>() * 4.0 - 2.0);
            let base = self.eval(&xi)?;
            if !(base > 0.0) || !base.is_finite() {
                return Err(Error::ValidationFailed {
                    message: "psi vanishes or is not finite away from the origin".into(),
                    witness: format!("xi={xi:?}"),
                });
            }
            let scaled = self.eval(&self.ctx.power_apply(c, &xi)?)?;
            let err = (scaled - c * base).abs() / (c * base);
            if err > worst || !err.is_finite() {
                worst = if err.is_finite() { err } else { f64::INFINITY };
                witness = format!("xi={xi:?}, c={c}");
            }
        }
        if worst > 1e-6 {
            return Err(Error::ValidationFailed {
                message: format!("homogeneity error {worst:.3e} exceeds 1e-6"),
                witness,
            });
        }
        Ok(ValidationReport { trials, worst_rel_error: worst, witness })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub trials: usize,
    pub worst_rel_error: f64,
    /// The `(xi, c)` pair attaining the worst error.
    pub witness: String,
}

/// `psi(xi)` for a spec and the polar context of `E_j^T`.
pub fn psi_eval(spec: &PsiSpec, block_ctx: &PolarContext, xi: &[f64]) -> Result<f64> {
    Psi::with_context(spec.clone(), block_ctx.clone())?.eval(xi)
}

pub fn validate_psi(spec: &PsiSpec, block_ctx: &PolarContext, trials: usize, seed: u64) -> Result<ValidationReport> {
    Psi::with_context(spec.clone(), block_ctx.clone())?.validate(trials, seed)
}
