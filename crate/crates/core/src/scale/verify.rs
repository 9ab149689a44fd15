use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{gamma, sigma_qmc, QmcOptions, SheetSpec};
use crate::error::{invalid, Error, Result};
use crate::linalg::block_power_apply;

const FACTORS: [f64; 4] = [0.25, 0.5, 2.0, 4.0];

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub trials: usize,
    pub tolerance: f64,
    /// Worst relative error of `Gamma(c^{E_j} x) / Gamma(x) = c^{alpha H_j}`.
    pub worst_scaling_error: f64,
    /// Worst relative error of the slice-increment identity.
    pub worst_slice_error: f64,
    pub slice_tolerance: f64,
    pub passed: bool,
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let v = 0.1 + 0.9 * rng.random::<f64>();
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Checks operator scaling of `Gamma` for every block and factor in `{1/4, 1/2, 2, 4}`, and the
/// slice identity `sigma(u[x + h], u[h]) = Gamma(u[x])` where `u[.]` replaces block `j` of `u`.
///
/// The slice check runs through polarisation (`alpha = 2`) or QMC, never through the
/// single-block factorisation, so it exercises translation invariance of the quadrature.
pub fn verify_scaling_laws(spec: &SheetSpec, trials: usize, seed: u64, tol: f64) -> Result<ScalingReport> {
    if trials == 0 || !(tol > 0.0) {
        return invalid("need trials >= 1 and a positive tolerance");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.d();
    let alpha = spec.alpha();
    let mut worst = 0.0f64;
    let mut worst_slice = 0.0f64;
    let slice_tol = if alpha == 2.0 { tol } else { tol.max(2e-2) };
    for t in 0..trials {
        let x = random_point(&mut rng, d);
        let base = gamma(spec, &x)?.value;
        for j in 0..spec.m() {
            for c in FACTORS {
                let y = block_power_apply(spec.layout(), j, c, &x)?;
                let got = gamma(spec, &y)?.value / base;
                let want = c.powf(alpha * spec.hurst()[j]);
                let err = (got - want).abs() / want;
                worst = worst.max(err);
                if !(err <= tol) {
                    return Err(Error::ValidationFailed {
                        message: format!("operator scaling off by {err:.3e} (block {j}, c = {c})"),
                        witness: format!("x={x:?}"),
                    });
                }
            }
        }
        // slice increments
        let j = t % spec.m();
        let u = random_point(&mut rng, d);
        let shift = random_point(&mut rng, d);
        let off = spec.layout().offset(j);
        let dj = spec.dims()[j];
        let (mut p, mut q, mut r) = (u.clone(), u.clone(), u.clone());
        for k in off..off + dj {
            p[k] = x[k] + shift[k];
            q[k] = shift[k];
            r[k] = x[k];
        }
        let lhs = if alpha == 2.0 {
            polarised_pair(spec, &p, &q)?
        } else {
            let o = QmcOptions { seed: seed ^ t as u64, ..QmcOptions::default() };
            sigma_qmc(spec, &p, &q, o)?.value.powf(alpha)
        };
        let rhs = gamma(spec, &r)?.value;
        let err = (lhs - rhs).abs() / rhs;
        worst_slice = worst_slice.max(err);
        if !(err <= slice_tol) {
            return Err(Error::ValidationFailed {
                message: format!("slice increment scale off by {err:.3e} (block {j})"),
                witness: format!("u={u:?}, x={x:?}, h={shift:?}"),
            });
        }
    }
    Ok(ScalingReport {
        trials,
        tolerance: tol,
        worst_scaling_error: worst,
        worst_slice_error: worst_slice,
        slice_tolerance: slice_tol,
        passed: true,
    })
}

/// `E|X(p) - X(q)|^2` by polarisation over every block, shared ones included.
fn polarised_pair(spec: &SheetSpec, p: &[f64], q: &[f64]) -> Result<f64> {
    let ps = spec.layout().split(p);
    let qs = spec.layout().split(q);
    let (mut gp, mut gq, mut c) = (1.0, 1.0, 1.0);
    for j in 0..spec.m() {
        let a = super::gamma_block(spec, j, ps[j])?.value;
        let b = super::gamma_block(spec, j, qs[j])?.value;
        let diff: Vec<f64> = ps[j].iter().zip(qs[j]).map(|(u, v)| u - v).collect();
        let g = super::gamma_block(spec, j, &diff)?.value;
        gp *= a;
        gq *= b;
        c *= 0.5 * (a + b - g);
    }
    Ok(gp + gq - 2.0 * c)
}
