//! Versioned JSON experiment configuration.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ossheet::fracdim::{EnergyOptions, LevelOptions, Pool};
use ossheet::scale::{existence_check, SheetParams, SheetSpec};
use ossheet::synthesis::{GridSpec, SliceSpec, Synthesizer};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub name: String,
    /// Blocks are row-major matrices.
    pub sheet: SheetParams,
    pub grid: GridSpec,
    /// Gaussian spectral synthesis for `alpha = 2`, LePage series otherwise, when absent.
    #[serde(default)]
    pub synthesis: Option<Synthesizer>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Master seed; replicate `r` uses `derive_seed(seed, r)`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerance: Tolerances,
    /// One-block slices whose Holder exponents are estimated per replicate.
    #[serde(default)]
    pub slices: Vec<SliceSpec>,
    #[serde(default)]
    pub energy: Option<EnergyConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionMethod {
    /// Oscillation sums `sum osc / eps` over the box partition.
    #[default]
    Oscillation,
    /// Occupied box counts.
    Boxes,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub levels: LevelOptions,
    pub dimension: DimensionMethod,
    pub pool: Pool,
}

/// Stochastic acceptance budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub dimension: f64,
    pub holder: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { dimension: 0.1, holder: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub n_pairs: usize,
    /// Energies are probed at `D - offset` and `D + offset`.
    pub offset: f64,
    /// Replicates probed; at most `replicates`.
    pub runs: usize,
    /// Fraction of runs that must be coherent.
    pub required: f64,
    pub options: EnergyOptions,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig { n_pairs: 10_000, offset: 0.2, runs: 10, required: 0.8, options: EnergyOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub scaling_trials: usize,
    pub scaling_tolerance: f64,
    pub tau_samples: usize,
    pub tau_eps: f64,
    pub sigma_pairs: usize,
    pub sigma_floor: f64,
    pub psi_trials: usize,
    pub psi_tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            scaling_trials: 10,
            scaling_tolerance: 1e-3,
            tau_samples: 1000,
            tau_eps: 0.05,
            sigma_pairs: 1000,
            sigma_floor: 1e-3,
            psi_trials: 1000,
            psi_tolerance: 1e-6,
        }
    }
}

/// Command-line values that replace configuration fields.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub tolerance: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA {
            bail!("unsupported config schema {} (this build reads schema {SCHEMA})", cfg.schema);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.replicates {
            self.replicates = r;
        }
        if let Some(t) = o.tolerance {
            self.tolerance.dimension = t;
        }
    }

    /// Checks the configuration and builds the sheet.
    pub fn validate(&self) -> Result<SheetSpec> {
        if self.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        if !(self.tolerance.dimension > 0.0 && self.tolerance.holder > 0.0) {
            bail!("tolerances must be positive");
        }
        self.grid.validate().context("grid")?;
        let spec = SheetSpec::unchecked(self.sheet.clone()).context("sheet")?;
        let rep = existence_check(&spec);
        if !rep.ok {
            let bad: Vec<String> = rep
                .margins
                .iter()
                .enumerate()
                .filter(|(j, m)| **m <= 0.0 || rep.hurst[*j] <= 0.0)
                .map(|(j, m)| format!("block {j}: H = {} but a_1 = {}", rep.hurst[j], rep.hurst[j] + m))
                .collect();
            bail!(
                "the sheet does not exist: the harmonizable integral is stochastically continuous only if 0 < H_j < a_1^j for every block ({})",
                bad.join("; ")
            );
        }
        if spec.d() != self.grid.d() {
            bail!("grid has {} axes but the sheet has dimension {}", self.grid.d(), spec.d());
        }
        for j in 0..spec.m() {
            let r = spec.psi(j).validate(200, self.seed).with_context(|| format!("psi of block {j}"))?;
            if r.worst_rel_error > self.verify.psi_tolerance {
                bail!("psi of block {j} is not homogeneous: error {} at {}", r.worst_rel_error, r.witness);
            }
        }
        if let Some(e) = &self.energy {
            if e.runs == 0 || !(e.offset > 0.0) || !(0.0..=1.0).contains(&e.required) {
                bail!("energy needs runs >= 1, offset > 0 and required in [0, 1]");
            }
        }
        Ok(spec)
    }

    pub fn synthesizer(&self, spec: &SheetSpec) -> Synthesizer {
        self.synthesis.unwrap_or_else(|| Synthesizer::for_spec(spec))
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configs serialize");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
