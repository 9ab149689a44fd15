//! The canned experiments: field simulation, numerical verification and dimension reproduction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ossheet::fracdim::{
    box_dimension, energy_estimate, holder_exponent, holder_exponent_axis, oscillation_dimension, DimensionEstimate, EnergyEstimate,
    GraphView, HolderEstimate, Trend,
};
use ossheet::scale::{sigma_lower_bound_scan, verify_scaling_laws, SheetSpec};
use ossheet::synthesis::rng::derive_seed;
use ossheet::synthesis::{slice, write_field_labeled, FieldRealization, GaussianPlan, Synthesizer};

use crate::config::{DimensionMethod, ExperimentConfig};
use crate::output::{num, RunDir};

/// Builds fields for successive seeds, reusing the spectral plan.
pub enum Generator {
    Gaussian(Box<GaussianPlan>),
    Series { synth: Synthesizer, spec: Box<SheetSpec>, cfg: Box<ExperimentConfig> },
}

impl Generator {
    pub fn new(cfg: &ExperimentConfig, spec: &SheetSpec) -> Result<Self> {
        Ok(match cfg.synthesizer(spec) {
            Synthesizer::Gaussian(o) => Generator::Gaussian(Box::new(GaussianPlan::new(spec, &cfg.grid, o)?)),
            synth => Generator::Series { synth, spec: Box::new(spec.clone()), cfg: Box::new(cfg.clone()) },
        })
    }

    pub fn field(&self, seed: u64) -> Result<FieldRealization> {
        Ok(match self {
            Generator::Gaussian(p) => p.synthesize(seed)?,
            Generator::Series { synth, spec, cfg } => synth.synthesize(spec, &cfg.grid, seed)?,
        })
    }
}

pub fn replicate_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, r as u64)
}

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub quantity: String,
    pub target: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub tolerance: f64,
    /// `within` (`|estimate - target| <= tolerance`), `at_least` or `at_most` (against `target`).
    pub rule: String,
    pub passed: bool,
}

impl Verdict {
    pub fn within(quantity: &str, target: f64, estimate: f64, stderr: f64, tolerance: f64) -> Self {
        let passed = (estimate - target).abs() <= tolerance;
        Verdict { quantity: quantity.into(), target, estimate, stderr, tolerance, rule: "within".into(), passed }
    }

    fn bound(quantity: &str, rule: &str, target: f64, estimate: f64) -> Self {
        let passed = match rule {
            "at_least" => estimate >= target,
            _ => estimate <= target,
        };
        Verdict { quantity: quantity.into(), target, estimate, stderr: 0.0, tolerance: 0.0, rule: rule.into(), passed }
    }

    pub fn recheck(&mut self) {
        self.passed = match self.rule.as_str() {
            "within" => (self.estimate - self.target).abs() <= self.tolerance,
            "at_least" => self.estimate >= self.target,
            _ => self.estimate <= self.target,
        };
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.quantity.clone(),
            num(self.target),
            num(self.estimate),
            num(self.stderr),
            num(self.tolerance),
            self.rule.clone(),
            if self.passed { "pass" } else { "fail" }.into(),
        ]
    }
}

pub const SUMMARY_HEADER: [&str; 7] = ["quantity", "target", "estimate", "stderr", "tolerance", "rule", "verdict"];

fn write_summary(run: &RunDir, command: &str, verdicts: &[Verdict]) -> Result<PathBuf> {
    let rows: Vec<Vec<String>> = verdicts.iter().map(Verdict::row).collect();
    run.table(&format!("summary_{command}.csv"), &SUMMARY_HEADER, &rows)
}

/// Theoretical targets, always recomputed from the sheet: the graph dimension, the critical
/// Holder exponent and the exponent `H_j / a_{p_j}^j` of every configured slice.
pub fn targets(cfg: &ExperimentConfig, spec: &SheetSpec) -> BTreeMap<String, f64> {
    let mut t = BTreeMap::new();
    t.insert("dimension".to_string(), spec.predicted_dimension());
    t.insert("holder".to_string(), spec.critical_exponent());
    for (k, s) in cfg.slices.iter().enumerate() {
        if s.block < spec.m() {
            t.insert(format!("slice_{k}"), spec.hurst()[s.block] / spec.spectral(s.block).a_max());
        }
    }
    t
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn labels(run: &RunDir, r: usize, seed: u64) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("config_hash".to_string(), run.hash.clone()),
        ("master_seed".to_string(), run.seed.to_string()),
        ("replicate".to_string(), r.to_string()),
        ("replicate_seed".to_string(), seed.to_string()),
    ])
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub wall_clock: Duration,
}

/// Writes one OSS1 dump per replicate.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateReport> {
    let t0 = Instant::now();
    let spec = cfg.validate()?;
    let run = RunDir::create(out, cfg)?;
    let gen = Generator::new(cfg, &spec)?;
    // Fields are generated in parallel and written by this thread in replicate order.
    let chunk = rayon::current_num_threads().max(1);
    let mut results: Vec<(PathBuf, Vec<String>)> = Vec::with_capacity(cfg.replicates);
    for start in (0..cfg.replicates).step_by(chunk) {
        let fields = (start..(start + chunk).min(cfg.replicates))
            .into_par_iter()
            .map(|r| {
                let seed = replicate_seed(cfg.seed, r);
                Ok((r, seed, gen.field(seed)?))
            })
            .collect::<Result<Vec<_>>>()?;
        for (r, seed, f) in fields {
            let name = format!("field_{r:03}.oss");
            let path = run.file(&name);
            write_field_labeled(&path, &f, &labels(&run, r, seed)).with_context(|| format!("writing {}", path.display()))?;
            let (lo, hi) = f.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            results.push((path, vec![r.to_string(), seed.to_string(), name, f.values.len().to_string(), num(lo), num(hi)]));
        }
    }
    let rows: Vec<Vec<String>> = results.iter().map(|(_, r)| r.clone()).collect();
    run.table("fields.csv", &["replicate", "replicate_seed", "file", "points", "min", "max"], &rows)?;
    Ok(SimulateReport { dir: run.path, files: results.into_iter().map(|(p, _)| p).collect(), wall_clock: t0.elapsed() })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyRun {
    pub low: EnergyEstimate,
    pub high: EnergyEstimate,
    /// Finite below the estimated dimension and diverging above it.
    pub coherent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    /// The configured headline estimator.
    pub dimension: DimensionEstimate,
    pub boxes: DimensionEstimate,
    pub oscillation: DimensionEstimate,
    pub holder: HolderEstimate,
    pub axes: Vec<HolderEstimate>,
    pub slices: Vec<HolderEstimate>,
    pub energy: Option<EnergyRun>,
}

#[derive(Debug, Clone)]
pub struct DimensionReport {
    pub name: String,
    pub dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub replicates: Vec<ReplicateResult>,
    pub verdicts: Vec<Verdict>,
    pub wall_clock: Duration,
}

impl DimensionReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, quantity: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.quantity == quantity)
    }
}

fn analyse(cfg: &ExperimentConfig, f: &FieldRealization, r: usize, seed: u64) -> Result<ReplicateResult> {
    let e = &cfg.estimator;
    let view = GraphView::from(f);
    let boxes = box_dimension(view, e.levels)?;
    let oscillation = oscillation_dimension(view, e.levels)?;
    let dimension = match e.dimension {
        DimensionMethod::Oscillation => oscillation.clone(),
        DimensionMethod::Boxes => boxes.clone(),
    };
    let axes = (0..view.d()).map(|a| holder_exponent_axis(view, a, e.levels, e.pool)).collect::<ossheet::Result<Vec<_>>>()?;
    let holder = holder_exponent(view, e.levels, e.pool)?;
    let slices = cfg
        .slices
        .iter()
        .map(|s| {
            let sl = slice(f, s)?;
            holder_exponent(GraphView::from(&sl), e.levels, e.pool)
        })
        .collect::<ossheet::Result<Vec<_>>>()?;
    let energy = match &cfg.energy {
        Some(ec) if r < ec.runs => {
            let es = derive_seed(seed, 1);
            let low = energy_estimate(view, dimension.value - ec.offset, ec.n_pairs, es, ec.options)?;
            let high = energy_estimate(view, dimension.value + ec.offset, ec.n_pairs, es, ec.options)?;
            let coherent = low.trend == Trend::Finite && high.trend == Trend::Diverging;
            Some(EnergyRun { low, high, coherent })
        }
        _ => None,
    };
    Ok(ReplicateResult { replicate: r, seed, dimension, boxes, oscillation, holder, axes, slices, energy })
}

/// Synthesizes the replicates, estimates dimension and Holder exponents, and compares them with
/// the targets `d + 1 - min_j H_j / a_{p_j}^j` and `min_j H_j / a_{p_j}^j`.
pub fn dimension(cfg: &ExperimentConfig, out: &Path) -> Result<DimensionReport> {
    let t0 = Instant::now();
    let spec = cfg.validate()?;
    let run = RunDir::create(out, cfg)?;
    let gen = Generator::new(cfg, &spec)?;
    let reps: Vec<ReplicateResult> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(cfg.seed, r);
            let f = gen.field(seed)?;
            analyse(cfg, &f, r, seed).with_context(|| format!("replicate {r}"))
        })
        .collect::<Result<Vec<_>>>()?;

    let d = cfg.grid.d();
    let mut header: Vec<String> = [
        "replicate",
        "replicate_seed",
        "dimension",
        "dimension_stderr",
        "dimension_r2",
        "box_dimension",
        "oscillation_dimension",
        "level_min",
        "level_max",
        "vertical_unit",
        "clamped",
        "holder",
        "holder_axis",
        "holder_stderr",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..d).map(|a| format!("holder_axis_{a}")));
    let rows: Vec<Vec<String>> = reps
        .iter()
        .map(|x| {
            let mut row = vec![
                x.replicate.to_string(),
                x.seed.to_string(),
                num(x.dimension.value),
                num(x.dimension.stderr),
                num(x.dimension.r2),
                num(x.boxes.value),
                num(x.oscillation.value),
                x.dimension.scale_range.0.to_string(),
                x.dimension.scale_range.1.to_string(),
                num(x.boxes.unit),
                x.dimension.clamped.to_string(),
                num(x.holder.value),
                x.holder.axis.to_string(),
                num(x.holder.stderr),
            ];
            row.extend(x.axes.iter().map(|h| num(h.value)));
            row
        })
        .collect();
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    run.table("replicates.csv", &h, &rows)?;

    let mut levels = Vec::new();
    for x in &reps {
        for (l, c) in &x.boxes.counts {
            levels.push(vec![x.replicate.to_string(), l.to_string(), c.to_string(), num((*c as f64).log2())]);
        }
    }
    run.table("levels.csv", &["replicate", "level", "count", "log2_count"], &levels)?;

    let tg = targets(cfg, &spec);
    let tol = cfg.tolerance;
    let dims: Vec<f64> = reps.iter().map(|x| x.dimension.value).collect();
    let (m, se) = mean_stderr(&dims);
    let mut verdicts = vec![Verdict::within("dimension", tg["dimension"], m, se, tol.dimension)];
    let hol: Vec<f64> = reps.iter().map(|x| x.holder.value).collect();
    let (m, se) = mean_stderr(&hol);
    verdicts.push(Verdict::within("holder", tg["holder"], m, se, tol.holder));

    if !cfg.slices.is_empty() {
        let mut rows = Vec::new();
        for (k, s) in cfg.slices.iter().enumerate() {
            let key = format!("slice_{k}");
            let vals: Vec<f64> = reps.iter().map(|x| x.slices[k].value).collect();
            for x in &reps {
                rows.push(vec![
                    x.replicate.to_string(),
                    k.to_string(),
                    s.block.to_string(),
                    num(tg[&key]),
                    num(x.slices[k].value),
                    num(x.slices[k].stderr),
                ]);
            }
            let (m, se) = mean_stderr(&vals);
            verdicts.push(Verdict::within(&key, tg[&key], m, se, tol.holder));
        }
        run.table("slices.csv", &["replicate", "slice", "block", "target", "exponent", "stderr"], &rows)?;
    }

    if let Some(ec) = &cfg.energy {
        let runs: Vec<&EnergyRun> = reps.iter().filter_map(|x| x.energy.as_ref()).collect();
        let mut rows = Vec::new();
        for x in &reps {
            if let Some(e) = &x.energy {
                for est in [&e.low, &e.high] {
                    rows.push(vec![
                        x.replicate.to_string(),
                        num(x.dimension.value),
                        num(est.gamma),
                        num(est.estimates[0]),
                        num(est.estimates[1]),
                        num(est.estimates[2]),
                        num(est.slope),
                        format!("{:?}", est.trend).to_lowercase(),
                    ]);
                }
            }
        }
        run.table("energy.csv", &["replicate", "dimension", "gamma", "estimate_quarter", "estimate_half", "estimate", "slope", "trend"], &rows)?;
        let coherent = runs.iter().filter(|e| e.coherent).count();
        let need = (ec.required * runs.len() as f64).ceil();
        verdicts.push(Verdict::bound("energy_coherent_runs", "at_least", need, coherent as f64));
    }
    write_summary(&run, "dimension", &verdicts)?;
    Ok(DimensionReport {
        name: cfg.name.clone(),
        dir: run.path.clone(),
        config_hash: run.hash.clone(),
        seed: cfg.seed,
        replicates: reps,
        verdicts,
        wall_clock: t0.elapsed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Scaling,
    Tau,
    Sigma,
    Psi,
}

impl Check {
    pub const ALL: [Check; 4] = [Check::Scaling, Check::Tau, Check::Sigma, Check::Psi];

    pub fn name(&self) -> &'static str {
        match self {
            Check::Scaling => "scaling",
            Check::Tau => "tau",
            Check::Sigma => "sigma",
            Check::Psi => "psi",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub dir: PathBuf,
    pub verdicts: Vec<Verdict>,
    pub wall_clock: Duration,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Numerical checks of the scale functionals, radial parts, the sigma bound and psi.
pub fn verify(cfg: &ExperimentConfig, out: &Path, checks: &[Check]) -> Result<VerifyReport> {
    let t0 = Instant::now();
    if checks.is_empty() {
        bail!("no checks selected");
    }
    let spec = cfg.validate()?;
    let run = RunDir::create(out, cfg)?;
    let v = cfg.verify;
    let mut verdicts = Vec::new();
    for c in checks {
        match c {
            Check::Scaling => {
                let r = verify_scaling_laws(&spec, v.scaling_trials, cfg.seed, v.scaling_tolerance)?;
                run.table(
                    "verify_scaling.csv",
                    &["trials", "tolerance", "worst_scaling_error", "worst_slice_error", "slice_tolerance", "passed"],
                    &[vec![
                        r.trials.to_string(),
                        num(r.tolerance),
                        num(r.worst_scaling_error),
                        num(r.worst_slice_error),
                        num(r.slice_tolerance),
                        r.passed.to_string(),
                    ]],
                )?;
                verdicts.push(Verdict::bound("scaling_error", "at_most", v.scaling_tolerance, r.worst_scaling_error));
                verdicts.push(Verdict::bound("slice_error", "at_most", r.slice_tolerance, r.worst_slice_error));
            }
            Check::Tau => {
                let mut rows = Vec::new();
                let mut smallest = f64::INFINITY;
                let mut ok = true;
                for j in 0..spec.m() {
                    let r = spec.tau_context(j).verify_growth_bounds(v.tau_samples, v.tau_eps, cfg.seed)?;
                    ok &= r.all_finite_positive();
                    let k = r.constants();
                    smallest = smallest.min(k.iter().cloned().fold(f64::INFINITY, f64::min));
                    rows.push(vec![
                        j.to_string(),
                        num(k[0]),
                        num(k[1]),
                        num(k[2]),
                        num(k[3]),
                        r.n_small.to_string(),
                        r.n_large.to_string(),
                        r.all_finite_positive().to_string(),
                    ]);
                }
                run.table("verify_tau.csv", &["block", "k1", "k2", "k3", "k4", "n_small", "n_large", "finite_positive"], &rows)?;
                let mut vd = Verdict::bound("tau_smallest_constant", "at_least", 0.0, smallest);
                vd.passed = ok && smallest > 0.0;
                verdicts.push(vd);
            }
            Check::Sigma => {
                let r = sigma_lower_bound_scan(&spec, v.sigma_pairs, cfg.seed)?;
                run.table(
                    "verify_sigma.csv",
                    &["pairs", "infimum", "median", "witness_x", "witness_y"],
                    &[vec![
                        r.pairs.to_string(),
                        num(r.infimum),
                        num(r.median),
                        r.witness_x.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" "),
                        r.witness_y.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" "),
                    ]],
                )?;
                verdicts.push(Verdict::bound("sigma_infimum", "at_least", v.sigma_floor, r.infimum));
            }
            Check::Psi => {
                let mut rows = Vec::new();
                let mut worst = 0.0f64;
                for j in 0..spec.m() {
                    let r = spec.psi(j).validate(v.psi_trials, cfg.seed)?;
                    worst = worst.max(r.worst_rel_error);
                    rows.push(vec![j.to_string(), r.trials.to_string(), num(r.worst_rel_error), r.witness.clone()]);
                }
                run.table("verify_psi.csv", &["block", "trials", "worst_rel_error", "witness"], &rows)?;
                verdicts.push(Verdict::bound("psi_homogeneity", "at_most", v.psi_tolerance, worst));
            }
        }
    }
    write_summary(&run, "verify", &verdicts)?;
    Ok(VerifyReport { dir: run.path, verdicts, wall_clock: t0.elapsed() })
}
