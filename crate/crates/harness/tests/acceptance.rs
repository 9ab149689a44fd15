//! One line per acceptance criterion. Exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ossheet::linalg::{block_power_apply, default_group_tol, mat_power, spectral_decompose, BlockLayout, SquareMatrix};
use ossheet::polar::PolarContext;
use ossheet::scale::{existence_check, gamma, SheetParams, SheetSpec};
use ossheet::synthesis::{rng::derive_seed, synthesize_stable, GaussianOptions, GaussianPlan, GridSpec, StableOptions};
use ossheet_harness::config::ExperimentConfig;
use ossheet_harness::experiments::{self, Check, DimensionReport, Verdict};

const GROUP_TOL: f64 = 1e-10;
const PROJECTOR_TOL: f64 = 1e-8;
const TAU_TOL: f64 = 1e-6;
const GAMMA_FBM_TOL: f64 = 1e-3;
const GAMMA_FBS_TOL: f64 = 1e-2;
const SCALING_TOL: f64 = 1e-3;
const GAUSSIAN_SPREAD: f64 = 0.10;
const STABLE_SPREAD: f64 = 0.15;
const SIGMA_FLOOR: f64 = 1e-3;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sheet(blocks: Vec<Vec<Vec<f64>>>, hurst: Vec<f64>, alpha: f64) -> SheetParams {
    SheetParams { layout: BlockLayout { blocks }, hurst, alpha, psi: vec![] }
}

fn spec(blocks: Vec<Vec<Vec<f64>>>, hurst: Vec<f64>, alpha: f64) -> SheetSpec {
    SheetSpec::new(sheet(blocks, hurst, alpha)).unwrap()
}

fn fbm(h: f64, alpha: f64) -> SheetSpec {
    spec(vec![vec![vec![1.0]]], vec![h], alpha)
}

fn fbs() -> SheetSpec {
    spec(vec![vec![vec![1.0]], vec![vec![1.0]]], vec![0.4, 0.8], 2.0)
}

fn aniso(alpha: f64) -> SheetSpec {
    spec(vec![vec![vec![1.0, 0.0], vec![0.0, 2.0]]], vec![0.6], alpha)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn cv(r: &[f64]) -> f64 {
    let m = r.iter().sum::<f64>() / r.len() as f64;
    let v = r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r.len() - 1) as f64;
    v.sqrt() / m
}

fn random_matrix(rng: &mut ChaCha8Rng) -> SquareMatrix {
    loop {
        let n = rng.random_range(1..=3);
        let mut t = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            t[(i, i)] = rng.random_range(0.3..3.0);
            for j in i + 1..n {
                t[(i, j)] = rng.random_range(-0.5..0.5);
            }
        }
        let s = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(n, n) * 2.0;
        if let Some(inv) = s.clone().try_inverse() {
            if let Ok(m) = SquareMatrix::new(&s * t * inv) {
                return m;
            }
        }
    }
}

fn linear_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut group, mut proj) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let e = random_matrix(&mut rng);
        let (c, d) = (rng.random_range(0.1..10.0), rng.random_range(0.1..10.0));
        let prod = mat_power(c, &e).unwrap().as_dmatrix() * mat_power(d, &e).unwrap().as_dmatrix();
        let cd = mat_power(c * d, &e).unwrap();
        group = group.max((&prod - cd.as_dmatrix()).norm() / cd.as_dmatrix().norm());

        let sd = spectral_decompose(&e, default_group_tol(&e)).unwrap();
        let n = e.order();
        let id = DMatrix::<f64>::identity(n, n);
        let sum = sd.projectors.iter().fold(DMatrix::zeros(n, n), |s, p| s + p.as_dmatrix());
        proj = proj.max((sum - &id).norm());
        for (i, p) in sd.projectors.iter().enumerate() {
            let p = p.as_dmatrix();
            proj = proj.max((p * p - p).norm() / p.norm());
            proj = proj.max(((&id - p) * e.as_dmatrix() * p).norm() / e.frobenius());
            for (k, q) in sd.projectors.iter().enumerate() {
                if i != k {
                    proj = proj.max((p * q.as_dmatrix()).norm());
                }
            }
        }
    }
    outcome(
        group <= GROUP_TOL && proj <= PROJECTOR_TOL,
        format!("group law worst {group:.2e} (<= {GROUP_TOL:e}), projector algebra worst {proj:.2e} (<= {PROJECTOR_TOL:e}) over 100 matrices"),
    )
}

fn polar_ctx(rows: Vec<Vec<f64>>) -> PolarContext {
    PolarContext::new(&SquareMatrix::from_rows(&rows).unwrap()).unwrap()
}

fn polar_coordinates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ctxs = [
        polar_ctx(vec![vec![1.0, 0.0], vec![0.0, 2.0]]),
        polar_ctx(vec![vec![1.0, 1.0], vec![0.0, 1.0]]),
        polar_ctx(vec![vec![0.6, -2.0], vec![2.0, 0.6]]),
        polar_ctx(vec![vec![0.8, 0.3, 0.0], vec![0.0, 1.4, 0.2], vec![0.1, 0.0, 2.5]]),
    ];
    let mut homog = 0.0f64;
    for k in 0..1000 {
        let c = &ctxs[k % ctxs.len()];
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let x: Vec<f64> = (0..c.dim()).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let s = rng.random_range(-5.0f64..5.0).exp();
        let t = c.radial_part(&x).unwrap();
        let ts = c.radial_part(&c.power_apply(s, &x).unwrap()).unwrap();
        homog = homog.max(rel(ts, s * t));
    }
    let mut closed = 0.0f64;
    for a in [1.0, 0.5, 1.7, 3.0] {
        let c = polar_ctx(vec![vec![a, 0.0], vec![0.0, a]]);
        for _ in 0..50 {
            let x: [f64; 2] = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let n = (x[0] * x[0] + x[1] * x[1]).sqrt();
            closed = closed.max(rel(c.radial_part(&x).unwrap(), (n / a).powf(1.0 / a)));
        }
    }
    let mut constants = Vec::new();
    let mut finite = true;
    for c in &ctxs[..2] {
        let r = c.verify_growth_bounds(10_000, 0.05, 7).unwrap();
        finite &= r.all_finite_positive();
        constants.extend(r.constants());
    }
    outcome(
        homog <= TAU_TOL && closed <= TAU_TOL && finite,
        format!(
            "homogeneity worst {homog:.2e}, closed forms worst {closed:.2e} (<= {TAU_TOL:e}), growth constants {} finite positive: {finite}",
            constants.iter().map(|k| format!("{k:.3}")).collect::<Vec<_>>().join("/")
        ),
    )
}

fn scale_integrals() -> Outcome {
    let g1 = gamma(&fbm(0.5, 2.0), &[1.0]).unwrap().value;
    let e_fbm = rel(g1, 2.0 * PI);
    let s = spec(vec![vec![vec![1.0]], vec![vec![1.0]]], vec![0.5, 0.5], 2.0);
    let mut e_fbs = 0.0f64;
    for x in [[1.0, 1.0], [0.5, -3.0], [0.2, 0.7], [-1.5, 2.0]] {
        e_fbs = e_fbs.max(rel(gamma(&s, &x).unwrap().value, 4.0 * PI * PI * (x[0] * x[1]).abs()));
    }
    let specs = [fbm(0.3, 2.0), fbs(), aniso(2.0), aniso(1.5), spec(vec![vec![vec![1.0, 1.0], vec![0.0, 1.0]]], vec![0.6], 1.5)];
    let mut e_law = 0.0f64;
    for sp in &specs {
        let x: Vec<f64> = [0.4, -0.7][..sp.d()].to_vec();
        let base = gamma(sp, &x).unwrap().value;
        for j in 0..sp.m() {
            for c in [0.25, 0.5, 2.0, 4.0] {
                let y = block_power_apply(sp.layout(), j, c, &x).unwrap();
                let want = c.powf(sp.alpha() * sp.hurst()[j]);
                e_law = e_law.max(rel(gamma(sp, &y).unwrap().value / base, want));
            }
        }
    }
    outcome(
        e_fbm <= GAMMA_FBM_TOL && e_fbs <= GAMMA_FBS_TOL && e_law <= SCALING_TOL,
        format!(
            "Gamma(1) = {g1:.8} rel {e_fbm:.1e} (<= {GAMMA_FBM_TOL:e}), sheet product rel {e_fbs:.1e} (<= {GAMMA_FBS_TOL:e}), scaling law worst {e_law:.1e} (<= {SCALING_TOL:e})"
        ),
    )
}

fn existence_gate() -> Outcome {
    let s = |b: f64| vec![vec![b]];
    let d12 = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
    let d53 = vec![vec![0.5, 0.0], vec![0.0, 3.0]];
    let jordan = vec![vec![1.0, 1.0], vec![0.0, 1.0]];
    let rot = vec![vec![1.5, -3.0], vec![3.0, 1.5]];
    // (blocks, hurst, alpha, exists)
    let table: Vec<(Vec<Vec<Vec<f64>>>, Vec<f64>, f64, bool)> = vec![
        (vec![s(1.0)], vec![0.5], 2.0, true),
        (vec![s(1.0)], vec![0.99], 2.0, true),
        (vec![s(1.0)], vec![1.0], 2.0, false),
        (vec![s(1.0)], vec![1.2], 1.5, false),
        (vec![s(1.0)], vec![0.0], 2.0, false),
        (vec![s(1.0)], vec![-0.3], 1.0, false),
        (vec![s(2.0)], vec![1.5], 1.2, true),
        (vec![s(2.0)], vec![2.0], 2.0, false),
        (vec![s(0.5)], vec![0.6], 2.0, false),
        (vec![d12.clone()], vec![0.6], 2.0, true),
        (vec![d12.clone()], vec![1.0], 2.0, false),
        (vec![d12.clone()], vec![1.5], 1.5, false),
        (vec![d53.clone()], vec![0.45], 0.8, true),
        (vec![d53], vec![0.5], 2.0, false),
        (vec![jordan.clone()], vec![0.9], 1.5, true),
        (vec![jordan], vec![1.0], 1.5, false),
        (vec![rot.clone()], vec![1.4], 2.0, true),
        (vec![rot], vec![1.5], 2.0, false),
        (vec![s(1.0), s(1.0)], vec![0.4, 0.8], 2.0, true),
        (vec![d12, s(1.0)], vec![0.9, 1.0], 2.0, false),
    ];
    let mut wrong = Vec::new();
    for (i, (b, h, a, want)) in table.into_iter().enumerate() {
        let got = SheetSpec::unchecked(sheet(b, h, a)).map(|s| existence_check(&s).ok).unwrap_or(false);
        if got != want {
            wrong.push(i);
        }
    }
    outcome(wrong.is_empty(), format!("20 cases, mismatches {wrong:?}"))
}

fn gaussian_calibration() -> Outcome {
    let s = fbm(0.5, 2.0);
    let g = GridSpec::unit(vec![1 << 12]).unwrap();
    let plan = GaussianPlan::new(&s, &g, GaussianOptions::default()).unwrap();
    let idx: Vec<usize> = (1..=10).map(|k| k * 400).collect();
    let mut acc = vec![0.0; idx.len()];
    for r in 0..200 {
        let f = plan.synthesize(derive_seed(5, r)).unwrap();
        for (a, &i) in acc.iter_mut().zip(&idx) {
            *a += f.values[i].powi(2) / 200.0;
        }
    }
    let ratios: Vec<f64> = acc.iter().zip(&idx).map(|(v, &i)| v / gamma(&s, &g.point(i)).unwrap().value).collect();
    let spread = cv(&ratios);
    outcome(spread < GAUSSIAN_SPREAD, format!("Var/Gamma spread {spread:.4} (< {GAUSSIAN_SPREAD}) at 10 points, 200 replicates, 2^12 points"))
}

fn stable_calibration() -> Outcome {
    let mut detail = Vec::new();
    let mut passed = true;
    let cases: [(&str, SheetSpec, GridSpec, Vec<Vec<usize>>); 2] = [
        ("fbm", fbm(0.5, 1.5), GridSpec::unit(vec![17]).unwrap(), vec![vec![2], vec![5], vec![8], vec![12], vec![16]]),
        ("aniso", aniso(1.5), GridSpec::unit(vec![9, 9]).unwrap(), vec![vec![2, 2], vec![4, 8], vec![8, 4], vec![6, 6], vec![8, 8]]),
    ];
    for (name, s, g, pts) in cases {
        let mut cols = vec![Vec::with_capacity(500); pts.len()];
        for r in 0..500 {
            let f = synthesize_stable(&s, &g, StableOptions::default(), derive_seed(6, r)).unwrap();
            for (c, p) in cols.iter_mut().zip(&pts) {
                c.push(f.value_at(p).abs());
            }
        }
        let ratios: Vec<f64> = cols
            .iter_mut()
            .zip(&pts)
            .map(|(c, p)| {
                c.sort_by(f64::total_cmp);
                let x: Vec<f64> = p.iter().enumerate().map(|(a, &i)| g.coord(a, i)).collect();
                c[c.len() / 2] / gamma(&s, &x).unwrap().value.powf(1.0 / 1.5)
            })
            .collect();
        let spread = cv(&ratios);
        passed &= spread < STABLE_SPREAD;
        detail.push(format!("{name} {spread:.4}"));
    }
    outcome(passed, format!("median|X|/Gamma^(1/alpha) spread {} (< {STABLE_SPREAD}) at 5 points, 500 replicates", detail.join(", ")))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_dimension(name: &str, out: &Path) -> DimensionReport {
    let cfg = ExperimentConfig::load(&configs().join(format!("{name}.json"))).unwrap();
    experiments::dimension(&cfg, out).unwrap()
}

fn show(v: &Verdict) -> String {
    format!("{:.3}±{:.3} vs {:.3} (±{})", v.estimate, v.stderr, v.target, v.tolerance)
}

fn dimension_outcome(reports: &[&DimensionReport]) -> Outcome {
    let vs: Vec<&Verdict> = reports.iter().map(|r| r.verdict("dimension").unwrap()).collect();
    let detail = reports.iter().zip(&vs).map(|(r, v)| format!("{} {}", r.name, show(v))).collect::<Vec<_>>().join(", ");
    outcome(vs.iter().all(|v| v.passed), detail)
}

fn holder_outcome(reports: &[&DimensionReport]) -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for r in reports {
        for v in r.verdicts.iter().filter(|v| v.quantity == "holder" || v.quantity.starts_with("slice_")) {
            passed &= v.passed;
            parts.push(format!("{} {} {}", r.name, v.quantity, show(v)));
        }
    }
    outcome(passed, parts.join(", "))
}

fn sigma_bound(out: &Path) -> Outcome {
    let mut cfg = ExperimentConfig::load(&configs().join("aniso.json")).unwrap();
    cfg.verify.sigma_pairs = 1000;
    cfg.verify.sigma_floor = SIGMA_FLOOR;
    let r = experiments::verify(&cfg, out, &[Check::Sigma]).unwrap();
    let v = &r.verdicts[0];
    outcome(v.passed, format!("infimum {:.4} over 1000 pairs (>= {SIGMA_FLOOR:e})", v.estimate))
}

fn energy(out: &Path) -> Outcome {
    let r = run_dimension("fbm-h05-energy", out);
    let v = r.verdict("energy_coherent_runs").unwrap();
    let runs = r.replicates.iter().filter(|x| x.energy.is_some()).count();
    outcome(v.passed, format!("{} of {runs} runs finite at D-0.2 and diverging at D+0.2 (need {})", v.estimate, v.target))
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(root: &Path) -> Outcome {
    let small = |text: &str| ExperimentConfig::parse(text).unwrap();
    let sheet_cfg = small(
        r#"{"schema": 1, "name": "det-sheet", "sheet": {"layout": {"blocks": [[[1.0]], [[1.0]]]}, "hurst": [0.4, 0.8], "alpha": 2.0},
            "grid": {"counts": [129, 129], "lower": [0.0, 0.0], "upper": [1.0, 1.0]}, "replicates": 3, "seed": 11,
            "estimator": {"levels": {"levels": [1, 4]}}, "slices": [{"block": 0, "anchor": [0.0, 1.0]}]}"#,
    );
    let energy_cfg = small(
        r#"{"schema": 1, "name": "det-energy", "sheet": {"layout": {"blocks": [[[1.0]]]}, "hurst": [0.5], "alpha": 2.0},
            "grid": {"counts": [4096], "lower": [0.0], "upper": [1.0]}, "replicates": 3, "seed": 12,
            "energy": {"runs": 2, "options": {"batches": 64}}}"#,
    );
    let stable_cfg = small(
        r#"{"schema": 1, "name": "det-stable", "sheet": {"layout": {"blocks": [[[1.0, 0.0], [0.0, 2.0]]]}, "hurst": [0.6], "alpha": 1.5},
            "grid": {"counts": [33, 33], "lower": [0.0, 0.0], "upper": [1.0, 1.0]}, "replicates": 2, "seed": 13,
            "estimator": {"levels": {"levels": [0, 3]}}}"#,
    );
    let mut trees = Vec::new();
    for (i, threads) in [1usize, 8, 8].into_iter().enumerate() {
        let out = root.join(format!("pass{i}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            for cfg in [&sheet_cfg, &energy_cfg, &stable_cfg] {
                experiments::simulate(cfg, &out).unwrap();
                experiments::dimension(cfg, &out).unwrap();
            }
        });
        trees.push(tree(&out));
    }
    let files = trees[0].len();
    let same = trees[0] == trees[1] && trees[1] == trees[2];
    let oss = trees[0].iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "oss")).count();
    outcome(same && oss > 0, format!("{files} files ({oss} field dumps) identical across two runs and thread counts 1 and 8: {same}"))
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let mut failed = 0;
    let mut report = |n: usize, budget: Duration, shared: bool, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        let dt = t0.elapsed();
        let in_budget = shared || dt <= budget;
        let ok = o.passed && in_budget;
        failed += !ok as usize;
        let time = if shared { "runs shared with 7-9".to_string() } else { format!("{:.1}s of {}s", dt.as_secs_f64(), budget.as_secs()) };
        println!("criterion {n:>2} {} {} [{time}]", if ok { "PASS" } else { "FAIL" }, o.detail);
    };
    let s = Duration::from_secs;
    report(1, s(5), false, &mut linear_algebra);
    report(2, s(30), false, &mut polar_coordinates);
    report(3, s(60), false, &mut scale_integrals);
    report(4, s(1), false, &mut existence_gate);
    report(5, s(300), false, &mut gaussian_calibration);
    report(6, s(600), false, &mut stable_calibration);

    let mut fbm_runs = Vec::new();
    report(7, s(300), false, &mut || {
        fbm_runs = ["fbm-h03", "fbm-h05", "fbm-h07"].iter().map(|n| run_dimension(n, out)).collect();
        dimension_outcome(&fbm_runs.iter().collect::<Vec<_>>())
    });
    let mut fbs_run = None;
    report(8, s(900), false, &mut || {
        let r = run_dimension("fbs", out);
        let o = dimension_outcome(&[&r]);
        fbs_run = Some(r);
        o
    });
    let mut aniso_run = None;
    report(9, s(900), false, &mut || {
        let r = run_dimension("aniso", out);
        let o = dimension_outcome(&[&r]);
        aniso_run = Some(r);
        o
    });
    report(10, s(600), true, &mut || {
        let mut all: Vec<&DimensionReport> = fbm_runs.iter().collect();
        all.extend(fbs_run.iter());
        all.extend(aniso_run.iter());
        holder_outcome(&all)
    });
    report(11, s(600), false, &mut || sigma_bound(out));
    report(12, s(300), false, &mut || energy(out));
    report(13, s(600), false, &mut || determinism(&out.join("determinism")));

    println!("{} of 13 criteria passed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
