use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ossheet"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn small(dir: &Path, hurst: f64) -> PathBuf {
    let text = format!(
        r#"{{"schema": 1, "name": "small", "sheet": {{"layout": {{"blocks": [[[1.0]]]}}, "hurst": [{hurst}], "alpha": 2.0}},
            "grid": {{"counts": [1024], "lower": [0.0], "upper": [1.0]}}, "replicates": 2, "seed": 4}}"#
    );
    let p = dir.join(format!("small-{hurst}.json"));
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String, String) {
    let o = bin().args(args).output().unwrap();
    (o.status.code().unwrap(), String::from_utf8(o.stdout).unwrap(), String::from_utf8(o.stderr).unwrap())
}

#[test]
fn simulate_writes_labelled_dumps_and_refuses_missing_sheets() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small(t.path(), 0.5);
    let out = t.path().join("out");
    let (code, _, err) = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let runs: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let meta = ossheet::synthesis::read_meta(&runs[0].join("field_000.oss")).unwrap();
    assert_eq!(meta.labels["master_seed"], "4");
    assert!(runs[0].file_name().unwrap().to_str().unwrap().ends_with(&meta.labels["config_hash"]));
    let f = ossheet::synthesis::read_field(&runs[0].join("field_001.oss")).unwrap();
    assert_eq!(f.values.len(), 1024);
    let csv = std::fs::read_to_string(runs[0].join("fields.csv")).unwrap();
    assert!(csv.starts_with("config_hash,seed,"));

    let (code, _, err) = run(&["simulate", "--config", config("invalid-h.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("H_j < a_1^j"), "{err}");
}

#[test]
fn dimension_and_report_round_trip() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("out");
    for h in [0.3, 0.7] {
        let cfg = small(t.path(), h);
        let (code, stdout, err) = run(&["dimension", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--tolerance", "0.3"]);
        assert!(code == 0 || code == 1, "{err}");
        assert!(stdout.contains("Hausdorff"));
    }
    let (code, stdout, _) = run(&["report", out.to_str().unwrap()]);
    assert!(code == 0 || code == 1);
    let rows: Vec<&str> = stdout.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    let mut sorted = rows.clone();
    sorted.sort();
    assert_eq!(rows, sorted);
    for name in ["replicates.csv", "levels.csv", "summary_dimension.csv"] {
        let run_dir = std::fs::read_dir(&out).unwrap().next().unwrap().unwrap().path();
        assert!(run_dir.join(name).is_file(), "{name}");
    }
}

#[test]
fn report_handles_empty_corrupt_and_foreign_runs() {
    let t = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(&["report", t.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 2);

    let cfg = small(t.path(), 0.5);
    let out = t.path().join("out");
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0, 0);
    let dir = std::fs::read_dir(&out).unwrap().next().unwrap().unwrap().path();

    let manifest = dir.join("manifest.json");
    let original = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(&manifest, original.replace(&format!("\"version\": \"{}\"", env!("CARGO_PKG_VERSION")), "\"version\": \"0.0.0-old\"")).unwrap();
    let (code, _, err) = run(&["report", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("mix"), "{err}");
    std::fs::write(&manifest, original).unwrap();

    let field = dir.join("field_001.oss");
    let mut bytes = std::fs::read(&field).unwrap();
    bytes[..4].copy_from_slice(b"XXXX");
    std::fs::write(&field, bytes).unwrap();
    let (code, _, err) = run(&["report", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("field_001.oss"), "{err}");
}

#[test]
fn verify_reports_each_check() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("out");
    let (code, stdout, err) = run(&["verify", "--config", config("fbm-h05.json").to_str().unwrap(), "--out", out.to_str().unwrap(), "--which", "psi"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("psi_homogeneity") && stdout.contains("PASS"));
    let dir = std::fs::read_dir(&out).unwrap().next().unwrap().unwrap().path();
    assert!(dir.join("verify_psi.csv").is_file());
    assert!(!dir.join("verify_sigma.csv").exists());
}

#[test]
fn outputs_do_not_depend_on_threads_or_reruns() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small(t.path(), 0.5);
    let mut trees = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = t.path().join(format!("out{i}"));
        let o = out.to_str().unwrap();
        assert_eq!(run(&["--threads", threads, "simulate", "--config", cfg.to_str().unwrap(), "--out", o]).0, 0);
        assert!(run(&["--threads", threads, "dimension", "--config", cfg.to_str().unwrap(), "--out", o]).0 <= 1);
        let dir = std::fs::read_dir(&out).unwrap().next().unwrap().unwrap().path();
        let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        trees.push(files.iter().map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(p).unwrap())).collect::<Vec<_>>());
    }
    assert!(trees[0].len() >= 7);
    assert_eq!(trees[0], trees[1]);
    assert_eq!(trees[1], trees[2]);
}
