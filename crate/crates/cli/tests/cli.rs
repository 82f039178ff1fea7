use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn covwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covwalk"))
        .args(args)
        .env_remove("COVWALK_THREADS")
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL_WALK: &str = "\
[lattice]
preset = gamma2

[weights]
d = 2

[measure]
kind = parametric
tau_min = 0.5
tau_max = 1.5

[walk]
steps = 300
trajectories = 16
seed = 9
checkpoints = stride 100
start = haar

[analysis]
reports = drift, cauchy, gaussian, recurrence, accumulation
n_min = 100
";

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn gamma2_check_lists_three_cusps() {
    let o = covwalk(&["lattice", "check", "gamma2", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["audit"]["cusps"].as_array().unwrap().len(), 3);
    assert_eq!(v["ok"], true);
    assert_eq!(v["invalid_weight_choices"], 0);
}

#[test]
fn torus_cusp_is_folded_for_every_weight() {
    let o = covwalk(&["lattice", "check", "punctured_square_torus", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["audit"]["cusps"].as_array().unwrap().len(), 1);
    assert_eq!(v["no_unfolded_cusp_for_any_weight_tried"], true);
    assert!(v["covers"].as_array().unwrap().len() > 30);
}

#[test]
fn lattice_file_checks_like_the_preset() {
    let p = configs().join("gamma2.lattice");
    let o = covwalk(&["lattice", "check", p.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["audit"]["cusps"].as_array().unwrap().len(), 3);
    assert_eq!(v["covers"][0]["unfolded"], serde_json::json!([true, false, true]));
}

#[test]
fn weights_violating_a_relator_name_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "bad.lattice",
        "[generator]\nA = 1 2 0 1\nB = 1 0 2 1\nC = 5 2 2 1\n[relator]\nC B^-1 A^-1\n[weights]\nA = 1\nB = 0\nC = 0\n",
    );
    let o = covwalk(&["lattice", "check", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("bad.lattice:6:"), "{err}");
    assert!(err.contains("relator"), "{err}");
}

#[test]
fn config_errors_exit_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "typo.cfg", &SMALL_WALK.replace("seed = 9", "sead = 9"));
    let o = covwalk(&["walk", "run", "--config", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("typo.cfg:15:"), "{}", stderr(&o));

    let o = covwalk(&["walk", "run", "--config", "/no/such/file.cfg"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn drift_example_converges_to_one_half() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("drift_half.cfg");
    let o = covwalk(&["walk", "run", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = read_json(&out.path().join("drift_half.walk.summary.json"));
    let mean = s["drift"]["mean"][0].as_f64().unwrap();
    assert!((mean - 0.5).abs() < 0.01, "mean drift {mean}");
    assert_eq!(s["drift"]["target"], serde_json::json!([0.5]));
    assert_eq!(s["failed"], 0);
    for f in ["drift_half.records.csv", "drift_half.records.jsonl", "drift_half.drift.dat"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
}

#[test]
fn same_seed_gives_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL_WALK);
    let run = |out: &str, threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_covwalk"))
            .args(["walk", "run", "--config", cfg.to_str().unwrap(), "--out"])
            .arg(dir.path().join(out))
            .env("COVWALK_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    run("a", "1");
    run("b", "3");
    for f in ["small.records.csv", "small.records.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs between runs");
    }

    let other = write(dir.path(), "small.cfg", &SMALL_WALK.replace("seed = 9", "seed = 10"));
    let o = covwalk(&["walk", "run", "--config", other.to_str().unwrap(), "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_ne!(
        std::fs::read(dir.path().join("a/small.records.csv")).unwrap(),
        std::fs::read(dir.path().join("c/small.records.csv")).unwrap()
    );
}

#[test]
fn every_analysis_lands_in_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL_WALK);
    let o = covwalk(&["walk", "run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = read_json(&dir.path().join("small.walk.summary.json"));
    for key in ["drift", "cauchy", "gaussian", "recurrence", "accumulation", "config_hash", "build", "config"] {
        assert!(!s[key].is_null(), "missing {key}");
    }
    assert_eq!(s["cover"]["ec_dim"], 2);
    assert_eq!(s["recurrence"]["rows"].as_array().unwrap().len(), 3);
    assert!(s["cauchy"]["ec_projections"].is_object());
    assert!(dir.path().join("small.recurrence.dat").exists());
}

#[test]
fn invalid_thread_count_is_rejected() {
    for bad in ["0", "-1", "many"] {
        let o = Command::new(env!("CARGO_BIN_EXE_covwalk"))
            .args(["lattice", "check", "gamma2"])
            .env("COVWALK_THREADS", bad)
            .output()
            .unwrap();
        assert_eq!(code(&o), 2, "COVWALK_THREADS={bad}");
        assert!(stderr(&o).contains("COVWALK_THREADS"));
    }
}

#[test]
fn cauchy_fit_recovers_synthetic_scale() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (loc, scale) = (0.3, 2.0);
    let mut text = String::from("# synthetic Cauchy sample\n");
    for _ in 0..20_000 {
        let u: f64 = rng.random();
        text.push_str(&format!("{}\n", loc + scale * (std::f64::consts::PI * (u - 0.5)).tan()));
    }
    let p = write(dir.path(), "cauchy.txt", &text);
    let o = covwalk(&["fit", "cauchy", "--in", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let fitted = v["fit"]["scale"].as_f64().unwrap();
    assert!((fitted / scale - 1.0).abs() < 0.05, "scale {fitted}");
    assert!((v["fit"]["location"].as_f64().unwrap() - loc).abs() < 0.1);
    assert!(dir.path().join("cauchy.fit_cauchy.cdf.dat").exists());
}

#[test]
fn fit_rejects_unusable_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "junk.txt", "1.0\nnot-a-number\n");
    let o = covwalk(&["fit", "gaussian", "--in", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("junk.txt:2"), "{}", stderr(&o));
}

#[test]
fn lyapunov_exponent_is_positive() {
    let cfg = configs().join("drift_half.cfg");
    let o = covwalk(&["lyapunov", "--config", cfg.to_str().unwrap(), "--steps", "1000", "--trajectories", "20"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["lyapunov"]["mean"].as_f64().unwrap() > 0.5);
}

#[test]
fn geodesic_run_writes_records_at_requested_times() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "flow.cfg",
        "[lattice]\npreset = gamma2\n[weights]\nd = 1\n[measure]\nkind = uniform\n[walk]\ntrajectories = 8\ntime = 20\ntimes = 5 20\n[analysis]\nreports = drift\n",
    );
    let o = covwalk(&["geodesic", "run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("flow.records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8 * 2);

    // the same file has no step count, so a walk run is refused
    let o = covwalk(&["walk", "run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_needs_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let o = covwalk(&["report", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);

    let cfg = write(dir.path(), "small.cfg", SMALL_WALK);
    assert_eq!(code(&covwalk(&["walk", "run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])), 0);
    let o = covwalk(&["report", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let txt = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(txt.contains("small.walk.summary.json"));
    let dat = std::fs::read_to_string(dir.path().join("report.dat")).unwrap();
    assert_eq!(dat.lines().filter(|l| !l.starts_with('#')).count(), 1);
}

fn hash_of(dir: &Path, name: &str, text: &str) -> String {
    let cfg = write(dir, name, text);
    let out = dir.join("out");
    let o = covwalk(&["walk", "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = read_json(&out.join(format!("{}.walk.summary.json", name.trim_end_matches(".cfg"))));
    s["config_hash"].as_str().unwrap().to_string()
}

#[test]
fn config_hash_follows_meaning_and_lattice_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let base = hash_of(dir.path(), "a.cfg", SMALL_WALK);
    let noisy = format!("# comment\n{}", SMALL_WALK.replace("seed = 9", "seed=9   ; same"));
    assert_eq!(base, hash_of(dir.path(), "b.cfg", &noisy));
    assert_ne!(base, hash_of(dir.path(), "c.cfg", &SMALL_WALK.replace("seed = 9", "seed = 8")));

    let lattice = std::fs::read_to_string(configs().join("gamma2.lattice")).unwrap();
    std::fs::write(dir.path().join("g.lattice"), &lattice).unwrap();
    let from_file = "[lattice]\nfile = g.lattice\n[measure]\nkind = uniform\n[walk]\nsteps = 50\ntrajectories = 4\n";
    let h1 = hash_of(dir.path(), "f.cfg", from_file);
    std::fs::write(dir.path().join("g.lattice"), format!("{lattice}\n# edited\n")).unwrap();
    let h2 = hash_of(dir.path(), "f.cfg", from_file);
    assert_ne!(h1, h2);
}
