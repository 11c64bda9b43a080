//! End-to-end checks of the `kincal` binary on a small problem that samples
//! in well under a second.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const PROBLEM: &str = "\
[integrator]
rtol = 1e-6
atol = 1e-14
atol_T = 1e-8
max_steps = 20000

[sampler]
walkers = 8
sweeps = 20
a = 2.0
seed = 3

[active]
R10.A lower=1e6 upper=5e16
R11.A lower=2e13 upper=1e14

[targets]
s1 kind=state_at_time mode=constant_volume T0=1500 p0=1 X=H2:0.3,O2:0.15,N2:0.55 t=2e-5 quantity=X_OH t_end=1e-4
s2 kind=state_at_time mode=constant_pressure T0=1400 p0=2 X=H2:0.3,O2:0.15,N2:0.55 t=3e-5 quantity=T t_end=1e-4
";

const PREDICTION: &str = "\
[targets]
p kind=state_at_time mode=constant_volume T0=1400 p0=1 X=H2:0.3,O2:0.15,N2:0.55 t=2e-5 quantity=T t_end=1e-4
";

fn kincal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kincal"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = kincal(dir, args);
    assert!(
        out.status.success(),
        "kincal {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// A scratch directory holding the problem with generated data.
fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("cases.cfg"), PROBLEM).unwrap();
    fs::write(dir.path().join("pred.cfg"), PREDICTION).unwrap();
    ok(
        dir.path(),
        &["gen-targets", "--cases", "cases.cfg", "--out", "problem.cfg", "--seed", "11"],
    );
    dir
}

fn manifest(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&kincal(d, &[])), 2);
    assert_eq!(code(&kincal(d, &["frobnicate"])), 2);
    assert_eq!(code(&kincal(d, &["rates"])), 2);
    assert_eq!(code(&kincal(d, &["sample", "--problem", "missing.cfg", "--out", "c"])), 2);
    fs::write(d.join("bad.cfg"), "[targets]\nx kind=nonsense T0=1000 p0=1 X=H2:1 t_end=1\n").unwrap();
    let out = kincal(d, &["sample", "--problem", "bad.cfg", "--out", "c"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
    assert_eq!(code(&kincal(d, &["--jobs", "0", "rates", "--temperature", "1000"])), 2);
}

#[test]
fn version_flag_reports_crate_version() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["--version"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains(kincal::VERSION));
}

#[test]
fn rates_prints_one_row_per_reaction() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        dir.path(),
        &["rates", "--temperature", "1000", "--x", "H2:0.3,O2:0.15,N2:0.55"],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,kf,kr,q"));
    let rows: Vec<&str> = lines.collect();
    let baseline = kincal::mechanism::Mechanism::baseline();
    assert_eq!(rows.len(), baseline.reactions.len());
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 4);
        let kf: f64 = fields[1].parse().unwrap();
        assert!(kf.is_finite() && kf > 0.0, "{row}");
    }
    let cold = kincal(dir.path(), &["rates", "--temperature", "100"]);
    assert_eq!(code(&cold), 2, "outside the thermo range is a usage error");
}

#[test]
fn gen_targets_is_deterministic_and_exact_without_noise() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["gen-targets", "--cases", "cases.cfg", "--out", "again.cfg", "--seed", "11"]);
    assert_eq!(
        fs::read(d.join("problem.cfg")).unwrap(),
        fs::read(d.join("again.cfg")).unwrap()
    );
    ok(d, &["gen-targets", "--cases", "cases.cfg", "--out", "other.cfg", "--seed", "12"]);
    assert_ne!(
        fs::read(d.join("problem.cfg")).unwrap(),
        fs::read(d.join("other.cfg")).unwrap()
    );

    ok(
        d,
        &["gen-targets", "--cases", "cases.cfg", "--out", "exact.cfg", "--noise-scale", "0", "--sigma-rel", "0.05"],
    );
    let problem = kincal::config::parse_problem(&fs::read_to_string(d.join("exact.cfg")).unwrap()).unwrap();
    let truth = fs::read_to_string(d.join("exact.cfg.truth.csv")).unwrap();
    let mut checked = 0;
    for line in truth.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let value: f64 = fields[1].parse().unwrap();
        let target = problem.targets.iter().find(|t| t.label == fields[0]).unwrap();
        assert_eq!(target.d, Some(value), "{}", fields[0]);
        let sigma = target.sigma.unwrap();
        assert!((sigma / (0.05 * value.abs()) - 1.0).abs() < 1e-12);
        checked += 1;
    }
    assert_eq!(checked, 2);
}

#[test]
fn simulate_prints_the_observable_and_writes_a_trajectory() {
    let dir = workspace();
    let d = dir.path();
    let out = ok(d, &["simulate", "--case", "pred.cfg", "--out", "traj.csv"]);
    let value: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(value > 1400.0 && value < 3500.0, "temperature {value}");
    let traj = fs::read_to_string(d.join("traj.csv")).unwrap();
    assert!(traj.lines().count() > 2);
    assert!(d.join("traj.csv.manifest.json").exists());

    let several = kincal(d, &["simulate", "--case", "cases.cfg"]);
    assert_eq!(code(&several), 2, "ambiguous target needs --target");
    ok(d, &["simulate", "--case", "cases.cfg", "--target", "s2", "--out", "s2.csv"]);
}

#[test]
fn manifest_records_inputs_seed_and_a_content_hash() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "a.kch", "--sweeps", "2"]);
    let m = manifest(d.join("a.kch.manifest.json"));
    assert_eq!(m["seed"], 3);
    assert_eq!(m["kincal_version"], kincal::VERSION);
    assert_eq!(m["inputs"][0]["path"], "problem.cfg");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["command"]["command"]["Sample"]["sweeps"], 2);

    ok(d, &["sample", "--problem", "problem.cfg", "--out", "b.kch", "--sweeps", "2"]);
    let same = manifest(d.join("b.kch.manifest.json"));
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "c.kch", "--sweeps", "2", "--seed", "4"]);
    let reseeded = manifest(d.join("c.kch.manifest.json"));

    let edited = fs::read_to_string(d.join("problem.cfg")).unwrap().replace("seed = 3", "seed = 3 # same");
    fs::write(d.join("problem.cfg"), edited).unwrap();
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "b.kch", "--sweeps", "2"]);
    let touched = manifest(d.join("b.kch.manifest.json"));

    // Output paths differ between a and b but are part of the invocation.
    assert_ne!(m["config_hash"], same["config_hash"]);
    assert_ne!(same["config_hash"], reseeded["config_hash"]);
    assert_ne!(same["config_hash"], touched["config_hash"]);
    assert_ne!(same["inputs"][0]["sha256"], touched["inputs"][0]["sha256"]);
    assert_eq!(m["inputs"][0]["sha256"], same["inputs"][0]["sha256"]);
}

#[test]
fn zero_sweeps_stores_only_the_initial_ensemble() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "z.kch", "--sweeps", "0"]);
    let chain = kincal::sampler::Chain::load(&d.join("z.kch")).unwrap();
    assert_eq!(chain.stored(), 1);
    assert_eq!(chain.last_sweep(), 0);
    assert!(chain.acceptance_fraction().iter().all(|&a| a == 0.0));
}

#[test]
fn sampling_is_reproducible_and_resume_matches_a_straight_run() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "full.kch"]);
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "twice.kch"]);
    let full = fs::read(d.join("full.kch")).unwrap();
    assert_eq!(full, fs::read(d.join("twice.kch")).unwrap());

    ok(d, &["sample", "--problem", "problem.cfg", "--out", "part.kch", "--sweeps", "8"]);
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "part.kch", "--resume"]);
    assert_eq!(full, fs::read(d.join("part.kch")).unwrap());
    assert!(!d.join("part.kch.partial").exists());

    let clash = kincal(
        d,
        &["sample", "--problem", "problem.cfg", "--out", "part.kch", "--resume", "--sweeps", "30", "--seed", "9"],
    );
    assert_eq!(code(&clash), 2, "resuming under another seed is refused");
    let shorter = kincal(
        d,
        &["sample", "--problem", "problem.cfg", "--out", "part.kch", "--resume", "--sweeps", "5"],
    );
    assert_eq!(code(&shorter), 2);
}

#[test]
fn thin_store_keeps_every_nth_sweep() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "t.kch", "--thin-store", "5"]);
    let chain = kincal::sampler::Chain::load(&d.join("t.kch")).unwrap();
    let sweeps: Vec<u64> = (0..chain.stored()).map(|r| chain.sweep_of(r)).collect();
    assert_eq!(sweeps, vec![0, 5, 10, 15, 20]);
}

#[test]
fn chain_export_writes_one_row_per_walker_and_record() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "c.kch"]);
    let out = ok(d, &["chain", "export", "--chain", "c.kch"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sweep,walker,log_posterior,R10.A,R11.A"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 21 * 8);
    let chain = kincal::sampler::Chain::load(&d.join("c.kch")).unwrap();
    for (i, row) in rows.iter().enumerate() {
        let (r, w) = (i / 8, i % 8);
        assert_eq!(row[0] as u64, chain.sweep_of(r));
        assert_eq!(row[1] as usize, w);
        assert_eq!(row[3..], *chain.position(r, w));
    }
    ok(d, &["chain", "export", "--chain", "c.kch", "--out", "c.csv"]);
    assert_eq!(fs::read_to_string(d.join("c.csv")).unwrap(), text);

    fs::write(d.join("junk.kch"), b"not a chain").unwrap();
    assert_eq!(code(&kincal(d, &["chain", "export", "--chain", "junk.kch"])), 2);
}

#[test]
fn diagnose_writes_summaries_and_requested_histograms() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "c.kch"]);
    ok(d, &["diagnose", "--chain", "c.kch", "--out", "diag", "--triangle", "1,2", "--iat", "--bins", "10"]);
    for f in [
        "autocorr.csv",
        "summary.csv",
        "covariance.csv",
        "correlation.csv",
        "acceptance.csv",
        "hist1d_1.csv",
        "hist1d_2.csv",
        "manifest.json",
    ] {
        assert!(d.join("diag").join(f).exists(), "{f} missing");
    }
    let summary = fs::read_to_string(d.join("diag/summary.csv")).unwrap();
    assert!(summary.starts_with("param,mean,std,q05,q25,q50,q75,q95,mode,iat"));
    assert_eq!(summary.lines().count(), 3);
    let acceptance = fs::read_to_string(d.join("diag/acceptance.csv")).unwrap();
    assert_eq!(acceptance.lines().count(), 9);
    let hist2d: Vec<_> = fs::read_dir(d.join("diag"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("hist2d_"))
        .collect();
    assert_eq!(hist2d.len(), 1);

    assert_eq!(
        code(&kincal(d, &["diagnose", "--chain", "c.kch", "--out", "bad", "--triangle", "0"])),
        2
    );
    assert_eq!(
        code(&kincal(d, &["diagnose", "--chain", "c.kch", "--out", "bad", "--triangle", "3"])),
        2
    );
}

#[test]
fn propagate_and_export_agree_on_thinned_samples() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["sample", "--problem", "problem.cfg", "--out", "c.kch"]);
    ok(
        d,
        &["propagate", "--chain", "c.kch", "--problem", "problem.cfg", "--case", "pred.cfg", "--picks", "2", "--out", "prop"],
    );
    let samples = fs::read_to_string(d.join("prop/samples.csv")).unwrap();
    let rows: Vec<&str> = samples.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 8);
    assert!(rows.iter().all(|r| r.ends_with(",ok")));
    let summary = fs::read_to_string(d.join("prop/summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("16,0,"));
    assert!(d.join("prop/hist.csv").exists());

    ok(
        d,
        &["export-calibrations", "--chain", "c.kch", "--problem", "problem.cfg", "--picks", "2", "--out", "exp"],
    );
    // Re-simulating the first exported mechanism reproduces the propagated value.
    let first: Vec<&str> = rows[0].split(',').collect();
    let observable: f64 = first[4].parse().unwrap();
    let out = ok(
        d,
        &["simulate", "--case", "pred.cfg", "--mechanism", "exp/calibration_0000.mech", "--out", "t.csv"],
    );
    let value: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(value, observable);

    let mismatch = "[active]\nR12.A lower=1e9 upper=1e11\n";
    fs::write(d.join("other.cfg"), mismatch).unwrap();
    let out = kincal(
        d,
        &["propagate", "--chain", "c.kch", "--problem", "other.cfg", "--case", "pred.cfg", "--out", "x"],
    );
    assert_eq!(code(&out), 2);
}
