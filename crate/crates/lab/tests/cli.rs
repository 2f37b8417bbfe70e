use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bnlab::output::read_sidecar;
use bnlab::run_experiment;
use bnlab::spec::{ExperimentKind, ExperimentSpec};
use bnlab_core::par::Exec;

fn bnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnlab")).args(args).output().unwrap()
}

fn run_with_config(sub: &str, config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{sub}.kv"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(sub);
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    bnlab(&args)
}

const SMALL_ISOMETRY: &str = "widths = 4, 8\ndepths = 20\nseeds = 2\n";

#[test]
fn isometry_passes_and_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config("isometry", SMALL_ISOMETRY, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("[PASS] monotone gap"), "{stdout}");
    for f in ["decay_d4.dat", "overlay_d8.dat", "runs_d8.csv", "spec.json", "checks.json"] {
        assert!(dir.path().join("isometry").join(f).is_file(), "missing {f}");
    }
    let dat = fs::read_to_string(dir.path().join("isometry/decay_d4.dat")).unwrap();
    assert_eq!(dat.lines().filter(|l| !l.starts_with('#')).count(), 21);
}

#[test]
fn identical_specs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    run_with_config("isometry", SMALL_ISOMETRY, &a, &["--seed", "7"]);
    // thread count must not change the numbers
    run_with_config("isometry", SMALL_ISOMETRY, &b, &["--seed", "7", "--threads", "1"]);
    for f in ["runs_d4.csv", "runs_d8.csv", "decay_d8.dat"] {
        let x = fs::read(a.join("isometry").join(f)).unwrap();
        let y = fs::read(b.join("isometry").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let c = dir.path().join("c");
    fs::create_dir_all(&c).unwrap();
    run_with_config("isometry", SMALL_ISOMETRY, &c, &["--seed", "8"]);
    assert_ne!(fs::read(a.join("isometry/runs_d4.csv")).unwrap(), fs::read(c.join("isometry/runs_d4.csv")).unwrap());
}

#[test]
fn sidecar_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    run_with_config("gradients", "widths = 6\ndepths = 3, 6, 9, 12\nseeds = 2\n", dir.path(), &["--seed", "3"]);
    let first = dir.path().join("gradients");
    let mut spec = read_sidecar(&first).unwrap();
    assert_eq!(spec.kind, ExperimentKind::Gradients);
    assert_eq!(spec.network.seed, 3);
    spec.out_dir = dir.path().join("again");
    run_experiment(&spec, Exec::Sequential).unwrap();
    assert_eq!(fs::read(first.join("grad_norms.csv")).unwrap(), fs::read(spec.out_dir.join("grad_norms.csv")).unwrap());
}

#[test]
fn failing_check_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config("degenerate", "widths = 8\ndepths = 4, 8, 12, 16\nseeds = 2\n", dir.path(), &[]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("[FAIL]"), "{stdout}");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config("gradients", "depths = 10, 20\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = run_with_config("isometry", "width = banana\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("width"));
    let missing = dir.path().join("nope.csv");
    let out = run_with_config("rank-audit", &format!("dataset = {}\n", missing.display()), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn degenerate_isometry_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config("isometry", "widths = 6\ndepths = 5\ninput = duplicated\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("rank"));
}

fn synthetic_csv(path: &Path, features: usize, samples: usize) {
    let mut text = String::new();
    for j in 0..samples {
        let label = j % 3;
        let row: Vec<String> = (0..features)
            .map(|i| {
                let centre = if i % 3 == label { 1.0 } else { 0.0 };
                format!("{:.4}", centre + 0.3 * ((i * 31 + j * 17) as f64).sin())
            })
            .collect();
        text.push_str(&format!("{label},{}\n", row.join(",")));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn rank_audit_on_a_csv_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    synthetic_csv(&data, 12, 60);
    let cfg = format!("dataset = {}\nbatch_sizes = 4, 8, 16\ntrials = 5\n", data.display());
    let out = run_with_config("rank-audit", &cfg, dir.path(), &[]);
    assert_ne!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("rank-audit/rank_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4, "{summary}");
    let audit = fs::read_to_string(dir.path().join("rank-audit/rank_audit.csv")).unwrap();
    assert_eq!(audit.lines().count(), 1 + 3 * 5);
}

#[test]
fn training_on_a_csv_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    synthetic_csv(&data, 12, 96);
    let mut spec = ExperimentSpec::defaults(ExperimentKind::Train);
    let cfg = format!(
        "dataset = {}\nwidth = 12\nbatch = 16\nclasses = 3\ndepths = 2, 4\nepochs = 3\nlr = 0.05\ntrain_samples = 96\n",
        data.display()
    );
    spec.apply_kv(&cfg).unwrap();
    spec.out_dir = dir.path().join("train");
    let checks = run_experiment(&spec, Exec::Parallel).unwrap();
    assert!(!checks.is_empty());
    for depth in [2, 4] {
        let log = fs::read_to_string(spec.out_dir.join(format!("train_L{depth}.csv"))).unwrap();
        // header, the untrained network, then one row per epoch
        assert_eq!(log.lines().count(), 1 + 1 + 3, "{log}");
        assert!(spec.out_dir.join(format!("accuracy_L{depth}.dat")).is_file());
    }
}
