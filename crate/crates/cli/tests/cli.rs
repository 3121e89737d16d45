use std::path::{Path, PathBuf};
use std::process::Command;

use riemann_stein::points::synthetic_pole_fixture;
use riemann_stein_cli::io::{load_poles, read_table};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riemann-stein"))
}

fn data_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_poles.csv")
}

fn run(args: &[&str], out: &Path) -> std::process::Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn run_ok(args: &[&str], out: &Path) {
    let o = run(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

/// Small configurations of every experiment, with the columns each file
/// must have.
fn small_runs() -> Vec<(Vec<&'static str>, Vec<(&'static str, Vec<&'static str>)>)> {
    vec![
        (
            vec!["euclidean", "--points", "biased", "--n", "10,20", "--reps", "2", "--alpha", "7/2"],
            vec![
                ("euclidean_wce.csv", vec!["d", "n", "alpha", "operator", "scenario", "rep", "wce", "jitter"]),
                ("euclidean_wce_summary.csv", vec!["d", "n", "alpha", "operator", "scenario", "reps", "mean_wce", "sd_wce"]),
                (
                    "euclidean_moments.csv",
                    vec!["d", "n", "alpha", "operator", "scenario", "rep", "function", "stein", "importance", "truth"],
                ),
            ],
        ),
        (
            vec!["sphere", "--n", "12,24", "--reps", "2", "--alpha", "7/2,9/2"],
            vec![
                ("sphere_wce.csv", vec!["n", "alpha", "rep", "wce", "wce_uniform", "jitter"]),
                ("sphere_moments.csv", vec!["n", "alpha", "rep", "function", "stein", "importance", "truth"]),
            ],
        ),
        (
            vec!["eigenfunctions", "--n", "40"],
            vec![("eigenfunctions.csv", vec!["alpha", "index", "eigenvalue", "point", "x1", "x2", "x3", "value"])],
        ),
        (
            vec!["paleo", "--synthetic", "--n", "20,60", "--reps", "2"],
            vec![
                ("paleo_moments.csv", vec!["chain", "n", "n_unique", "function", "ergodic", "stein", "oracle"]),
                ("paleo_ksd.csv", vec!["chain", "n", "n_unique", "ksd_uniform", "ksd_stein", "jitter"]),
                ("paleo_chains.csv", vec!["chain", "index", "mu1", "mu2", "mu3", "kappa"]),
            ],
        ),
    ]
}

#[test]
fn every_csv_parses_under_its_schema() {
    for (args, files) in small_runs() {
        let dir = tempfile::tempdir().unwrap();
        run_ok(&args, dir.path());
        for (name, columns) in files {
            let t = read_table(&dir.path().join(name), &columns).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!t.table.rows.is_empty(), "{name} is empty");
            assert!(t.meta.iter().any(|m| m.starts_with("seed: ")), "{name} lacks metadata");
            assert!(t.meta.iter().any(|m| m.starts_with("config: ")), "{name} lacks the config");
            for row in &t.table.rows {
                assert_eq!(row.len(), columns.len());
            }
        }
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    for (args, files) in small_runs() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_ok(&args, a.path());
        let o = bin().args(&args).arg("--out").arg(b.path()).env("RAYON_NUM_THREADS", "3").output().unwrap();
        assert!(o.status.success());
        for (name, _) in files {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert!(x == y, "{name} differs between runs");
        }
    }
}

#[test]
fn seeds_change_random_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_ok(&["sphere", "--n", "12", "--reps", "1", "--alpha", "7/2", "--seed", "1"], a.path());
    run_ok(&["sphere", "--n", "12", "--reps", "1", "--alpha", "7/2", "--seed", "2"], b.path());
    let x = std::fs::read(a.path().join("sphere_wce.csv")).unwrap();
    let y = std::fs::read(b.path().join("sphere_wce.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn bundled_pole_file_is_the_synthetic_fixture() {
    let loaded = load_poles(&data_file()).unwrap();
    let fixture = synthetic_pole_fixture();
    assert_eq!(loaded.len(), fixture.len());
    for (a, b) in loaded.iter().zip(&fixture) {
        for k in 0..3 {
            assert_eq!(a[k].to_bits(), b[k].to_bits());
        }
    }

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_ok(&["paleo", "--synthetic", "--n", "30", "--reps", "1"], a.path());
    run_ok(&["paleo", "--data", data_file().to_str().unwrap(), "--n", "30", "--reps", "1"], b.path());
    let cols = ["chain", "n", "n_unique", "function", "ergodic", "stein", "oracle"];
    let x = read_table(&a.path().join("paleo_moments.csv"), &cols).unwrap();
    let y = read_table(&b.path().join("paleo_moments.csv"), &cols).unwrap();
    assert_eq!(x.table, y.table);
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(args, dir.path()).status.code().unwrap();

    assert_eq!(code(&["euclidean", "--n", "10", "--reps", "1"]), 0);
    // configuration errors
    assert_eq!(code(&["euclidean", "--alpha", "3/2", "--operator", "second"]), 2);
    assert_eq!(code(&["sphere", "--operator", "first"]), 2);
    assert_eq!(code(&["sphere", "--alpha", "5/2"]), 2);
    assert_eq!(code(&["euclidean", "--points", "stratified", "--d", "2"]), 2);
    assert_eq!(code(&["paleo"]), 2);
    assert_eq!(code(&["sphere", "--alpha", "3.3"]), 2);
    assert_eq!(code(&["sphere", "--bogus"]), 2);
    assert_eq!(code(&["sphere", "--config", "/does/not/exist.toml"]), 2);
    // data errors
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y1,y2,y3\n2,0,0\n").unwrap();
    assert_eq!(code(&["paleo", "--data", bad.to_str().unwrap()]), 3);
    assert_eq!(code(&["paleo", "--data", "/does/not/exist.csv"]), 3);
}

#[test]
fn second_order_alpha_error_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["euclidean", "--alpha", "3/2"], dir.path());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("operator=second requires alpha > 2"), "{err}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = [10, 20]\nreps = 2\nseed = 9\nalpha = [3.5]\n").unwrap();
    run_ok(&["euclidean", "--config", cfg.to_str().unwrap(), "--seed", "4", "--points", "mc"], dir.path());
    let cols = ["d", "n", "alpha", "operator", "scenario", "rep", "wce", "jitter"];
    let t = read_table(&dir.path().join("euclidean_wce.csv"), &cols).unwrap();
    assert!(t.meta.contains(&"seed: 4".to_string()));
    assert_eq!(t.table.rows.len(), 4);
}
