use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ergodic_cli::read_table;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergodic-hjb"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.toml"));
    std::fs::write(&p, body).unwrap();
    p
}

fn run(dir: &Path, sub: &str, config: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap()
}

fn column(dir: &Path, run_id: &str, name: &str) -> Vec<String> {
    let (header, rows) = read_table(&dir.join(format!("{run_id}.csv"))).unwrap();
    let c = header.iter().position(|h| h == name).unwrap();
    rows.into_iter().map(|r| r[c].clone()).collect()
}

#[test]
fn zero_coupling_gives_a_single_zero_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero", "command = \"solve\"\nm = 3\nbeta = 0.0\nR = 20.0\nn_cells = 512\n");
    let out = run(dir.path(), "solve", &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lambda = column(dir.path(), "zero", "lambda");
    assert_eq!(lambda.len(), 1);
    assert_eq!(lambda[0].parse::<f64>().unwrap(), 0.0);
    let (header, _) = read_table(&dir.path().join("zero.csv")).unwrap();
    assert_eq!(
        header,
        [
            "run_id", "N", "m", "beta", "R", "h", "method", "lambda", "residual", "holder_seminorm",
            "iterations", "wall_ms"
        ]
    );
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("zero.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "solve");
    assert!(meta["settings"]["eigen"]["solver"]["tol"].is_number());
    assert!(meta["versions"]["ergodic-core"].is_string());
}

#[test]
fn bisection_recovers_the_bump_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bisect",
        "command = \"beta-bisect\"\nm = \"inf\"\nR = 60.0\nn_cells = 4096\n[potential]\nname = \"bump\"\n\
         [beta_bisect]\nside = \"plus\"\nbracket = [1.0, 4.0]\n",
    );
    let out = run(dir.path(), "run", &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b: f64 = column(dir.path(), "bisect", "beta_plus")[0].parse().unwrap();
    let oracle: f64 = column(dir.path(), "bisect", "oracle_beta_plus")[0].parse().unwrap();
    assert!((b - 2.0).abs() < 0.05, "beta_+ = {b}");
    assert!((oracle - 2.0).abs() < 1e-8);
}

#[test]
fn subquadratic_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad", "command = \"solve\"\nbeta = 1.0\nm = 1.5\n");
    let out = run(dir.path(), "solve", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("m > 2"), "{err}");
    assert!(err.contains("line 3"), "{err}");
    assert!(!dir.path().join("bad.csv").exists());
}

#[test]
fn malformed_toml_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "broken", "m = 3\nbeta = = 2\n");
    let out = run(dir.path(), "solve", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn mismatched_subcommand_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mismatch", "command = \"m-sweep\"\nm = 3\n");
    let out = run(dir.path(), "solve", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_suite_passes_and_catches_mutations() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["verify-analytic", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(column(dir.path(), "verify-analytic", "passed").iter().all(|p| p == "true"));

    let cfg = write_config(dir.path(), "ksign", "[verify]\ninject = \"k-sign\"\n");
    let out = run(dir.path(), "verify-analytic", &cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let checks = column(dir.path(), "ksign", "check");
    let passed = column(dir.path(), "ksign", "passed");
    for (c, p) in checks.iter().zip(&passed) {
        assert_eq!(p == "true", c != "be0_residual", "{c}: {p}");
    }

    let cfg = write_config(dir.path(), "family", "[verify]\ninject = \"family-c\"\n");
    let out = run(dir.path(), "verify-analytic", &cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let cases = column(dir.path(), "family", "case");
    let notes = column(dir.path(), "family", "note");
    let i = cases.iter().position(|c| c == "C=0.6").unwrap();
    assert_eq!(column(dir.path(), "family", "passed")[i], "false");
    assert!(notes[i].contains("[-1/2, 1/2]"), "{}", notes[i]);
}

#[test]
fn reruns_are_byte_identical_regardless_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep",
        "command = \"beta-sweep\"\nm = 4\nR = 20.0\nn_cells = 512\n[beta_sweep]\nbetas = [-1.0, 0.0, 1.0, 3.0]\n",
    );
    let mut files = Vec::new();
    for (i, jobs) in ["1", "1", "2"].iter().enumerate() {
        let out_dir = dir.path().join(format!("r{i}"));
        let out = bin()
            .args(["beta-sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .args(["--jobs", jobs])
            .output()
            .unwrap();
        assert!(out.status.success());
        files.push(std::fs::read(out_dir.join("sweep.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn seeded_perturbation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "pert",
        "command = \"solve\"\nm = 3\nbeta = 1.0\nR = 20.0\nn_cells = 512\n[perturbation]\nepsilon = 0.1\n",
    );
    let lambda_for = |seed: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = run(&out_dir, "solve", &cfg, &["--seed", seed]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        column(&out_dir, "pert", "lambda")[0].clone()
    };
    let a = lambda_for("11", "a");
    assert_eq!(a, lambda_for("11", "b"));
    assert_ne!(a, lambda_for("12", "c"));
}

#[test]
fn sweeps_carry_their_parameter_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ms",
        "command = \"m-sweep\"\nbeta = 2.0\nR = 20.0\nn_cells = 512\n[m_sweep]\nm_list = [4, 8]\n",
    );
    let out = run(dir.path(), "m-sweep", &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(column(dir.path(), "ms", "m"), ["4.0000000000000000e0", "8.0000000000000000e0", "2.5600000000000000e2", "inf"]);
    assert_eq!(column(dir.path(), "ms", "method")[3], "m-sweep-limit");

    let cfg = write_config(dir.path(), "disc", "command = \"discount\"\nm = 3\nbeta = 1.0\nR = 20.0\nn_cells = 512\n");
    let out = run(dir.path(), "discount", &cfg, &[]);
    assert!(out.status.success());
    let deltas = column(dir.path(), "disc", "delta");
    assert_eq!(deltas.len(), 7);
    assert_eq!(deltas[6].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn timing_fills_wall_ms_only_when_enabled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t", "m = 3\nbeta = 1.0\nR = 20.0\nn_cells = 512\n[output]\ntiming = true\n");
    assert!(run(dir.path(), "solve", &cfg, &[]).status.success());
    assert!(column(dir.path(), "t", "wall_ms")[0].parse::<f64>().unwrap() >= 0.0);
    let cfg = write_config(dir.path(), "u", "m = 3\nbeta = 1.0\nR = 20.0\nn_cells = 512\n");
    assert!(run(dir.path(), "solve", &cfg, &[]).status.success());
    assert_eq!(column(dir.path(), "u", "wall_ms")[0], "");
}
