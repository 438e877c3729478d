use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn spsp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spsp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SPSP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn csv_rows(path: PathBuf) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn verify_strongly_convex_example_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = config("strongly_convex.toml");
    let o = spsp(&["verify", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).starts_with("verify: PASS"));
    let v = json(dir.path().join("verify.json"));
    assert_eq!(v["verdict"], "pass");
    assert!(v["result"]["report"]["min_margin"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["result"]["report"]["samples"], 10_000);
    assert_eq!(v["result"]["certificate"]["certificate"]["classification"], "PSP");
}

#[test]
fn certify_at_a_equal_c_names_the_inequality() {
    let dir = TempDir::new().unwrap();
    let cfg = config("linear_objective.toml");
    let o = spsp(
        &["certify", cfg.to_str().unwrap(), "--set", "certificate.a=2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("a < c"), "{}", stdout(&o));
    let v = json(dir.path().join("certify.json"));
    assert_eq!(v["result"]["infeasibility"]["inequality"], "a < c");
    let rows = csv_rows(dir.path().join("certify.csv"));
    assert_eq!(rows[1][0], "false");
}

#[test]
fn certify_linear_example_is_ssp() {
    let dir = TempDir::new().unwrap();
    let cfg = config("linear_objective.toml");
    let o = spsp(&["certify", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(dir.path().join("certify.json"));
    assert_eq!(v["result"]["certificate"]["classification"], "SSP");
}

#[test]
fn missing_builtin_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config("linear_objective.toml");
    let o = spsp(
        &["verify", cfg.to_str().unwrap(), "--set", "problem.name=no-such-problem"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem.name"), "{}", stderr(&o));
}

#[test]
fn bad_field_reports_path_and_line() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[problem]\nname = \"quadratic\"\n\n[sampling]\nsamples = -3\n").unwrap();
    let o = spsp(&["verify", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("sampling.samples") && err.contains("line 5"), "{err}");

    fs::write(&cfg, "[problem]\nname = \"quadratic\"\n[dynamics]\nrho_a = 0\n").unwrap();
    let o = spsp(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dynamics.rho_a"), "{}", stderr(&o));

    fs::write(&cfg, "[problem]\nname = \"quadratic\"\nextra = 1\n").unwrap();
    let o = spsp(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_required_input_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[problem]\nname = \"quadratic\"\n").unwrap();
    let o = spsp(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dynamics.alpha"), "{}", stderr(&o));
}

#[test]
fn summaries_are_byte_identical_across_runs_and_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = config("strongly_convex.toml");
    let cfg = cfg.to_str().unwrap();
    let small = ["--set", "sampling.samples=2000", "--set", "sampling.inner_samples=500"];
    let mut texts = Vec::new();
    for (k, workers) in ["1", "2", "2"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let mut args = vec!["verify", cfg, "--workers", workers];
        args.extend(small);
        let o = spsp(&args, &out);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        texts.push(fs::read(out.join("verify.json")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[1], texts[2]);
}

#[test]
fn floats_are_written_with_seventeen_digits() {
    let dir = TempDir::new().unwrap();
    let cfg = config("linear_objective.toml");
    spsp(&["certify", cfg.to_str().unwrap()], dir.path());
    let text = fs::read_to_string(dir.path().join("certify.json")).unwrap();
    assert!(text.contains("\"c\": 2.0000000000000000e0"), "{text}");
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[problem]\nname = \"strongly-convex-quadratic\"\n[output]\nformats = [\"json\"]\n",
    )
    .unwrap();
    let env_out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_spsp"))
        .args(["certify", cfg.to_str().unwrap()])
        .env("SPSP_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(env_out.join("certify.json").exists());
    assert!(!env_out.join("certify.csv").exists());
}

#[test]
fn budget_example_passes_and_ten_times_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = config("budget_bounded.toml");
    let o = spsp(&["budget", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let v = json(dir.path().join("budget.json"));
    let alpha_max = v["result"]["budget"]["alpha_max"].as_f64().unwrap();
    assert!(v["result"]["conditions"]["pass"].as_bool().unwrap());
    let rows = csv_rows(dir.path().join("budget_components.csv"));
    assert_eq!(rows[0], ["component", "alpha", "binding"]);
    assert!(rows.iter().skip(1).any(|r| r[2] == "true"));
    assert!(alpha_max > 0.0);
}

#[test]
fn robust_example_passes_and_fails_beyond_the_margin() {
    let dir = TempDir::new().unwrap();
    let cfg = config("robust.toml");
    let cfg = cfg.to_str().unwrap();
    let small = ["--set", "sampling.samples=3000"];
    let mut args = vec!["robust", cfg];
    args.extend(small);
    let o = spsp(&args, &dir.path().join("half"));
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));

    let mut args = vec!["robust", cfg, "--set", "robust.a_fraction=2"];
    args.extend(small);
    let out = dir.path().join("double");
    let o = spsp(&args, &out);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("robust_witnesses.csv"));
    let rows = csv_rows(out.join("robust_witnesses.csv"));
    assert!(rows.len() > 1);
    assert_eq!(rows[0].len(), rows[1].len());
}

#[test]
fn simulate_writes_the_trajectory_schema() {
    let dir = TempDir::new().unwrap();
    let cfg = config("simulate.toml");
    let o = spsp(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let rows = csv_rows(dir.path().join("trajectory.csv"));
    assert_eq!(rows[0], ["t", "y0", "y1", "V", "dV", "dist", "margin"]);
    assert_eq!(rows.len(), 1 + 201);
    let v = json(dir.path().join("simulate.json"));
    assert!(v["result"]["projected_start"].as_bool().unwrap());
    assert!(v["result"]["descent"]["pass"].as_bool().unwrap());
}

#[test]
fn spas_example_on_a_short_horizon() {
    let dir = TempDir::new().unwrap();
    let cfg = config("spas.toml");
    let o = spsp(
        &[
            "spas",
            cfg.to_str().unwrap(),
            "--set",
            "dynamics.horizon=1500",
            "--set",
            "dynamics.trials=16",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let rows = csv_rows(dir.path().join("spas.csv"));
    assert_eq!(rows[0], ["alpha", "delta", "T", "achieved_rho_a", "verdict"]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().skip(1).all(|r| r[4] == "spas"));
}

#[test]
fn spas_reports_escape_with_a_witness() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    // step far beyond 2/L diverges
    fs::write(
        &cfg,
        "[problem]\nname = \"quadratic\"\n[dynamics]\nalpha = 3.0\nhorizon = 50\ntrials = 4\nsigma = 1.0\nrho_a = 0.1\n",
    )
    .unwrap();
    let o = spsp(&["spas", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(dir.path().join("spas_witness.csv").exists());
}

#[test]
fn lemma_b_example_certifies_a_level() {
    let dir = TempDir::new().unwrap();
    let cfg = config("lemma_b.toml");
    let o = spsp(&["lemma-b", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let v = json(dir.path().join("lemma_b.json"));
    let level = v["result"]["containment"]["level"].as_f64().unwrap();
    let u = &v["result"]["underestimation"];
    assert_eq!(u["alpha_q"].as_f64().unwrap(), level / (2.0 * 4.0));
    assert_eq!(u["alpha_l"].as_f64().unwrap(), level / (2.0 * 2.0));
    assert_eq!(csv_rows(dir.path().join("lemma_b_profile.csv")).len(), 51);
}
