//! End-to-end checks of the `qsd` binary: exit-code contract, JSON on
//! stdout, file outputs, config handling.

use std::path::Path;
use std::process::Command;

fn run(args: &[&str], envs: &[(&str, &str)]) -> (String, String, i32) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qsd"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn qsd");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).expect("stdout must be valid JSON")
}

#[test]
fn bound_values_and_exit_codes() {
    let (out, _, code) = run(&["bound", "--n", "8", "--d", "4"], &[]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["p_guess"], 0.5);
    assert_eq!(v["p_err"], 0.5);

    let (out, _, code) = run(&["bound", "--n", "4", "--d", "4"], &[]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["p_guess"], 1.0);

    let (_, err, code) = run(&["bound", "--n", "2", "--d", "4"], &[]);
    assert_eq!(code, 2);
    assert!(err.contains("bound"), "diagnostic on stderr: {err}");
}

#[test]
fn simulate_presets_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let (out, err, code) = run(
        &["simulate", "--ideal", "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(code, 0, "stderr: {err}");
    let v = json(&out);
    assert!((v["p_guess"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!((v["srm_oracle"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!(v["timing"]["fits"].as_bool().unwrap());
    for f in [
        "probabilities.csv",
        "probabilities.json",
        "posteriors.json",
        "duples.json",
        "summary.json",
    ] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    // stdout carries only JSON; logs go to stderr
    assert!(out.trim_start().starts_with('{'));
    assert!(err.contains("wrote"));

    let (out, _, code) = run(&["simulate", "--paper"], &[]);
    assert_eq!(code, 0);
    let p = json(&out)["p_guess"].as_f64().unwrap();
    assert!(p < 0.4999 && p > 0.45, "imperfect preset below the bound: {p}");
}

#[test]
fn simulate_rejects_bad_config() {
    let (_, _, code) = run(&["simulate", "--config", "/definitely/missing.toml"], &[]);
    assert_eq!(code, 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[receiver]\nbogus = 1\n").unwrap();
    let (_, err, code) = run(&["simulate", "--config", bad.to_str().unwrap()], &[]);
    assert_eq!(code, 2);
    assert!(err.contains("error"), "{err}");
}

#[test]
fn simulate_accepts_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[bs]\nr_h = 0.26\nr_v = 0.29\nloss_bs = 0.21\nloss_loop = 0.11\n\
         [vbg]\next_h = 0.0125\next_v = 0.0055\n",
    )
    .unwrap();
    let (out, _, code) = run(&["simulate", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code, 0);
    let from_config = json(&out)["p_guess"].as_f64().unwrap();
    let (out, _, _) = run(&["simulate", "--paper"], &[]);
    let from_preset = json(&out)["p_guess"].as_f64().unwrap();
    assert_eq!(from_config.to_bits(), from_preset.to_bits());
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, code) = run(
        &["simulate", "--ideal"],
        &[("QSD_OUT_DIR", dir.path().to_str().unwrap())],
    );
    assert_eq!(code, 0);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn montecarlo_deterministic_given_seed() {
    let (a, _, code_a) = run(&["montecarlo", "--paper", "--samples", "300", "--seed", "5"], &[]);
    let (b, _, code_b) = run(&["montecarlo", "--paper", "--samples", "300", "--seed", "5"], &[]);
    assert_eq!((code_a, code_b), (0, 0));
    assert_eq!(a, b);
    let v = json(&a);
    let std = v["std"].as_f64().unwrap();
    assert!(std > 0.0 && std < 0.05);
    let (c, _, _) = run(&["montecarlo", "--paper", "--samples", "300", "--seed", "6"], &[]);
    assert_ne!(a, c, "different seed, different report");
}

#[test]
fn optimize_reports_angles_in_degrees() {
    let (out, _, code) = run(
        &[
            "optimize", "--paper", "--free", "angles", "--restarts", "2", "--seed", "1",
        ],
        &[],
    );
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["objective"].as_f64().unwrap() > 0.49);
    let h = v["params"]["loop_deg"][1].as_f64().unwrap();
    assert!((0.0..180.0).contains(&h), "angle in degrees: {h}");

    let (_, _, code) = run(&["optimize", "--ideal", "--free", "nonsense"], &[]);
    assert_eq!(code, 2);
}

#[test]
fn analyze_and_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim_dir = dir.path().join("sim");
    let (_, _, code) = run(
        &["simulate", "--paper", "--out", sim_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(code, 0);

    // synthesize a counts file from the simulated table
    let table = {
        let text = std::fs::read_to_string(sim_dir.join("probabilities.json")).unwrap();
        let dto: qsd_cli::formats::TableDto = serde_json::from_str(&text).unwrap();
        dto.to_table().unwrap()
    };
    let counts = qsd_cli::pipeline::synthesize_counts(&table, 60_000, 17, 180.0);
    let counts_path = dir.path().join("counts.csv");
    std::fs::write(&counts_path, qsd_cli::formats::counts_to_csv(&counts)).unwrap();

    let an_dir = dir.path().join("an");
    let (out, err, code) = run(
        &[
            "analyze",
            "--counts",
            counts_path.to_str().unwrap(),
            "--paper",
            "--out",
            an_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, 0, "stderr: {err}");
    let v = json(&out);
    assert!(v["sigma_poisson"].as_f64().unwrap() > 0.0);
    assert!(an_dir.join("analysis.json").exists());

    let (out, err, code) = run(
        &[
            "compare",
            "--sim",
            sim_dir.join("probabilities.json").to_str().unwrap(),
            "--exp",
            an_dir.join("analysis.json").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, 0, "stderr: {err}");
    let v = json(&out);
    assert!(v["pass"].as_bool().unwrap(), "closed loop must agree: {v}");

    // malformed counts file is a usage error with a cell diagnostic
    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "state,t,pi,counts\n1,0,H,10\n").unwrap();
    let (_, err, code) = run(
        &["analyze", "--counts", broken.to_str().unwrap(), "--paper"],
        &[],
    );
    assert_eq!(code, 2);
    assert!(err.contains("missing"), "{err}");
}

#[test]
fn probability_csv_is_stable_across_runs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for d in [&dir_a, &dir_b] {
        let (_, _, code) = run(&["simulate", "--paper", "--out", d.path().to_str().unwrap()], &[]);
        assert_eq!(code, 0);
    }
    let read = |p: &Path| std::fs::read_to_string(p.join("probabilities.csv")).unwrap();
    assert_eq!(read(dir_a.path()), read(dir_b.path()));
}
