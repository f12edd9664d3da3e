use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn lvggm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvggm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn version_exits_zero() {
    let out = lvggm(&["--version"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("lvggm ") && text.contains("interface"), "{text}");
}

#[test]
fn estimate_without_input_is_a_usage_error() {
    let out = lvggm(&["estimate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage:"));
}

#[test]
fn unknown_flag_lists_valid_flags() {
    let out = lvggm(&["estimate", "--input", "x.csv", "--lamda", "0.1"]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    for flag in ["--lambda", "--mu", "--glasso", "--output-prefix"] {
        assert!(err.contains(flag), "missing {flag} in:\n{err}");
    }
}

#[test]
fn generate_estimate_diagnose_pipeline() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = lvggm(&["--seed", "3", "generate", "--p", "20", "--r", "2", "--n", "1000", "--out-dir", s(d)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["S_star.csv", "L_star.csv", "theta_star.csv", "sigma_star.csv", "joint.csv", "samples.csv", "model.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    assert_eq!(json(&d.join("manifest.json"))["status"], "succeeded");

    let prefix = d.join("fit").join("est_");
    let out = lvggm(&["estimate", "--input", s(&d.join("samples.csv")), "--output-prefix", s(&prefix)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let diag = json(&d.join("fit/est_diagnostics.json"));
    assert_eq!(diag["converged"], true);
    assert_eq!(diag["p"], 20);
    for f in ["S_hat.csv", "L_hat.csv", "theta_hat.csv", "manifest.json"] {
        assert!(d.join(format!("fit/est_{f}")).exists(), "{f}");
    }

    let report = d.join("report.json");
    let out = lvggm(&[
        "diagnose",
        "--sparse",
        s(&d.join("S_star.csv")),
        "--lowrank",
        s(&d.join("L_star.csv")),
        "--lambda",
        "0.1",
        "--mu",
        "0.2",
        "--output",
        s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = json(&report);
    assert_eq!(rep["r"], 2);
    assert_eq!(rep["sfi"].as_array().unwrap().len(), 4);
    for key in ["sigma_bar", "rho_star", "r_eff", "rfe_lower_bound", "lambda_sfi", "threshold", "thm1_bound"] {
        assert!(rep.get(key).is_some(), "{key}");
    }

    let out = lvggm(&[
        "diagnose",
        "--model",
        s(&d.join("joint.csv")),
        "--observed",
        "20",
        "--lambda",
        "0.1",
        "--mu",
        "0.2",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let from_joint: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let a = from_joint["thm1_bound"].as_f64().unwrap();
    let b = rep["thm1_bound"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}");
    assert!(start.elapsed() < Duration::from_secs(30));
}

#[test]
fn glasso_and_covariance_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&lvggm(&["generate", "--p", "8", "--r", "1", "--out-dir", s(d)])), 0);
    let cov = s(&d.join("sigma_star.csv")).to_string();
    let out = lvggm(&["estimate", "--input", &cov, "--is-covariance"]);
    assert_eq!(code(&out), 1, "default λ needs n");
    let prefix = d.join("g_");
    let out = lvggm(&[
        "estimate",
        "--input",
        &cov,
        "--is-covariance",
        "--n",
        "500",
        "--glasso",
        "--output-prefix",
        s(&prefix),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let diag = json(&d.join("g_diagnostics.json"));
    assert_eq!(diag["method"], "glasso");
    assert_eq!(diag["rank_l_hat"], 0);
}

#[test]
fn numerical_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("S.csv"), "2,2\n1,0\n0,1\n").unwrap();
    std::fs::write(d.join("L.csv"), "2,2\n-2,0\n0,0\n").unwrap();
    let out = lvggm(&[
        "diagnose",
        "--sparse",
        s(&d.join("S.csv")),
        "--lowrank",
        s(&d.join("L.csv")),
        "--lambda",
        "0.1",
        "--mu",
        "0.1",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let out = lvggm(&["generate", "--p", "5", "--r", "0", "--energy-ratio", "1.0", "--out-dir", s(d)]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn malformed_matrix_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "2,3\n1,2,3\n4,5\n").unwrap();
    let out = lvggm(&["estimate", "--input", s(&path)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

fn metric_column(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == "metric").unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn scaling_experiment_is_reproducible_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("scaling.cfg");
    std::fs::write(&cfg, "p_values = 12, 16\nr_values = 2\nn_grid = 100, 300\nreps = 2\n").unwrap();
    let cfg_spaced = d.join("spaced.cfg");
    std::fs::write(&cfg_spaced, "# same grid\nreps=2\n  p_values =12,16\n\nn_grid = 100 ,300\nr_values=2\n").unwrap();

    let run = |config: &Path, out: &str| {
        let out_path = d.join(out);
        let o = lvggm(&["--seed", "5", "experiment", "scaling", "--config", s(config), "--output", s(&out_path)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out_path
    };
    let a = run(&cfg, "a.csv");
    let b = run(&cfg_spaced, "b.csv");
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "study,p,r,n,ratio,rescaled_n,metric,converged,seed,wall_time_ms"
    );
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert_eq!(metric_column(&a), metric_column(&b));
    let (ma, mb) = (json(&d.join("a.manifest.json")), json(&d.join("b.manifest.json")));
    assert_eq!(ma["config_digest"], mb["config_digest"]);
    assert_eq!(ma["base_seed"], 5);
    assert_eq!(ma["status"], "succeeded");

    let other = d.join("c.csv");
    let o = lvggm(&["--seed", "6", "experiment", "scaling", "--config", s(&cfg), "--output", s(&other)]);
    assert_eq!(code(&o), 0);
    assert_ne!(json(&d.join("c.manifest.json"))["config_digest"], ma["config_digest"]);

    let svg = d.join("scaling.svg");
    let o = lvggm(&["plot", "--input", s(&a), "--log", "--reference", "--output", s(&svg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg_text.matches("<circle").count(), 8);
    let dat = std::fs::read_to_string(d.join("scaling.dat")).unwrap();
    assert_eq!(dat.lines().filter(|l| !l.starts_with('#')).count(), 8);
}

#[test]
fn effrank_experiment_and_empty_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("e.cfg");
    std::fs::write(&cfg, "p_values = 20\nr_latent = 3\nratios = 0.2, 1, 5\nreps_per_cell = 2\n").unwrap();
    let out = d.join("e.csv");
    let o = lvggm(&["experiment", "effrank", "--config", s(&cfg), "--output", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1 + 3 * 2);

    let o = lvggm(&["experiment", "effrank", "--config", s(&cfg), "--output", s(&out), "--bogus"]);
    assert_eq!(code(&o), 1);

    std::fs::write(&cfg, "unknown_key = 3\n").unwrap();
    let o = lvggm(&["experiment", "effrank", "--config", s(&cfg), "--output", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown_key"));

    let empty = d.join("empty.csv");
    std::fs::write(&empty, "study,p,r,n,ratio,rescaled_n,metric,converged,seed,wall_time_ms\n").unwrap();
    let svg = d.join("empty.svg");
    let o = lvggm(&["plot", "--input", s(&empty), "--output", s(&svg)]);
    assert_eq!(code(&o), 1);
    assert!(!svg.exists());
}
