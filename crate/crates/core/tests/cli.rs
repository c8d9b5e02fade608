use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wstring")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const TWO_STRINGS: &str = r#"{
    "explicit": {"lambda1": 1, "lambda2": 1, "lambda3": 1, "lambda4": 1, "c0": 1},
    "strings": [[0.5, 0], [-0.5, 0]],
    "epsilon": 0.3,
    "grid": {"half_width": 8, "n": 65}
}"#;

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn constants_pass_and_write_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWO_STRINGS);
    let out = dir.path().join("out");
    let o = run(&["constants", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("C1: ") && text.contains("check_I_closed_form: pass"));
    assert!(out.join("constants.txt").exists());
}

#[test]
fn inadmissible_coefficients_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let divergent = write_config(
        dir.path(),
        "d.json",
        r#"{"explicit": {"lambda1": 5, "lambda2": 5, "lambda3": 1, "lambda4": 1, "c0": 1}}"#,
    );
    let nonprop = write_config(
        dir.path(),
        "n.json",
        r#"{"explicit": {"lambda1": 1, "lambda2": 4, "lambda3": 1, "lambda4": 1, "c0": 1}, "strings": [[0.5, 0]]}"#,
    );
    for cmd in ["constants", "radial", "solve"] {
        for cfg in [&divergent, &nonprop] {
            let o = run(&[cmd, "--config", cfg, "--out", dir.path().to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(2), "{cmd} {cfg}");
            assert!(String::from_utf8_lossy(&o.stderr).contains("inadmissible"));
        }
    }
}

#[test]
fn malformed_configs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let typo = write_config(dir.path(), "t.json", &TWO_STRINGS.replace("\"epsilon\"", "\"epsilom\""));
    let broken = write_config(dir.path(), "b.json", "{ not json");
    let mismatch = write_config(dir.path(), "m.json", &TWO_STRINGS.replace("\"epsilon\"", "\"command\": \"solve\", \"epsilon\""));
    for cfg in [&typo, &broken, &mismatch] {
        assert_eq!(run(&["constants", "--config", cfg, "--out", out]).status.code(), Some(1), "{cfg}");
    }
    assert_eq!(run(&["constants", "--config", "/nonexistent/x.json"]).status.code(), Some(1));
}

#[test]
fn radial_writes_profiles_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWO_STRINGS);
    let out = dir.path().join("out");
    let o = run(&["radial", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let fit = fs::read_to_string(out.join("decay_fit.txt")).unwrap();
    let slope: f64 = fit.lines().find_map(|l| l.strip_prefix("w1_slope=")).unwrap().parse().unwrap();
    let target: f64 = fit.lines().find_map(|l| l.strip_prefix("w1_target=")).unwrap().parse().unwrap();
    assert!((slope - target).abs() < 1e-6 * target.abs());
    assert!(fs::read_to_string(out.join("w2.csv")).unwrap().starts_with("r,value\n"));
}

#[test]
fn radial_with_zero_source_gives_zero_w1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "z.json",
        r#"{"explicit": {"lambda1": 0, "lambda2": 1, "lambda3": 0, "lambda4": 1, "c0": 1}, "strings": [[0, 0]]}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["radial", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let text = fs::read_to_string(out.join("w1.csv")).unwrap();
    for line in text.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn profiles_write_planar_and_radial_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWO_STRINGS);
    let out = dir.path().join("out");
    assert_eq!(run(&["profiles", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let planar = fs::read_to_string(out.join("profiles.csv")).unwrap();
    assert!(planar.starts_with("x,y,ln_rho_i,ln_rho_ii\n"));
    assert_eq!(planar.lines().count(), 1 + 65 * 65);
    assert!(fs::read_to_string(out.join("radial_profiles.csv")).unwrap().starts_with("r,rho1,rho2,phi0,phi_pm\n"));
}

#[test]
fn verify_passes_and_detects_a_wrong_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWO_STRINGS);
    let out = dir.path().join("out");
    let good = run(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(good.status.code(), Some(0), "{}", stdout(&good));
    assert!(out.join("verify.csv").exists());

    let bad = run(&["verify", "--config", &cfg, "--out", out.to_str().unwrap(), "--rho1-coefficient", "7"]);
    assert_eq!(bad.status.code(), Some(4));
    let text = stdout(&bad) + &String::from_utf8_lossy(&bad.stderr);
    for name in ["kernel_phi_plus", "kernel_phi_minus", "kernel_phi_zero", "l_identity_planar"] {
        assert!(text.lines().any(|l| l.starts_with(name) && l.contains("FAIL")), "{name} not flagged:\n{text}");
    }
}

#[test]
fn solve_writes_fields_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWO_STRINGS);
    let out = dir.path().join("out");
    let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for f in ["u.csv", "eta.csv", "vstar1.csv", "vstar2.csv", "newton_report.txt", "summary.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = fs::read_to_string(out.join("newton_report.txt")).unwrap();
    assert!(report.contains("converged=true"));
}

#[test]
fn sweep_writes_one_directory_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", &TWO_STRINGS.replace("\"epsilon\": 0.3", "\"epsilon_sweep\": [0.4, 0.3]"));
    let out = dir.path().join("out");
    let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.code().is_some());
    assert!(out.join("eps_0.4").join("u.csv").exists());
    assert!(out.join("eps_0.3").join("newton_report.txt").exists());
    let summary = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(stdout(&o).contains("vstar_bound_decreasing="));
}

#[test]
fn non_convergence_exits_5_with_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &TWO_STRINGS.replace("\"grid\"", "\"newton\": {\"tol\": 1e-15, \"max_iter\": 1}, \"grid\""),
    );
    let o = run(&["solve", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    let text = stdout(&o) + &String::from_utf8_lossy(&o.stderr);
    assert!(text.contains("residual history"));
}
