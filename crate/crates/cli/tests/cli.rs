use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dkseq"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn config_arg(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn write_config(dir: &tempfile::TempDir, body: &str) -> String {
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generate_inverse_x() {
    let o = run(&["generate", "--config", &config_arg("inverse_x.json")]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(rows, ["0,0.0", "1,0.5", "2,0.0", "3,0.5"]);
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = run(&[
            "generate",
            "--config",
            &config_arg("random_2d.json"),
            "--seed",
            "99",
            "--N",
            "50",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let other = run(&["generate", "--config", &config_arg("random_2d.json"), "--seed", "100", "--N", "50"]);
    assert_ne!(other.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn usage_and_config_errors_exit_two() {
    assert_eq!(run(&["generate", "--config", &config_arg("inverse_x.json"), "--N", "0"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(&dir, r#"{"q": 2, "unexpected": 1}"#);
    assert_eq!(run(&["walsh-check", "--config", &bad]).status.code(), Some(2));
    let not_prime = write_config(&dir, r#"{"q": 4}"#);
    assert_eq!(run(&["walsh-check", "--config", &not_prime]).status.code(), Some(2));
}

#[test]
fn walsh_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, r#"{"q": 2}"#);
    let o = run(&["walsh-check", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["orthonormality_failures"], 0);
    assert_eq!(v["provenance"]["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn discrepancy_routes_agree() {
    let o = run(&["discrepancy", "--config", &config_arg("random_2d.json"), "--method", "both"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["routes_agree"], true);
    let again = run(&["discrepancy", "--config", &config_arg("random_2d.json"), "--method", "both"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn corrupted_pairing_is_localized() {
    let o = run(&["discrepancy", "--config", &config_arg("corrupted_pairing.json"), "--method", "both"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("k = [") && err.contains("N = "), "{err}");
    // the same points with the correct pairing pass
    let fixed = run(&[
        "discrepancy",
        "--config",
        &config_arg("corrupted_pairing.json"),
        "--method",
        "both",
        "--pairing",
        "shifted",
    ]);
    assert_eq!(fixed.status.code(), Some(0));
}

#[test]
fn measure_reports_rational_string() {
    let o = run(&["measure", "--config", &config_arg("measure_basic.json")]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["estimate"]["exact"], "1/4");
    assert_eq!(v["report"]["estimate"]["stderr"], 0.0);
    let tilde = run(&["measure", "--config", &config_arg("measure_tilde.json")]);
    let v: serde_json::Value = serde_json::from_slice(&tilde.stdout).unwrap();
    assert_eq!(v["report"]["tilde"]["expected"], "1/16");
    assert_eq!(v["report"]["tilde"]["matches"], true);
}

#[test]
fn witness_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.json");
    let o = run(&["witness", "--config", &config_arg("witness.json"), "--seed", "8", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert!(csv.starts_with("N,D_star,log_scale,ratio"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(csv.lines().count() - 1, v["report"]["certificates"].as_array().unwrap().len());
}

fn integrate_rows(args: &[&str]) -> Vec<Vec<f64>> {
    let o = run(args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    stdout(&o).lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn integrate_examples() {
    let c = config_arg("integrate.json");
    for row in integrate_rows(&["integrate", "--config", &c, "--integrand", "const", "--N", "64"]) {
        assert_eq!(row[2], 0.0);
    }
    let inv = config_arg("inverse_x.json");
    let rows = integrate_rows(&["integrate", "--config", &inv, "--integrand", "linear", "--N", "2"]);
    assert_eq!(rows[1][..3], [2.0, 0.25, 0.25]);
    assert_eq!(run(&["integrate", "--config", &c, "--integrand", "nope"]).status.code(), Some(2));
}

#[test]
fn integration_error_trends_down() {
    let c = config_arg("integrate.json");
    let mut first = 0.0;
    let mut last = 0.0;
    for seed in 0..20 {
        let seed = seed.to_string();
        let rows = integrate_rows(&["integrate", "--config", &c, "--integrand", "cos", "--N", "4096", "--seed", &seed]);
        let k = rows.len() / 3;
        first += rows[..k].iter().map(|r| r[2]).sum::<f64>() / k as f64;
        last += rows[rows.len() - k..].iter().map(|r| r[2]).sum::<f64>() / k as f64;
    }
    assert!(last < first, "mean error rose from {first} to {last}");
}

#[test]
fn suite_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("suite.json");
    let o = run(&["suite", "--only", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("criterion 9") && err.contains("PASS"));
    assert_eq!(run(&["suite", "--only", "12"]).status.code(), Some(2));
}
