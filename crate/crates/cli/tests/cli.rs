#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, Output};

use segdp::amplify::AmplifyParams;

fn segdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segdp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn amplify_value(args: &[&str]) -> f64 {
    let mut full = vec!["amplify"];
    full.extend_from_slice(args);
    let o = segdp(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    stdout(&o).trim().parse().unwrap()
}

#[test]
fn amplify_matches_enumeration_oracle() {
    let got = amplify_value(&["--p", "inf", "--beta", "0.3", "--q", "2", "--blanket-trials", "4", "--gamma", "1", "--epsilon", "0.2"]);
    let prm = AmplifyParams { p: f64::INFINITY, beta: 0.3, q: 2.0, blanket_trials: 4, gamma: 1.0 };
    let want = common::enumerated_divergence(&prm, 0.2);
    // 12 significant digits printed.
    assert!((got - want).abs() <= 1e-10 + 1e-11 * want, "{got} vs {want}");
}

#[test]
fn amplify_trivial_cases() {
    let zero = amplify_value(&["--beta", "0", "--q", "1", "--blanket-trials", "10", "--epsilon", "0"]);
    assert!(zero <= 1e-12);
    let far = amplify_value(&["--p", "3", "--beta", "0.3", "--q", "2", "--blanket-trials", "6", "--epsilon", "50"]);
    assert!(far <= 1e-12);
    let printed = stdout(&segdp(&["amplify", "--beta", "0.3", "--q", "2", "--blanket-trials", "4", "--epsilon", "0.2"]));
    let mantissa = printed.trim().split('e').next().unwrap();
    assert_eq!(mantissa.replace(['.', '-'], "").len(), 12, "{printed}");
}

#[test]
fn exit_codes() {
    assert_eq!(segdp(&["amplify", "--beta", "2", "--q", "1", "--blanket-trials", "1", "--epsilon", "0"]).status.code(), Some(1));
    assert_eq!(segdp(&["amplify", "--beta", "x"]).status.code(), Some(1));
    assert_eq!(segdp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(segdp(&["--help"]).status.code(), Some(0));
    assert_eq!(segdp(&["--version"]).status.code(), Some(0));
    let infeasible = segdp(&["optimize", "--n", "50", "--s", "4", "--d", "17", "--levels", "0.01", "--delta", "1e-12"]);
    assert_eq!(infeasible.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("level 0"));
    assert_eq!(segdp(&["experiment", "--spec", "/nonexistent/spec.toml"]).status.code(), Some(3));
    assert_eq!(segdp(&["simulate", "--data", "/nonexistent/msnbc.seq", "--n", "10", "--s", "2", "--levels", "1"]).status.code(), Some(3));
}

#[test]
fn optimize_prints_structured_params() {
    let args = ["optimize", "--n", "2000", "--s", "2", "--d", "20", "--levels", "0.5,1,2", "--fractions", "0.25,0.5,0.25"];
    let a = segdp(&args);
    assert!(a.status.success());
    let text = stdout(&a);
    assert_eq!(text, stdout(&segdp(&args)));
    let v: toml::Value = toml::from_str(&text).unwrap();
    let rates = v["poisson_rates"].as_array().unwrap();
    assert_eq!(rates.len(), 3);
    assert!(v["blanket_rate"].as_float().unwrap() > 0.0);
    assert!(v["privacy_audit"].as_array().unwrap().iter().all(|b| b.as_bool() == Some(true)));

    let fixed = stdout(&segdp(&[&args[..], &["--m", "1.5"]].concat()));
    let v: toml::Value = toml::from_str(&fixed).unwrap();
    assert_eq!(v["blanket_rate"].as_float(), Some(1.5));
}

#[test]
fn simulate_reports_every_item() {
    let o = segdp(&["simulate", "--n", "500", "--s", "2", "--d", "12", "--levels", "1,2", "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 13);
    assert!(text.contains("# mse = "));
}

fn write_spec(dir: &std::path::Path) -> std::path::PathBuf {
    let spec = dir.join("exp.toml");
    std::fs::write(
        &spec,
        r#"
dataset = "synthetic"
d = 16
s = 2
n = 800
levels = [0.5, 1.0, 2.0]
segmentation = [0.25, 0.5, 0.25]
m = [1.0]
methods = ["segmented"]
trials = 1
seed = 9
"#,
    )
    .unwrap();
    spec
}

#[test]
fn experiment_single_cell_layout() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path());
    let o = segdp(&["experiment", "--spec", spec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "method,dataset,d,s,n,segmentation,m,trial,seed,mse,runtime_ms,lambdas,privacy_audit");
    assert!(lines[1].starts_with("segmented,synthetic,16,2,800,"));
    assert!(lines[2].contains(",mean,,"));
}

#[test]
fn experiment_file_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = segdp(&[
            "experiment",
            "--spec",
            spec.to_str().unwrap(),
            "--methods",
            "segmented,weighted_sepmm",
            "--m",
            "0.5,2",
            "--trials",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&out).unwrap();
        // Drop runtime_ms (column 10).
        text.lines()
            .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != 10).map(|(_, f)| f).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    assert_eq!(a.len(), 1 + 8 + 4);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["delta"].as_f64(), Some(0.01 / 800.0));
    assert!(meta["padding"].as_str().unwrap().contains("complement"));
}
