use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn urysohn(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_urysohn"));
    cmd.args(args).env_remove("URYSOHN_THREADS");
    if let Some(t) = threads {
        cmd.env("URYSOHN_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, contents).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL_T23: &str = r#"{
  "extension_axiom": { "r": [0.5] },
  "epsilon": 0.2,
  "m_values": [2, 5, 10],
  "trials": 40,
  "p_trials": 200,
  "host": { "approximation": { "target_size": 60 } }
}"#;

#[test]
fn validate_generated_space() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("s.fms");
    let gen = urysohn(&["--seed", "3", "gen-space", "--m", "5", "-o", path.to_str().unwrap()], None);
    assert!(gen.status.success(), "{}", stderr(&gen));
    let o = urysohn(&["validate", path.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "OK n=5");
}

#[test]
fn validate_reports_triangle_violation() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "bad.fms", "3\n0.1 0.9\n0.1\n");
    let o = urysohn(&["validate", &path], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TriangleViolation: d(0,2) > d(0,1) + d(1,2)"), "{}", stderr(&o));
}

#[test]
fn validate_missing_file_is_io_error() {
    let o = urysohn(&["validate", "/nonexistent/space.fms"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_exact_and_sampled() {
    let dir = TempDir::new().unwrap();
    let space = write(dir.path(), "two.fms", "2\n0.3\n");
    let o = urysohn(&["eval", "sup x sup y d(x,y)", &space], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "0.3 exact");

    let sentence = write(dir.path(), "s.txt", "sup x sup y d(x,y)\n");
    let o = urysohn(&["eval", &sentence, &space, "--sampled", "2", "--seed", "5"], None);
    assert_eq!(stdout(&o).trim(), "≥ 0.3 sampled s=2 seed=5");
    let o = urysohn(&["eval", "inf x inf y d(x,y)", &space, "--sampled", "1"], None);
    assert!(stdout(&o).starts_with("≤ "), "{}", stdout(&o));
}

#[test]
fn eval_syntax_error_has_position() {
    let dir = TempDir::new().unwrap();
    let space = write(dir.path(), "two.fms", "2\n0.3\n");
    let o = urysohn(&["eval", "sup x inf y min(d(x,y)", &space], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1:23"), "{}", stderr(&o));
}

#[test]
fn gen_approx_is_deterministic() {
    let a = urysohn(&["--seed", "9", "gen-approx", "--target-size", "30"], None);
    let b = urysohn(&["--seed", "9", "gen-approx", "--target-size", "30"], None);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("30\n"));
}

#[test]
fn bound_prints_value() {
    let o = urysohn(&["bound", "--m", "10", "--n", "1", "--k", "1", "--p", "1"], None);
    assert_eq!(stdout(&o).trim(), "0");
    let o = urysohn(&["bound", "--m", "10", "--n", "1", "--k", "1", "--p", "0.5"], None);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.01953125).abs() < 1e-15);
    let o = urysohn(&["bound", "--m", "1", "--n", "2", "--k", "1", "--p", "0.5"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn theorem23_outputs_and_reproducibility() {
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "t23.json", SMALL_T23);
    let out1 = dir.path().join("one");
    let out2 = dir.path().join("two");
    let o =
        urysohn(&["experiment", "theorem23", &config, "--seed", "7", "--out-dir", out1.to_str().unwrap()], Some("1"));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out1.join("series.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "m,trials,good,bad,fraction,ci_lo,ci_hi,mean_sigma,sd_sigma,bound");
    assert!(lines[1].starts_with("2,40,"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["subcommand"], "experiment theorem23");
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("result.json")).unwrap()).unwrap();
    assert!(result["p_hat"].is_number() && result["N"] == 60);

    // Rerunning from the manifest's resolved config on more threads gives the same CSV.
    let resolved = write(dir.path(), "resolved.json", &manifest["config"].to_string());
    let o = urysohn(&["experiment", "theorem23", &resolved, "--out-dir", out2.to_str().unwrap()], Some("4"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv, fs::read_to_string(out2.join("series.csv")).unwrap());
}

#[test]
fn zeroone_result_has_r_hat() {
    let dir = TempDir::new().unwrap();
    let config = write(
        dir.path(),
        "z.json",
        r#"{"sentence": "sup x inf y d(x,y)", "epsilon": 0.1, "m_values": [1, 3], "trials": 10,
            "host": {"sequential": {"reference_size": 20}}, "seed": 3}"#,
    );
    let out = dir.path().join("out");
    let o = urysohn(&["experiment", "zeroone", &config, "--out-dir", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["r_hat"]["value"], 0.0);
    assert_eq!(result["N"], 20);
}

#[test]
fn bad_configs_exit_2_without_outputs() {
    let dir = TempDir::new().unwrap();
    let zero_eps = SMALL_T23.replace("\"epsilon\": 0.2", "\"epsilon\": 0");
    let unknown = SMALL_T23.replace("\"trials\": 40", "\"trails\": 40");
    for (name, text) in [("zero.json", zero_eps), ("typo.json", unknown)] {
        let config = write(dir.path(), name, &text);
        let out = dir.path().join(name.trim_end_matches(".json"));
        let o = urysohn(&["experiment", "theorem23", &config, "--out-dir", out.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
        assert!(!out.join("series.csv").exists());
    }
}
