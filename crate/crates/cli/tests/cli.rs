use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn densilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densilab"))
        .args(args)
        .env_remove("DENSILAB_SEED")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const Q_CONFIG: &str = r#"{
  "experiment": "q",
  "rule": "gkl",
  "topology": {"kind": "ring", "n": 39},
  "p_grid": [0.4, 0.45],
  "samples": 60,
  "master_seed": 11,
  "raster_steps": 10
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("meta");
    v
}

fn csv_without_meta(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("report.csv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("# generated_at"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn same_seed_same_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "q.json", Q_CONFIG);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = densilab(&["--jobs", jobs, "run", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(report(&a), report(&b));
    assert_eq!(csv_without_meta(&a), csv_without_meta(&b));
    assert_eq!(
        std::fs::read_to_string(a.join("raster.pbm")).unwrap(),
        std::fs::read_to_string(b.join("raster.pbm")).unwrap()
    );
    let csv = std::fs::read_to_string(a.join("report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("# densilab-csv v1"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("q,gkl,ring,39,")).count(), 2);
    let raster = std::fs::read_to_string(a.join("raster.pbm")).unwrap();
    assert!(raster.starts_with("P1\n39 11\n"));
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "q.json", Q_CONFIG);
    let run = |out: &str, flag: Option<&str>, env: Option<&str>| {
        let dir = tmp.path().join(out);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_densilab"));
        cmd.args(["run", &cfg, "--out", dir.to_str().unwrap()]).env_remove("DENSILAB_SEED");
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        if let Some(s) = env {
            cmd.env("DENSILAB_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        report(&dir)["master_seed"].as_u64().unwrap()
    };
    assert_eq!(run("c", None, None), 11);
    assert_eq!(run("e", None, Some("22")), 22);
    assert_eq!(run("f", Some("33"), Some("22")), 33);
}

#[test]
fn out_of_range_alpha_exits_2_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let text = Q_CONFIG.replace("\"gkl\"", "\"majority_traffic\", \"parameters\": {\"alpha\": 1.5}");
    let cfg = write_config(tmp.path(), "bad.json", &text);
    let o = densilab(&["run", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
    assert!(!tmp.path().join("report.json").exists());
}

#[test]
fn unknown_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", &Q_CONFIG.replace("\"samples\"", "\"smaples\""));
    let o = densilab(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("smaples"), "{}", stderr(&o));
}

#[test]
fn missing_file_exits_1() {
    let o = densilab(&["run", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_flag_exits_2() {
    assert_eq!(densilab(&["diagram", "--rule", "gkl"]).status.code(), Some(2));
    assert_eq!(densilab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn convergence_and_control_configs_run() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = [
        r#"{"experiment": "convergence", "rule": "toom", "topology": {"kind": "torus", "width": 8, "height": 8}, "p": 0.7, "samples": 10}"#,
        r#"{"experiment": "convergence", "rule": "two_tape", "topology": {"kind": "ring", "n": 31}, "p": 0.4, "samples": 10}"#,
        r#"{"experiment": "convergence", "rule": "tree4", "topology": {"kind": "tree", "family": "free", "degree": 4, "depth": 4}, "p": 0.6, "samples": 10}"#,
        r#"{"experiment": "control", "rule": "identity", "topology": {"kind": "ring", "n": 21}, "p": 0.5, "samples": 10}"#,
        r#"{"experiment": "control", "rule": "maj5", "topology": {"kind": "torus", "width": 8, "height": 8}, "p": 0.5, "samples": 5}"#,
        r#"{"experiment": "err", "rule": "gkl", "topology": {"kind": "ring", "n": 11}, "p": 0.45, "samples": 10}"#,
    ];
    for (i, text) in configs.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("{i}.json"), text);
        let out = tmp.path().join(format!("o{i}"));
        let o = densilab(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{text}: {}", stderr(&o));
        assert!(!report(&out)["rows"].as_array().unwrap().is_empty(), "{text}");
    }
}

#[test]
fn convergence_on_wrong_topology_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{"experiment": "convergence", "rule": "toom", "topology": {"kind": "ring", "n": 8}, "p": 0.7, "samples": 10}"#;
    let cfg = write_config(tmp.path(), "c.json", text);
    let o = densilab(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("topology"));
}

fn pbm_rows(text: &str) -> (usize, usize, Vec<String>) {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("P1"));
    let dims: Vec<usize> = lines.next().unwrap().split(' ').map(|x| x.parse().unwrap()).collect();
    (dims[0], dims[1], lines.map(str::to_string).collect())
}

#[test]
fn diagram_with_zero_steps_is_the_initial_row() {
    let o = densilab(&["diagram", "--rule", "kari", "--n", "20", "--steps", "0", "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (w, h, rows) = pbm_rows(&stdout(&o));
    assert_eq!((w, h, rows.len()), (20, 1, 1));
}

#[test]
fn diagram_of_traffic_conserves_ones() {
    let o = densilab(&["diagram", "--rule", "traffic", "--n", "30", "--steps", "12", "--p", "0.3"]);
    let (_, h, rows) = pbm_rows(&stdout(&o));
    assert_eq!(h, 13);
    let ones: Vec<usize> = rows.iter().map(|r| r.matches('1').count()).collect();
    assert!(ones.windows(2).all(|w| w[0] == w[1]), "{ones:?}");
}

#[test]
fn two_tape_diagram_stacks_tapes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d.pbm");
    let o = densilab(&[
        "diagram", "--rule", "two_tape", "--n", "16", "--steps", "5", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (w, h, _) = pbm_rows(&std::fs::read_to_string(out).unwrap());
    assert_eq!((w, h), (16, 12));
}

#[test]
fn diagram_params_reach_the_rule() {
    let o = densilab(&["diagram", "--rule", "majority_traffic", "--n", "10", "--param", "alpha=2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"));
}

#[test]
fn suite_passes() {
    let o = densilab(&["suite"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().count() >= 13);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
}

#[test]
fn mutated_traffic_code_is_caught_by_name() {
    let o = densilab(&["suite", "--traf-code", "226", "--rule", "traffic"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL"));
    assert!(stderr(&o).contains("traffic_is_ballistic_annihilation") || stderr(&o).contains("traffic_conserves_ones"));
}

#[test]
fn suite_rejects_rule_without_checks() {
    assert_eq!(densilab(&["suite", "--rule", "glauber"]).status.code(), Some(2));
}
