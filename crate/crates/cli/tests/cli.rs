use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calcium-gspt"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn scale_report_recovers_the_first_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["scale-report"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("scaling_report.json"));
    let a1 = r["a_named"]["a1"].as_f64().unwrap();
    assert!((a1 - 0.112).abs() < 1e-3, "{a1}");
}

#[test]
fn simulate_produces_broad_spikes_at_high_p() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--p", "0.09", "simulate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("simulate.json"));
    let max_c = s["max_c"].as_f64().unwrap();
    assert!((0.4..=0.6).contains(&max_c), "{max_c}");
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 1000);
}

#[test]
fn analysis_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--set", "k_tau=1000", "analyze-r1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("landmark"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let cases: [Vec<&str>; 4] = [
        vec!["--params", missing.to_str().unwrap(), "scale-report"],
        vec!["--set", "bogus=1", "scale-report"],
        vec!["--set", "p", "scale-report"],
        vec!["frobnicate"],
    ];
    for args in &cases {
        assert_eq!(run(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"k_q": 1.0}"#).unwrap();
    assert_eq!(run(dir.path(), &["--params", bad.to_str().unwrap(), "scale-report"]).status.code(), Some(2));
}

#[test]
fn params_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("params.json");
    fs::write(&file, r#"{"p": 0.02}"#).unwrap();
    let o = run(dir.path(), &["--params", file.to_str().unwrap(), "simulate", "--t-end", "1e4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&dir.path().join("simulate.json"))["p"].as_f64(), Some(0.02));
    // the command line wins over the file
    let o = run(dir.path(), &["--params", file.to_str().unwrap(), "--p", "0.05", "simulate", "--t-end", "1e4"]);
    assert!(o.status.success());
    assert_eq!(json(&dir.path().join("simulate.json"))["p"].as_f64(), Some(0.05));
}

#[test]
fn runs_are_byte_identical_and_leave_no_temporaries() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(d.path(), &["--seed", "7", "--jitter", "0.01", "maps"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in &names {
        assert!(!n.to_string_lossy().ends_with(".tmp"), "{n:?}");
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n:?}");
    }
}
