use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SWEEP: &str = r#"{
    "lambda_enb": [8, 20],
    "app_rates": [1e6, 11e6],
    "deployments": [{"scenario": "UMi", "tech": "LTE"}, {"scenario": "UMi", "tech": "mmWave"}],
    "n_runs": 2,
    "seed": 5,
    "base": {"run_duration_s": 0.3, "warmup_s": 0.1, "vehicles_per_enb": 3}
}"#;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v2i-sim")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn sweep_writes_versioned_csv_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "sweep.json", SWEEP);
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    for (out, parallel) in [(&a, "1"), (&b, "2")] {
        let o = sim(&["--sweep", &spec, "--out", out.to_str().unwrap(), "--parallel", parallel]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("[8/8]"));
    }
    let csv = fs::read(&a).unwrap();
    assert_eq!(csv, fs::read(&b).unwrap(), "--parallel changed the output");
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# v2i-sim results v1");
    assert_eq!(lines[1], "scenario,tech,lambda_enb,app_rate,metric,mean,ci95");
    assert_eq!(lines.len(), 2 + 8 * 6);
}

#[test]
fn config_file_runs_one_campaign_to_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"scenario": "RMa", "tech": "mmWave", "lambda_enb_per_km2": 12, "run_duration_s": 0.3, "warmup_s": 0.1}"#,
    );
    let o = sim(&["--config", &cfg, "--runs", "2", "--seed", "3", "-q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stderr.is_empty());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 2 + 6);
    assert!(text.lines().nth(2).unwrap().starts_with("RMa,mmWave,12,"));
    let again = sim(&["--config", &cfg, "--runs", "2", "--seed", "3", "-q"]);
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn trace_directory_sits_next_to_the_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"scenario": "UMi", "tech": "LTE", "run_duration_s": 0.2, "warmup_s": 0.05}"#);
    let out = tmp.path().join("r.csv");
    let o = sim(&["--config", &cfg, "--runs", "1", "--out", out.to_str().unwrap(), "--trace", "topology", "-q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = fs::read_dir(tmp.path().join("r.csv.traces")).unwrap().collect();
    assert_eq!(files.len(), 1);
    let name = files[0].as_ref().unwrap().file_name().into_string().unwrap();
    assert!(name.ends_with("-run0.topology.csv"), "{name}");
}

#[test]
fn configuration_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_value = write(tmp.path(), "bad.json", r#"{"scenario": "UMi", "tech": "LTE", "lambda_enb_per_km2": -3}"#);
    let bad_field = write(tmp.path(), "typo.json", r#"{"scenario": "UMi", "tech": "LTE", "lamda": 3}"#);
    let missing = tmp.path().join("nope.json");
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["--config", &bad_value],
        vec!["--config", &bad_field],
        vec!["--config", missing.to_str().unwrap()],
        vec!["--config", &bad_value, "--sweep", &bad_value],
        vec!["--config", &bad_value, "--trace", "everything"],
    ];
    for args in cases {
        let o = sim(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"scenario": "UMi", "tech": "LTE", "run_duration_s": 0.2, "warmup_s": 0.05}"#);
    let out = tmp.path().join("no-such-dir").join("r.csv");
    let o = sim(&["--config", &cfg, "--runs", "1", "--out", out.to_str().unwrap(), "-q"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}
