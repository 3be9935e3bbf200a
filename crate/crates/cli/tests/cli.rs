use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gnet(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gnet"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("GNET_THREADS", t);
    }
    cmd.output().expect("gnet runs")
}

fn write_config(dir: &Path, experiment: &str) -> String {
    let text = format!(
        r#"{{"experiment":"{experiment}","kernel":{{"kind":"absdot_power","gamma":0}},
            "tau":{{"builtin":"uniform-sphere","samples":1000}},"n":1.2,"n_sweep":[0.8,1.2,1.8,2.4],
            "draws":4,"eval_grid_size":300,"mc_draws":2,"master_seed":4}}"#
    );
    let path = dir.join(format!("{experiment}.json"));
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn synth_writes_network_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "synth");
    let net = dir.path().join("net.json");
    let rep = dir.path().join("report.json");
    let out = gnet(&["synth", "--config", &cfg, "--out", net.to_str().unwrap(), "--report", rep.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let net: serde_json::Value = serde_json::from_str(&fs::read_to_string(net).unwrap()).unwrap();
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(rep).unwrap()).unwrap();
    assert_eq!(net["terms"].as_array().unwrap().len() as u64, rep["N"].as_u64().unwrap());
    assert_eq!(net["meta"]["seed"], 4);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "synth");
    let out = gnet(&["synth", "--config", &cfg, "--seed", "11"], None);
    assert!(out.status.success());
    let net: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(net["meta"]["seed"], 11);
}

#[test]
fn rate_study_output_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rate-study");
    let mut csvs = Vec::new();
    for threads in ["1", "3"] {
        let report = dir.path().join(format!("report-{threads}"));
        let out = gnet(&["rate-study", "--config", &cfg, "--out", report.to_str().unwrap()], Some(threads));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = fs::read_to_string(report.join("rate.csv")).unwrap();
        let stripped: Vec<String> =
            csv.lines().map(|l| l.rsplit_once(',').map(|(head, _)| head.to_owned()).unwrap_or_default()).collect();
        csvs.push(stripped);
        for name in ["rate.json", "rate.dat", "rate.plt"] {
            assert!(report.join(name).exists(), "missing {name}");
        }
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0].len(), 5);
}

#[test]
fn check_partition_prints_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "check-partition");
    let out = gnet(&["check-partition", "--config", &cfg], None);
    assert!(out.status.success());
    let d: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["radius_ok", "separation_ok", "coverage_ok", "positive_mass_ok"] {
        assert_eq!(d[key], true, "{key}");
    }
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let out = gnet(&["synth", "--config", missing.to_str().unwrap()], None);
    assert!(!out.status.success());

    let cfg = write_config(dir.path(), "synth");
    let out = gnet(&["synth", "--config", &cfg], Some("zero"));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("GNET_THREADS"));
}
