use std::fs;
use std::process::{Command, Output};

fn thermoqsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermoqsl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn header(csv: &str) -> &str {
    csv.lines().find(|l| !l.starts_with('#')).expect("header line")
}

#[test]
fn spectrum_csv_header_and_metadata() {
    let out = thermoqsl(&["spectrum", "--n-sites", "3", "--lambda", "0.5"]);
    assert!(out.status.success());
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.starts_with("# thermoqsl "));
    assert!(s.contains("# config: model.kind = tfic\n"));
    assert!(s.contains("# units: "));
    assert_eq!(header(&s), "lambda,index,energy");
    assert_eq!(s.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 8);
}

#[test]
fn threshold_csv_header() {
    let out = thermoqsl(&["threshold", "--n-sites", "4", "--beta", "0.1,1,10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        header(&s),
        "beta,delta_v_ed,delta_v_closed,chi_f_ed,chi_f_closed,gamma_th,gamma_n,\
         f_n_ed,f_n_closed,f_inf,rel_err_delta_v,rel_err_chi_f,reason"
    );
    assert_eq!(s.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn dynamics_writes_one_file_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let status = thermoqsl(&[
        "dynamics",
        "--n-sites",
        "3",
        "--beta",
        "1",
        "--gamma",
        "1,2",
        "--lambda-max",
        "0.02",
        "--n-records",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for gamma in ["1", "2"] {
        let p = dir.path().join(format!("traj_beta1_gamma{gamma}.csv"));
        let s = fs::read_to_string(&p).unwrap();
        assert_eq!(header(&s), "lambda,F,C,R,theta,bound_weak,bound_strong,purity");
        assert_eq!(s.lines().filter(|l| !l.starts_with('#')).count(), 4);
    }
}

#[test]
fn json_format_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "[model]\nkind = qxyc\nn_sites = 4\n[output]\nformat = json\n").unwrap();
    let out = thermoqsl(&["threshold", "--config", cfg.to_str().unwrap(), "--beta", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["columns"]["beta"][0], 2.0);
    assert!(v["metadata"].as_array().unwrap().iter().any(|m| m == "config: model.kind = qxyc"));
}

#[test]
fn verify_single_criterion_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = thermoqsl(&["verify", "--only", "AC-4", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS AC-4"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 1);
}

#[test]
fn invalid_inputs_fail_with_message() {
    let out = thermoqsl(&["spectrum", "--J", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid model"));
    let out = thermoqsl(&["threshold", "--beta", "0:1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = thermoqsl(&["verify", "--only", "AC-99"]);
    assert_eq!(out.status.code(), Some(2));
}
