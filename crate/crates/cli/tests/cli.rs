use std::fs;
use std::process::{Command, Output};

fn elpower(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elpower")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn derive_boost_prints_both_modes() {
    let o = elpower(&["derive", "hf-boost", "--params", &params_file(r#"{"R_o": 17.0}"#).1]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("mode ").count(), 2, "{text}");
    assert!(text.contains("u_m=1,u_d=0") && text.contains("u_m=0,u_d=1"));
}

#[test]
fn derive_ideal_diode_off_is_descriptor() {
    let o = elpower(&["derive", "ideal-diode", "--mode", "u=0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("kind descriptor"), "{text}");
}

#[test]
fn unknown_circuit_exits_2() {
    let o = elpower(&["derive", "flyback"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown circuit"));
}

#[test]
fn unknown_mode_exits_2() {
    assert_eq!(elpower(&["derive", "lc", "--mode", "u=1"]).status.code(), Some(2));
}

#[test]
fn bad_parameter_file_exits_2() {
    let (_dir, path) = params_file(r#"{"R_x": 1.0}"#);
    let o = elpower(&["derive", "hf-rectifier", "--params", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("R_x"));
}

fn params_file(text: &str) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    fs::write(&path, text).unwrap();
    (dir, path.to_str().unwrap().to_string())
}

fn config_file(text: &str) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(&path, text).unwrap();
    (dir, path.to_str().unwrap().to_string())
}

#[test]
fn simulate_writes_csv_and_summary() {
    let (dir, cfg) = config_file(r#"{"circuit": "hf-rectifier", "t_end": 2e-3, "out": "rect.csv"}"#);
    let o = elpower(&["simulate", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("rect.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,i,v_d,i_Lc,v_c,u_d,E_stored,E_source,E_diss"
    );
    assert!(csv.lines().count() > 100);
    let summary = stdout(&o);
    assert!(summary.contains("circuit hf-rectifier"), "{summary}");
    assert!(summary.contains("energy balance"));
}

#[test]
fn simulate_is_byte_stable() {
    let (_dir, cfg) = config_file(r#"{"circuit": "hf-rectifier", "t_end": 1e-3}"#);
    let a = elpower(&["simulate", "--config", &cfg]);
    let b = elpower(&["simulate", "--config", &cfg]);
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn zero_duration_exits_2() {
    let (_dir, cfg) = config_file(r#"{"circuit": "lc", "t_end": 0.0}"#);
    assert_eq!(elpower(&["simulate", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn descriptor_simulation_exits_4() {
    let (_dir, cfg) = config_file(r#"{"circuit": "ideal-diode", "t_end": 1e-3, "scheduler": [{"fixed": "u=0"}]}"#);
    let o = elpower(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("descriptor"));
}

#[test]
fn validate_lists_checks() {
    let o = elpower(&["validate", "--list"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 10);
}

#[test]
fn validate_matrix_checks_pass_on_defaults() {
    let o = elpower(&[
        "validate",
        "boost-matrices",
        "rectifier-matrices",
        "ideal-diode-descriptor",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("3/3 checks passed"));
}

#[test]
fn validate_detects_changed_diode_resistance() {
    let (_dir, path) = params_file(r#"{"hf-boost": {"R_d_on": 0.5}}"#);
    let o = elpower(&["validate", "boost-matrices", "--params", &path]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL") && text.contains("[5][5]"), "{text}");
}

#[test]
fn validate_unknown_check_exits_2() {
    assert_eq!(elpower(&["validate", "no-such-check"]).status.code(), Some(2));
}
