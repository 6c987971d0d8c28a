use std::path::Path;
use std::process::{Command, Output};

fn spincomb(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spincomb"));
    cmd.args(args).env_remove("SPINCOMB_OUT");
    if let Some(dir) = env_out {
        cmd.env("SPINCOMB_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"{
    "comb": {"omega_over_2pi_mhz": 8},
    "bins": 60,
    "time": {"t_max_ns": 20},
    "drive": {"duration_ns": 6}
}"#;

#[test]
fn lists_every_builtin() {
    let o = spincomb(&["list-scenarios"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["fig1a", "fig2d", "fig4", "figs2", "long_pulse"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn unknown_key_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.json",
        r#"{"comb": {"omega_over_2pi_mhz": 8, "widht_mhz": 3}}"#,
    );
    let o = spincomb(&["run", &path, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("widht"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_and_solver_are_config_errors() {
    let o = spincomb(&["run", "no_such_scenario"], None);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "small.json", SMALL);
    let o = spincomb(&["run", &path, "--solver", "euler"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coarse_cross_check_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "coarse.json",
        &SMALL.replace("\"bins\": 60", "\"bins\": 20"),
    );
    let out = dir.path().join("out");
    let o = spincomb(
        &[
            "run",
            &path,
            "--solver",
            "all",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "small.json", SMALL);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let o = spincomb(&["run", &path, "--out", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(out);
    }
    for file in ["trajectory.csv", "spectrum.csv", "pulses.csv"] {
        let a = std::fs::read(outputs[0].join(file)).unwrap();
        let b = std::fs::read(outputs[1].join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "envcase.json", SMALL);
    let root = dir.path().join("root");
    let o = spincomb(&["run", &path], Some(&root));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root.join("envcase").join("trajectory.csv").is_file());
    assert!(root.join("envcase").join("report.json").is_file());
}

#[test]
fn show_output_loads_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let shown = spincomb(&["show", "fig4"], None);
    assert!(shown.status.success());
    let path = write(
        dir.path(),
        "fig4.json",
        std::str::from_utf8(&shown.stdout).unwrap(),
    );
    let again = spincomb(&["show", &path], None);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(shown.stdout, again.stdout);
}
