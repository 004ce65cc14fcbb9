use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn profilersim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_profilersim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PROFILERSIM_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_fig4_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = profilersim(&["run", "--scenario", "fig4", "--out", "results/"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let results = dir.path().join("results");
    let mut names: Vec<String> = fs::read_dir(&results)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["fig4.compliance.csv", "fig4.resolved.toml", "fig4.summary.txt", "fig4.trace.csv"]
    );
    let trace = fs::read_to_string(results.join("fig4.trace.csv")).unwrap();
    assert!(trace.starts_with("t,z,v,l,u,rho_true,rho_meas,grad_est,f_p_hat,mode,v_ref\n"));
    let summary = fs::read_to_string(results.join("fig4.summary.txt")).unwrap();
    assert!(summary.contains("cruise->measure"));
    assert!(stdout(&o).contains("temperature"));
}

#[test]
fn emit_plot_adds_script() {
    let dir = tempfile::tempdir().unwrap();
    let o = profilersim(&["run", "--scenario", "fig4", "--out", ".", "--emit-plot"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let gp = fs::read_to_string(dir.path().join("fig4.plot.gp")).unwrap();
    assert!(gp.contains("fig4.trace.csv"));
    assert!(gp.contains("multiplot layout 4,1"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_profilersim"))
        .args(["run", "--scenario", "neutral_rest"])
        .current_dir(dir.path())
        .env("PROFILERSIM_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("from_env/neutral_rest.trace.csv").exists());
}

#[test]
fn compare_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = profilersim(&["compare", "--scenario", "deep_profile"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for label in ["all-measuring", "all-cruising", "adaptive"] {
        assert!(out.contains(label), "{out}");
    }
}

#[test]
fn negative_dwell_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = profilersim(&["run", "--set", "supervisor.dwell_s=-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("dwell_s must be ≥ 0"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn unknown_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = profilersim(&["validate", "--set", "sim.bogus=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn config_file_scenario() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("shallow.toml"),
        "base = \"fig4\"\n[sim]\nstop_depth = 300.0\n",
    )
    .unwrap();
    let o = profilersim(&["run", "--scenario", "shallow.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let resolved = fs::read_to_string(dir.path().join("out/shallow.resolved.toml")).unwrap();
    assert!(resolved.contains("stop_depth = 300.0"), "{resolved}");

    // the resolved dump is itself a valid config
    let o = profilersim(&["validate", "--scenario", "out/shallow.resolved.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), resolved);
}

#[test]
fn broken_file_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[sim]\nt_s = = 1\n").unwrap();
    let o = profilersim(&["validate", "--scenario", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        [
            "run",
            "--scenario",
            "fig4",
            "--seed",
            "5",
            "--set",
            "sensors.density_noise_sd=0.001",
            "--out",
            out,
        ]
    };
    for out in ["a", "b"] {
        let o = profilersim(&args(out), dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a/fig4.trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b/fig4.trace.csv")).unwrap();
    assert!(a == b);
}

#[test]
fn list_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = profilersim(&["list-scenarios"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 4);

    let o = profilersim(&["run", "--scenario", "neutral_rest", "--json", "--out", "j"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["records"], 6001);
}
