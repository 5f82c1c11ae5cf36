//! End-to-end checks of the command-line driver.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use extent_cbf::sdp::{write_dump, PsdBlock, SdpProblem};
use extent_cbf::sim::parse_trajectory_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_extent-cbf"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (
        status.code().unwrap_or(-1),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

#[test]
fn validate_accepts_shipped_scenarios() {
    let mut cmd = bin();
    cmd.arg("validate");
    for n in ["cs1_none", "cs1_zcbf", "cs1_sos", "cs2_sampled200", "example1_4pt", "example1_2pt"] {
        cmd.arg(scenario(n));
    }
    let (code, out, err) = run(&mut cmd);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().filter(|l| l.ends_with(": ok")).count(), 6);
}

#[test]
fn validate_reports_bad_config_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("cs1_sos")).unwrap().replace("dt = 0.01", "dt = -1.0");
    std::fs::write(&p, text).unwrap();
    let (code, _, err) = run(bin().arg("validate").arg(&p));
    assert_eq!(code, 2);
    assert!(err.contains("dt must be positive"), "{err}");

    std::fs::write(&p, "name = \"x\"\nbogus = 1\n").unwrap();
    let (code, _, err) = run(bin().arg("validate").arg(&p));
    assert_eq!(code, 2, "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let (code, _, err) = run(bin().arg("validate").arg("/nonexistent/scenario.toml"));
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("/nonexistent/scenario.toml"));
}

#[test]
fn run_with_overrides_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(bin()
        .args(["run", "--horizon", "0.2", "--dt", "0.02", "--seed", "9", "--out-dir"])
        .arg(dir.path())
        .arg(scenario("cs2_sampled200")));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("cs2_sampled200: 10 steps"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("cs2_sampled200.csv")).unwrap();
    let traj = parse_trajectory_csv(&csv).unwrap();
    assert_eq!(traj.steps.len(), 10);
    assert!((traj.steps[1].t - 0.02).abs() < 1e-12);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cs2_sampled200.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 10);
    assert!(std::fs::read_to_string(dir.path().join("cs2_sampled200.svg")).unwrap().contains("id=\"path\""));
}

#[test]
fn infeasible_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("push.toml");
    let text = std::fs::read_to_string(scenario("example1_2pt"))
        .unwrap()
        .replace("kind = \"go_to_goal\"\ngoal = [-8.6, 3.0]", "kind = \"constant\"\ninput = [1.0, 0.0]")
        .replace("initial_state = [-12.0, -3.0]", "initial_state = [-12.0, 0.0]");
    std::fs::write(&p, text).unwrap();
    let (code, out, err) = run(bin().arg("run").arg("--out-dir").arg(dir.path()).arg(&p));
    assert_eq!(code, 3, "{out}{err}");
    let csv = std::fs::read_to_string(dir.path().join("example1_2pt.csv")).unwrap();
    let last = parse_trajectory_csv(&csv).unwrap().steps.pop().unwrap();
    assert_eq!(last.status.as_str(), "infeasible");
    assert!(err.contains("halted at t ="), "{err}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("example1_2pt.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["halt"]["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn example1_table_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(bin().arg("example1").arg("--out-dir").arg(dir.path()));
    assert_eq!(code, 0, "{out}{err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("example1.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn plot_renders_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(bin()
        .args(["run", "--horizon", "0.1", "--out-dir"])
        .arg(dir.path())
        .arg(scenario("example1_4pt")));
    assert_eq!(code, 0, "{err}");
    let plots = dir.path().join("plots");
    let (code, out, err) = run(bin()
        .arg("plot")
        .arg(dir.path().join("example1_4pt.csv"))
        .arg("--scenario")
        .arg(scenario("example1_4pt"))
        .arg("--out-dir")
        .arg(&plots));
    assert_eq!(code, 0, "{err}");
    assert!(out.trim_end().ends_with("example1_4pt.svg"));
    let svg = std::fs::read_to_string(plots.join("example1_4pt.svg")).unwrap();
    assert!(svg.contains("id=\"safe-set\"") && svg.contains("class=\"extent\""));
}

#[test]
fn sdp_dump_is_solved() {
    let mut p = SdpProblem::new(1);
    p.c[0] = 1.0;
    let mut blk = PsdBlock::new(2);
    blk.add_entry(Some(0), 0, 0, 1.0);
    blk.add_entry(Some(0), 1, 1, 1.0);
    blk.add_entry(None, 0, 1, 1.0);
    p.add_block(blk);
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("p.sdp");
    std::fs::write(&f, write_dump(&p)).unwrap();
    let (code, out, err) = run(bin().arg("sdp").arg(&f));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("status Optimal"), "{out}");
    let obj: f64 = out.lines().find_map(|l| l.strip_prefix("objective ")).unwrap().parse().unwrap();
    assert!((obj - 1.0).abs() < 1e-6);
}
