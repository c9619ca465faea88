//! End-to-end checks of the command-line surface: exit codes, output shapes,
//! and the config round-trip through the manifest echo.

use std::path::{Path, PathBuf};
use std::process::Command;

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_vpfp-lab")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vpfp_cli_{}_{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(exe()).args(args).output().expect("spawn");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let (code, _, stderr) = run(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("Usage"), "usage text expected, got: {stderr}");
}

#[test]
fn missing_config_file_exits_2() {
    let (code, _, stderr) = run(&["check", "--config", "/no/such/file.cfg"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("config error"));
}

#[test]
fn malformed_config_and_override_exit_2() {
    let dir = tmp_dir("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "[kernel]\nsign repulsive\n").unwrap();
    let (code, _, stderr) = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("key = value"));

    let (code, _, _) = run(&["check", "--override", "nonsense"]);
    assert_eq!(code, 2);
    let (code, _, stderr) = run(&["check", "--override", "kernel.colour=blue"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown config key"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn boundary_mass_breach_exits_3() {
    let dir = tmp_dir("breach");
    let (code, _, stderr) = run(&[
        "pde",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
        "--override",
        "meanfield.x_min=-2",
        "--override",
        "meanfield.x_max=2",
        "--override",
        "meanfield.v_min=-2",
        "--override",
        "meanfield.v_max=2",
    ]);
    assert_eq!(code, 3, "stderr: {stderr}");
    assert!(stderr.contains("boundary mass"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn pde_snapshots_have_nx_nv_rows() {
    let dir = tmp_dir("pde");
    let (code, _, _) = run(&[
        "pde",
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
        "--override",
        "meanfield.nx=24",
        "--override",
        "meanfield.nv=16",
        "--override",
        "experiments.t=0.1",
        "--override",
        "meanfield.dt=0.01",
        "--override",
        "meanfield.snapshot_stride=5",
    ]);
    assert_eq!(code, 0);
    let body = std::fs::read_to_string(dir.join("pde_snapshot_001.csv")).unwrap();
    let rows: Vec<&str> = body.trim_end().split("\r\n").collect();
    assert_eq!(rows[0], "x,v,f");
    assert_eq!(rows.len() - 1, 24 * 16, "one row per grid cell");
    // Field dump shape.
    let field = std::fs::read_to_string(dir.join("pde_field_final.csv")).unwrap();
    assert!(field.starts_with("x,F\r\n"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn manifest_config_echo_reruns_to_identical_outputs() {
    let dir_a = tmp_dir("echo_a");
    let (code, _, _) = run(&["simulate", "--seed", "99", "--out", dir_a.to_str().unwrap()]);
    assert_eq!(code, 0);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir_a.join("manifest.json")).unwrap()).unwrap();

    // Reconstruct a config file from the echoed key-value map and re-run.
    let mut text = String::new();
    let mut last_section = String::new();
    for (key, value) in manifest["config"].as_object().unwrap() {
        let (section, name) = key.split_once('.').unwrap();
        if section != last_section {
            text.push_str(&format!("[{section}]\n"));
            last_section = section.to_string();
        }
        text.push_str(&format!("{name} = {}\n", value.as_str().unwrap()));
    }
    let dir_b = tmp_dir("echo_b");
    let cfg_path = dir_b.join("echo.cfg");
    std::fs::write(&cfg_path, &text).unwrap();
    let (code, _, stderr) = run(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        dir_b.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");

    let a = std::fs::read(dir_a.join("trajectory.csv")).unwrap();
    let b = std::fs::read(dir_b.join("trajectory.csv")).unwrap();
    assert_eq!(a, b, "echoed config must reproduce the trajectory bytes");
    std::fs::remove_dir_all(&dir_a).ok();
    std::fs::remove_dir_all(&dir_b).ok();
}

#[test]
fn no_partial_outputs_remain_after_abort() {
    let dir = tmp_dir("abort");
    let (code, _, _) = run(&[
        "pde",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
        "--override",
        "meanfield.v_min=-2",
        "--override",
        "meanfield.v_max=2",
        "--override",
        "meanfield.x_min=-2",
        "--override",
        "meanfield.x_max=2",
    ]);
    assert_eq!(code, 3);
    // Atomic placement: no .tmp litter.
    if let Ok(entries) = std::fs::read_dir(&dir) {
        for e in entries.flatten() {
            let name = e.file_name();
            assert!(
                !name.to_string_lossy().ends_with(".tmp"),
                "partial file left behind: {name:?}"
            );
        }
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tmp_dir("seed");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, "[run]\nseed = 1\n").unwrap();
    let (code, _, _) = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let manifest: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.join("out").join("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["run.seed"], "7");
    assert!(Path::new(manifest["outputs"][0].as_str().unwrap()).exists());
    std::fs::remove_dir_all(&dir).ok();
}
