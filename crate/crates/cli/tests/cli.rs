//! End-to-end runs of the `csd` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn csd(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csd")).args(args).env("CSD_OUTPUT_ROOT", out_root).output().expect("binary runs")
}

fn toy_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.toml")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn smoke_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config();
    let o = csd(
        &["optimize", "--config", cfg.to_str().unwrap(), "--set", "csd.total=100", "--set", "run.snapshot_every=50"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("toy");
    for f in ["metrics.jsonl", "timing.jsonl", "cloud.ply", "adapter.bin", "config.resolved.toml"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    for az in ["000", "090", "180", "270"] {
        assert!(dir.join(format!("snapshots/000100_az{az}.png")).is_file());
    }
    let metrics = std::fs::read_to_string(dir.join("metrics.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = metrics.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 100);
    assert_eq!(lines[99]["iter"], 100);
    assert!(lines.iter().all(|l| l.get("wall_ms").is_none()));

    let cloud = dir.join("cloud.ply");
    let png = tmp.path().join("view.png");
    let o = csd(&["render", "--cloud", cloud.to_str().unwrap(), "--azimuth", "-90", "--size", "24", "--out", png.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let img = csd::png_io::read_png(&png).unwrap();
    assert_eq!((img.width, img.height), (24, 24));

    let o = csd(&["extract-mesh", "--cloud", cloud.to_str().unwrap(), "--threshold", "1e6"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no occupied voxels at threshold"));
}

#[test]
fn resolved_config_records_defaults_and_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let o = csd(
        &["optimize", "--set", "csd.total=20", "--set", "init.count=16", "--set", "resolution.base=16", "--set", "resolution.cap=16",
          "--set", "resolution.milestones=[]", "--set", "adapter.grid=16", "--set", "run.snapshot_every=0", "--threads", "1",
          "--out", first.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dump = first.join("config.resolved.toml");
    let text = std::fs::read_to_string(&dump).unwrap();
    let parsed: toml::Table = text.parse().unwrap();
    assert_eq!(parsed["csd"]["lambda"].as_float(), Some(0.5));
    let second = tmp.path().join("second");
    let o = csd(&["optimize", "--config", dump.to_str().unwrap(), "--threads", "1", "--out", second.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.jsonl", "cloud.ply", "adapter.bin", "config.resolved.toml"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    for (set, field) in [
        ("csd.lambda=abc", "csd.lambda"),
        ("csd.lambda=3.0", "csd"),
        ("csd.nosuch=1", "csd"),
        ("rates.decay_factor=0", "rates"),
        ("init.count=0", "init.count"),
    ] {
        let o = csd(&["optimize", "--set", set], tmp.path());
        assert_eq!(code(&o), 2, "{set}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(field), "{set}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let missing = tmp.path().join("missing.toml");
    assert_eq!(code(&csd(&["optimize", "--config", missing.to_str().unwrap()], tmp.path())), 1);
    assert_eq!(code(&csd(&["optimize", "--set", "nodot"], tmp.path())), 2);
    assert_eq!(code(&csd(&["frobnicate"], tmp.path())), 2);
    assert_eq!(code(&csd(&["--help"], tmp.path())), 0);
}

#[test]
fn verify_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = csd(&["verify", "kl-identity"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS kl-identity/decomposition-gap"));
    assert_eq!(code(&csd(&["verify", "render-oracle"], tmp.path())), 0);
    assert_eq!(code(&csd(&["verify", "nosuch"], tmp.path())), 2);
}

#[test]
fn extract_mesh_writes_both_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let cloud = csd::toys::reference_scene();
    let path = tmp.path().join("scene.ply");
    csd::ply::write_cloud(&path, &cloud).unwrap();
    for format in ["obj", "ply"] {
        let out = tmp.path().join(format!("mesh.{format}"));
        let o = csd(
            &["extract-mesh", "--cloud", path.to_str().unwrap(), "--format", format, "--out", out.to_str().unwrap(),
              "--set", "mesh.resolution=32", "--set", "mesh.tet_resolution=32", "--set", "mesh.fit_iterations=20"],
            tmp.path(),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let mesh = if format == "obj" { csd::obj::read_obj(&out).unwrap() } else { csd::ply::read_mesh(&out).unwrap() };
        assert!(!mesh.faces.is_empty());
        assert!(mesh.is_watertight());
        assert!(mesh.colors.is_some());
    }
}
