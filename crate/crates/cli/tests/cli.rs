use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn crashscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crashscope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_then_run_with_generated_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = crashscope(&["synth", "--out", s(tmp.path()), "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_toml = tmp.path().join("synth/run.toml");
    assert!(run_toml.is_file());
    assert!(fs::read_to_string(tmp.path().join("synth/scenario.toml"))
        .unwrap()
        .contains("seed = 9"));

    let out = crashscope(&["run", "--config", s(&run_toml)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "report.md",
        "hotspot_cells.geojson",
        "gi_star_idw.asc",
        "temporal_stats.csv",
        "config.toml",
    ] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn individual_stages_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(crashscope(&["synth", "--out", s(tmp.path())]).status.success());
    let events = tmp.path().join("synth/events.csv");
    let boundary = tmp.path().join("synth/boundary.geojson");
    let out_dir = tmp.path().join("res");
    let common = [
        "--input",
        s(&events),
        "--boundary",
        s(&boundary),
        "--out",
        s(&out_dir),
        "--cell-size",
        "400",
        "--band",
        "900",
        "--power",
        "3",
        "--neighbors",
        "8",
    ];
    for stage in ["validate", "temporal", "hotspot", "idw", "report"] {
        let mut args = vec![stage];
        args.extend(common);
        let out = crashscope(&args);
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let echo = fs::read_to_string(out_dir.join("config.toml")).unwrap();
    assert!(echo.contains("cell_size = 400.0") && echo.contains("band = 900.0"));
    assert!(echo.contains("power = 3.0") && echo.contains("neighbors = 8"));
    let asc = fs::read_to_string(out_dir.join("gi_star_idw.asc")).unwrap();
    assert!(asc.contains("cellsize 100\n"));

    let out = crashscope(&[
        "validate",
        "--input",
        s(&events),
        "--out",
        s(&out_dir),
        "--category",
        "pedestrian",
    ]);
    assert!(out.status.success());
    let clean = fs::read_to_string(out_dir.join("clean_events.csv")).unwrap();
    assert!(clean.lines().skip(1).all(|l| l.contains(",Pedestrian,")));
}

#[test]
fn report_without_upstream_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = crashscope(&["report", "--out", s(tmp.path())]);
    assert!(out.status.success());
    let doc = fs::read_to_string(tmp.path().join("report.md")).unwrap();
    assert_eq!(doc.matches("Stage not run").count(), 4);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // usage errors
    assert_eq!(crashscope(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(crashscope(&["validate", "--cell-size", "abc"]).status.code(), Some(1));
    assert_eq!(crashscope(&["--help"]).status.code(), Some(0));
    // config errors
    assert_eq!(crashscope(&["validate", "--out", s(tmp.path())]).status.code(), Some(1));
    let missing = tmp.path().join("missing.csv");
    assert_eq!(
        crashscope(&["validate", "--input", s(&missing), "--out", s(tmp.path())])
            .status
            .code(),
        Some(1)
    );
    let bad_cfg = tmp.path().join("bad.toml");
    fs::write(&bad_cfg, "cell_size = [").unwrap();
    assert_eq!(crashscope(&["run", "--config", s(&bad_cfg)]).status.code(), Some(1));

    // data error: a single event cannot support a hotspot analysis
    let one = tmp.path().join("one.csv");
    fs::write(
        &one,
        "id,timestamp,lon,lat,category,severity\nA,2025-01-01 10:00,55.2,25.2,VehicleObject,High\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("one");
    assert!(crashscope(&["validate", "--input", s(&one), "--out", s(&out_dir)])
        .status
        .success());
    let out = crashscope(&["hotspot", "--input", s(&one), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
