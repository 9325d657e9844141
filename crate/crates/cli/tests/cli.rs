use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_explore-bench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, count: &str) {
    ok(&["gen-scenes", "--out", s(dir), "--count", count, "--min-area", "30", "--max-area", "64", "-s", "5"]);
}

fn first_scene(dir: &Path) -> std::path::PathBuf {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    v.sort();
    v.remove(0)
}

#[test]
fn gen_scenes_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    gen(a.path(), "2");
    gen(b.path(), "2");
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap());
    }
}

#[test]
fn ablation_outputs_are_byte_identical() {
    let scenes = tempfile::tempdir().unwrap();
    gen(scenes.path(), "2");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let common = ["ablation", "--scenes-dir", s(scenes.path()), "-s", "0,1", "--duration", "20"];
    let mut args_a = common.to_vec();
    args_a.extend(["--out", s(a.path())]);
    let mut args_b = common.to_vec();
    args_b.extend(["--out", s(b.path()), "--sequential"]);
    let out = ok(&args_a);
    ok(&args_b);
    for f in ["records.csv", "report.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.path().join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2 * 2);
    let table = String::from_utf8(out.stdout).unwrap();
    for name in ["no", "bump_detection", "obstacle_expanding", "orientation_coef"] {
        assert!(table.lines().any(|l| l.starts_with(name)), "{table}");
    }
}

#[test]
fn run_writes_records_renders_and_traces() {
    let scenes = tempfile::tempdir().unwrap();
    gen(scenes.path(), "1");
    let scene = first_scene(scenes.path());
    let out = tempfile::tempdir().unwrap();
    ok(&[
        "run", "--scene", s(&scene), "-s", "3", "--duration", "10", "--bump-detector", "--inflate",
        "--orientation-coef", "0.5", "--out", s(out.path()), "--trace",
    ]);
    let csv = fs::read_to_string(out.path().join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let mut files: Vec<String> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files.len(), 4, "{files:?}");
    let trace = files.iter().find(|f| f.ends_with(".jsonl")).unwrap();
    let text = fs::read_to_string(out.path().join(trace)).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("event").is_some());
    }
    let ppm = files.iter().find(|f| f.ends_with(".ppm")).unwrap();
    assert!(fs::read(out.path().join(ppm)).unwrap().starts_with(b"P6\n"));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let scenes = tempfile::tempdir().unwrap();
    gen(scenes.path(), "1");
    let scene = first_scene(scenes.path());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let json = serde_json::json!({
        "name": "from_file",
        "scene": scene,
        "duration": 30.0,
        "checkpoint_times": [10.0, 20.0, 30.0],
        "seeds": [7, 8]
    });
    fs::write(&cfg, json.to_string()).unwrap();
    let out = dir.path().join("out");
    ok(&["--config", s(&cfg), "run", "-s", "9", "--duration", "20", "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("records.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.ends_with("abs_m2_10,abs_m2_20"), "{header}");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("from_file,"));
    assert_eq!(rows[0].split(',').nth(4), Some("9"));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.pgm");
    let out = run(&["run", "--scene", s(&missing)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.pgm"));
    let out = run(&["ablation", "--scenes-dir", s(dir.path())]);
    assert!(!out.status.success());
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"duration": -1}"#).unwrap();
    assert!(!run(&["--config", s(&cfg), "ablation"]).status.success());
    fs::write(&cfg, r#"{"no_such_field": 1}"#).unwrap();
    assert!(!run(&["--config", s(&cfg), "ablation"]).status.success());
    assert!(!run(&["run", "--alpha", "0"]).status.success());
}

#[test]
fn render_draws_scene_and_plain_map() {
    let scenes = tempfile::tempdir().unwrap();
    gen(scenes.path(), "1");
    let scene = first_scene(scenes.path());
    let out = tempfile::tempdir().unwrap();
    let (a, b) = (out.path().join("a.ppm"), out.path().join("b.ppm"));
    ok(&["render", "--scene", s(&scene), "--out", s(&a)]);
    ok(&["render", "--scene", s(&scene), "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    fs::remove_file(scene.with_extension("json")).unwrap();
    ok(&["render", "--scene", s(&scene), "--out", s(&b)]);
    let (ra, rb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ra.len(), rb.len());
    assert_ne!(ra, rb);
}
