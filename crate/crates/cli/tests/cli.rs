use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use corevad_core::PipelineConfig;

fn corevad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corevad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_into(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data");
    fs::write(
        dir.join("spec.toml"),
        "num_videos = 3\nmin_frames = 300\nmax_frames = 500\nnormal_video_fraction = 0.0\n",
    )
    .unwrap();
    let out = corevad(&[
        "synth",
        "--spec",
        p(&dir.join("spec.toml")),
        "--seed",
        "5",
        "--out",
        p(&data),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

fn run_args<'a>(data: &'a Path, out: &'a Path) -> Vec<String> {
    vec![
        "run".into(),
        "--responses".into(),
        p(&data.join("responses.jsonl")).into(),
        "--embeddings".into(),
        p(&data.join("embeddings")).into(),
        "--out".into(),
        p(out).into(),
    ]
}

fn run(args: &[String]) -> Output {
    corevad(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn run_then_eval_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_into(dir.path());
    let out = dir.path().join("out");
    let mut args = run_args(&data, &out);
    args.extend([
        "--gt".into(),
        p(&data.join("ground_truth.jsonl")).into(),
        "--plots".into(),
    ]);
    let status = run(&args);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("plots/synth_0.svg").exists());

    let eval = corevad(&[
        "eval",
        "--scores",
        p(&out.join("scores")),
        "--gt",
        p(&data.join("ground_truth.jsonl")),
    ]);
    assert!(eval.status.success());
    let from_eval: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    let from_run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(from_eval, from_run);
}

#[test]
fn run_without_ground_truth_skips_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_into(dir.path());
    let out = dir.path().join("out");
    let status = run(&run_args(&data, &out));
    assert!(status.status.success());
    assert!(!out.join("metrics.json").exists());
    assert_eq!(fs::read_dir(out.join("scores")).unwrap().count(), 3);
}

#[test]
fn overrides_land_in_the_config_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_into(dir.path());
    let out = dir.path().join("out");
    fs::write(dir.path().join("c.toml"), "[refine]\ntau = 0.2\n").unwrap();
    let mut args = run_args(&data, &out);
    args.extend(
        [
            "--config",
            p(&dir.path().join("c.toml")),
            "--set",
            "clean.l=3",
            "--set",
            "refine.toggles.smoothing=false",
        ]
        .map(String::from),
    );
    assert!(run(&args).status.success());
    let snapshot = PipelineConfig::load(out.join("config.toml")).unwrap();
    assert_eq!(snapshot.refine.tau, 0.2);
    assert_eq!(snapshot.clean.l, 3);
    assert!(!snapshot.refine.toggles.smoothing);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_into(dir.path());

    let missing = corevad(&[
        "run",
        "--responses",
        "no/such/file.jsonl",
        "--embeddings",
        p(&data.join("embeddings")),
    ]);
    assert_eq!(missing.status.code(), Some(2));

    let mut args = run_args(&data, &dir.path().join("out"));
    args.extend(["--set".into(), "d=16".into()]);
    assert_eq!(run(&args).status.code(), Some(1));

    assert_eq!(corevad(&["run", "--set", "refine.tau=0"]).status.code(), Some(1));
    assert_eq!(corevad(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(corevad(&["--help"]).status.code(), Some(0));

    let scores = dir.path().join("cam.csv");
    fs::write(&scores, "frame_index,score\n1,0.1\n2,0.9\n3,0.4\n").unwrap();
    let gt = dir.path().join("gt.jsonl");
    fs::write(&gt, r#"{"video_id":"cam","num_frames":3,"anomalous_ranges":[]}"#).unwrap();
    assert_eq!(
        corevad(&["eval", "--scores", p(&scores), "--gt", p(&gt)]).status.code(),
        Some(3)
    );
}

#[test]
fn plot_writes_csv_svg_and_notes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_into(dir.path());
    let out = dir.path().join("out");
    assert!(run(&run_args(&data, &out)).status.success());
    let plots = dir.path().join("plots");
    let status = corevad(&[
        "plot",
        "--scores",
        p(&out.join("scores/synth_1.csv")),
        "--gt",
        p(&data.join("ground_truth.jsonl")),
        "--responses",
        p(&data.join("responses.jsonl")),
        "--out",
        p(&plots),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let svg = fs::read_to_string(plots.join("synth_1.svg")).unwrap();
    assert!(svg.contains(r#"class="gt""#));
    let notes: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(plots.join("synth_1.segments.json")).unwrap()).unwrap();
    assert!(!notes.as_array().unwrap().is_empty());
    let csv = fs::read_to_string(plots.join("synth_1.csv")).unwrap();
    assert!(csv.starts_with("frame_index,score,label\n"));
}

#[test]
fn ablate_reports_every_row() {
    let out = corevad(&["ablate", "--plan", "cleaning_table", "--seeds", "2", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let labels: Vec<&str> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["none", "global", "lrc"]);

    let table = corevad(&["ablate", "--plan", "component_table", "--seeds", "1"]);
    let text = String::from_utf8(table.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("context+smoothing+position"));

    assert_eq!(corevad(&["ablate", "--plan", "everything"]).status.code(), Some(1));
}

#[test]
fn ablate_on_configured_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_into(dir.path());
    let out = corevad(&[
        "ablate",
        "--plan",
        "cleaning_table",
        "--json",
        "--set",
        &format!("paths.responses={:?}", p(&data.join("responses.jsonl"))),
        "--set",
        &format!("paths.embeddings={:?}", p(&data.join("embeddings"))),
        "--set",
        &format!("paths.ground_truth={:?}", p(&data.join("ground_truth.jsonl"))),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    assert!(report["rows"][0]["config"].is_object());
}
