mod common;

use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::process::{Command, Stdio};

use common::{dir_bytes, Dataset};
use scribble_cli::{
    run_bench, run_render, run_validate, BenchOptions, OutputFormat, RenderOptions,
};
use scribble_core::model::{
    BindingParams, EffectParams, EffectSpec, FrameSize, Point2, Scene, SketchElement, Stroke,
};
use scribble_core::scene_io::save_scene;
use scribble_core::session::protocol::{
    read_message, write_json, ClientMessage, Message, ServerMessage,
};
use scribble_core::synth::{teaser_scene, throughput_scene, SyntheticVideo};
use serde_json::Value;

const SMALL: FrameSize = FrameSize {
    width: 160,
    height: 120,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scribble"))
}

fn last_json_line(bytes: &[u8]) -> Value {
    let text = String::from_utf8_lossy(bytes);
    serde_json::from_str(text.lines().last().expect("some output")).unwrap()
}

fn bound_sketch(video: &SyntheticVideo) -> Scene {
    let mut scene = Scene::empty(video.size, 3);
    let c = video.ball_center(0);
    scene.elements.push(SketchElement {
        id: "halo".into(),
        strokes: vec![Stroke {
            points: vec![c + Point2::new(-10.0, -20.0), c + Point2::new(10.0, -20.0)],
            style: Default::default(),
        }],
        local_origin: c,
    });
    scene.trackers.push(video.ball_tracker("ball"));
    scene.effects.push(EffectSpec {
        id: "bind".into(),
        element_ids: vec!["halo".into()],
        tracker_ids: vec!["ball".into()],
        params: EffectParams::Binding(BindingParams::default()),
    });
    scene
}

#[test]
fn render_writes_one_overlay_per_frame_deterministically() {
    let data = Dataset::new(SMALL, 24, teaser_scene);
    let mut opts = RenderOptions::new(&data.scene, &data.frames, data.out("a"));
    opts.pose = Some(data.pose.clone());
    opts.masks = Some(data.masks.clone());
    opts.format = OutputFormat::Both;
    let mut progress = Vec::new();
    let report = run_render(&opts, &mut progress).unwrap();
    assert_eq!(report.frames, 24);
    assert_eq!(report.effects.values().sum::<usize>(), 6);
    let first = dir_bytes(&data.out("a"));
    assert_eq!(first.len(), 48);
    assert!(first.contains_key("overlay_000023.svg") && first.contains_key("composite_000000.png"));

    let lines: Vec<Value> = String::from_utf8(progress)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.last().unwrap()["frames_done"], 24);
    assert!(lines.iter().all(|l| l["type"] == "progress"));

    run_render(&opts, &mut std::io::sink()).unwrap();
    assert_eq!(dir_bytes(&data.out("a")), first);
}

#[test]
fn empty_scene_gives_empty_overlays() {
    let data = Dataset::new(FrameSize::new(48, 32), 10, |v| Scene::empty(v.size, 0));
    run_render(
        &RenderOptions::new(&data.scene, &data.frames, data.out("o")),
        &mut std::io::sink(),
    )
    .unwrap();
    let files = dir_bytes(&data.out("o"));
    assert_eq!(files.len(), 10);
    for svg in files.values() {
        let svg = std::str::from_utf8(svg).unwrap();
        assert!(svg.contains("<svg ") && !svg.contains("<path"));
    }
}

#[test]
fn missing_side_inputs_are_named() {
    let data = Dataset::new(SMALL, 3, teaser_scene);
    let mut opts = RenderOptions::new(&data.scene, &data.frames, data.out("o"));
    let err = run_render(&opts, &mut std::io::sink()).unwrap_err();
    assert_eq!((err.code(), err.exit_code()), ("pose-required", 1));
    opts.pose = Some(data.pose.clone());
    assert_eq!(
        run_render(&opts, &mut std::io::sink()).unwrap_err().code(),
        "masks-required"
    );

    let wrong = Dataset::new(FrameSize::new(64, 48), 3, |_| Scene::empty(SMALL, 0));
    let err = run_render(
        &RenderOptions::new(&wrong.scene, &wrong.frames, wrong.out("o")),
        &mut std::io::sink(),
    );
    assert_eq!(err.unwrap_err().code(), "size-mismatch(0)");
}

#[test]
fn seed_override_changes_only_random_effects() {
    let data = Dataset::new(SMALL, 12, teaser_scene);
    let mut opts = RenderOptions::new(&data.scene, &data.frames, data.out("a"));
    opts.pose = Some(data.pose.clone());
    opts.masks = Some(data.masks.clone());
    run_render(&opts, &mut std::io::sink()).unwrap();
    opts.out = data.out("b");
    opts.seed_override = Some(99);
    assert_eq!(run_render(&opts, &mut std::io::sink()).unwrap().seed, 99);
    assert_ne!(dir_bytes(&data.out("a")), dir_bytes(&data.out("b")));
}

#[test]
fn bench_smoke_and_determinism() {
    let data = Dataset::new(SMALL, 1, bound_sketch);
    let opts = BenchOptions {
        scene: Some(data.scene.clone()),
        count: 600,
        ..BenchOptions::default()
    };
    let a = run_bench(&opts).unwrap();
    assert_eq!((a.frames, a.width, a.height), (600, 160, 120));
    assert!(a.mean_fps > 0.0 && a.min_fps > 0.0 && a.mean_fps_with_svg <= a.mean_fps);
    let b = run_bench(&opts).unwrap();
    assert_eq!(a.digest, b.digest);
}

#[test]
fn bench_breaks_time_down_by_effect_kind() {
    let report = run_bench(&BenchOptions {
        count: 120,
        size: Some(SMALL),
        ..BenchOptions::default()
    })
    .unwrap();
    assert!(
        report.effects.values().all(|&n| n == 1),
        "{:?}",
        report.effects
    );
    let kinds: Vec<&str> = report.effect_ms.keys().map(String::as_str).collect();
    assert_eq!(
        kinds,
        [
            "binding",
            "contour",
            "flip_book",
            "particles",
            "trajectory",
            "trigger"
        ]
    );
    let parts = report.tracking_ms + report.effect_ms.values().sum::<f64>() + report.resolve_ms;
    assert!((parts - report.stages_ms).abs() < 1e-6);
    let gap = (report.pipeline_ms - report.stages_ms) / report.pipeline_ms;
    assert!(
        (0.0..0.01).contains(&gap),
        "stages cover {:.3}% of the pipeline",
        100.0 * (1.0 - gap)
    );
}

#[test]
fn validate_reports_counts_and_diagnostics() {
    let data = Dataset::new(SMALL, 1, throughput_scene);
    let report = run_validate(&data.scene).unwrap();
    assert_eq!((report.trackers, report.effects["trigger"]), (2, 1));

    let bad = data.out("bad.json");
    let mut scene = bound_sketch(&data.video);
    scene.effects[0].tracker_ids.clear();
    let text = serde_json::json!({ "version": 1, "scene": scene }).to_string();
    std::fs::write(&bad, text).unwrap();
    let err = run_validate(&bad).unwrap_err();
    assert_eq!(err.code(), "binding-arity");
    assert_eq!(err.diagnostics().len(), 1);
}

#[test]
fn binary_exit_codes_and_json_lines() {
    let data = Dataset::new(SMALL, 4, teaser_scene);
    let ok = bin()
        .args(["validate", "--scene"])
        .arg(&data.scene)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let record: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(record["type"], "validate");

    let missing = bin()
        .args(["validate", "--scene", "/nonexistent/scene.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let err = last_json_line(&missing.stderr);
    assert_eq!(
        (err["type"].as_str(), err["code"].as_str()),
        (Some("error"), Some("io"))
    );

    let out = data.out("rendered");
    let run = bin()
        .args(["render", "--format", "svg", "--workers", "2", "--scene"])
        .arg(&data.scene)
        .arg("--frames")
        .arg(&data.frames)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(1));
    assert_eq!(last_json_line(&run.stderr)["code"], "pose-required");

    let run = bin()
        .args(["render", "--workers", "2", "--scene"])
        .arg(&data.scene)
        .args([
            "--frames".as_ref(),
            data.frames.as_os_str(),
            "--pose".as_ref(),
            data.pose.as_os_str(),
        ])
        .args([
            "--masks".as_ref(),
            data.masks.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let records: Vec<Value> = String::from_utf8(run.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let report = records.last().unwrap();
    assert_eq!(
        (report["type"].as_str(), report["frames"].as_u64()),
        (Some("render"), Some(4))
    );
    assert_eq!(report["workers"], 2);
    assert_eq!(dir_bytes(&out).len(), 4);

    let usage = bin().args(["render", "--bogus"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
}

#[test]
fn serve_binary_accepts_a_client() {
    let mut child = bin()
        .args([
            "serve",
            "--addr",
            "127.0.0.1:0",
            "--once",
            "--tick-ms",
            "0",
            "--synthetic-frames",
            "5",
            "--size",
            "64x48",
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let listening: Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!(listening["type"], "listening");
    let stream = TcpStream::connect(listening["addr"].as_str().unwrap()).unwrap();
    let mut out = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    let hello: Option<Message<ServerMessage>> = read_message(&mut reader).unwrap();
    assert!(matches!(
        hello,
        Some(Message::Json(ServerMessage::Hello { protocol: 1, .. }))
    ));
    write_json(&mut out, &ClientMessage::Hello { protocol: 1 }).unwrap();
    assert!(matches!(
        read_message(&mut reader).unwrap(),
        Some(Message::Json(ServerMessage::Overlay { frame: 0, .. }))
    ));
    let resume = ClientMessage::Command {
        command: scribble_core::Command::ResumeVideo,
    };
    write_json(&mut out, &resume).unwrap();
    assert!(matches!(
        read_message(&mut reader).unwrap(),
        Some(Message::Json(ServerMessage::Event { .. }))
    ));
    assert!(matches!(
        read_message(&mut reader).unwrap(),
        Some(Message::Json(ServerMessage::Overlay { .. }))
    ));
    write_json(&mut out, &ClientMessage::Step).unwrap();
    assert!(matches!(
        read_message(&mut reader).unwrap(),
        Some(Message::Json(ServerMessage::Overlay { frame: 0, .. }))
    ));
    drop(reader);
    drop(out);
    let done: Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!(done["type"], "client_done");
    assert_eq!(done["next_frame"], 1);
    assert!(child.wait().unwrap().success());
}

#[test]
fn scene_files_written_by_tests_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    save_scene(&path, &teaser_scene(&SyntheticVideo::new(SMALL))).unwrap();
    assert_eq!(run_validate(&path).unwrap().elements, 8);
}
