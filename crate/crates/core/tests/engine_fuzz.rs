use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scribble_core::engine::{Engine, FrameInput};
use scribble_core::model::{
    BindingParams, EffectParams, EffectSpec, FrameSize, Point2, Scene, SketchElement, Stroke,
    StrokeStyle, TrackerKind, TrackerSpec,
};
use scribble_core::synth::{random_scene, SyntheticVideo};
use scribble_core::tracking::{Keypoint, PoseFrame};
use scribble_core::{emit_svg, FrameOverlay};

fn run(scene: &Scene, video: &SyntheticVideo, frames: u64) -> Vec<FrameOverlay> {
    let mut engine = Engine::new(scene.clone(), 30.0);
    (0..frames)
        .map(|f| {
            let (image, pose, mask) = (video.frame(f), video.pose(f), video.body_mask(f));
            let input = FrameInput {
                image: &image,
                pose: Some(&pose),
                body_mask: Some(&mask),
            };
            engine
                .step(f, &input)
                .unwrap_or_else(|e| panic!("frame {f}: {e}"))
        })
        .collect()
}

#[test]
fn random_scenes_run_a_thousand_frames() {
    let size = FrameSize::new(96, 72);
    let video = SyntheticVideo::new(size);
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    for case in 0..20 {
        let scene = random_scene(&mut rng, size);
        let overlays = run(&scene, &video, 1000);
        for (f, overlay) in overlays.iter().enumerate() {
            assert_eq!(overlay.frame_index, f as u64, "case {case}");
            let svg = emit_svg(overlay, size);
            assert!(
                svg.contains("<svg ") && !svg.contains("NaN") && !svg.contains("inf"),
                "case {case} frame {f}"
            );
        }
    }
}

#[test]
fn engine_runs_are_deterministic() {
    let size = FrameSize::new(128, 96);
    let video = SyntheticVideo::new(size);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..5 {
        let scene = random_scene(&mut rng, size);
        assert_eq!(run(&scene, &video, 150), run(&scene, &video, 150));
    }
}

fn pose_at(p: Point2) -> PoseFrame {
    PoseFrame::new(vec![
        Keypoint {
            position: p,
            visible: true
        };
        33
    ])
    .unwrap()
}

#[test]
fn binding_ignores_the_path_taken() {
    let size = FrameSize::new(200, 150);
    let scene = Scene {
        elements: vec![SketchElement {
            id: "mark".into(),
            strokes: vec![Stroke {
                points: vec![
                    Point2::new(40.0, 40.0),
                    Point2::new(60.0, 55.0),
                    Point2::new(80.0, 40.0),
                ],
                style: StrokeStyle::default(),
            }],
            local_origin: Point2::new(60.0, 45.0),
        }],
        trackers: vec![TrackerSpec {
            id: "nose".into(),
            kind: TrackerKind::Keypoint { index: 0 },
        }],
        effects: vec![EffectSpec {
            id: "bind".into(),
            element_ids: vec!["mark".into()],
            tracker_ids: vec!["nose".into()],
            params: EffectParams::Binding(BindingParams {
                anchor: Some(Point2::new(60.0, 60.0)),
            }),
        }],
        ..Scene::empty(size, 0)
    };
    let image = image::RgbImage::new(size.width, size.height);
    let end = Point2::new(131.0, 97.5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut finals = Vec::new();
    for _ in 0..2 {
        let mut engine = Engine::new(scene.clone(), 30.0);
        let n = rng.random_range(5..60);
        let mut path: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.random_range(0.0..200.0), rng.random_range(0.0..150.0)))
            .collect();
        path.push(end);
        let mut last = None;
        for (f, p) in path.iter().enumerate() {
            let pose = pose_at(*p);
            last = Some(
                engine
                    .step(
                        f as u64,
                        &FrameInput {
                            image: &image,
                            pose: Some(&pose),
                            body_mask: None,
                        },
                    )
                    .unwrap(),
            );
        }
        finals.push(emit_svg(&last.unwrap(), size));
    }
    assert!(finals[0].contains("translate(71 37.5)"), "{}", finals[0]);
    assert_eq!(finals[0], finals[1]);
}
