//! Deterministic synthetic inputs: a video of a colored ball moving in front
//! of a swaying figure, the figure's pose track and body masks, demo
//! scenes, and a generator of random valid scenes for fuzzing.
//!
//! Everything here is a pure function of its arguments, so tests, benches
//! and the CLI can regenerate identical inputs without fixture files.

use std::f64::consts::TAU;
use std::io;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::Rng;

use crate::model::{
    BindingParams, ContourMode, ContourParams, ContourSource, EffectParams, EffectSpec,
    FlipBookParams, FrameSize, ParticleParams, Point2, Rgba, Scene, SketchElement, Stroke,
    StrokeStyle, TrackerKind, TrackerSpec, TrajectoryParams, TriggerDirection, TriggerParams,
    KEYPOINT_COUNT,
};
use crate::scene_io::{frame_file_name, PoseTrack};
use crate::session::{Command, TrackPointKind, Transcript};
use crate::tracking::{BinaryMask, ColorWindow, Keypoint, PoseFrame};

pub const LEFT_WRIST: u8 = 15;
pub const RIGHT_WRIST: u8 = 16;

/// Stick-figure keypoints as offsets from the body center, in units of the
/// frame height. Index order follows the common 33-point skeleton.
const SKELETON: [(f64, f64); KEYPOINT_COUNT] = [
    (0.00, -0.27), // nose
    (-0.01, -0.29),
    (-0.02, -0.29),
    (-0.03, -0.29),
    (0.01, -0.29),
    (0.02, -0.29),
    (0.03, -0.29),
    (-0.04, -0.28),
    (0.04, -0.28),
    (-0.01, -0.25),
    (0.01, -0.25),
    (-0.08, -0.17), // left shoulder
    (0.08, -0.17),
    (-0.13, -0.07), // left elbow
    (0.08, -0.08),
    (-0.16, -0.12), // left wrist, replaced by the circling path
    (0.0, -0.12),   // right wrist, beside the left wrist's circle
    (-0.17, -0.11),
    (0.17, 0.04),
    (-0.17, -0.13),
    (0.17, 0.02),
    (-0.16, -0.13),
    (0.16, 0.02),
    (-0.05, 0.08), // left hip
    (0.05, 0.08),
    (-0.06, 0.22),
    (0.06, 0.22),
    (-0.06, 0.34),
    (0.06, 0.34),
    (-0.07, 0.35),
    (0.07, 0.35),
    (-0.04, 0.37),
    (0.04, 0.37),
];

/// A scripted scene: a ball on a Lissajous path and a swaying figure whose
/// left wrist circles near the right one.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub size: FrameSize,
    pub ball_color: [u8; 3],
    pub ball_radius: f64,
    /// Frames per full Lissajous cycle of the ball.
    pub ball_period: f64,
    /// Frames per wrist revolution.
    pub wrist_period: f64,
    /// Amplitude of per-pixel pseudo-random noise added to every channel.
    pub noise: u8,
}

impl SyntheticVideo {
    pub fn new(size: FrameSize) -> Self {
        Self {
            size,
            ball_color: [40, 200, 80],
            ball_radius: 18.0,
            ball_period: 240.0,
            wrist_period: 60.0,
            noise: 0,
        }
    }

    fn w(&self) -> f64 {
        self.size.width as f64
    }

    fn h(&self) -> f64 {
        self.size.height as f64
    }

    pub fn ball_center(&self, frame: u64) -> Point2 {
        let a = TAU * frame as f64 / self.ball_period;
        Point2::new(
            self.w() * (0.5 + 0.32 * a.sin()),
            self.h() * (0.5 + 0.3 * (2.0 * a).sin()),
        )
    }

    pub fn body_center(&self, frame: u64) -> Point2 {
        let a = TAU * frame as f64 / (self.ball_period * 1.5);
        Point2::new(self.w() * (0.5 + 0.05 * a.sin()), self.h() * 0.55)
    }

    /// Center of the left wrist's circle.
    pub fn wrist_circle_center(&self, frame: u64) -> Point2 {
        self.body_center(frame) + Point2::new(-0.1, -0.12) * self.h()
    }

    pub fn wrist_radius(&self) -> f64 {
        0.07 * self.h()
    }

    pub fn left_wrist(&self, frame: u64) -> Point2 {
        let a = TAU * frame as f64 / self.wrist_period;
        self.wrist_circle_center(frame) + Point2::new(a.cos(), a.sin()) * self.wrist_radius()
    }

    pub fn pose(&self, frame: u64) -> PoseFrame {
        let c = self.body_center(frame);
        let keypoints = SKELETON
            .iter()
            .enumerate()
            .map(|(i, &(dx, dy))| {
                let position = if i == LEFT_WRIST as usize {
                    self.left_wrist(frame)
                } else {
                    c + Point2::new(dx, dy) * self.h()
                };
                Keypoint {
                    position,
                    visible: true,
                }
            })
            .collect();
        PoseFrame::new(keypoints).expect("skeleton has 33 points")
    }

    pub fn pose_track(&self, frames: usize, fps: f64) -> PoseTrack {
        PoseTrack {
            fps,
            frames: (0..frames as u64).map(|f| self.pose(f)).collect(),
        }
    }

    /// Head, torso and legs as overlapping ellipses.
    fn body_parts(&self, frame: u64) -> [(Point2, f64, f64); 3] {
        let c = self.body_center(frame);
        let h = self.h();
        [
            (c + Point2::new(0.0, -0.26) * h, 0.055 * h, 0.065 * h),
            (c + Point2::new(0.0, -0.04) * h, 0.1 * h, 0.16 * h),
            (c + Point2::new(0.0, 0.22) * h, 0.07 * h, 0.16 * h),
        ]
    }

    fn in_body(parts: &[(Point2, f64, f64); 3], x: f64, y: f64) -> bool {
        parts.iter().any(|&(c, rx, ry)| {
            let (dx, dy) = ((x - c.x) / rx, (y - c.y) / ry);
            dx * dx + dy * dy <= 1.0
        })
    }

    pub fn body_mask(&self, frame: u64) -> BinaryMask {
        let parts = self.body_parts(frame);
        let (w, h) = (self.size.width, self.size.height);
        let mut bits = vec![false; w as usize * h as usize];
        for y in 0..h {
            for x in 0..w {
                bits[(y * w + x) as usize] = Self::in_body(&parts, x as f64, y as f64);
            }
        }
        BinaryMask::from_bits(w, h, bits)
    }

    pub fn frame(&self, frame: u64) -> RgbImage {
        let (w, h) = (self.size.width, self.size.height);
        let parts = self.body_parts(frame);
        let ball = self.ball_center(frame);
        let r2 = self.ball_radius * self.ball_radius;
        let mut img = RgbImage::new(w, h);
        for (x, y, px) in img.enumerate_pixels_mut() {
            let (fx, fy) = (x as f64, y as f64);
            let d2 = (fx - ball.x).powi(2) + (fy - ball.y).powi(2);
            let base = if d2 <= r2 {
                self.ball_color
            } else if Self::in_body(&parts, fx, fy) {
                [96, 84, 120]
            } else {
                [
                    (30 + x * 60 / w.max(1)) as u8,
                    (36 + y * 50 / h.max(1)) as u8,
                    70,
                ]
            };
            *px = Rgb(self.add_noise(base, frame, x, y));
        }
        img
    }

    fn add_noise(&self, rgb: [u8; 3], frame: u64, x: u32, y: u32) -> [u8; 3] {
        if self.noise == 0 {
            return rgb;
        }
        let mut h = splitmix(frame ^ ((x as u64) << 20) ^ ((y as u64) << 40));
        rgb.map(|c| {
            h = splitmix(h);
            let span = 2 * self.noise as u64 + 1;
            let delta = (h % span) as i16 - self.noise as i16;
            (c as i16 + delta).clamp(0, 255) as u8
        })
    }

    /// Writes frames `0..count` as PNG files into `dir`.
    pub fn write_frames(&self, dir: &Path, count: usize) -> io::Result<()> {
        for i in 0..count {
            self.frame(i as u64)
                .save(dir.join(frame_file_name(i, "png")))
                .map_err(|e| io::Error::other(e.to_string()))?;
        }
        Ok(())
    }

    pub fn ball_tracker(&self, id: &str) -> TrackerSpec {
        TrackerSpec {
            id: id.into(),
            kind: TrackerKind::ColorBlob {
                seed: self.ball_center(0),
                window: ColorWindow::from_sample(self.ball_color),
            },
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn style(color: Rgba, width: f64) -> StrokeStyle {
    StrokeStyle {
        color,
        width,
        opacity: 1.0,
    }
}

fn element(id: &str, strokes: Vec<Vec<Point2>>, st: StrokeStyle) -> SketchElement {
    let strokes: Vec<Stroke> = strokes
        .into_iter()
        .map(|points| Stroke { points, style: st })
        .collect();
    let local_origin = SketchElement::bbox_center(&strokes);
    SketchElement {
        id: id.into(),
        strokes,
        local_origin,
    }
}

fn circle(center: Point2, r: f64, n: usize) -> Vec<Point2> {
    (0..=n)
        .map(|i| {
            center
                + Point2::new(
                    (TAU * i as f64 / n as f64).cos(),
                    (TAU * i as f64 / n as f64).sin(),
                ) * r
        })
        .collect()
}

fn zigzag(base: Point2, width: f64, height: f64, phase: f64) -> Vec<Point2> {
    (0..=6)
        .map(|i| {
            let t = i as f64 / 6.0;
            let wiggle = if i % 2 == 0 {
                0.0
            } else {
                height * (0.6 + 0.4 * phase)
            };
            base + Point2::new((t - 0.5) * width, -wiggle - height * t * (1.0 - t))
        })
        .collect()
}

fn star(center: Point2, r: f64, rays: usize, twist: f64) -> Vec<Vec<Point2>> {
    (0..rays)
        .map(|i| {
            let a = TAU * (i as f64 + twist) / rays as f64;
            let d = Point2::new(a.cos(), a.sin());
            vec![center + d * (0.3 * r), center + d * r]
        })
        .collect()
}

fn effect(id: &str, elements: &[&str], trackers: &[&str], params: EffectParams) -> EffectSpec {
    EffectSpec {
        id: id.into(),
        element_ids: elements.iter().map(|s| s.to_string()).collect(),
        tracker_ids: trackers.iter().map(|s| s.to_string()).collect(),
        params,
    }
}

/// Elements drawn against frame 0 of `video`, shared by the demo scenes.
fn demo_elements(video: &SyntheticVideo) -> Vec<SketchElement> {
    let ball = video.ball_center(0);
    let wrist = video.left_wrist(0);
    let r = video.ball_radius;
    let yellow = Rgba::opaque(255, 214, 10);
    let orange = Rgba::opaque(255, 120, 0);
    let cyan = Rgba::opaque(60, 220, 255);
    vec![
        element("halo", vec![circle(ball, r + 10.0, 24)], style(yellow, 3.0)),
        element(
            "flame-0",
            vec![zigzag(wrist - Point2::new(0.0, 14.0), 22.0, 18.0, 0.0)],
            style(orange, 3.0),
        ),
        element(
            "flame-1",
            vec![zigzag(wrist - Point2::new(0.0, 14.0), 22.0, 18.0, 0.5)],
            style(orange, 3.0),
        ),
        element(
            "flame-2",
            vec![zigzag(wrist - Point2::new(0.0, 14.0), 22.0, 18.0, 1.0)],
            style(orange, 3.0),
        ),
        element("burst-0", star(wrist, 30.0, 8, 0.0), style(yellow, 4.0)),
        element("burst-1", star(wrist, 44.0, 8, 0.5), style(yellow, 4.0)),
        element(
            "drop",
            vec![vec![
                ball + Point2::new(0.0, r + 4.0),
                ball + Point2::new(0.0, r + 14.0),
            ]],
            style(cyan, 2.0),
        ),
        element(
            "ghost",
            vec![circle(ball, r, 16)],
            StrokeStyle {
                color: Rgba::WHITE,
                width: 2.0,
                opacity: 0.8,
            },
        ),
    ]
}

fn demo_effects(
    video: &SyntheticVideo,
    trigger_trackers: [&str; 2],
    contour: ContourParams,
    contour_tracker: &[&str],
) -> Vec<EffectSpec> {
    let ball = video.ball_center(0);
    let r = video.ball_radius;
    vec![
        effect(
            "bind-halo",
            &["halo"],
            &["ball"],
            EffectParams::Binding(BindingParams::default()),
        ),
        effect(
            "flames",
            &["flame-0", "flame-1", "flame-2"],
            &["hand"],
            EffectParams::FlipBook(FlipBookParams {
                fps: 8.0,
                anchor: None,
            }),
        ),
        effect(
            "clap",
            &["burst-0", "burst-1"],
            &trigger_trackers,
            EffectParams::Trigger(TriggerParams {
                threshold: 1.2 * video.wrist_radius(),
                direction: TriggerDirection::Decrease,
                bind_to: Some("hand".into()),
                ..TriggerParams::default()
            }),
        ),
        effect(
            "rain",
            &["drop"],
            &["ball"],
            EffectParams::Particles(ParticleParams {
                emitter: vec![ball + Point2::new(-r, r), ball + Point2::new(r, r)],
                spawn_rate: 12.0,
                speed: 90.0,
                lifetime: 1.5,
                ..ParticleParams::default()
            }),
        ),
        effect(
            "trail",
            &["ghost"],
            &["ball"],
            EffectParams::Trajectory(TrajectoryParams {
                fade: 0.9,
                ..Default::default()
            }),
        ),
        effect(
            "outline",
            &[],
            contour_tracker,
            EffectParams::Contour(contour),
        ),
    ]
}

/// One effect of every kind over the synthetic video: a bound halo, a
/// flip-book flame on the circling wrist, a burst when the wrists meet,
/// rain from the ball, a ghost trail, and an animated body outline.
pub fn teaser_scene(video: &SyntheticVideo) -> Scene {
    let mut scene = Scene::empty(video.size, 2024);
    scene.elements = demo_elements(video);
    scene.trackers = vec![
        video.ball_tracker("ball"),
        TrackerSpec {
            id: "hand".into(),
            kind: TrackerKind::Keypoint { index: LEFT_WRIST },
        },
        TrackerSpec {
            id: "other-hand".into(),
            kind: TrackerKind::Keypoint { index: RIGHT_WRIST },
        },
    ];
    let contour = ContourParams {
        source: ContourSource::Body,
        mode: ContourMode::DEFAULT_ANIMATED,
        fill: Some(Rgba::new(255, 255, 255, 40)),
        ..ContourParams::default()
    };
    scene.effects = demo_effects(video, ["hand", "other-hand"], contour, &[]);
    scene
}

/// One color tracker and one effect of each kind; the contour follows the
/// ball's own color mask so the scene needs no body masks.
pub fn throughput_scene(video: &SyntheticVideo) -> Scene {
    let mut scene = Scene::empty(video.size, 7);
    scene.elements = demo_elements(video);
    scene.trackers = vec![
        video.ball_tracker("ball"),
        TrackerSpec {
            id: "hand".into(),
            kind: TrackerKind::Keypoint { index: LEFT_WRIST },
        },
    ];
    let contour = ContourParams {
        mode: ContourMode::DEFAULT_ANIMATED,
        ..ContourParams::default()
    };
    scene.effects = demo_effects(video, ["ball", "hand"], contour, &["ball"]);
    scene
}

/// `v` rounded to a quarter pixel, which survives six-significant-digit
/// serialization exactly below 2048.
fn quarter<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo..hi) * 4.0).round() / 4.0
}

fn random_point<R: Rng>(rng: &mut R, size: FrameSize) -> Point2 {
    let (w, h) = (size.width as f64, size.height as f64);
    Point2::new(quarter(rng, -32.0, w + 32.0), quarter(rng, -32.0, h + 32.0))
}

fn random_style<R: Rng>(rng: &mut R) -> StrokeStyle {
    StrokeStyle {
        color: Rgba::new(
            rng.random(),
            rng.random(),
            rng.random(),
            rng.random_range(1..=255),
        ),
        width: rng.random_range(1..=48) as f64 / 4.0,
        opacity: rng.random_range(0..=20) as f64 / 20.0,
    }
}

fn pick<'a, R: Rng>(rng: &mut R, ids: &'a [String]) -> &'a String {
    &ids[rng.random_range(0..ids.len())]
}

/// A random scene that passes validation, with coordinates kept on a
/// quarter-pixel grid inside ±2048.
pub fn random_scene<R: Rng>(rng: &mut R, size: FrameSize) -> Scene {
    assert!(size.width > 0 && size.height > 0 && size.width < 2000 && size.height < 2000);
    let mut scene = Scene::empty(size, rng.random());
    let n_elements = rng.random_range(1..=6);
    for i in 0..n_elements {
        let strokes: Vec<Stroke> = (0..rng.random_range(1..=3))
            .map(|_| Stroke {
                points: (0..rng.random_range(2..=8))
                    .map(|_| random_point(rng, size))
                    .collect(),
                style: random_style(rng),
            })
            .collect();
        let local_origin = random_point(rng, size);
        scene.elements.push(SketchElement {
            id: format!("e{i}"),
            strokes,
            local_origin,
        });
    }
    let n_trackers = rng.random_range(1..=4);
    for i in 0..n_trackers {
        let kind = if rng.random_bool(0.5) {
            let seed = Point2::new(
                quarter(rng, 0.0, size.width as f64 - 0.25).max(0.0),
                quarter(rng, 0.0, size.height as f64 - 0.25).max(0.0),
            );
            TrackerKind::ColorBlob {
                seed,
                window: ColorWindow::from_sample([rng.random(), rng.random(), rng.random()]),
            }
        } else {
            TrackerKind::Keypoint {
                index: rng.random_range(0..KEYPOINT_COUNT as u8),
            }
        };
        scene.trackers.push(TrackerSpec {
            id: format!("t{i}"),
            kind,
        });
    }
    let element_ids: Vec<String> = scene.elements.iter().map(|e| e.id.clone()).collect();
    let tracker_ids: Vec<String> = scene.trackers.iter().map(|t| t.id.clone()).collect();
    let color_ids: Vec<String> = scene
        .trackers
        .iter()
        .filter(|t| matches!(t.kind, TrackerKind::ColorBlob { .. }))
        .map(|t| t.id.clone())
        .collect();

    let n_effects = rng.random_range(0..=7);
    let mut non_trigger: Vec<String> = Vec::new();
    for i in 0..n_effects {
        let id = format!("fx{i}");
        let anchor = |rng: &mut R| rng.random_bool(0.3).then(|| random_point(rng, size));
        let (elements, trackers, params) = match rng.random_range(0..6) {
            0 => {
                let k = rng.random_range(1..=element_ids.len());
                let els = (0..k).map(|_| pick(rng, &element_ids).clone()).collect();
                (
                    els,
                    vec![pick(rng, &tracker_ids).clone()],
                    EffectParams::Binding(BindingParams {
                        anchor: anchor(rng),
                    }),
                )
            }
            1 => {
                let k = rng.random_range(1..=4);
                let els = (0..k).map(|_| pick(rng, &element_ids).clone()).collect();
                let trs = if rng.random_bool(0.5) {
                    vec![pick(rng, &tracker_ids).clone()]
                } else {
                    vec![]
                };
                let fps = [4.0, 6.0, 8.0, 12.0, 24.0][rng.random_range(0..5)];
                (
                    els,
                    trs,
                    EffectParams::FlipBook(FlipBookParams {
                        fps,
                        anchor: anchor(rng),
                    }),
                )
            }
            2 => {
                let k = rng.random_range(0..=3);
                let els: Vec<String> = (0..k).map(|_| pick(rng, &element_ids).clone()).collect();
                let mut gates: Vec<String> = non_trigger
                    .iter()
                    .filter(|_| rng.random_bool(0.3))
                    .cloned()
                    .collect();
                if els.is_empty() && gates.is_empty() {
                    gates = non_trigger.first().cloned().into_iter().collect();
                }
                if els.is_empty() && gates.is_empty() {
                    continue;
                }
                let params = TriggerParams {
                    threshold: rng.random_range(1..=800) as f64 / 2.0,
                    direction: if rng.random_bool(0.5) {
                        TriggerDirection::Decrease
                    } else {
                        TriggerDirection::Increase
                    },
                    payload_fps: [4.0, 8.0, 12.0][rng.random_range(0..3)],
                    hold_seconds: rng.random_range(0..=8) as f64 / 4.0,
                    gates,
                    bind_to: rng
                        .random_bool(0.5)
                        .then(|| pick(rng, &tracker_ids).clone()),
                    anchor: anchor(rng),
                };
                let trs = vec![
                    pick(rng, &tracker_ids).clone(),
                    pick(rng, &tracker_ids).clone(),
                ];
                (els, trs, EffectParams::Trigger(params))
            }
            3 => {
                let emitter = (0..rng.random_range(2..=4))
                    .map(|_| random_point(rng, size))
                    .collect();
                let motion_path = rng.random_bool(0.5).then(|| {
                    let start = random_point(rng, size);
                    let mut path = vec![start];
                    for _ in 0..rng.random_range(1..=4) {
                        path.push(random_point(rng, size));
                    }
                    path
                });
                let params = ParticleParams {
                    emitter,
                    spawn_rate: rng.random_range(1..=120) as f64 / 2.0,
                    speed: rng.random_range(1..=400) as f64 / 2.0,
                    motion_path,
                    lifetime: rng.random_range(1..=16) as f64 / 4.0,
                    direction_deg: rng.random_range(0..360) as f64,
                    loop_path: rng.random_bool(0.3),
                    anchor: anchor(rng),
                };
                (
                    vec![pick(rng, &element_ids).clone()],
                    vec![pick(rng, &tracker_ids).clone()],
                    EffectParams::Particles(params),
                )
            }
            4 => {
                let params = TrajectoryParams {
                    max_elements: rng.random_range(1..=40),
                    fade: rng.random_range(1..=20) as f64 / 20.0,
                    scale_step: rng.random_range(10..=20) as f64 / 20.0,
                    stride: rng.random_range(1..=3),
                };
                (
                    vec![pick(rng, &element_ids).clone()],
                    vec![pick(rng, &tracker_ids).clone()],
                    EffectParams::Trajectory(params),
                )
            }
            _ => {
                let object = !color_ids.is_empty() && rng.random_bool(0.6);
                let mode = if rng.random_bool(0.5) {
                    ContourMode::Static
                } else {
                    ContourMode::Animated {
                        window_fraction: rng.random_range(1..=20) as f64 / 20.0,
                        cycles_per_second: rng.random_range(1..=8) as f64 / 4.0,
                    }
                };
                let params = ContourParams {
                    source: if object {
                        ContourSource::Object
                    } else {
                        ContourSource::Body
                    },
                    mode,
                    stroke: StrokeStyle {
                        opacity: rng.random_range(0..=20) as f64 / 20.0,
                        ..random_style(rng)
                    },
                    fill: rng
                        .random_bool(0.3)
                        .then(|| Rgba::new(rng.random(), rng.random(), rng.random(), rng.random())),
                    epsilon: rng.random_range(0..=16) as f64 / 4.0,
                };
                let trs = if object {
                    vec![pick(rng, &color_ids).clone()]
                } else {
                    vec![]
                };
                (vec![], trs, EffectParams::Contour(params))
            }
        };
        if !matches!(params, EffectParams::Trigger(_)) {
            non_trigger.push(id.clone());
        }
        scene.effects.push(EffectSpec {
            id,
            element_ids: elements,
            tracker_ids: trackers,
            params,
        });
    }
    scene
}

fn star_outline(center: Point2, inner: f64, outer: f64, tips: usize) -> Vec<Point2> {
    (0..=2 * tips)
        .map(|i| {
            let a = TAU * i as f64 / (2 * tips) as f64;
            let r = if i % 2 == 0 { outer } else { inner };
            center + Point2::new(a.cos(), a.sin()) * r
        })
        .collect()
}

fn sketch(t: &mut Transcript, points: Vec<Point2>, style: StrokeStyle) {
    t.command(Command::BeginStroke { style });
    for batch in points.chunks(16) {
        t.command(Command::AppendPoints {
            points: batch.to_vec(),
        });
    }
    t.command(Command::EndStroke);
}

fn ids(list: &[&str]) -> Option<Vec<String>> {
    Some(list.iter().map(|s| s.to_string()).collect())
}

/// A 50-command authoring session over `video`: pick the ball and both
/// wrists, bind a halo, draw a three-frame flame flip-book, play a little,
/// then add a clap burst, rain, a ghost trail and a body outline, and play on.
pub fn authoring_transcript(video: &SyntheticVideo) -> Transcript {
    let ball = video.ball_center(0);
    let pose = video.pose(0);
    let left = pose.visible(LEFT_WRIST as usize).expect("visible");
    let right = pose.visible(RIGHT_WRIST as usize).expect("visible");
    let r = video.ball_radius;
    let yellow = style(Rgba::opaque(255, 214, 10), 3.0);
    let orange = style(Rgba::opaque(255, 120, 0), 3.0);
    let mut t = Transcript::default();

    t.command(Command::SelectTrackPoint {
        x: ball.x,
        y: ball.y,
        kind: TrackPointKind::Color,
    }); // t0
    t.command(Command::SelectTrackPoint {
        x: left.x + 2.0,
        y: left.y - 1.0,
        kind: TrackPointKind::Body,
    }); // t1
    t.command(Command::SelectTrackPoint {
        x: right.x,
        y: right.y + 2.0,
        kind: TrackPointKind::Body,
    }); // t2
    sketch(&mut t, circle(ball, r + 10.0, 24), yellow);
    t.command(Command::GroupElement); // e3
    t.command(Command::ApplyEffect {
        params: EffectParams::Binding(BindingParams::default()),
        element_ids: ids(&["e3"]),
        tracker_ids: ids(&["t0"]),
    }); // fx4
    for k in 0..3 {
        sketch(
            &mut t,
            zigzag(left - Point2::new(0.0, 14.0), 22.0, 18.0, k as f64 / 2.0),
            orange,
        );
        t.command(Command::AddFlipbookFrame); // e5, e6, e7
    }
    t.command(Command::ApplyEffect {
        params: EffectParams::FlipBook(FlipBookParams::default()),
        element_ids: None,
        tracker_ids: ids(&["t1"]),
    }); // fx8
    t.command(Command::ResumeVideo);
    t.steps(20);
    t.command(Command::PauseVideo);

    sketch(&mut t, star_outline(left, 12.0, 30.0, 6), yellow);
    sketch(&mut t, star_outline(left, 20.0, 44.0, 6), yellow);
    t.command(Command::GroupElement); // e9
    t.command(Command::ApplyEffect {
        params: EffectParams::Trigger(TriggerParams {
            bind_to: Some("t1".into()),
            ..TriggerParams::default()
        }),
        element_ids: ids(&["e9"]),
        tracker_ids: ids(&["t1", "t2"]),
    }); // fx10
    t.command(Command::SetParam {
        effect_id: "fx10".into(),
        key: "threshold".into(),
        value: (1.2 * video.wrist_radius()).into(),
    });

    sketch(
        &mut t,
        vec![Point2::new(0.0, 0.0), Point2::new(0.0, 10.0)],
        style(Rgba::opaque(60, 220, 255), 2.0),
    );
    t.command(Command::GroupElement); // e11
    let emitter_y = video.ball_center(20).y + r;
    let emitter_x = video.ball_center(20).x;
    sketch(
        &mut t,
        vec![
            Point2::new(emitter_x - r, emitter_y),
            Point2::new(emitter_x + r, emitter_y),
        ],
        yellow,
    );
    t.command(Command::ApplyEffect {
        params: EffectParams::Particles(ParticleParams {
            spawn_rate: 12.0,
            speed: 90.0,
            ..ParticleParams::default()
        }),
        element_ids: ids(&["e11"]),
        tracker_ids: ids(&["t0"]),
    }); // fx12

    sketch(
        &mut t,
        circle(video.ball_center(20), r, 12),
        StrokeStyle {
            color: Rgba::WHITE,
            width: 2.0,
            opacity: 0.8,
        },
    );
    t.command(Command::GroupElement); // e13
    t.command(Command::ApplyEffect {
        params: EffectParams::Trajectory(TrajectoryParams {
            fade: 0.9,
            ..TrajectoryParams::default()
        }),
        element_ids: ids(&["e13"]),
        tracker_ids: ids(&["t0"]),
    }); // fx14
    let outline = ContourParams {
        source: ContourSource::Body,
        mode: ContourMode::DEFAULT_ANIMATED,
        ..ContourParams::default()
    };
    t.command(Command::ApplyEffect {
        params: EffectParams::Contour(outline.clone()),
        element_ids: None,
        tracker_ids: None,
    }); // fx15
    t.command(Command::Undo);
    t.command(Command::ApplyEffect {
        params: EffectParams::Contour(ContourParams {
            fill: Some(Rgba::new(255, 255, 255, 40)),
            ..outline
        }),
        element_ids: None,
        tracker_ids: None,
    }); // fx16
    t.command(Command::ResumeVideo);
    t.steps(60);
    t
}

const PARAM_KEYS: [(&str, f64, f64); 9] = [
    ("threshold", -10.0, 300.0),
    ("fps", -1.0, 30.0),
    ("speed", -5.0, 200.0),
    ("spawn_rate", 0.0, 60.0),
    ("fade", 0.0, 1.5),
    ("max_elements", 0.0, 60.0),
    ("epsilon", -1.0, 8.0),
    ("mode.window_fraction", -0.5, 1.5),
    ("hold_seconds", -1.0, 3.0),
];

/// A random command, valid or not, referring to ids of `scene` most of the time.
pub fn random_command<R: Rng>(rng: &mut R, scene: &Scene) -> Command {
    let size = scene.frame_size;
    let any_id = |rng: &mut R, ids: Vec<&String>| -> String {
        if ids.is_empty() || rng.random_bool(0.1) {
            format!("missing{}", rng.random_range(0..3))
        } else {
            ids[rng.random_range(0..ids.len())].clone()
        }
    };
    let pick_many = |rng: &mut R, ids: Vec<&String>, n: usize| -> Vec<String> {
        (0..n).map(|_| any_id(rng, ids.clone())).collect()
    };
    let point = |rng: &mut R| {
        Point2::new(
            rng.random_range(-20.0..size.width as f64 + 20.0),
            rng.random_range(-20.0..size.height as f64 + 20.0),
        )
    };
    match rng.random_range(0..100) {
        0..=5 => Command::PauseVideo,
        6..=9 => Command::ResumeVideo,
        10..=19 => {
            let p = point(rng);
            let kind = if rng.random_bool(0.5) {
                TrackPointKind::Color
            } else {
                TrackPointKind::Body
            };
            Command::SelectTrackPoint {
                x: p.x,
                y: p.y,
                kind,
            }
        }
        20..=29 => Command::BeginStroke {
            style: random_style(rng),
        },
        30..=44 => Command::AppendPoints {
            points: (0..rng.random_range(0..6)).map(|_| point(rng)).collect(),
        },
        45..=54 => Command::EndStroke,
        55..=61 => Command::GroupElement,
        62..=77 => {
            let kind = crate::model::EffectKind::ALL[rng.random_range(0..6)];
            let mut params = EffectParams::default_for(kind);
            if let EffectParams::Contour(p) = &mut params {
                if rng.random_bool(0.5) {
                    p.source = ContourSource::Body;
                }
            }
            let elements = scene.elements.iter().map(|e| &e.id).collect::<Vec<_>>();
            let trackers = scene.trackers.iter().map(|t| &t.id).collect::<Vec<_>>();
            let element_ids = rng.random_bool(0.4).then(|| {
                let n = rng.random_range(0..3);
                pick_many(rng, elements, n)
            });
            let tracker_ids = rng.random_bool(0.4).then(|| {
                let n = rng.random_range(0..3);
                pick_many(rng, trackers, n)
            });
            Command::ApplyEffect {
                params,
                element_ids,
                tracker_ids,
            }
        }
        78..=85 => {
            let effect_id = any_id(rng, scene.effects.iter().map(|e| &e.id).collect());
            let (key, lo, hi) = PARAM_KEYS[rng.random_range(0..PARAM_KEYS.len())];
            let value = if rng.random_bool(0.1) {
                serde_json::Value::String("oops".into())
            } else if key == "max_elements" {
                (rng.random_range(lo..hi) as u64).into()
            } else {
                rng.random_range(lo..hi).into()
            };
            Command::SetParam {
                effect_id,
                key: key.into(),
                value,
            }
        }
        86..=90 => Command::AddFlipbookFrame,
        91..=93 => Command::SaveFlipbook,
        _ => Command::Undo,
    }
}
