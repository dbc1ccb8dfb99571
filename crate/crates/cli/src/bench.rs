//! Per-frame pipeline timing over the synthetic video.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::Args;
use scribble_core::emit_svg;
use scribble_core::engine::{Engine, FrameInput, StepTiming, DEFAULT_FPS};
use scribble_core::model::{EffectKind, FrameSize};
use scribble_core::scene_io::load_scene;
use scribble_core::synth::{throughput_scene, SyntheticVideo};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{effect_counts, parse_size, CliError};

#[derive(Debug, Clone, Args)]
pub struct BenchOptions {
    /// Scene to run; defaults to a ball tracker, a wrist tracker and one effect of each kind.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    pub count: u64,
    /// Synthetic frame size as WIDTHxHEIGHT; defaults to the scene's, else 640x480.
    #[arg(long, value_parser = parse_size)]
    pub size: Option<FrameSize>,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            scene: None,
            count: 600,
            size: None,
            fps: DEFAULT_FPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub frames: u64,
    pub width: u32,
    pub height: u32,
    pub effects: BTreeMap<String, usize>,
    /// Tracking, effects and overlay resolution, without SVG text.
    pub mean_fps: f64,
    pub min_fps: f64,
    pub mean_fps_with_svg: f64,
    pub min_fps_with_svg: f64,
    /// Wall time around each engine step, summed.
    pub pipeline_ms: f64,
    /// Sum of the instrumented stages; within a hair of `pipeline_ms`.
    pub stages_ms: f64,
    pub tracking_ms: f64,
    pub effect_ms: BTreeMap<String, f64>,
    pub resolve_ms: f64,
    pub svg_ms: f64,
    /// Whole run, frame synthesis included.
    pub wall_ms: f64,
    /// SHA-256 over every frame's SVG, in order.
    pub digest: String,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn fps(frames: u64, total: Duration) -> f64 {
    if total.is_zero() {
        0.0
    } else {
        frames as f64 / total.as_secs_f64()
    }
}

pub fn run_bench(opts: &BenchOptions) -> Result<BenchReport, CliError> {
    let start = Instant::now();
    let scene = match &opts.scene {
        Some(path) => Some(load_scene(path)?),
        None => None,
    };
    let size = opts
        .size
        .or(scene.as_ref().map(|s| s.frame_size))
        .unwrap_or(FrameSize::new(640, 480));
    let video = SyntheticVideo::new(size);
    let scene = scene.unwrap_or_else(|| throughput_scene(&video));
    if scene.frame_size != size {
        return Err(CliError::input(
            "size-mismatch(0)",
            format!("scene is {:?}, --size is {size:?}", scene.frame_size),
        ));
    }
    if !(opts.fps.is_finite() && opts.fps > 0.0) {
        return Err(CliError::input(
            "fps",
            format!("frame rate must be positive, got {}", opts.fps),
        ));
    }

    let mut engine = Engine::new(scene.clone(), opts.fps);
    let mut stages = StepTiming::default();
    let (mut pipeline, mut slowest, mut svg_total, mut slowest_with_svg) = (
        Duration::ZERO,
        Duration::ZERO,
        Duration::ZERO,
        Duration::ZERO,
    );
    let mut hasher = Sha256::new();
    for f in 0..opts.count {
        let (image, pose, mask) = (video.frame(f), video.pose(f), video.body_mask(f));
        let input = FrameInput {
            image: &image,
            pose: Some(&pose),
            body_mask: Some(&mask),
        };
        let t = Instant::now();
        let (overlay, timing) = engine
            .step_timed(f, &input)
            .map_err(|e| CliError::Internal(format!("frame {f}: {e}")))?;
        let step = t.elapsed();
        let t = Instant::now();
        let svg = emit_svg(&overlay, size);
        let svg_time = t.elapsed();
        hasher.update(svg.as_bytes());

        stages.accumulate(&timing);
        pipeline += step;
        svg_total += svg_time;
        slowest = slowest.max(step);
        slowest_with_svg = slowest_with_svg.max(step + svg_time);
    }

    let min_fps = |d: Duration| {
        if d.is_zero() {
            0.0
        } else {
            1.0 / d.as_secs_f64()
        }
    };
    Ok(BenchReport {
        frames: opts.count,
        width: size.width,
        height: size.height,
        effects: effect_counts(&scene),
        mean_fps: fps(opts.count, pipeline),
        min_fps: min_fps(slowest),
        mean_fps_with_svg: fps(opts.count, pipeline + svg_total),
        min_fps_with_svg: min_fps(slowest_with_svg),
        pipeline_ms: ms(pipeline),
        stages_ms: ms(stages.stages_total()),
        tracking_ms: ms(stages.tracking),
        effect_ms: EffectKind::ALL
            .iter()
            .zip(stages.effects)
            .map(|(k, d)| (k.name().to_string(), ms(d)))
            .collect(),
        resolve_ms: ms(stages.resolve),
        svg_ms: ms(svg_total),
        wall_ms: ms(start.elapsed()),
        digest: format!("{:x}", hasher.finalize()),
    })
}
