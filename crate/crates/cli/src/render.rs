//! Batch rendering of a scene over a recorded frame sequence.
//!
//! Frames are processed in fixed-size chunks. Within a chunk the worker pool
//! decodes the inputs, the engine steps every frame in index order, and the
//! pool then writes the SVG overlays and composites. Engine state never
//! crosses threads, so output bytes do not depend on the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use image::RgbImage;
use rayon::prelude::*;
use scribble_core::engine::{Engine, FrameInput, DEFAULT_FPS};
use scribble_core::model::{ContourSource, EffectParams, Scene, TrackerKind};
use scribble_core::scene_io::{load_masks, load_pose_track, load_scene, FrameSequence, PoseTrack};
use scribble_core::{composite, emit_svg, BinaryMask, FrameOverlay};
use serde::Serialize;

use crate::{effect_counts, CliError, Record};

const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// `overlay_%06d.svg` per frame.
    Svg,
    /// `composite_%06d.png` per frame.
    Raster,
    Both,
}

impl OutputFormat {
    fn svg(self) -> bool {
        matches!(self, OutputFormat::Svg | OutputFormat::Both)
    }

    fn raster(self) -> bool {
        matches!(self, OutputFormat::Raster | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RenderOptions {
    /// Scene file.
    #[arg(long)]
    pub scene: PathBuf,
    /// Directory of `frame_NNNNNN.png` (or jpg/bmp/ppm) images.
    #[arg(long)]
    pub frames: PathBuf,
    /// Pose track, required when the scene has keypoint trackers.
    #[arg(long)]
    pub pose: Option<PathBuf>,
    /// Body mask sidecar, required for body contours.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "svg")]
    pub format: OutputFormat,
    /// Replace the scene's stored random seed.
    #[arg(long)]
    pub seed_override: Option<u64>,
    /// Worker threads for decoding and output; defaults to the core count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Frame rate of the sequence; defaults to the pose track's, else 30.
    #[arg(long)]
    pub fps: Option<f64>,
}

impl RenderOptions {
    pub fn new(
        scene: impl Into<PathBuf>,
        frames: impl Into<PathBuf>,
        out: impl Into<PathBuf>,
    ) -> Self {
        Self {
            scene: scene.into(),
            frames: frames.into(),
            pose: None,
            masks: None,
            out: out.into(),
            format: OutputFormat::Svg,
            seed_override: None,
            workers: None,
            fps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderReport {
    pub frames: usize,
    pub format: OutputFormat,
    pub effects: BTreeMap<String, usize>,
    pub trackers: usize,
    pub workers: usize,
    pub seed: u64,
    pub wall_ms: f64,
    pub fps: f64,
    pub out: String,
}

pub fn overlay_file_name(index: usize) -> String {
    format!("overlay_{index:06}.svg")
}

pub fn composite_file_name(index: usize) -> String {
    format!("composite_{index:06}.png")
}

struct Inputs {
    scene: Scene,
    frames: FrameSequence,
    pose: Option<PoseTrack>,
    masks: Option<Vec<BinaryMask>>,
    fps: f64,
}

fn load_inputs(opts: &RenderOptions) -> Result<Inputs, CliError> {
    let mut scene = load_scene(&opts.scene)?;
    if let Some(seed) = opts.seed_override {
        scene.seed = seed;
    }
    let frames = FrameSequence::open(&opts.frames)?;
    let expected = (scene.frame_size.width, scene.frame_size.height);
    if frames.size() != expected {
        return Err(CliError::input(
            "size-mismatch(0)",
            format!("frames are {:?}, scene expects {expected:?}", frames.size()),
        ));
    }

    let needs_pose = scene
        .trackers
        .iter()
        .any(|t| matches!(t.kind, TrackerKind::Keypoint { .. }));
    let pose = opts.pose.as_deref().map(load_pose_track).transpose()?;
    match &pose {
        None if needs_pose => {
            return Err(CliError::input(
                "pose-required",
                "the scene has keypoint trackers but no --pose was given",
            ))
        }
        Some(track) if track.frames.len() < frames.len() => {
            return Err(CliError::input(
                "pose-gap",
                format!(
                    "pose track has {} frames, sequence has {}",
                    track.frames.len(),
                    frames.len()
                ),
            ))
        }
        _ => {}
    }

    let needs_masks = scene
        .effects
        .iter()
        .any(|e| matches!(&e.params, EffectParams::Contour(p) if p.source == ContourSource::Body));
    let masks = opts.masks.as_deref().map(load_masks).transpose()?;
    match &masks {
        None if needs_masks => {
            return Err(CliError::input(
                "masks-required",
                "the scene has body contours but no --masks was given",
            ))
        }
        Some(m) if m.len() < frames.len() => {
            return Err(CliError::input(
                "mask-format",
                format!(
                    "mask file has {} masks, sequence has {} frames",
                    m.len(),
                    frames.len()
                ),
            ))
        }
        Some(m) => {
            if let Some(i) = m
                .iter()
                .position(|mask| (mask.width(), mask.height()) != expected)
            {
                return Err(CliError::input(
                    format!("size-mismatch({i})"),
                    "body mask size differs from the frames",
                ));
            }
        }
        None => {}
    }

    let fps = opts
        .fps
        .or(pose.as_ref().map(|p| p.fps))
        .unwrap_or(DEFAULT_FPS);
    if !(fps.is_finite() && fps > 0.0) {
        return Err(CliError::input(
            "fps",
            format!("frame rate must be positive, got {fps}"),
        ));
    }
    Ok(Inputs {
        scene,
        frames,
        pose,
        masks,
        fps,
    })
}

fn write_outputs(
    out: &Path,
    format: OutputFormat,
    index: usize,
    image: &RgbImage,
    overlay: &FrameOverlay,
) -> Result<(), CliError> {
    if format.svg() {
        let path = out.join(overlay_file_name(index));
        fs::write(&path, emit_svg(overlay, overlay.frame_size))
            .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))?;
    }
    if format.raster() {
        let path = out.join(composite_file_name(index));
        let picture = composite(image, overlay).map_err(|e| CliError::Internal(e.to_string()))?;
        picture
            .save(&path)
            .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Renders every frame, writing progress records to `progress`.
pub fn run_render(
    opts: &RenderOptions,
    progress: &mut dyn Write,
) -> Result<RenderReport, CliError> {
    let start = Instant::now();
    let inputs = load_inputs(opts)?;
    fs::create_dir_all(&opts.out)
        .map_err(|e| CliError::Internal(format!("creating {}: {e}", opts.out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let workers = pool.current_num_threads();
    let total = inputs.frames.len();
    log::info!(
        "rendering {total} frames with {workers} workers at {} fps",
        inputs.fps
    );

    let mut engine = Engine::new(inputs.scene.clone(), inputs.fps);
    for first in (0..total).step_by(CHUNK) {
        let indices: Vec<usize> = (first..(first + CHUNK).min(total)).collect();
        let images: Vec<RgbImage> = pool.install(|| {
            indices
                .par_iter()
                .map(|&i| inputs.frames.load(i))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let mut overlays = Vec::with_capacity(indices.len());
        for (&i, image) in indices.iter().zip(&images) {
            let input = FrameInput {
                image,
                pose: inputs.pose.as_ref().and_then(|p| p.frames.get(i)),
                body_mask: inputs.masks.as_ref().and_then(|m| m.get(i)),
            };
            let overlay = engine
                .step(i as u64, &input)
                .map_err(|e| CliError::Internal(format!("frame {i}: {e}")))?;
            overlays.push(overlay);
        }
        pool.install(|| {
            indices
                .par_iter()
                .zip(images.par_iter())
                .zip(overlays.par_iter())
                .try_for_each(|((&i, image), overlay)| {
                    write_outputs(&opts.out, opts.format, i, image, overlay)
                })
        })?;
        let done = first + indices.len();
        Record::Progress {
            frames_done: done,
            total,
        }
        .write_line(progress)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    }

    let wall = start.elapsed().as_secs_f64();
    Ok(RenderReport {
        frames: total,
        format: opts.format,
        effects: effect_counts(&inputs.scene),
        trackers: inputs.scene.trackers.len(),
        workers,
        seed: inputs.scene.seed,
        wall_ms: wall * 1e3,
        fps: if wall > 0.0 { total as f64 / wall } else { 0.0 },
        out: opts.out.display().to_string(),
    })
}
