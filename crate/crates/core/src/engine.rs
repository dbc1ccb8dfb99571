//! Per-frame pipeline: track, step effects, resolve the overlay.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use image::RgbImage;
use thiserror::Error;

use crate::contour::{contour_window, extract_outer_contour, fill_region, simplify_polyline};
use crate::effects::{
    effect_rng, evaluate_trigger, flipbook_frame, step_particles, update_trajectory, BindingState,
    EffectState, EffectStateKind, TriggerSpec,
};
use crate::model::{
    ContourMode, ContourSource, EffectKind, EffectParams, EffectSpec, ParticleParams, Point2,
    Scene, TrackerKind,
};
use crate::render::{resolve_frame, FrameOverlay, RenderError};
use crate::tracking::{
    largest_component_centroid, segment_by_window, BinaryMask, PoseFrame, TrackerState,
};

pub const DEFAULT_FPS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("size-mismatch: frame is {actual:?}, scene expects {expected:?}")]
    SizeMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Inputs for one frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameInput<'a> {
    pub image: &'a RgbImage,
    pub pose: Option<&'a PoseFrame>,
    /// Body segmentation for body contours.
    pub body_mask: Option<&'a BinaryMask>,
}

impl<'a> FrameInput<'a> {
    pub fn image(image: &'a RgbImage) -> Self {
        Self {
            image,
            pose: None,
            body_mask: None,
        }
    }
}

/// Wall time spent in each pipeline stage for one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepTiming {
    pub tracking: Duration,
    /// Indexed like [`EffectKind::ALL`].
    pub effects: [Duration; 6],
    pub resolve: Duration,
}

impl StepTiming {
    pub fn stages_total(&self) -> Duration {
        self.tracking + self.effects.iter().sum::<Duration>() + self.resolve
    }

    pub fn accumulate(&mut self, other: &StepTiming) {
        self.tracking += other.tracking;
        for (a, b) in self.effects.iter_mut().zip(other.effects) {
            *a += b;
        }
        self.resolve += other.resolve;
    }
}

fn kind_slot(kind: EffectKind) -> usize {
    EffectKind::ALL.iter().position(|k| *k == kind).unwrap_or(0)
}

/// Owns a scene and the runtime state of its trackers and effects.
#[derive(Debug, Clone)]
pub struct Engine {
    scene: Scene,
    fps: f64,
    trackers: Vec<TrackerState>,
    effects: Vec<EffectState>,
}

impl Engine {
    /// `fps` is the frame rate of the input stream; it converts frame
    /// indices to effect time.
    pub fn new(scene: Scene, fps: f64) -> Self {
        let trackers = scene
            .trackers
            .iter()
            .map(|t| TrackerState::new(t.id.clone(), None))
            .collect();
        let effects = scene
            .effects
            .iter()
            .map(|e| EffectState::new(e.id.clone(), e.kind()))
            .collect();
        Self {
            scene,
            fps,
            trackers,
            effects,
        }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn trackers(&self) -> &[TrackerState] {
        &self.trackers
    }

    pub fn effects(&self) -> &[EffectState] {
        &self.effects
    }

    pub fn tracker_state(&self, id: &str) -> Option<&TrackerState> {
        self.trackers.iter().find(|t| t.tracker_id == id)
    }

    /// Replaces the scene, keeping runtime state for every tracker and
    /// effect whose id (and kind) survives.
    pub fn set_scene(&mut self, scene: Scene) {
        let mut old_trackers: HashMap<String, TrackerState> = self
            .trackers
            .drain(..)
            .map(|t| (t.tracker_id.clone(), t))
            .collect();
        let mut old_effects: HashMap<String, EffectState> = self
            .effects
            .drain(..)
            .map(|e| (e.effect_id.clone(), e))
            .collect();
        self.trackers = scene
            .trackers
            .iter()
            .map(|t| {
                old_trackers
                    .remove(&t.id)
                    .unwrap_or_else(|| TrackerState::new(t.id.clone(), None))
            })
            .collect();
        self.effects = scene
            .effects
            .iter()
            .map(|e| match old_effects.remove(&e.id) {
                Some(s) if s.kind() == e.kind() => s,
                _ => EffectState::new(e.id.clone(), e.kind()),
            })
            .collect();
        self.scene = scene;
    }

    /// Seeds a tracker's position, e.g. with the point confirmed while authoring.
    pub fn seed_tracker(&mut self, id: &str, position: Point2) {
        if let Some(t) = self.trackers.iter_mut().find(|t| t.tracker_id == id) {
            t.observe(Some(position));
        }
    }

    /// Track, step effects, and resolve the overlay for `frame_index`.
    pub fn step(
        &mut self,
        frame_index: u64,
        input: &FrameInput<'_>,
    ) -> Result<FrameOverlay, EngineError> {
        self.step_timed(frame_index, input).map(|(o, _)| o)
    }

    pub fn step_timed(
        &mut self,
        frame_index: u64,
        input: &FrameInput<'_>,
    ) -> Result<(FrameOverlay, StepTiming), EngineError> {
        let expected = (self.scene.frame_size.width, self.scene.frame_size.height);
        let actual = input.image.dimensions();
        if expected != actual {
            return Err(EngineError::SizeMismatch { expected, actual });
        }
        let mut timing = StepTiming::default();

        let t0 = Instant::now();
        let masks = self.track(input);
        timing.tracking = t0.elapsed();

        for i in 0..self.effects.len() {
            let t = Instant::now();
            let kind = self.scene.effects[i].kind();
            self.step_effect(i, frame_index, input, &masks);
            timing.effects[kind_slot(kind)] += t.elapsed();
        }

        let t = Instant::now();
        let overlay = resolve_frame(&self.scene, &self.trackers, &self.effects, frame_index)?;
        timing.resolve = t.elapsed();
        Ok((overlay, timing))
    }

    /// Updates every tracker; returns color masks needed by object contours.
    fn track(&mut self, input: &FrameInput<'_>) -> HashMap<String, BinaryMask> {
        let mut masks = HashMap::new();
        for (spec, state) in self.scene.trackers.iter().zip(self.trackers.iter_mut()) {
            match &spec.kind {
                TrackerKind::ColorBlob { window, .. } => {
                    let mask = segment_by_window(input.image, window);
                    state.observe(largest_component_centroid(&mask));
                    let wanted = self.scene.effects.iter().any(|e| {
                        matches!(&e.params, EffectParams::Contour(p) if p.source == ContourSource::Object)
                            && e.tracker_ids.first() == Some(&spec.id)
                    });
                    if wanted {
                        masks.insert(spec.id.clone(), mask);
                    }
                }
                TrackerKind::Keypoint { index } => {
                    state.observe(input.pose.and_then(|p| p.visible(*index as usize)));
                }
            }
        }
        masks
    }

    fn position(&self, tracker_id: &str) -> Option<Point2> {
        self.tracker_state(tracker_id).and_then(|t| t.last_position)
    }

    fn step_effect(
        &mut self,
        index: usize,
        frame: u64,
        input: &FrameInput<'_>,
        masks: &HashMap<String, BinaryMask>,
    ) {
        let spec: &EffectSpec = &self.scene.effects[index];
        let first_tracker = spec.tracker_ids.first().and_then(|id| self.position(id));
        let second_tracker = spec.tracker_ids.get(1).and_then(|id| self.position(id));
        let bind_target = match &spec.params {
            EffectParams::Trigger(p) => p.bind_to.as_deref().and_then(|id| self.position(id)),
            _ => first_tracker,
        };
        let fps = self.fps;
        let seed = self.scene.seed;
        let state = &mut self.effects[index];
        let started = *state.started_at.get_or_insert(frame);
        let elapsed_frames = frame.saturating_sub(started);
        let t = elapsed_frames as f64 / fps;

        let lazy_bind = |binding: &mut Option<BindingState>, anchor: Option<Point2>| {
            if binding.is_none() {
                *binding = anchor
                    .or(bind_target)
                    .map(|a| BindingState { anchor_at_bind: a });
            }
        };

        match (&spec.params, &mut state.kind) {
            (EffectParams::Binding(p), EffectStateKind::Binding { binding }) => {
                lazy_bind(binding, p.anchor)
            }
            (EffectParams::FlipBook(p), EffectStateKind::FlipBook { binding, current }) => {
                if !spec.tracker_ids.is_empty() {
                    lazy_bind(binding, p.anchor);
                }
                *current = flipbook_frame(spec.element_ids.len(), p.fps, t);
            }
            (
                EffectParams::Trigger(p),
                EffectStateKind::Trigger {
                    trigger,
                    binding,
                    showing,
                },
            ) => {
                if p.bind_to.is_some() {
                    lazy_bind(binding, p.anchor);
                }
                let n = spec.element_ids.len();
                let seconds = (n as f64 / p.payload_fps).max(p.hold_seconds);
                let payload_frames = ((seconds * fps).ceil() as u64).max(1);
                let tspec = TriggerSpec {
                    threshold: p.threshold,
                    direction: p.direction,
                    payload_frames,
                };
                match (first_tracker, second_tracker) {
                    (Some(a), Some(b)) => {
                        *trigger = evaluate_trigger(&tspec, trigger, a.distance(b), frame).0;
                    }
                    _ => {
                        // No distance yet: only let a running payload finish.
                        if let Some(elapsed) = trigger.playback_frame(frame) {
                            if elapsed >= payload_frames {
                                trigger.playing = false;
                            }
                        }
                    }
                }
                *showing = trigger
                    .playback_frame(frame)
                    .filter(|_| n > 0)
                    .map(|elapsed| {
                        let k = (elapsed as f64 / fps * p.payload_fps).floor() as usize;
                        k.min(n - 1)
                    });
            }
            (EffectParams::Particles(p), EffectStateKind::Particles { system, binding }) => {
                lazy_bind(binding, p.anchor);
                let emitter: Vec<Point2> = match (binding.as_ref(), first_tracker) {
                    (Some(b), Some(now)) => {
                        let shift = now - b.anchor_at_bind;
                        p.emitter.iter().map(|&q| q + shift).collect()
                    }
                    _ => Vec::new(),
                };
                let dt = if elapsed_frames == 0 { 0.0 } else { 1.0 / fps };
                let mut rng = effect_rng(seed, &spec.id, frame);
                if emitter.is_empty() {
                    let idle = ParticleParams {
                        spawn_rate: 0.0,
                        ..p.clone()
                    };
                    *system = step_particles(&idle, system, &emitter, dt, frame, &mut rng);
                } else {
                    *system = step_particles(p, system, &emitter, dt, frame, &mut rng);
                }
            }
            (EffectParams::Trajectory(p), EffectStateKind::Trajectory { clones }) => {
                if let Some(anchor) = first_tracker {
                    if elapsed_frames.is_multiple_of(p.stride.max(1) as u64) {
                        *clones = update_trajectory(p, clones, anchor, frame);
                    }
                }
            }
            (
                EffectParams::Contour(p),
                EffectStateKind::Contour {
                    outline,
                    closed,
                    fill,
                },
            ) => {
                let mask = match p.source {
                    ContourSource::Object => spec.tracker_ids.first().and_then(|id| masks.get(id)),
                    ContourSource::Body => input.body_mask,
                };
                *outline = None;
                *fill = None;
                *closed = matches!(p.mode, ContourMode::Static);
                if let Some(mask) = mask {
                    if let Ok(ring) = extract_outer_contour(mask, frame) {
                        let ring = simplify_polyline(&ring, p.epsilon);
                        *outline = Some(match p.mode {
                            ContourMode::Static => ring.points,
                            ContourMode::Animated {
                                window_fraction,
                                cycles_per_second,
                            } => contour_window(&ring, t, window_fraction, cycles_per_second),
                        });
                        if let Some(color) = p.fill {
                            *fill = fill_region(mask, color).ok();
                        }
                    }
                }
            }
            _ => {
                // set_scene keeps kinds aligned; a mismatch means a stale state.
                *state = EffectState::new(spec.id.clone(), spec.kind());
            }
        }
    }

    pub fn overlay(&self, frame_index: u64) -> Result<FrameOverlay, RenderError> {
        resolve_frame(&self.scene, &self.trackers, &self.effects, frame_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        BindingParams, EffectSpec, FrameSize, SketchElement, Stroke, StrokeStyle, TrackerSpec,
        TrajectoryParams,
    };
    use crate::render::Drawable;
    use crate::tracking::ColorWindow;
    use image::Rgb;

    fn blob_frame(cx: u32, cy: u32) -> RgbImage {
        let mut f = RgbImage::from_pixel(64, 48, Rgb([10, 10, 10]));
        for y in cy - 2..=cy + 2 {
            for x in cx - 2..=cx + 2 {
                f.put_pixel(x, y, Rgb([0, 200, 0]));
            }
        }
        f
    }

    fn element(id: &str, at: Point2) -> SketchElement {
        SketchElement {
            id: id.into(),
            strokes: vec![Stroke {
                points: vec![at, at + Point2::new(4.0, 0.0)],
                style: StrokeStyle::default(),
            }],
            local_origin: at,
        }
    }

    fn scene_with(effect: EffectParams) -> Scene {
        let mut scene = Scene::empty(FrameSize::new(64, 48), 9);
        scene.elements.push(element("e", Point2::new(20.0, 20.0)));
        scene.trackers.push(TrackerSpec {
            id: "t".into(),
            kind: TrackerKind::ColorBlob {
                seed: Point2::new(10.0, 10.0),
                window: ColorWindow::from_sample([0, 200, 0]),
            },
        });
        scene.effects.push(EffectSpec {
            id: "fx".into(),
            element_ids: vec!["e".into()],
            tracker_ids: vec!["t".into()],
            params: effect,
        });
        scene
    }

    #[test]
    fn bound_element_follows_blob() {
        let mut engine = Engine::new(
            scene_with(EffectParams::Binding(BindingParams::default())),
            30.0,
        );
        engine
            .step(0, &FrameInput::image(&blob_frame(10, 10)))
            .unwrap();
        let overlay = engine
            .step(1, &FrameInput::image(&blob_frame(20, 10)))
            .unwrap();
        assert_eq!(overlay.drawables.len(), 1);
        let Drawable::Path(p) = &overlay.drawables[0] else {
            panic!("expected a path")
        };
        assert_eq!((p.transform.dx, p.transform.dy), (10.0, 0.0));
    }

    #[test]
    fn explicit_anchor_wins_over_first_fix() {
        let params = BindingParams {
            anchor: Some(Point2::new(0.0, 0.0)),
        };
        let mut engine = Engine::new(scene_with(EffectParams::Binding(params)), 30.0);
        let overlay = engine
            .step(0, &FrameInput::image(&blob_frame(10, 10)))
            .unwrap();
        let Drawable::Path(p) = &overlay.drawables[0] else {
            panic!("expected a path")
        };
        assert_eq!((p.transform.dx, p.transform.dy), (10.0, 10.0));
    }

    #[test]
    fn trajectory_draws_one_instance_per_clone() {
        let mut engine = Engine::new(
            scene_with(EffectParams::Trajectory(TrajectoryParams::default())),
            30.0,
        );
        let mut overlay = None;
        for i in 0..40u32 {
            overlay = Some(
                engine
                    .step(i as u64, &FrameInput::image(&blob_frame(5 + i, 20)))
                    .unwrap(),
            );
        }
        assert_eq!(overlay.unwrap().drawables.len(), 30);
    }

    #[test]
    fn wrong_frame_size_is_rejected() {
        let mut engine = Engine::new(
            scene_with(EffectParams::Binding(BindingParams::default())),
            30.0,
        );
        let err = engine
            .step(0, &FrameInput::image(&RgbImage::new(10, 10)))
            .unwrap_err();
        assert!(matches!(err, EngineError::SizeMismatch { .. }));
    }

    #[test]
    fn set_scene_keeps_surviving_state() {
        let mut engine = Engine::new(
            scene_with(EffectParams::Trajectory(TrajectoryParams::default())),
            30.0,
        );
        for i in 0..3 {
            engine
                .step(i, &FrameInput::image(&blob_frame(10, 10)))
                .unwrap();
        }
        let mut scene = engine.scene().clone();
        scene.seed = 99;
        engine.set_scene(scene);
        let EffectStateKind::Trajectory { clones } = &engine.effects()[0].kind else {
            panic!()
        };
        assert_eq!(clones.len(), 3);
        assert_eq!(
            engine.trackers()[0].last_position,
            Some(Point2::new(10.0, 10.0))
        );
    }
}
