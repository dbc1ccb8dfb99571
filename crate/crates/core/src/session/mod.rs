//! Authoring session: a command-driven state machine around an [`Engine`]
//! and a frame source.
//!
//! A client pauses the video, picks track points, sketches strokes, groups
//! them into elements and applies effects, then resumes playback. Every
//! command either commits a scene that passes validation or leaves the
//! session untouched and reports an [`Event::Error`]. Scene-changing
//! commands push the previous scene onto a bounded undo stack.
//!
//! Commands and steps are the only inputs, so a recorded [`Transcript`]
//! replayed against the same frames reproduces every overlay exactly.

pub mod protocol;
pub mod server;

use std::collections::VecDeque;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{Engine, FrameInput};
use crate::model::{
    validate_scene, Diagnostic, EffectKind, EffectParams, EffectSpec, FlipBookParams, Point2,
    Scene, SketchElement, Stroke, StrokeStyle, TrackerKind, TrackerSpec,
};
use crate::render::{emit_svg, FrameOverlay};
use crate::scene_io::{FrameSequence, PoseTrack};
use crate::synth::SyntheticVideo;
use crate::tracking::{
    largest_component_centroid, nearest_keypoint, sample_color_window, segment_by_window,
    BinaryMask, PoseFrame,
};

pub const UNDO_DEPTH: usize = 20;

/// One input frame with its optional pose and body mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameData {
    pub image: RgbImage,
    pub pose: Option<PoseFrame>,
    pub body_mask: Option<BinaryMask>,
}

impl FrameData {
    pub fn image(image: RgbImage) -> Self {
        Self {
            image,
            pose: None,
            body_mask: None,
        }
    }

    fn input(&self) -> FrameInput<'_> {
        FrameInput {
            image: &self.image,
            pose: self.pose.as_ref(),
            body_mask: self.body_mask.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fetch {
    Frame(FrameData),
    /// A live source has nothing new yet.
    Pending,
    End,
}

/// Where a session's frames come from.
pub trait FrameSource: Send {
    fn fetch(&mut self, index: u64) -> Fetch;

    /// Hands a client-supplied frame to a live source. Recorded sources ignore it.
    fn push(&mut self, _frame: FrameData) -> bool {
        false
    }

    fn is_live(&self) -> bool {
        false
    }
}

/// Frames, pose and masks held in memory.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    pub frames: Vec<FrameData>,
}

impl FrameSource for MemorySource {
    fn fetch(&mut self, index: u64) -> Fetch {
        usize::try_from(index)
            .ok()
            .and_then(|i| self.frames.get(i))
            .cloned()
            .map_or(Fetch::End, Fetch::Frame)
    }
}

/// A directory of frames plus optional pose track and body masks.
#[derive(Debug, Clone)]
pub struct RecordedSource {
    pub frames: FrameSequence,
    pub pose: Option<PoseTrack>,
    pub masks: Option<Vec<BinaryMask>>,
}

impl FrameSource for RecordedSource {
    fn fetch(&mut self, index: u64) -> Fetch {
        let Ok(i) = usize::try_from(index) else {
            return Fetch::End;
        };
        match self.frames.load(i) {
            Ok(image) => Fetch::Frame(FrameData {
                image,
                pose: self.pose.as_ref().and_then(|p| p.frames.get(i).cloned()),
                body_mask: self.masks.as_ref().and_then(|m| m.get(i).cloned()),
            }),
            Err(e) => {
                if i < self.frames.len() {
                    log::error!("frame {i} could not be read: {e}");
                }
                Fetch::End
            }
        }
    }
}

/// The built-in synthetic video, rendered on demand.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    pub video: SyntheticVideo,
    pub frames: u64,
}

impl FrameSource for SyntheticSource {
    fn fetch(&mut self, index: u64) -> Fetch {
        if index >= self.frames {
            return Fetch::End;
        }
        Fetch::Frame(FrameData {
            image: self.video.frame(index),
            pose: Some(self.video.pose(index)),
            body_mask: Some(self.video.body_mask(index)),
        })
    }
}

/// Frames pushed by the client, consumed in arrival order.
#[derive(Debug, Clone, Default)]
pub struct LiveSource {
    queue: VecDeque<FrameData>,
}

impl FrameSource for LiveSource {
    fn fetch(&mut self, _index: u64) -> Fetch {
        self.queue.pop_front().map_or(Fetch::Pending, Fetch::Frame)
    }

    fn push(&mut self, frame: FrameData) -> bool {
        self.queue.push_back(frame);
        true
    }

    fn is_live(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Paused,
    Playing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackPointKind {
    /// Track the color under the point.
    Color,
    /// Track the skeleton keypoint nearest the point.
    Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    PauseVideo,
    ResumeVideo,
    SelectTrackPoint {
        x: f64,
        y: f64,
        kind: TrackPointKind,
    },
    BeginStroke {
        #[serde(default)]
        style: StrokeStyle,
    },
    AppendPoints {
        points: Vec<Point2>,
    },
    EndStroke,
    GroupElement,
    /// Applies an effect. Elements default to the kind's usual choice from
    /// the latest elements (or the flip-book draft); trackers default to
    /// the most recent selections.
    ApplyEffect {
        params: EffectParams,
        #[serde(default)]
        element_ids: Option<Vec<String>>,
        #[serde(default)]
        tracker_ids: Option<Vec<String>>,
    },
    /// Sets one parameter; `key` is a dotted path such as `mode.window_fraction`.
    SetParam {
        effect_id: String,
        key: String,
        value: Value,
    },
    AddFlipbookFrame,
    SaveFlipbook,
    Undo,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::PauseVideo => "pause_video",
            Command::ResumeVideo => "resume_video",
            Command::SelectTrackPoint { .. } => "select_track_point",
            Command::BeginStroke { .. } => "begin_stroke",
            Command::AppendPoints { .. } => "append_points",
            Command::EndStroke => "end_stroke",
            Command::GroupElement => "group_element",
            Command::ApplyEffect { .. } => "apply_effect",
            Command::SetParam { .. } => "set_param",
            Command::AddFlipbookFrame => "add_flipbook_frame",
            Command::SaveFlipbook => "save_flipbook",
            Command::Undo => "undo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    TrackPointConfirmed {
        tracker_id: String,
        position: Point2,
    },
    ElementCreated {
        id: String,
    },
    EffectApplied {
        id: String,
    },
    ParamChanged {
        effect_id: String,
        key: String,
    },
    ModeChanged {
        mode: Mode,
    },
    StrokeStarted,
    StrokeEnded {
        points: usize,
    },
    Undone,
    EndOfStream,
    Error {
        code: String,
        id: Option<String>,
        detail: String,
    },
}

impl Event {
    fn error(code: &str, detail: impl Into<String>) -> Self {
        Event::Error {
            code: code.into(),
            id: None,
            detail: detail.into(),
        }
    }

    fn diagnostic(d: &Diagnostic) -> Self {
        Event::Error {
            code: d.rule.name().into(),
            id: Some(d.id.clone()),
            detail: d.detail.clone(),
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Event::Error { .. })
    }
}

/// Whether strokes need a paused video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    Recorded,
    Live,
}

pub struct Session {
    engine: Engine,
    source: Box<dyn FrameSource>,
    source_mode: SourceMode,
    mode: Mode,
    next_frame: u64,
    current: Option<(u64, FrameData)>,
    overlay: FrameOverlay,
    open_stroke: Option<Stroke>,
    draft: Vec<Stroke>,
    selection: Vec<String>,
    flipbook: Vec<String>,
    undo: Vec<Scene>,
    counter: u64,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("mode", &self.mode)
            .field("source_mode", &self.source_mode)
            .field("next_frame", &self.next_frame)
            .field("scene", self.engine.scene())
            .finish_non_exhaustive()
    }
}

type Outcome<T = ()> = Result<T, Event>;

impl Session {
    /// Opens a session paused on the source's first frame.
    pub fn new(scene: Scene, fps: f64, mut source: Box<dyn FrameSource>) -> Self {
        let source_mode = if source.is_live() {
            SourceMode::Live
        } else {
            SourceMode::Recorded
        };
        let current = match source.fetch(0) {
            Fetch::Frame(f) if !source.is_live() => Some((0, f)),
            _ => None,
        };
        let overlay = FrameOverlay::empty(0, scene.frame_size);
        let mut session = Self {
            engine: Engine::new(scene, fps),
            source,
            source_mode,
            mode: Mode::Paused,
            next_frame: 0,
            current,
            overlay,
            open_stroke: None,
            draft: Vec::new(),
            selection: Vec::new(),
            flipbook: Vec::new(),
            undo: Vec::new(),
            counter: 0,
        };
        session.refresh_overlay();
        session
    }

    pub fn scene(&self) -> &Scene {
        self.engine.scene()
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn source_mode(&self) -> SourceMode {
        self.source_mode
    }

    /// Frame shown right now, if any.
    pub fn current_frame(&self) -> Option<(u64, &FrameData)> {
        self.current.as_ref().map(|(i, f)| (*i, f))
    }

    pub fn next_frame(&self) -> u64 {
        self.next_frame
    }

    pub fn overlay(&self) -> &FrameOverlay {
        &self.overlay
    }

    pub fn overlay_svg(&self) -> String {
        emit_svg(&self.overlay, self.scene().frame_size)
    }

    pub fn selection(&self) -> &[String] {
        &self.selection
    }

    pub fn undo_depth(&self) -> usize {
        self.undo.len()
    }

    /// Passes a client frame to a live source.
    pub fn push_frame(&mut self, frame: FrameData) -> bool {
        self.source.push(frame)
    }

    fn refresh_overlay(&mut self) {
        let index = self.current.as_ref().map_or(0, |(i, _)| *i);
        match self.engine.overlay(index) {
            Ok(o) => self.overlay = o,
            Err(e) => log::error!("overlay refresh failed: {e}"),
        }
    }

    /// Applies one command; the returned events always describe the outcome.
    pub fn apply(&mut self, command: Command) -> Vec<Event> {
        let result = match command {
            Command::PauseVideo => Ok(self.set_mode(Mode::Paused)),
            Command::ResumeVideo => Ok(self.set_mode(Mode::Playing)),
            Command::SelectTrackPoint { x, y, kind } => {
                self.select_track_point(Point2::new(x, y), kind)
            }
            Command::BeginStroke { style } => self.begin_stroke(style),
            Command::AppendPoints { points } => self.append_points(points),
            Command::EndStroke => self.end_stroke(),
            Command::GroupElement => self.group_element(false),
            Command::ApplyEffect {
                params,
                element_ids,
                tracker_ids,
            } => self.apply_effect(params, element_ids, tracker_ids),
            Command::SetParam {
                effect_id,
                key,
                value,
            } => self.set_param(&effect_id, &key, value),
            Command::AddFlipbookFrame => self.group_element(true),
            Command::SaveFlipbook => self.save_flipbook(),
            Command::Undo => self.undo(),
        };
        match result {
            Ok(events) => events,
            Err(e) => vec![e],
        }
    }

    /// Advances one frame while playing. A paused session keeps its overlay.
    pub fn step(&mut self) -> (FrameOverlay, Vec<Event>) {
        if self.mode == Mode::Paused {
            return (self.overlay.clone(), Vec::new());
        }
        let index = self.next_frame;
        let frame = match self.source.fetch(index) {
            Fetch::Frame(f) => f,
            Fetch::Pending => return (self.overlay.clone(), Vec::new()),
            Fetch::End => {
                self.mode = Mode::Paused;
                return (
                    self.overlay.clone(),
                    vec![
                        Event::EndOfStream,
                        Event::ModeChanged { mode: Mode::Paused },
                    ],
                );
            }
        };
        match self.engine.step(index, &frame.input()) {
            Ok(overlay) => {
                self.overlay = overlay;
                self.current = Some((index, frame));
                self.next_frame = index + 1;
                (self.overlay.clone(), Vec::new())
            }
            Err(e) => {
                self.mode = Mode::Paused;
                let code = match &e {
                    crate::engine::EngineError::SizeMismatch { .. } => "size-mismatch",
                    crate::engine::EngineError::Render(r) => r.code(),
                };
                (
                    self.overlay.clone(),
                    vec![
                        Event::error(code, e.to_string()),
                        Event::ModeChanged { mode: Mode::Paused },
                    ],
                )
            }
        }
    }

    fn set_mode(&mut self, mode: Mode) -> Vec<Event> {
        self.mode = mode;
        vec![Event::ModeChanged { mode }]
    }

    fn next_id(&mut self, prefix: &str) -> String {
        loop {
            let id = format!("{prefix}{}", self.counter);
            self.counter += 1;
            if !self.scene().contains_id(&id) {
                return id;
            }
        }
    }

    /// Validates and installs `scene`, remembering the current one for undo.
    fn commit(&mut self, scene: Scene) -> Outcome {
        if let Some(d) = validate_scene(&scene).first() {
            return Err(Event::diagnostic(d));
        }
        let previous = self.engine.scene().clone();
        if self.undo.len() == UNDO_DEPTH {
            self.undo.remove(0);
        }
        self.undo.push(previous);
        self.engine.set_scene(scene);
        self.refresh_overlay();
        Ok(())
    }

    fn select_track_point(&mut self, click: Point2, kind: TrackPointKind) -> Outcome<Vec<Event>> {
        let (_, frame) = self
            .current
            .as_ref()
            .ok_or_else(|| Event::error("no-frame", "no frame is shown yet"))?;
        let (spec_kind, position) = match kind {
            TrackPointKind::Color => {
                let window = sample_color_window(&frame.image, click)
                    .map_err(|e| Event::error(e.code(), e.to_string()))?;
                let centroid =
                    largest_component_centroid(&segment_by_window(&frame.image, &window))
                        .expect("the sampled pixel is inside its own window");
                (
                    TrackerKind::ColorBlob {
                        seed: click,
                        window,
                    },
                    centroid,
                )
            }
            TrackPointKind::Body => {
                let pose = frame
                    .pose
                    .as_ref()
                    .ok_or_else(|| Event::error("no-pose", "no pose for this frame"))?;
                let index = nearest_keypoint(pose, click)
                    .map_err(|e| Event::error(e.code(), e.to_string()))?;
                let position = pose.visible(index).expect("nearest keypoint is visible");
                (TrackerKind::Keypoint { index: index as u8 }, position)
            }
        };
        let id = self.next_id("t");
        let mut scene = self.scene().clone();
        scene.trackers.push(TrackerSpec {
            id: id.clone(),
            kind: spec_kind,
        });
        self.commit(scene)?;
        self.engine.seed_tracker(&id, position);
        self.selection.push(id.clone());
        Ok(vec![Event::TrackPointConfirmed {
            tracker_id: id,
            position,
        }])
    }

    fn check_can_draw(&self) -> Outcome {
        if self.source_mode == SourceMode::Recorded && self.mode == Mode::Playing {
            return Err(Event::error(
                "not-paused",
                "pause the video before sketching",
            ));
        }
        Ok(())
    }

    fn begin_stroke(&mut self, style: StrokeStyle) -> Outcome<Vec<Event>> {
        self.check_can_draw()?;
        if self.open_stroke.is_some() {
            return Err(Event::error("stroke-open", "a stroke is already open"));
        }
        if !(style.width.is_finite() && style.width > 0.0) {
            return Err(Event::error(
                "stroke-width",
                "stroke width must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&style.opacity) {
            return Err(Event::error("stroke-opacity", "opacity must lie in [0, 1]"));
        }
        self.open_stroke = Some(Stroke {
            points: Vec::new(),
            style,
        });
        Ok(vec![Event::StrokeStarted])
    }

    fn append_points(&mut self, points: Vec<Point2>) -> Outcome<Vec<Event>> {
        self.check_can_draw()?;
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Event::error("non-finite", "stroke points must be finite"));
        }
        let stroke = self
            .open_stroke
            .as_mut()
            .ok_or_else(|| Event::error("no-open-stroke", "begin a stroke first"))?;
        stroke.points.extend(points);
        Ok(Vec::new())
    }

    fn end_stroke(&mut self) -> Outcome<Vec<Event>> {
        self.check_can_draw()?;
        let stroke = self
            .open_stroke
            .take()
            .ok_or_else(|| Event::error("no-open-stroke", "begin a stroke first"))?;
        if stroke.points.len() < 2 {
            return Err(Event::error(
                "stroke-too-short",
                "a stroke needs at least 2 points",
            ));
        }
        let points = stroke.points.len();
        self.draft.push(stroke);
        Ok(vec![Event::StrokeEnded { points }])
    }

    fn group_element(&mut self, as_flipbook_frame: bool) -> Outcome<Vec<Event>> {
        if self.draft.is_empty() {
            return Err(Event::error("no-strokes", "draw at least one stroke first"));
        }
        let id = self.next_id("e");
        let strokes = self.draft.clone();
        let local_origin = SketchElement::bbox_center(&strokes);
        let mut scene = self.scene().clone();
        scene.elements.push(SketchElement {
            id: id.clone(),
            strokes,
            local_origin,
        });
        self.commit(scene)?;
        self.draft.clear();
        if as_flipbook_frame {
            self.flipbook.push(id.clone());
        }
        Ok(vec![Event::ElementCreated { id }])
    }

    fn last_elements(&self, n: usize) -> Vec<String> {
        let els = &self.scene().elements;
        els[els.len().saturating_sub(n)..]
            .iter()
            .map(|e| e.id.clone())
            .collect()
    }

    fn last_selected(&self, n: usize) -> Vec<String> {
        self.selection[self.selection.len().saturating_sub(n)..].to_vec()
    }

    fn tracker_position(&self, id: Option<&String>) -> Option<Point2> {
        id.and_then(|id| self.engine.tracker_state(id))
            .and_then(|t| t.last_position)
    }

    fn apply_effect(
        &mut self,
        mut params: EffectParams,
        element_ids: Option<Vec<String>>,
        tracker_ids: Option<Vec<String>>,
    ) -> Outcome<Vec<Event>> {
        let kind = params.kind();
        let uses_draft_frames =
            matches!(kind, EffectKind::FlipBook | EffectKind::Trigger) && !self.flipbook.is_empty();
        let element_ids = element_ids.unwrap_or_else(|| match kind {
            EffectKind::Contour => Vec::new(),
            _ if uses_draft_frames => self.flipbook.clone(),
            _ => self.last_elements(1),
        });
        let tracker_ids = tracker_ids.unwrap_or_else(|| match &params {
            EffectParams::Trigger(_) => self.last_selected(2),
            EffectParams::Contour(p) if p.source == crate::model::ContourSource::Body => Vec::new(),
            _ => self.last_selected(1),
        });
        let mut consumed_draft = false;
        let first = self.tracker_position(tracker_ids.first());
        match &mut params {
            EffectParams::Binding(p) => p.anchor = p.anchor.or(first),
            EffectParams::FlipBook(p) => p.anchor = p.anchor.or(first),
            EffectParams::Trigger(p) => {
                let bound = self.tracker_position(p.bind_to.as_ref());
                p.anchor = p.anchor.or(bound);
            }
            EffectParams::Particles(p) => {
                p.anchor = p.anchor.or(first);
                if p.emitter.is_empty() {
                    if let Some(stroke) = self.draft.last() {
                        p.emitter = stroke.points.clone();
                        consumed_draft = true;
                    }
                }
            }
            EffectParams::Trajectory(_) | EffectParams::Contour(_) => {}
        }
        let id = self.next_id("fx");
        let mut scene = self.scene().clone();
        scene.effects.push(EffectSpec {
            id: id.clone(),
            element_ids,
            tracker_ids,
            params,
        });
        self.commit(scene)?;
        if consumed_draft {
            self.draft.pop();
        }
        if uses_draft_frames {
            self.flipbook.clear();
        }
        Ok(vec![Event::EffectApplied { id }])
    }

    fn save_flipbook(&mut self) -> Outcome<Vec<Event>> {
        if self.flipbook.is_empty() {
            return Err(Event::error(
                "no-flipbook-frames",
                "add at least one flip-book frame first",
            ));
        }
        let trackers = self.last_selected(1);
        self.apply_effect(
            EffectParams::FlipBook(FlipBookParams::default()),
            None,
            Some(trackers),
        )
    }

    fn set_param(&mut self, effect_id: &str, key: &str, value: Value) -> Outcome<Vec<Event>> {
        let mut scene = self.scene().clone();
        let effect = scene
            .effects
            .iter_mut()
            .find(|e| e.id == effect_id)
            .ok_or_else(|| Event::error("unknown-effect", format!("no effect {effect_id:?}")))?;
        if key == "kind" {
            return Err(Event::error(
                "unknown-param",
                "an effect's kind cannot change",
            ));
        }
        let mut doc = serde_json::to_value(&effect.params).expect("params always serialize");
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| {
                    Event::error(
                        "unknown-param",
                        format!("{} has no parameter {key:?}", effect.id),
                    )
                })?;
        }
        *slot = value;
        effect.params = serde_json::from_value(doc)
            .map_err(|e| Event::error("param-type", format!("{key}: {e}")))?;
        self.commit(scene)?;
        Ok(vec![Event::ParamChanged {
            effect_id: effect_id.into(),
            key: key.into(),
        }])
    }

    fn undo(&mut self) -> Outcome<Vec<Event>> {
        let previous = self
            .undo
            .pop()
            .ok_or_else(|| Event::error("nothing-to-undo", "undo stack is empty"))?;
        self.engine.set_scene(previous);
        let scene = self.engine.scene();
        self.selection.retain(|id| scene.tracker(id).is_some());
        self.flipbook.retain(|id| scene.element(id).is_some());
        self.refresh_overlay();
        Ok(vec![Event::Undone])
    }
}

/// A recorded sequence of session inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TranscriptEntry {
    Command { command: Command },
    Step,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn command(&mut self, command: Command) -> &mut Self {
        self.entries.push(TranscriptEntry::Command { command });
        self
    }

    pub fn steps(&mut self, n: usize) -> &mut Self {
        self.entries
            .extend(std::iter::repeat_n(TranscriptEntry::Step, n));
        self
    }

    pub fn commands(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e, TranscriptEntry::Command { .. }))
            .count()
    }
}

/// Everything a replay produced, in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayLog {
    /// SVG overlay after every step entry.
    pub overlays: Vec<String>,
    pub events: Vec<Event>,
}

/// Feeds a transcript through a session.
pub fn replay(session: &mut Session, transcript: &Transcript) -> ReplayLog {
    let mut log = ReplayLog::default();
    for entry in &transcript.entries {
        match entry {
            TranscriptEntry::Command { command } => {
                log.events.extend(session.apply(command.clone()))
            }
            TranscriptEntry::Step => {
                let (overlay, events) = session.step();
                log.overlays
                    .push(emit_svg(&overlay, session.scene().frame_size));
                log.events.extend(events);
            }
        }
    }
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BindingParams, FrameSize, TriggerParams};
    use image::Rgb;

    fn frames() -> MemorySource {
        let frames = (0..5u32)
            .map(|i| {
                let mut img = RgbImage::from_pixel(80, 60, Rgb([20, 20, 20]));
                for y in 20..30 {
                    for x in 10 + 4 * i..20 + 4 * i {
                        img.put_pixel(x, y, Rgb([220, 30, 30]));
                    }
                }
                FrameData::image(img)
            })
            .collect();
        MemorySource { frames }
    }

    fn session() -> Session {
        Session::new(
            Scene::empty(FrameSize::new(80, 60), 0),
            30.0,
            Box::new(frames()),
        )
    }

    fn error_code(events: &[Event]) -> Option<&str> {
        events.iter().find_map(|e| match e {
            Event::Error { code, .. } => Some(code.as_str()),
            _ => None,
        })
    }

    fn draw(s: &mut Session, pts: &[(f64, f64)]) {
        s.apply(Command::BeginStroke {
            style: StrokeStyle::default(),
        });
        s.apply(Command::AppendPoints {
            points: pts.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
        });
        s.apply(Command::EndStroke);
    }

    #[test]
    fn color_selection_confirms_at_blob_centroid() {
        let mut s = session();
        let events = s.apply(Command::SelectTrackPoint {
            x: 12.0,
            y: 22.0,
            kind: TrackPointKind::Color,
        });
        assert_eq!(
            events,
            vec![Event::TrackPointConfirmed {
                tracker_id: "t0".into(),
                position: Point2::new(14.5, 24.5)
            }]
        );
    }

    #[test]
    fn append_without_stroke_is_an_error() {
        let mut s = session();
        let events = s.apply(Command::AppendPoints {
            points: vec![Point2::ORIGIN],
        });
        assert_eq!(error_code(&events), Some("no-open-stroke"));
    }

    #[test]
    fn trigger_with_one_tracker_is_rejected() {
        let mut s = session();
        s.apply(Command::SelectTrackPoint {
            x: 12.0,
            y: 22.0,
            kind: TrackPointKind::Color,
        });
        draw(&mut s, &[(1.0, 1.0), (5.0, 5.0)]);
        s.apply(Command::GroupElement);
        let before = s.scene().clone();
        let events = s.apply(Command::ApplyEffect {
            params: EffectParams::Trigger(TriggerParams::default()),
            element_ids: None,
            tracker_ids: None,
        });
        assert_eq!(error_code(&events), Some("trigger-arity"));
        assert_eq!(s.scene(), &before);
    }

    #[test]
    fn bound_sketch_follows_after_resume() {
        let mut s = session();
        s.apply(Command::SelectTrackPoint {
            x: 12.0,
            y: 22.0,
            kind: TrackPointKind::Color,
        });
        draw(&mut s, &[(14.0, 10.0), (16.0, 10.0)]);
        s.apply(Command::GroupElement);
        let events = s.apply(Command::ApplyEffect {
            params: EffectParams::Binding(BindingParams::default()),
            element_ids: None,
            tracker_ids: None,
        });
        assert_eq!(events, vec![Event::EffectApplied { id: "fx2".into() }]);
        s.apply(Command::ResumeVideo);
        let mut last = None;
        for _ in 0..3 {
            last = Some(s.step().0);
        }
        let crate::render::Drawable::Path(p) = &last.unwrap().drawables[0] else {
            panic!()
        };
        assert_eq!((p.transform.dx, p.transform.dy), (8.0, 0.0));
    }

    #[test]
    fn strokes_need_pause_in_recorded_mode() {
        let mut s = session();
        s.apply(Command::ResumeVideo);
        let events = s.apply(Command::BeginStroke {
            style: StrokeStyle::default(),
        });
        assert_eq!(error_code(&events), Some("not-paused"));
    }

    #[test]
    fn paused_step_is_a_no_op() {
        let mut s = session();
        let before = s.overlay().clone();
        assert_eq!(s.step(), (before, vec![]));
        assert_eq!(s.next_frame(), 0);
    }

    #[test]
    fn end_of_stream_pauses() {
        let mut s = session();
        s.apply(Command::ResumeVideo);
        for _ in 0..5 {
            assert!(s.step().1.is_empty());
        }
        let (_, events) = s.step();
        assert_eq!(events[0], Event::EndOfStream);
        assert_eq!(s.mode(), Mode::Paused);
    }

    #[test]
    fn undo_restores_previous_scene() {
        let mut s = session();
        let empty = s.scene().clone();
        draw(&mut s, &[(1.0, 1.0), (5.0, 5.0)]);
        s.apply(Command::GroupElement);
        assert_eq!(s.apply(Command::Undo), vec![Event::Undone]);
        assert_eq!(s.scene(), &empty);
        assert_eq!(error_code(&s.apply(Command::Undo)), Some("nothing-to-undo"));
    }

    #[test]
    fn set_param_edits_nested_keys() {
        let mut s = session();
        s.apply(Command::SelectTrackPoint {
            x: 12.0,
            y: 22.0,
            kind: TrackPointKind::Color,
        });
        s.apply(Command::ApplyEffect {
            params: EffectParams::Contour(Default::default()),
            element_ids: None,
            tracker_ids: None,
        });
        let ok = s.apply(Command::SetParam {
            effect_id: "fx1".into(),
            key: "epsilon".into(),
            value: 3.5.into(),
        });
        assert_eq!(ok.len(), 1);
        let EffectParams::Contour(p) = &s.scene().effects[0].params else {
            panic!()
        };
        assert_eq!(p.epsilon, 3.5);
        let bad = s.apply(Command::SetParam {
            effect_id: "fx1".into(),
            key: "epsilon".into(),
            value: (-1.0).into(),
        });
        assert_eq!(error_code(&bad), Some("param-range"));
        let missing = s.apply(Command::SetParam {
            effect_id: "fx1".into(),
            key: "nope".into(),
            value: 1.into(),
        });
        assert_eq!(error_code(&missing), Some("unknown-param"));
    }
}
