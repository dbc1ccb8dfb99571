//! Scene document, geometry primitives and scene validation.
//!
//! Coordinates are frame pixels with the origin at the top-left corner and
//! `y` growing downward. Every type here is a plain value: a scene is edited
//! by building a new one, never by mutating shared state.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::tracking::ColorWindow;

/// A position in frame pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// 8-bit straight-alpha color, written as `#rrggbbaa` in documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgba {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: u8,
}

impl Rgba {
    pub const BLACK: Rgba = Rgba::new(0, 0, 0, 255);
    pub const WHITE: Rgba = Rgba::new(255, 255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8, a: u8) -> Self {
        Self { r, g, b, a }
    }

    pub const fn opaque(r: u8, g: u8, b: u8) -> Self {
        Self::new(r, g, b, 255)
    }

    /// `#rrggbb`, the alpha channel is carried separately in SVG.
    pub fn hex_rgb(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }

    pub fn alpha_f64(self) -> f64 {
        self.a as f64 / 255.0
    }
}

impl fmt::Display for Rgba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "#{:02x}{:02x}{:02x}{:02x}",
            self.r, self.g, self.b, self.a
        )
    }
}

impl std::str::FromStr for Rgba {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix('#')
            .ok_or_else(|| format!("color {s:?} must start with '#'"))?;
        if !hex.is_ascii() || (hex.len() != 6 && hex.len() != 8) {
            return Err(format!("color {s:?} must be #rrggbb or #rrggbbaa"));
        }
        let byte = |i: usize| {
            u8::from_str_radix(&hex[i..i + 2], 16).map_err(|e| format!("color {s:?}: {e}"))
        };
        let a = if hex.len() == 8 { byte(6)? } else { 255 };
        Ok(Rgba::new(byte(0)?, byte(2)?, byte(4)?, a))
    }
}

impl Serialize for Rgba {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgba {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeStyle {
    pub color: Rgba,
    pub width: f64,
    pub opacity: f64,
}

impl Default for StrokeStyle {
    fn default() -> Self {
        Self {
            color: Rgba::BLACK,
            width: 4.0,
            opacity: 1.0,
        }
    }
}

/// One freehand polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub points: Vec<Point2>,
    pub style: StrokeStyle,
}

/// A group of strokes that effects bind, clone and toggle as one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchElement {
    pub id: String,
    pub strokes: Vec<Stroke>,
    /// Reference point for placement and scaling of clones.
    pub local_origin: Point2,
}

impl SketchElement {
    /// Center of the bounding box of all stroke points.
    pub fn bbox_center(strokes: &[Stroke]) -> Point2 {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in strokes.iter().flat_map(|s| &s.points) {
            min = Point2::new(min.x.min(p.x), min.y.min(p.y));
            max = Point2::new(max.x.max(p.x), max.y.max(p.y));
        }
        if min.x > max.x {
            return Point2::ORIGIN;
        }
        min.lerp(max, 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrackerKind {
    /// Follows the largest blob inside a color window sampled at `seed`.
    ColorBlob { seed: Point2, window: ColorWindow },
    /// Follows one of the 33 skeleton keypoints of an ingested pose track.
    Keypoint { index: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerSpec {
    pub id: String,
    pub kind: TrackerKind,
}

pub const KEYPOINT_COUNT: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Binding,
    FlipBook,
    Trigger,
    Particles,
    Trajectory,
    Contour,
}

impl EffectKind {
    pub const ALL: [EffectKind; 6] = [
        EffectKind::Binding,
        EffectKind::FlipBook,
        EffectKind::Trigger,
        EffectKind::Particles,
        EffectKind::Trajectory,
        EffectKind::Contour,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EffectKind::Binding => "binding",
            EffectKind::FlipBook => "flip_book",
            EffectKind::Trigger => "trigger",
            EffectKind::Particles => "particles",
            EffectKind::Trajectory => "trajectory",
            EffectKind::Contour => "contour",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BindingParams {
    /// Tracker position at bind time; taken from the first fix when absent.
    pub anchor: Option<Point2>,
}

/// Frames are the effect's `element_ids`, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlipBookParams {
    pub fps: f64,
    pub anchor: Option<Point2>,
}

impl Default for FlipBookParams {
    fn default() -> Self {
        Self {
            fps: 8.0,
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerDirection {
    /// Fire when the distance drops below the threshold.
    #[default]
    Decrease,
    /// Fire when the distance rises above the threshold.
    Increase,
}

/// The payload is the effect's `element_ids`, played once as a flip-book,
/// plus any `gates` effects that are only shown while the payload plays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerParams {
    pub threshold: f64,
    pub direction: TriggerDirection,
    pub payload_fps: f64,
    /// Minimum playback time, so single-frame payloads stay on screen.
    pub hold_seconds: f64,
    pub gates: Vec<String>,
    /// Payload follows this tracker when set; otherwise it stays where drawn.
    pub bind_to: Option<String>,
    pub anchor: Option<Point2>,
}

impl Default for TriggerParams {
    fn default() -> Self {
        Self {
            threshold: 60.0,
            direction: TriggerDirection::Decrease,
            payload_fps: 8.0,
            hold_seconds: 0.5,
            gates: Vec::new(),
            bind_to: None,
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleParams {
    /// Emitter polyline as drawn, relative to the tracker position at bind time.
    pub emitter: Vec<Point2>,
    pub spawn_rate: f64,
    pub speed: f64,
    /// Path shape every particle follows, relative to its first point.
    pub motion_path: Option<Vec<Point2>>,
    pub lifetime: f64,
    /// Travel direction without a motion path; 90 degrees is straight down.
    pub direction_deg: f64,
    /// Wrap around the motion path instead of despawning at its end.
    pub loop_path: bool,
    pub anchor: Option<Point2>,
}

impl Default for ParticleParams {
    fn default() -> Self {
        Self {
            emitter: Vec::new(),
            spawn_rate: 10.0,
            speed: 60.0,
            motion_path: None,
            lifetime: 2.0,
            direction_deg: 90.0,
            loop_path: false,
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryParams {
    pub max_elements: usize,
    pub fade: f64,
    pub scale_step: f64,
    /// Append a clone every `stride` engine frames.
    pub stride: u32,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            max_elements: 30,
            fade: 0.95,
            scale_step: 1.0,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourSource {
    /// Mask of the effect's color tracker.
    #[default]
    Object,
    /// Ingested body segmentation mask.
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContourMode {
    Static,
    Animated {
        window_fraction: f64,
        cycles_per_second: f64,
    },
}

impl ContourMode {
    pub const DEFAULT_ANIMATED: ContourMode = ContourMode::Animated {
        window_fraction: 0.25,
        cycles_per_second: 0.5,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContourParams {
    pub source: ContourSource,
    pub mode: ContourMode,
    pub stroke: StrokeStyle,
    pub fill: Option<Rgba>,
    pub epsilon: f64,
}

impl Default for ContourParams {
    fn default() -> Self {
        Self {
            source: ContourSource::Object,
            mode: ContourMode::Static,
            stroke: StrokeStyle {
                color: Rgba::WHITE,
                width: 4.0,
                opacity: 1.0,
            },
            fill: None,
            epsilon: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectParams {
    Binding(BindingParams),
    FlipBook(FlipBookParams),
    Trigger(TriggerParams),
    Particles(ParticleParams),
    Trajectory(TrajectoryParams),
    Contour(ContourParams),
}

impl EffectParams {
    pub fn kind(&self) -> EffectKind {
        match self {
            EffectParams::Binding(_) => EffectKind::Binding,
            EffectParams::FlipBook(_) => EffectKind::FlipBook,
            EffectParams::Trigger(_) => EffectKind::Trigger,
            EffectParams::Particles(_) => EffectKind::Particles,
            EffectParams::Trajectory(_) => EffectKind::Trajectory,
            EffectParams::Contour(_) => EffectKind::Contour,
        }
    }

    pub fn default_for(kind: EffectKind) -> Self {
        match kind {
            EffectKind::Binding => EffectParams::Binding(Default::default()),
            EffectKind::FlipBook => EffectParams::FlipBook(Default::default()),
            EffectKind::Trigger => EffectParams::Trigger(Default::default()),
            EffectKind::Particles => EffectParams::Particles(Default::default()),
            EffectKind::Trajectory => EffectParams::Trajectory(Default::default()),
            EffectKind::Contour => EffectParams::Contour(Default::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSpec {
    pub id: String,
    #[serde(default)]
    pub element_ids: Vec<String>,
    #[serde(default)]
    pub tracker_ids: Vec<String>,
    pub params: EffectParams,
}

impl EffectSpec {
    pub fn kind(&self) -> EffectKind {
        self.params.kind()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSize {
    pub width: u32,
    pub height: u32,
}

impl FrameSize {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn contains(self, p: Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub frame_size: FrameSize,
    #[serde(default)]
    pub elements: Vec<SketchElement>,
    #[serde(default)]
    pub trackers: Vec<TrackerSpec>,
    #[serde(default)]
    pub effects: Vec<EffectSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl Scene {
    pub fn empty(frame_size: FrameSize, seed: u64) -> Self {
        Self {
            frame_size,
            elements: Vec::new(),
            trackers: Vec::new(),
            effects: Vec::new(),
            seed,
        }
    }

    pub fn element(&self, id: &str) -> Option<&SketchElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn tracker(&self, id: &str) -> Option<&TrackerSpec> {
        self.trackers.iter().find(|t| t.id == id)
    }

    pub fn effect(&self, id: &str) -> Option<&EffectSpec> {
        self.effects.iter().find(|e| e.id == id)
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.element(id).is_some() || self.tracker(id).is_some() || self.effect(id).is_some()
    }
}

/// Name of a violated scene rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    FrameSize,
    InvalidId,
    DuplicateId,
    DanglingElement,
    DanglingTracker,
    DanglingEffect,
    EmptyElement,
    StrokePoints,
    StrokeWidth,
    StrokeOpacity,
    NonFinite,
    KeypointIndex,
    SeedOutsideFrame,
    ColorWindow,
    BindingArity,
    FlipbookArity,
    TriggerArity,
    ParticlesArity,
    TrajectoryArity,
    ContourArity,
    ParamRange,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::FrameSize => "frame-size",
            Rule::InvalidId => "invalid-id",
            Rule::DuplicateId => "duplicate-id",
            Rule::DanglingElement => "dangling-element",
            Rule::DanglingTracker => "dangling-tracker",
            Rule::DanglingEffect => "dangling-effect",
            Rule::EmptyElement => "empty-element",
            Rule::StrokePoints => "stroke-points",
            Rule::StrokeWidth => "stroke-width",
            Rule::StrokeOpacity => "stroke-opacity",
            Rule::NonFinite => "non-finite",
            Rule::KeypointIndex => "keypoint-index",
            Rule::SeedOutsideFrame => "seed-outside-frame",
            Rule::ColorWindow => "color-window",
            Rule::BindingArity => "binding-arity",
            Rule::FlipbookArity => "flipbook-arity",
            Rule::TriggerArity => "trigger-arity",
            Rule::ParticlesArity => "particles-arity",
            Rule::TrajectoryArity => "trajectory-arity",
            Rule::ContourArity => "contour-arity",
            Rule::ParamRange => "param-range",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: Rule,
    /// Offending element, tracker or effect id; `"scene"` for scene-level rules.
    pub id: String,
    pub detail: String,
}

impl Diagnostic {
    fn new(rule: Rule, id: &str, detail: impl Into<String>) -> Self {
        Self {
            rule,
            id: id.to_owned(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.rule, self.id, self.detail)
    }
}

/// Checks every scene invariant. An empty result means the scene is valid.
pub fn validate_scene(scene: &Scene) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let size = scene.frame_size;
    if size.width == 0 || size.height == 0 {
        out.push(Diagnostic::new(
            Rule::FrameSize,
            "scene",
            "frame size must be positive",
        ));
    }

    let mut seen = HashSet::new();
    let ids = scene
        .elements
        .iter()
        .map(|e| &e.id)
        .chain(scene.trackers.iter().map(|t| &t.id))
        .chain(scene.effects.iter().map(|e| &e.id));
    for id in ids {
        if id.is_empty() {
            out.push(Diagnostic::new(
                Rule::InvalidId,
                id,
                "ids must be non-empty",
            ));
        } else if !seen.insert(id.as_str()) {
            out.push(Diagnostic::new(
                Rule::DuplicateId,
                id,
                "id is used more than once",
            ));
        }
    }

    for element in &scene.elements {
        check_element(element, &mut out);
    }

    let trackers: HashMap<&str, &TrackerSpec> =
        scene.trackers.iter().map(|t| (t.id.as_str(), t)).collect();
    for tracker in &scene.trackers {
        match &tracker.kind {
            TrackerKind::Keypoint { index } => {
                if *index as usize >= KEYPOINT_COUNT {
                    out.push(Diagnostic::new(
                        Rule::KeypointIndex,
                        &tracker.id,
                        format!("index {index} is outside 0..=32"),
                    ));
                }
            }
            TrackerKind::ColorBlob { seed, window } => {
                if !seed.is_finite() {
                    out.push(Diagnostic::new(
                        Rule::NonFinite,
                        &tracker.id,
                        "seed point is not finite",
                    ));
                } else if !size.contains(*seed) {
                    out.push(Diagnostic::new(
                        Rule::SeedOutsideFrame,
                        &tracker.id,
                        "seed point lies outside the frame",
                    ));
                }
                if !window.is_well_formed() {
                    out.push(Diagnostic::new(
                        Rule::ColorWindow,
                        &tracker.id,
                        "window bound has lo > hi",
                    ));
                }
            }
        }
    }

    let effect_kinds: HashMap<&str, EffectKind> = scene
        .effects
        .iter()
        .map(|e| (e.id.as_str(), e.kind()))
        .collect();
    for effect in &scene.effects {
        for id in &effect.element_ids {
            if scene.element(id).is_none() {
                out.push(Diagnostic::new(
                    Rule::DanglingElement,
                    &effect.id,
                    format!("unknown element {id:?}"),
                ));
            }
        }
        for id in &effect.tracker_ids {
            if !trackers.contains_key(id.as_str()) {
                out.push(Diagnostic::new(
                    Rule::DanglingTracker,
                    &effect.id,
                    format!("unknown tracker {id:?}"),
                ));
            }
        }
        check_effect(effect, &trackers, &effect_kinds, &mut out);
    }
    out
}

fn check_element(element: &SketchElement, out: &mut Vec<Diagnostic>) {
    let id = element.id.as_str();
    if element.strokes.is_empty() {
        out.push(Diagnostic::new(
            Rule::EmptyElement,
            id,
            "element has no strokes",
        ));
    }
    if !element.local_origin.is_finite() {
        out.push(Diagnostic::new(
            Rule::NonFinite,
            id,
            "local origin is not finite",
        ));
    }
    for (i, stroke) in element.strokes.iter().enumerate() {
        if stroke.points.len() < 2 {
            out.push(Diagnostic::new(
                Rule::StrokePoints,
                id,
                format!("stroke {i} has fewer than 2 points"),
            ));
        }
        if stroke.points.iter().any(|p| !p.is_finite()) {
            out.push(Diagnostic::new(
                Rule::NonFinite,
                id,
                format!("stroke {i} has a non-finite point"),
            ));
        }
        check_style(&stroke.style, id, out);
    }
}

fn check_style(style: &StrokeStyle, id: &str, out: &mut Vec<Diagnostic>) {
    if !(style.width.is_finite() && style.width > 0.0) {
        out.push(Diagnostic::new(
            Rule::StrokeWidth,
            id,
            "stroke width must be positive",
        ));
    }
    if !(0.0..=1.0).contains(&style.opacity) {
        out.push(Diagnostic::new(
            Rule::StrokeOpacity,
            id,
            "opacity must lie in [0, 1]",
        ));
    }
}

fn check_effect(
    effect: &EffectSpec,
    trackers: &HashMap<&str, &TrackerSpec>,
    effect_kinds: &HashMap<&str, EffectKind>,
    out: &mut Vec<Diagnostic>,
) {
    let id = effect.id.as_str();
    let n_trackers = effect.tracker_ids.len();
    let n_elements = effect.element_ids.len();
    let mut arity = |ok: bool, rule: Rule, detail: &str| {
        if !ok {
            out.push(Diagnostic::new(rule, id, detail));
        }
    };
    match &effect.params {
        EffectParams::Binding(_) => {
            arity(
                n_trackers == 1,
                Rule::BindingArity,
                "binding needs exactly 1 tracker",
            );
            arity(
                n_elements >= 1,
                Rule::BindingArity,
                "binding needs at least 1 element",
            );
        }
        EffectParams::FlipBook(_) => {
            arity(
                n_elements >= 1,
                Rule::FlipbookArity,
                "flip-book needs at least 1 frame",
            );
            arity(
                n_trackers <= 1,
                Rule::FlipbookArity,
                "flip-book binds to at most 1 tracker",
            );
        }
        EffectParams::Trigger(p) => {
            arity(
                n_trackers == 2,
                Rule::TriggerArity,
                "trigger needs exactly 2 trackers",
            );
            arity(
                n_elements >= 1 || !p.gates.is_empty(),
                Rule::TriggerArity,
                "trigger needs a payload",
            );
        }
        EffectParams::Particles(p) => {
            arity(
                n_trackers == 1,
                Rule::ParticlesArity,
                "particles need exactly 1 tracker",
            );
            arity(
                n_elements == 1,
                Rule::ParticlesArity,
                "particles need exactly 1 template element",
            );
            arity(
                p.emitter.len() >= 2,
                Rule::ParticlesArity,
                "emitter needs at least 2 points",
            );
        }
        EffectParams::Trajectory(_) => {
            arity(
                n_trackers == 1,
                Rule::TrajectoryArity,
                "trajectory needs exactly 1 tracker",
            );
            arity(
                n_elements == 1,
                Rule::TrajectoryArity,
                "trajectory needs exactly 1 template element",
            );
        }
        EffectParams::Contour(p) => {
            arity(
                n_elements == 0,
                Rule::ContourArity,
                "contour takes no elements",
            );
            match p.source {
                ContourSource::Object => {
                    let is_color = effect
                        .tracker_ids
                        .first()
                        .and_then(|t| trackers.get(t.as_str()))
                        .map(|t| matches!(t.kind, TrackerKind::ColorBlob { .. }));
                    arity(
                        n_trackers == 1 && is_color != Some(false),
                        Rule::ContourArity,
                        "object contour needs exactly 1 color tracker",
                    );
                }
                ContourSource::Body => {
                    arity(
                        n_trackers <= 1,
                        Rule::ContourArity,
                        "body contour takes at most 1 tracker",
                    );
                }
            }
        }
    }
    check_params(effect, trackers, effect_kinds, out);
}

fn check_params(
    effect: &EffectSpec,
    trackers: &HashMap<&str, &TrackerSpec>,
    effect_kinds: &HashMap<&str, EffectKind>,
    out: &mut Vec<Diagnostic>,
) {
    let id = effect.id.as_str();
    let mut range = |ok: bool, detail: &str| {
        if !ok {
            out.push(Diagnostic::new(Rule::ParamRange, id, detail));
        }
    };
    let positive = |v: f64| v.is_finite() && v > 0.0;
    let unit = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
    let finite_anchor = |a: &Option<Point2>| a.is_none_or(|p| p.is_finite());
    match &effect.params {
        EffectParams::Binding(p) => range(finite_anchor(&p.anchor), "anchor must be finite"),
        EffectParams::FlipBook(p) => {
            range(positive(p.fps), "fps must be positive");
            range(finite_anchor(&p.anchor), "anchor must be finite");
        }
        EffectParams::Trigger(p) => {
            range(positive(p.threshold), "threshold must be positive");
            range(positive(p.payload_fps), "payload_fps must be positive");
            range(
                p.hold_seconds.is_finite() && p.hold_seconds >= 0.0,
                "hold_seconds must be >= 0",
            );
            range(finite_anchor(&p.anchor), "anchor must be finite");
            for gate in &p.gates {
                match effect_kinds.get(gate.as_str()) {
                    None => out.push(Diagnostic::new(
                        Rule::DanglingEffect,
                        id,
                        format!("unknown gated effect {gate:?}"),
                    )),
                    Some(EffectKind::Trigger) => out.push(Diagnostic::new(
                        Rule::ParamRange,
                        id,
                        format!("trigger cannot gate trigger {gate:?}"),
                    )),
                    Some(_) => {}
                }
            }
            if let Some(t) = &p.bind_to {
                if !trackers.contains_key(t.as_str()) {
                    out.push(Diagnostic::new(
                        Rule::DanglingTracker,
                        id,
                        format!("unknown bind_to tracker {t:?}"),
                    ));
                }
            }
        }
        EffectParams::Particles(p) => {
            range(positive(p.spawn_rate), "spawn_rate must be positive");
            range(positive(p.speed), "speed must be positive");
            range(positive(p.lifetime), "lifetime must be positive");
            range(p.direction_deg.is_finite(), "direction must be finite");
            range(
                p.emitter.iter().all(|q| q.is_finite()),
                "emitter must be finite",
            );
            range(finite_anchor(&p.anchor), "anchor must be finite");
            if let Some(path) = &p.motion_path {
                range(path.len() >= 2, "motion path needs at least 2 points");
                range(
                    path.iter().all(|q| q.is_finite()),
                    "motion path must be finite",
                );
            }
        }
        EffectParams::Trajectory(p) => {
            range(p.max_elements >= 1, "max_elements must be >= 1");
            range(unit(p.fade), "fade must lie in (0, 1]");
            range(unit(p.scale_step), "scale_step must lie in (0, 1]");
            range(p.stride >= 1, "stride must be >= 1");
        }
        EffectParams::Contour(p) => {
            range(
                p.epsilon.is_finite() && p.epsilon >= 0.0,
                "epsilon must be >= 0",
            );
            if let ContourMode::Animated {
                window_fraction,
                cycles_per_second,
            } = p.mode
            {
                range(unit(window_fraction), "window_fraction must lie in (0, 1]");
                range(
                    positive(cycles_per_second),
                    "cycles_per_second must be positive",
                );
            }
            check_style(&p.stroke, id, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(id: &str) -> SketchElement {
        SketchElement {
            id: id.into(),
            strokes: vec![Stroke {
                points: vec![Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)],
                style: StrokeStyle::default(),
            }],
            local_origin: Point2::new(1.5, 1.5),
        }
    }

    fn keypoint(id: &str, index: u8) -> TrackerSpec {
        TrackerSpec {
            id: id.into(),
            kind: TrackerKind::Keypoint { index },
        }
    }

    fn rules(scene: &Scene) -> Vec<Rule> {
        validate_scene(scene).into_iter().map(|d| d.rule).collect()
    }

    #[test]
    fn empty_scene_is_valid() {
        assert!(validate_scene(&Scene::empty(FrameSize::new(64, 48), 0)).is_empty());
    }

    #[test]
    fn trigger_with_one_tracker() {
        let mut scene = Scene::empty(FrameSize::new(64, 48), 0);
        scene.elements.push(dot("e1"));
        scene.trackers.push(keypoint("t1", 15));
        scene.effects.push(EffectSpec {
            id: "fx".into(),
            element_ids: vec!["e1".into()],
            tracker_ids: vec!["t1".into()],
            params: EffectParams::default_for(EffectKind::Trigger),
        });
        let diags = validate_scene(&scene);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule, Rule::TriggerArity);
        assert_eq!(diags[0].id, "fx");
    }

    #[test]
    fn dangling_tracker() {
        let mut scene = Scene::empty(FrameSize::new(64, 48), 0);
        scene.elements.push(dot("e1"));
        scene.effects.push(EffectSpec {
            id: "bind".into(),
            element_ids: vec!["e1".into()],
            tracker_ids: vec!["ghost".into()],
            params: EffectParams::default_for(EffectKind::Binding),
        });
        assert_eq!(rules(&scene), vec![Rule::DanglingTracker]);
    }

    #[test]
    fn duplicate_ids_across_kinds() {
        let mut scene = Scene::empty(FrameSize::new(64, 48), 0);
        scene.elements.push(dot("x"));
        scene.trackers.push(keypoint("x", 0));
        assert_eq!(rules(&scene), vec![Rule::DuplicateId]);
    }

    #[test]
    fn keypoint_index_bound() {
        let mut scene = Scene::empty(FrameSize::new(64, 48), 0);
        scene.trackers.push(keypoint("k", 32));
        assert!(rules(&scene).is_empty());
        scene.trackers[0] = keypoint("k", 33);
        assert_eq!(rules(&scene), vec![Rule::KeypointIndex]);
    }

    #[test]
    fn stroke_rules() {
        let mut scene = Scene::empty(FrameSize::new(64, 48), 0);
        let mut e = dot("e");
        e.strokes[0].points.truncate(1);
        e.strokes[0].style.width = 0.0;
        e.strokes[0].style.opacity = 1.5;
        scene.elements.push(e);
        assert_eq!(
            rules(&scene),
            vec![Rule::StrokePoints, Rule::StrokeWidth, Rule::StrokeOpacity]
        );
    }

    #[test]
    fn seed_must_be_inside_frame() {
        let mut scene = Scene::empty(FrameSize::new(64, 48), 0);
        scene.trackers.push(TrackerSpec {
            id: "c".into(),
            kind: TrackerKind::ColorBlob {
                seed: Point2::new(64.0, 10.0),
                window: ColorWindow::from_sample([1, 2, 3]),
            },
        });
        assert_eq!(rules(&scene), vec![Rule::SeedOutsideFrame]);
    }

    #[test]
    fn object_contour_requires_color_tracker() {
        let mut scene = Scene::empty(FrameSize::new(64, 48), 0);
        scene.trackers.push(keypoint("k", 3));
        scene.effects.push(EffectSpec {
            id: "c".into(),
            element_ids: vec![],
            tracker_ids: vec!["k".into()],
            params: EffectParams::default_for(EffectKind::Contour),
        });
        assert_eq!(rules(&scene), vec![Rule::ContourArity]);
    }

    #[test]
    fn gates_must_resolve() {
        let mut scene = Scene::empty(FrameSize::new(64, 48), 0);
        scene.trackers.push(keypoint("a", 1));
        scene.trackers.push(keypoint("b", 2));
        let params = TriggerParams {
            gates: vec!["nope".into()],
            ..Default::default()
        };
        scene.effects.push(EffectSpec {
            id: "t".into(),
            element_ids: vec![],
            tracker_ids: vec!["a".into(), "b".into()],
            params: EffectParams::Trigger(params),
        });
        assert_eq!(rules(&scene), vec![Rule::DanglingEffect]);
    }

    #[test]
    fn rgba_hex_roundtrip() {
        let c: Rgba = "#0a0B0c80".parse().unwrap();
        assert_eq!(c, Rgba::new(10, 11, 12, 128));
        assert_eq!(c.to_string(), "#0a0b0c80");
        assert_eq!("#ffffff".parse::<Rgba>().unwrap(), Rgba::WHITE);
        assert!("ffffff".parse::<Rgba>().is_err());
        assert!("#ff".parse::<Rgba>().is_err());
    }
}
