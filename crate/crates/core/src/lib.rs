//! Deterministic scribble-animation engine.
//!
//! A [`Scene`] holds hand-drawn elements, trackers and effects. The
//! [`Engine`] steps it frame by frame over a video: trackers follow a
//! colored object or a body keypoint, effects animate the drawings
//! relative to them, and every frame resolves into a [`FrameOverlay`]
//! that can be written as SVG or composited onto the frame.

pub mod contour;
pub mod effects;
pub mod engine;
pub mod model;
pub mod render;
pub mod scene_io;
pub mod session;
pub mod synth;
pub mod tracking;

pub use contour::{extract_outer_contour, simplify_polyline, ContourError, ContourPolyline};
pub use effects::{EffectState, EffectStateKind, Transform};
pub use engine::{Engine, EngineError, FrameInput, StepTiming, DEFAULT_FPS};
pub use model::{
    validate_scene, Diagnostic, EffectKind, EffectParams, EffectSpec, FrameSize, Point2, Rgba,
    Rule, Scene, SketchElement, Stroke, StrokeStyle, TrackerKind, TrackerSpec,
};
pub use render::{composite, emit_svg, resolve_frame, Drawable, FrameOverlay, RenderError};
pub use scene_io::{parse_scene, serialize_scene, PoseTrack, SceneIoError};
pub use session::{Command, Event, Session, Transcript};
pub use tracking::{BinaryMask, ColorWindow, Keypoint, PoseFrame, TrackerState, TrackingError};
