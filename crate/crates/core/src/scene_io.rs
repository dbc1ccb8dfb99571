//! On-disk formats: scene documents, pose tracks, mask sidecars and frame
//! sequences.
//!
//! Scene and pose files are JSON. Serialized scenes are canonical: keys in
//! lexicographic order, floats rounded to six significant digits, two-space
//! indentation and a trailing newline. Masks are a little-endian binary
//! sidecar of run lengths. Frames are image files named `frame_NNNNNN.ext`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{validate_scene, Diagnostic, Scene, KEYPOINT_COUNT};
use crate::tracking::{BinaryMask, Keypoint, PoseFrame};

pub const SCENE_VERSION: u64 = 1;
const SIGNIFICANT_DIGITS: usize = 6;

#[derive(Debug, Error)]
pub enum SceneIoError {
    #[error("syntax: {0}")]
    Syntax(String),
    #[error("schema({field}): {detail}")]
    Schema { field: String, detail: String },
    #[error("scene has {} diagnostic(s): {}", .0.len(), first_detail(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("pose-arity({frame}): expected 33 keypoints, found {found}")]
    PoseArity { frame: u64, found: usize },
    #[error("pose-gap: {0}")]
    PoseGap(String),
    #[error("frame-gap: {0}")]
    FrameGap(String),
    #[error("size-mismatch({frame}): expected {expected:?}, found {found:?}")]
    SizeMismatch {
        frame: usize,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("mask-format: {0}")]
    MaskFormat(String),
    #[error("image({path}): {detail}")]
    Image { path: PathBuf, detail: String },
    #[error("io({path}): {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn first_detail(d: &[Diagnostic]) -> String {
    d.first().map(|d| d.to_string()).unwrap_or_default()
}

impl SceneIoError {
    /// Short machine-readable code, e.g. `schema(keypoint-index)` or `pose-arity(4)`.
    pub fn code(&self) -> String {
        match self {
            SceneIoError::Syntax(_) => "syntax".into(),
            SceneIoError::Schema { field, .. } => format!("schema({field})"),
            SceneIoError::Invalid(d) => d
                .first()
                .map_or("invalid-scene", |d| d.rule.name())
                .to_string(),
            SceneIoError::PoseArity { frame, .. } => format!("pose-arity({frame})"),
            SceneIoError::PoseGap(_) => "pose-gap".into(),
            SceneIoError::FrameGap(_) => "frame-gap".into(),
            SceneIoError::SizeMismatch { frame, .. } => format!("size-mismatch({frame})"),
            SceneIoError::MaskFormat(_) => "mask-format".into(),
            SceneIoError::Image { .. } => "image".into(),
            SceneIoError::Io { .. } => "io".into(),
        }
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            SceneIoError::Invalid(d) => d,
            _ => &[],
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        SceneIoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn schema(field: impl Into<String>, detail: impl Into<String>) -> SceneIoError {
    SceneIoError::Schema {
        field: field.into(),
        detail: detail.into(),
    }
}

#[derive(Serialize, Deserialize)]
struct SceneDocument {
    version: u64,
    scene: Scene,
}

/// Parses and validates a scene document.
pub fn parse_scene(text: &str) -> Result<Scene, SceneIoError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| SceneIoError::Syntax(e.to_string()))?;
    precheck_document(&value)?;
    let doc: SceneDocument = serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        schema(
            if field.is_empty() || field == "." {
                "document".to_string()
            } else {
                field
            },
            e.inner().to_string(),
        )
    })?;
    let diagnostics = validate_scene(&doc.scene);
    if diagnostics.is_empty() {
        Ok(doc.scene)
    } else {
        Err(SceneIoError::Invalid(diagnostics))
    }
}

/// Checks that need the raw document: the version and keypoint bounds,
/// which would otherwise surface as generic type errors.
fn precheck_document(value: &Value) -> Result<(), SceneIoError> {
    let obj = value
        .as_object()
        .ok_or_else(|| schema("document", "expected an object"))?;
    match obj.get("version") {
        None => return Err(schema("version", "missing field")),
        Some(v) if v.as_u64() == Some(SCENE_VERSION) => {}
        Some(v) => {
            return Err(schema(
                "version",
                format!("unsupported version {v}, expected {SCENE_VERSION}"),
            ))
        }
    }
    let trackers = obj
        .get("scene")
        .and_then(|s| s.get("trackers"))
        .and_then(Value::as_array);
    for tracker in trackers.into_iter().flatten() {
        let kind = tracker.get("kind");
        if kind.and_then(|k| k.get("type")).and_then(Value::as_str) != Some("keypoint") {
            continue;
        }
        let index = kind.and_then(|k| k.get("index"));
        let in_range = index
            .and_then(Value::as_u64)
            .is_some_and(|i| (i as usize) < KEYPOINT_COUNT);
        if index.is_some() && !in_range {
            let id = tracker.get("id").and_then(Value::as_str).unwrap_or("?");
            return Err(schema(
                "keypoint-index",
                format!(
                    "tracker {id}: index {} outside 0..={}",
                    index.unwrap_or(&Value::Null),
                    KEYPOINT_COUNT - 1
                ),
            ));
        }
    }
    Ok(())
}

/// Canonical document text for a scene.
pub fn serialize_scene(scene: &Scene) -> String {
    let doc = SceneDocument {
        version: SCENE_VERSION,
        scene: scene.clone(),
    };
    let value = serde_json::to_value(&doc).expect("scene types always serialize");
    canonical_text(&value)
}

/// Re-renders any JSON text in canonical form without interpreting it as a scene.
pub fn canonical_form(text: &str) -> Result<String, SceneIoError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| SceneIoError::Syntax(e.to_string()))?;
    Ok(canonical_text(&value))
}

/// Rounds every float in the scene the same way serialization does, so
/// that `parse_scene(&serialize_scene(&canonicalize(s)))` equals `canonicalize(s)`.
pub fn canonicalize(scene: &Scene) -> Scene {
    let doc: SceneDocument =
        serde_json::from_str(&serialize_scene(scene)).expect("canonical text parses");
    doc.scene
}

fn canonical_text(value: &Value) -> String {
    let mut out =
        serde_json::to_string_pretty(&round_floats(value)).expect("values always serialize");
    out.push('\n');
    out
}

fn round_floats(value: &Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
                .parse()
                .unwrap_or(x);
            // Negative zero prints as "-0.0"; fold it so equal scenes give equal bytes.
            let rounded = if rounded == 0.0 { 0.0 } else { rounded };
            serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.iter().map(round_floats).collect()),
        // serde_json's map is ordered by key, which gives the canonical order.
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), round_floats(v)))
                .collect(),
        ),
        other => other.clone(),
    }
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneIoError> {
    parse_scene(&fs::read_to_string(path).map_err(|e| SceneIoError::io(path, e))?)
}

pub fn save_scene(path: &Path, scene: &Scene) -> Result<(), SceneIoError> {
    fs::write(path, serialize_scene(scene)).map_err(|e| SceneIoError::io(path, e))
}

/// A frame-indexed track of skeleton keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrack {
    pub fps: f64,
    /// Frame `i` of the video is `frames[i]`.
    pub frames: Vec<PoseFrame>,
}

impl PoseTrack {
    pub fn frame(&self, index: u64) -> Option<&PoseFrame> {
        usize::try_from(index).ok().and_then(|i| self.frames.get(i))
    }
}

#[derive(Serialize, Deserialize)]
struct PoseFileFrame {
    index: u64,
    keypoints: Vec<Keypoint>,
}

#[derive(Serialize, Deserialize)]
struct PoseFile {
    fps: f64,
    frame_count: u64,
    frames: Vec<PoseFileFrame>,
}

pub fn parse_pose_track(text: &str) -> Result<PoseTrack, SceneIoError> {
    if text.trim().is_empty() {
        return Err(SceneIoError::PoseGap(
            "empty pose file has no frame 0".into(),
        ));
    }
    let value: Value =
        serde_json::from_str(text).map_err(|e| SceneIoError::Syntax(e.to_string()))?;
    let mut file: PoseFile = serde_path_to_error::deserialize(value)
        .map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;
    if !(file.fps.is_finite() && file.fps > 0.0) {
        return Err(schema("fps", format!("must be positive, got {}", file.fps)));
    }
    file.frames.sort_by_key(|f| f.index);
    let mut frames = Vec::with_capacity(file.frames.len());
    for (expected, f) in file.frames.into_iter().enumerate() {
        if f.index != expected as u64 {
            return Err(SceneIoError::PoseGap(format!(
                "expected frame {expected}, found frame {}",
                f.index
            )));
        }
        let found = f.keypoints.len();
        frames.push(
            PoseFrame::new(f.keypoints).map_err(|_| SceneIoError::PoseArity {
                frame: f.index,
                found,
            })?,
        );
    }
    if frames.is_empty() {
        return Err(SceneIoError::PoseGap("pose file has no frame 0".into()));
    }
    if file.frame_count != frames.len() as u64 {
        return Err(SceneIoError::PoseGap(format!(
            "frame_count is {} but frames 0..{} are present",
            file.frame_count,
            frames.len()
        )));
    }
    Ok(PoseTrack {
        fps: file.fps,
        frames,
    })
}

pub fn serialize_pose_track(track: &PoseTrack) -> String {
    let file = PoseFile {
        fps: track.fps,
        frame_count: track.frames.len() as u64,
        frames: track
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| PoseFileFrame {
                index: i as u64,
                keypoints: f.keypoints().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("pose types always serialize")
}

pub fn load_pose_track(path: &Path) -> Result<PoseTrack, SceneIoError> {
    parse_pose_track(&fs::read_to_string(path).map_err(|e| SceneIoError::io(path, e))?)
}

pub fn save_pose_track(path: &Path, track: &PoseTrack) -> Result<(), SceneIoError> {
    fs::write(path, serialize_pose_track(track)).map_err(|e| SceneIoError::io(path, e))
}

/// Appends one mask: width, height, run count, then run lengths in row-major
/// order alternating unset/set and starting with unset. All `u32` LE.
pub fn encode_mask(mask: &BinaryMask, out: &mut Vec<u8>) {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for &bit in mask.bits() {
        if bit == current {
            len += 1;
        } else {
            runs.push(len);
            current = bit;
            len = 1;
        }
    }
    if len > 0 {
        runs.push(len);
    }
    for v in [mask.width(), mask.height(), runs.len() as u32]
        .into_iter()
        .chain(runs)
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_masks(masks: &[BinaryMask]) -> Vec<u8> {
    let mut out = Vec::new();
    for m in masks {
        encode_mask(m, &mut out);
    }
    out
}

/// Decodes every mask in a sidecar, in frame order.
pub fn decode_masks(bytes: &[u8]) -> Result<Vec<BinaryMask>, SceneIoError> {
    let mut words = bytes.chunks_exact(4);
    if !words.remainder().is_empty() {
        return Err(SceneIoError::MaskFormat(format!(
            "length {} is not a multiple of 4",
            bytes.len()
        )));
    }
    let mut next = || {
        words
            .next()
            .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]))
    };
    let mut masks = Vec::new();
    while let Some(width) = next() {
        let frame = masks.len();
        let truncated = || SceneIoError::MaskFormat(format!("mask {frame} is truncated"));
        let height = next().ok_or_else(truncated)?;
        let n_runs = next().ok_or_else(truncated)?;
        let total = width as u64 * height as u64;
        let mut bits = Vec::with_capacity(total.min(1 << 26) as usize);
        let mut value = false;
        for _ in 0..n_runs {
            let len = next().ok_or_else(truncated)?;
            if bits.len() as u64 + len as u64 > total {
                return Err(SceneIoError::MaskFormat(format!(
                    "mask {frame}: runs exceed {width}x{height}"
                )));
            }
            bits.resize(bits.len() + len as usize, value);
            value = !value;
        }
        if bits.len() as u64 != total {
            return Err(SceneIoError::MaskFormat(format!(
                "mask {frame}: runs cover {} of {total} pixels",
                bits.len()
            )));
        }
        masks.push(BinaryMask::from_bits(width, height, bits));
    }
    Ok(masks)
}

pub fn load_masks(path: &Path) -> Result<Vec<BinaryMask>, SceneIoError> {
    decode_masks(&fs::read(path).map_err(|e| SceneIoError::io(path, e))?)
}

pub fn save_masks(path: &Path, masks: &[BinaryMask]) -> Result<(), SceneIoError> {
    fs::write(path, encode_masks(masks)).map_err(|e| SceneIoError::io(path, e))
}

const FRAME_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "bmp", "ppm"];

/// File name of frame `index`.
pub fn frame_file_name(index: usize, extension: &str) -> String {
    format!("frame_{index:06}.{extension}")
}

fn frame_index(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if !FRAME_EXTENSIONS.contains(&ext.as_str()) {
        return None;
    }
    let digits = path.file_stem()?.to_str()?.strip_prefix("frame_")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// An ordered, dimension-checked directory of frame images.
///
/// Indices and headers are checked when the sequence is opened; pixels are
/// decoded lazily.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    paths: Vec<PathBuf>,
    size: (u32, u32),
}

impl FrameSequence {
    pub fn open(dir: &Path) -> Result<Self, SceneIoError> {
        let mut indexed = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| SceneIoError::io(dir, e))? {
            let path = entry.map_err(|e| SceneIoError::io(dir, e))?.path();
            if let Some(i) = frame_index(&path) {
                indexed.push((i, path));
            }
        }
        indexed.sort();
        for (expected, (i, path)) in indexed.iter().enumerate() {
            if *i != expected {
                return Err(SceneIoError::FrameGap(format!(
                    "expected frame {expected}, found {}",
                    path.file_name().unwrap_or_default().to_string_lossy()
                )));
            }
        }
        if indexed.is_empty() {
            return Err(SceneIoError::FrameGap(format!(
                "no frame_000000 image in {}",
                dir.display()
            )));
        }
        let mut size = None;
        for (i, path) in &indexed {
            let found = image::image_dimensions(path).map_err(|e| SceneIoError::Image {
                path: path.clone(),
                detail: e.to_string(),
            })?;
            match size {
                None => size = Some(found),
                Some(expected) if expected != found => {
                    return Err(SceneIoError::SizeMismatch {
                        frame: *i,
                        expected,
                        found,
                    });
                }
                Some(_) => {}
            }
        }
        Ok(Self {
            paths: indexed.into_iter().map(|(_, p)| p).collect(),
            size: size.unwrap_or_default(),
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn size(&self) -> (u32, u32) {
        self.size
    }

    pub fn path(&self, index: usize) -> Option<&Path> {
        self.paths.get(index).map(PathBuf::as_path)
    }

    /// Decodes frame `index` as 8-bit RGB, dropping any alpha channel.
    pub fn load(&self, index: usize) -> Result<RgbImage, SceneIoError> {
        let path = self
            .paths
            .get(index)
            .ok_or_else(|| SceneIoError::FrameGap(format!("no frame {index}")))?;
        let img = image::open(path).map_err(|e| SceneIoError::Image {
            path: path.clone(),
            detail: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        if rgb.dimensions() != self.size {
            return Err(SceneIoError::SizeMismatch {
                frame: index,
                expected: self.size,
                found: rgb.dimensions(),
            });
        }
        Ok(rgb)
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<RgbImage, SceneIoError>> + '_ {
        (0..self.len()).map(|i| self.load(i))
    }
}

/// Opens a frame directory; see [`FrameSequence`].
pub fn load_frame_sequence(dir: &Path) -> Result<FrameSequence, SceneIoError> {
    FrameSequence::open(dir)
}
