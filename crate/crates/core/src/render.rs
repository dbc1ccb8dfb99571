//! Frame overlays: assembling effect output into drawables, emitting SVG,
//! and compositing onto raster frames.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use image::RgbImage;
use serde::Serialize;
use thiserror::Error;

use crate::effects::{
    particle_position, trail_falloff, update_binding, EffectState, EffectStateKind, Transform,
};
use crate::model::{EffectParams, FrameSize, Point2, Rgba, Scene, SketchElement, StrokeStyle};
use crate::tracking::TrackerState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("state-desync: {0}")]
    StateDesync(String),
    #[error("size-mismatch: expected {expected:?}, got {actual:?}")]
    SizeMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
}

impl RenderError {
    pub fn code(&self) -> &'static str {
        match self {
            RenderError::StateDesync(_) => "state-desync",
            RenderError::SizeMismatch { .. } => "size-mismatch",
        }
    }
}

/// Stroked polyline. Points are in element space; `transform` maps them to the frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDrawable {
    pub points: Vec<Point2>,
    pub closed: bool,
    pub style: StrokeStyle,
    pub transform: Transform,
}

/// Half-open horizontal pixel span `[x0, x1)` on row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FillRun {
    pub y: u32,
    pub x0: u32,
    pub x1: u32,
}

/// Solid color over a set of pixels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RasterFill {
    pub width: u32,
    pub height: u32,
    pub runs: Vec<FillRun>,
    pub color: Rgba,
}

impl RasterFill {
    pub fn pixel_count(&self) -> u64 {
        self.runs.iter().map(|r| (r.x1 - r.x0) as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Drawable {
    Path(PathDrawable),
    Fill(RasterFill),
}

/// Everything drawn on top of one video frame, in draw order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameOverlay {
    pub frame_index: u64,
    pub frame_size: FrameSize,
    pub drawables: Vec<Drawable>,
}

impl FrameOverlay {
    pub fn empty(frame_index: u64, frame_size: FrameSize) -> Self {
        Self {
            frame_index,
            frame_size,
            drawables: Vec::new(),
        }
    }

    /// Overlay with `other`'s drawables appended after this one's.
    pub fn concat(&self, other: &FrameOverlay) -> FrameOverlay {
        let mut out = self.clone();
        out.drawables.extend(other.drawables.iter().cloned());
        out
    }
}

fn push_element(out: &mut Vec<Drawable>, element: &SketchElement, transform: Transform) {
    for stroke in &element.strokes {
        out.push(Drawable::Path(PathDrawable {
            points: stroke.points.clone(),
            closed: false,
            style: stroke.style,
            transform,
        }));
    }
}

/// Assembles the overlay for one frame from already-stepped states.
///
/// Elements that no effect consumes are drawn first in declaration order,
/// shifted by any bindings. Each effect then adds its instances in
/// declaration order, clones and particles oldest first.
pub fn resolve_frame(
    scene: &Scene,
    trackers: &[TrackerState],
    effects: &[EffectState],
    frame_index: u64,
) -> Result<FrameOverlay, RenderError> {
    if trackers.len() != scene.trackers.len()
        || trackers
            .iter()
            .zip(&scene.trackers)
            .any(|(s, t)| s.tracker_id != t.id)
    {
        return Err(RenderError::StateDesync(
            "tracker states do not match the scene".into(),
        ));
    }
    if effects.len() != scene.effects.len()
        || effects
            .iter()
            .zip(&scene.effects)
            .any(|(s, e)| s.effect_id != e.id)
    {
        return Err(RenderError::StateDesync(
            "effect states do not match the scene".into(),
        ));
    }
    let positions: HashMap<&str, Option<Point2>> = trackers
        .iter()
        .map(|t| (t.tracker_id.as_str(), t.last_position))
        .collect();
    let tracker_pos = |id: &str| positions.get(id).copied().flatten();

    let mut offsets: HashMap<&str, Point2> = HashMap::new();
    let mut consumed: HashSet<&str> = HashSet::new();
    let mut gated: HashSet<&str> = HashSet::new();
    let mut open_gates: HashSet<&str> = HashSet::new();
    for (spec, state) in scene.effects.iter().zip(effects) {
        match (&spec.params, &state.kind) {
            (EffectParams::Binding(_), EffectStateKind::Binding { binding }) => {
                if let (Some(b), Some(p)) = (binding, tracker_pos(&spec.tracker_ids[0])) {
                    let t = update_binding(b, p);
                    for id in &spec.element_ids {
                        let o = offsets.entry(id.as_str()).or_default();
                        *o = *o + Point2::new(t.dx, t.dy);
                    }
                }
            }
            (EffectParams::Trigger(p), EffectStateKind::Trigger { trigger, .. }) => {
                consumed.extend(spec.element_ids.iter().map(String::as_str));
                gated.extend(p.gates.iter().map(String::as_str));
                if trigger.playing {
                    open_gates.extend(p.gates.iter().map(String::as_str));
                }
            }
            (EffectParams::FlipBook(_), _)
            | (EffectParams::Particles(_), _)
            | (EffectParams::Trajectory(_), _) => {
                consumed.extend(spec.element_ids.iter().map(String::as_str));
            }
            (EffectParams::Contour(_), EffectStateKind::Contour { .. }) => {}
            _ => {
                return Err(RenderError::StateDesync(format!(
                    "effect {} has a state of the wrong kind",
                    spec.id
                )))
            }
        }
    }
    let offset = |id: &str| offsets.get(id).copied().unwrap_or_default();

    let mut drawables = Vec::new();
    for element in &scene.elements {
        if !consumed.contains(element.id.as_str()) {
            push_element(
                &mut drawables,
                element,
                Transform::translation(offset(&element.id)),
            );
        }
    }

    let element = |id: &str| {
        scene
            .element(id)
            .ok_or_else(|| RenderError::StateDesync(format!("element {id} is missing")))
    };
    let bound =
        |binding: &Option<crate::effects::BindingState>, tracker: Option<&String>| -> Point2 {
            match (binding, tracker.and_then(|t| tracker_pos(t))) {
                (Some(b), Some(p)) => p - b.anchor_at_bind,
                _ => Point2::ORIGIN,
            }
        };

    for (spec, state) in scene.effects.iter().zip(effects) {
        if gated.contains(spec.id.as_str()) && !open_gates.contains(spec.id.as_str()) {
            continue;
        }
        match (&spec.params, &state.kind) {
            (EffectParams::FlipBook(_), EffectStateKind::FlipBook { binding, current }) => {
                let id = &spec.element_ids[*current % spec.element_ids.len()];
                let shift = offset(id) + bound(binding, spec.tracker_ids.first());
                push_element(&mut drawables, element(id)?, Transform::translation(shift));
            }
            (
                EffectParams::Trigger(p),
                EffectStateKind::Trigger {
                    binding, showing, ..
                },
            ) => {
                if let (Some(k), false) = (showing, spec.element_ids.is_empty()) {
                    let id = &spec.element_ids[*k % spec.element_ids.len()];
                    let shift = offset(id) + bound(binding, p.bind_to.as_ref());
                    push_element(&mut drawables, element(id)?, Transform::translation(shift));
                }
            }
            (EffectParams::Particles(p), EffectStateKind::Particles { system, .. }) => {
                let template = element(&spec.element_ids[0])?;
                for particle in &system.particles {
                    let pos = particle_position(p, particle);
                    push_element(
                        &mut drawables,
                        template,
                        Transform::translation(pos - template.local_origin),
                    );
                }
            }
            (EffectParams::Trajectory(p), EffectStateKind::Trajectory { clones }) => {
                let template = element(&spec.element_ids[0])?;
                let n = clones.len();
                for (i, clone) in clones.iter().enumerate() {
                    let (opacity, scale) = trail_falloff(p, n - 1 - i);
                    let d = clone.position - template.local_origin;
                    let t = Transform {
                        dx: d.x,
                        dy: d.y,
                        scale,
                        origin: template.local_origin,
                        opacity,
                    };
                    push_element(&mut drawables, template, t);
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
                if let Some(fill) = fill {
                    drawables.push(Drawable::Fill(fill.clone()));
                }
                if let Some(points) = outline {
                    drawables.push(Drawable::Path(PathDrawable {
                        points: points.clone(),
                        closed: *closed,
                        style: p.stroke,
                        transform: Transform::IDENTITY,
                    }));
                }
            }
            _ => {}
        }
    }
    Ok(FrameOverlay {
        frame_index,
        frame_size: scene.frame_size,
        drawables,
    })
}

/// Compact decimal: integers without a fraction, otherwise up to three
/// decimals with trailing zeros removed.
pub fn fmt_num(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        return "0".into();
    }
    if r.fract() == 0.0 && r.abs() < 1e15 {
        return format!("{}", r as i64);
    }
    let s = format!("{r:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_owned()
}

fn path_data(points: &[Point2], closed: bool) -> String {
    let mut d = String::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            d.push(' ');
        }
        d.push_str(if i == 0 { "M " } else { "L " });
        d.push_str(&fmt_num(p.x));
        d.push(' ');
        d.push_str(&fmt_num(p.y));
    }
    if points.len() == 1 {
        // Zero-length segment so round caps still draw a dot.
        let p = points[0];
        let _ = write!(d, " L {} {}", fmt_num(p.x), fmt_num(p.y));
    }
    if closed {
        d.push_str(" Z");
    }
    d
}

fn svg_transform(t: &Transform) -> Option<String> {
    if t.dx == 0.0 && t.dy == 0.0 && t.scale == 1.0 {
        return None;
    }
    if t.scale == 1.0 {
        return Some(format!("translate({} {})", fmt_num(t.dx), fmt_num(t.dy)));
    }
    let e = t.dx + t.origin.x - t.scale * t.origin.x;
    let f = t.dy + t.origin.y - t.scale * t.origin.y;
    let s = fmt_num(t.scale);
    Some(format!("matrix({s} 0 0 {s} {} {})", fmt_num(e), fmt_num(f)))
}

/// SVG 1.1 document with one `<path>` per drawable. Attribute order is
/// fixed, so equal overlays produce equal bytes.
pub fn emit_svg(overlay: &FrameOverlay, frame_size: FrameSize) -> String {
    let (w, h) = (frame_size.width, frame_size.height);
    let mut out = String::with_capacity(256 + overlay.drawables.len() * 160);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    for drawable in &overlay.drawables {
        match drawable {
            Drawable::Path(p) => {
                let opacity = p.style.color.alpha_f64() * p.style.opacity * p.transform.opacity;
                let _ = write!(
                    out,
                    "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-opacity=\"{}\" stroke-linecap=\"round\" stroke-linejoin=\"round\"",
                    path_data(&p.points, p.closed),
                    p.style.color.hex_rgb(),
                    fmt_num(p.style.width),
                    fmt_num(opacity),
                );
                if let Some(t) = svg_transform(&p.transform) {
                    let _ = write!(out, " transform=\"{t}\"");
                }
                out.push_str("/>\n");
            }
            Drawable::Fill(f) => {
                let mut d = String::with_capacity(f.runs.len() * 24);
                for r in &f.runs {
                    let len = r.x1 - r.x0;
                    let _ = write!(d, "M{} {}h{}v1h-{}z", r.x0, r.y, len, len);
                }
                let _ = writeln!(
                    out,
                    "<path d=\"{d}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\"/>",
                    f.color.hex_rgb(),
                    fmt_num(f.color.alpha_f64()),
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Source-over composite of every drawable, in order, onto `base`.
///
/// Strokes are rasterised as round-capped capsules with 2x2 supersampling
/// (four coverage samples per pixel). Pixel `(i, j)` spans `[i, i+1) x [j, j+1)`.
pub fn composite(base: &RgbImage, overlay: &FrameOverlay) -> Result<RgbImage, RenderError> {
    let expected = (overlay.frame_size.width, overlay.frame_size.height);
    let actual = base.dimensions();
    if expected != actual {
        return Err(RenderError::SizeMismatch { expected, actual });
    }
    let mut out = base.clone();
    for drawable in &overlay.drawables {
        match drawable {
            Drawable::Path(p) => rasterize_path(&mut out, p),
            Drawable::Fill(f) => rasterize_fill(&mut out, f),
        }
    }
    Ok(out)
}

#[inline]
fn blend(dst: &mut [u8], src: Rgba, alpha: f64) {
    if alpha <= 0.0 {
        return;
    }
    for (d, s) in dst.iter_mut().zip([src.r, src.g, src.b]) {
        *d = (s as f64 * alpha + *d as f64 * (1.0 - alpha))
            .round()
            .clamp(0.0, 255.0) as u8;
    }
}

fn rasterize_fill(img: &mut RgbImage, fill: &RasterFill) {
    let (w, h) = img.dimensions();
    let alpha = fill.color.alpha_f64();
    for run in &fill.runs {
        if run.y >= h {
            continue;
        }
        for x in run.x0..run.x1.min(w) {
            blend(&mut img.get_pixel_mut(x, run.y).0, fill.color, alpha);
        }
    }
}

const SAMPLE_OFFSETS: [f64; 2] = [0.25, 0.75];

fn rasterize_path(img: &mut RgbImage, path: &PathDrawable) {
    let t = &path.transform;
    let mut pts: Vec<Point2> = path.points.iter().map(|&p| t.apply(p)).collect();
    if path.closed && pts.len() > 2 {
        pts.push(pts[0]);
    }
    if pts.is_empty() {
        return;
    }
    if pts.len() == 1 {
        pts.push(pts[0]);
    }
    let radius = path.style.width * t.scale / 2.0;
    let alpha = path.style.color.alpha_f64() * path.style.opacity * t.opacity;
    if radius <= 0.0 || alpha <= 0.0 {
        return;
    }
    let (w, h) = img.dimensions();
    let min_x = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - radius;
    let max_x = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + radius;
    let min_y = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - radius;
    let max_y = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + radius;
    let px0 = min_x.floor().max(0.0) as i64;
    let py0 = min_y.floor().max(0.0) as i64;
    let px1 = (max_x.ceil() as i64).min(w as i64 - 1);
    let py1 = (max_y.ceil() as i64).min(h as i64 - 1);
    if px0 > px1 || py0 > py1 {
        return;
    }
    let bw = (px1 - px0 + 1) as usize;
    let bh = (py1 - py0 + 1) as usize;
    // One byte per pixel, one bit per sample.
    let mut samples = vec![0u8; bw * bh];
    let r2 = radius * radius;
    for seg in pts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let sx0 = ((a.x.min(b.x) - radius).floor() as i64).max(px0);
        let sx1 = ((a.x.max(b.x) + radius).ceil() as i64).min(px1);
        let sy0 = ((a.y.min(b.y) - radius).floor() as i64).max(py0);
        let sy1 = ((a.y.max(b.y) + radius).ceil() as i64).min(py1);
        let ab = b - a;
        let len2 = ab.x * ab.x + ab.y * ab.y;
        for py in sy0..=sy1 {
            for px in sx0..=sx1 {
                let cell = &mut samples[(py - py0) as usize * bw + (px - px0) as usize];
                if *cell == 0b1111 {
                    continue;
                }
                for (k, (ox, oy)) in SAMPLE_OFFSETS
                    .iter()
                    .flat_map(|&oy| SAMPLE_OFFSETS.iter().map(move |&ox| (ox, oy)))
                    .enumerate()
                {
                    let p = Point2::new(px as f64 + ox, py as f64 + oy);
                    let tproj = if len2 > 0.0 {
                        (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let c = a + ab * tproj;
                    let d2 = (p.x - c.x).powi(2) + (p.y - c.y).powi(2);
                    if d2 <= r2 {
                        *cell |= 1 << k;
                    }
                }
            }
        }
    }
    for y in 0..bh {
        for x in 0..bw {
            let cov = samples[y * bw + x].count_ones();
            if cov > 0 {
                let pixel = img.get_pixel_mut((px0 as usize + x) as u32, (py0 as usize + y) as u32);
                blend(&mut pixel.0, path.style.color, alpha * cov as f64 / 4.0);
            }
        }
    }
}
