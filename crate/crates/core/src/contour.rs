//! Outer contour extraction, simplification and animation for masks.
//!
//! The ring is recomputed from each frame's mask; nothing carries over
//! between frames.

use serde::Serialize;
use thiserror::Error;

use crate::model::{Point2, Rgba};
use crate::render::{FillRun, RasterFill};
use crate::tracking::{largest_component_mask, BinaryMask};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContourError {
    #[error("empty-mask: the mask has no set pixels")]
    EmptyMask,
}

/// Closed ring of vertices; the closing edge back to the first vertex is implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourPolyline {
    pub points: Vec<Point2>,
    pub source_frame: u64,
}

impl ContourPolyline {
    pub fn perimeter(&self) -> f64 {
        ring_edges(&self.points).map(|(a, b)| a.distance(b)).sum()
    }

    /// Twice the shoelace sum in y-down pixel coordinates; negative means the
    /// ring runs counter-clockwise as seen on screen.
    pub fn signed_area2(&self) -> f64 {
        ring_edges(&self.points)
            .map(|(a, b)| a.x * b.y - b.x * a.y)
            .sum()
    }
}

fn ring_edges(points: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = points.len();
    (0..if n > 1 { n } else { 0 }).map(move |i| (points[i], points[(i + 1) % n]))
}

/// 8-neighbourhood offsets, clockwise on screen starting east.
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const WEST: usize = 4;

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("backtrack is always an 8-neighbour")
}

/// Boundary pixels of the largest component's outer edge, traced with
/// Moore-neighbour following. The ring starts at the topmost, then leftmost
/// pixel and runs counter-clockwise on screen. Holes are ignored.
pub fn extract_outer_contour(
    mask: &BinaryMask,
    source_frame: u64,
) -> Result<ContourPolyline, ContourError> {
    let (component, stats) = largest_component_mask(mask).ok_or(ContourError::EmptyMask)?;
    let y0 = stats.min_y;
    let x0 = (stats.min_x..=stats.max_x)
        .find(|&x| component.get(x, y0))
        .expect("top row holds a pixel");
    let start = (x0 as i64, y0 as i64);
    let fg = |(x, y): (i64, i64)| component.get_signed(x, y);

    // Scan counter-clockwise around `cur`, starting just after the backtrack.
    let advance = |cur: (i64, i64), back: usize| -> Option<((i64, i64), usize)> {
        let mut prev = back;
        for i in 1..=8 {
            let d = (back + 8 - i) % 8;
            let cand = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
            if fg(cand) {
                let b = (cur.0 + DIRS[prev].0, cur.1 + DIRS[prev].1);
                return Some((cand, dir_index(b.0 - cand.0, b.1 - cand.1)));
            }
            prev = d;
        }
        None
    };

    let mut ring = vec![start];
    let Some(first) = advance(start, WEST) else {
        return Ok(to_polyline(&ring, source_frame));
    };
    let mut state = first;
    let limit = 4 * stats.area as usize + 8;
    while ring.len() <= limit {
        ring.push(state.0);
        let next = advance(state.0, state.1).expect("a traced pixel always has a neighbour");
        if state.0 == start && next.0 == first.0 {
            // Back at the start about to repeat the first move: closed.
            ring.pop();
            break;
        }
        state = next;
    }
    Ok(to_polyline(&ring, source_frame))
}

fn to_polyline(ring: &[(i64, i64)], source_frame: u64) -> ContourPolyline {
    ContourPolyline {
        points: ring
            .iter()
            .map(|&(x, y)| Point2::new(x as f64, y as f64))
            .collect(),
        source_frame,
    }
}

/// Ramer-Douglas-Peucker on a closed ring.
///
/// The first vertex is always kept and the ring is split at the vertex
/// farthest from it. Every dropped vertex lies within `epsilon` of the
/// output ring; with `epsilon == 0` only duplicate and collinear vertices go.
pub fn simplify_polyline(poly: &ContourPolyline, epsilon: f64) -> ContourPolyline {
    let mut pts: Vec<Point2> = Vec::with_capacity(poly.points.len());
    for &p in &poly.points {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts.last() == pts.first() {
        pts.pop();
    }
    if pts.len() < 3 {
        return ContourPolyline {
            points: pts,
            source_frame: poly.source_frame,
        };
    }

    let n = pts.len();
    let mut split = 0;
    let mut far = 0.0;
    for (i, p) in pts.iter().enumerate().skip(1) {
        let d = p.distance(pts[0]);
        if d > far {
            far = d;
            split = i;
        }
    }

    let mut keep = vec![false; n];
    keep[0] = true;
    keep[split] = true;
    // Second chain closes back through vertex 0, indexed as n.
    let closed: Vec<Point2> = pts.iter().copied().chain(std::iter::once(pts[0])).collect();
    rdp(&closed, 0, split, epsilon, &mut keep);
    let mut keep_tail = vec![false; n + 1];
    rdp(&closed, split, n, epsilon, &mut keep_tail);
    for i in split..n {
        keep[i] |= keep_tail[i];
    }

    let points = pts
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(p, _)| *p)
        .collect();
    ContourPolyline {
        points,
        source_frame: poly.source_frame,
    }
}

fn rdp(points: &[Point2], start: usize, end: usize, epsilon: f64, keep: &mut [bool]) {
    if end <= start + 1 {
        return;
    }
    let mut far = -1.0;
    let mut idx = start;
    for (i, p) in points.iter().enumerate().take(end).skip(start + 1) {
        let d = segment_distance(*p, points[start], points[end]);
        if d > far {
            far = d;
            idx = i;
        }
    }
    if far > epsilon {
        keep[idx] = true;
        rdp(points, start, idx, epsilon, keep);
        rdp(points, idx, end, epsilon, keep);
    }
}

/// Distance from `p` to the closed segment `a`-`b`.
pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Open sub-polyline covering `window_fraction` of the perimeter, starting
/// at `fract(t * cycles_per_second)` of the way around and wrapping past
/// the ring's closure.
pub fn contour_window(
    poly: &ContourPolyline,
    t: f64,
    window_fraction: f64,
    cycles_per_second: f64,
) -> Vec<Point2> {
    let pts = &poly.points;
    let n = pts.len();
    let perimeter = poly.perimeter();
    if n < 2 || perimeter <= 0.0 {
        return pts.first().map(|p| vec![*p]).unwrap_or_default();
    }
    // cumulative[i] = arc length at vertex i; cumulative[n] = perimeter.
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    for (a, b) in ring_edges(pts) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + a.distance(b));
    }
    let phase = (t * cycles_per_second).rem_euclid(1.0);
    let start = phase * perimeter;
    let length = window_fraction.clamp(0.0, 1.0) * perimeter;
    let end = start + length;

    let point_at = |s: f64| -> Point2 {
        let s = s.rem_euclid(perimeter);
        let i = match cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        };
        let seg = cumulative[i + 1] - cumulative[i];
        let a = pts[i];
        let b = pts[(i + 1) % n];
        if seg > 0.0 {
            a.lerp(b, (s - cumulative[i]) / seg)
        } else {
            a
        }
    };

    let mut out = vec![point_at(start)];
    // Vertices strictly inside (start, end), walking at most two laps.
    for lap in 0..2 {
        for (i, c) in cumulative.iter().enumerate().take(n) {
            let s = *c + lap as f64 * perimeter;
            if s > start && s < end {
                out.push(pts[i]);
            }
        }
    }
    let tail = point_at(end);
    if length >= perimeter {
        // Full window closes exactly on its start.
        out.push(out[0]);
    } else {
        out.push(tail);
    }
    out
}

/// Raster fill of the largest component, composited later by the renderer.
pub fn fill_region(mask: &BinaryMask, color: Rgba) -> Result<RasterFill, ContourError> {
    let (component, _) = largest_component_mask(mask).ok_or(ContourError::EmptyMask)?;
    let w = component.width();
    let mut runs = Vec::new();
    for y in 0..component.height() {
        let row = &component.bits()[(y * w) as usize..((y + 1) * w) as usize];
        let mut x = 0usize;
        while x < row.len() {
            if row[x] {
                let x0 = x;
                while x < row.len() && row[x] {
                    x += 1;
                }
                runs.push(FillRun {
                    y,
                    x0: x0 as u32,
                    x1: x as u32,
                });
            } else {
                x += 1;
            }
        }
    }
    Ok(RasterFill {
        width: component.width(),
        height: component.height(),
        runs,
        color,
    })
}
