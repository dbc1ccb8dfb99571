//! Reference oracles and random generators for the test suites.
//!
//! Everything here works on primitive types (`&[bool]` grids, tuples) and
//! deliberately avoids the engine crate, so an oracle can never share a code
//! path with the implementation it checks. The algorithms are the slow,
//! obvious ones: queue flood fills, exhaustive scans, scalar formulas.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

/// A 4-connected component found by flood fill, pixels in discovery order.
#[derive(Debug, Clone)]
pub struct OracleComponent {
    pub pixels: Vec<(usize, usize)>,
    pub min_x: usize,
    pub min_y: usize,
}

/// Labels every 4-connected component with a breadth-first flood fill.
pub fn flood_fill_components(width: usize, height: usize, bits: &[bool]) -> Vec<OracleComponent> {
    assert_eq!(bits.len(), width * height);
    let mut seen = vec![false; bits.len()];
    let mut out = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !bits[i] || seen[i] {
                continue;
            }
            seen[i] = true;
            let mut queue = VecDeque::from([(x, y)]);
            let mut comp = OracleComponent {
                pixels: Vec::new(),
                min_x: x,
                min_y: y,
            };
            while let Some((cx, cy)) = queue.pop_front() {
                comp.pixels.push((cx, cy));
                comp.min_x = comp.min_x.min(cx);
                comp.min_y = comp.min_y.min(cy);
                let mut visit = |nx: usize, ny: usize| {
                    let j = ny * width + nx;
                    if bits[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back((nx, ny));
                    }
                };
                if cx > 0 {
                    visit(cx - 1, cy);
                }
                if cx + 1 < width {
                    visit(cx + 1, cy);
                }
                if cy > 0 {
                    visit(cx, cy - 1);
                }
                if cy + 1 < height {
                    visit(cx, cy + 1);
                }
            }
            out.push(comp);
        }
    }
    out
}

/// Largest component by pixel count; ties go to the smallest bounding-box
/// top-left corner in row-major order.
pub fn largest_component(width: usize, height: usize, bits: &[bool]) -> Option<OracleComponent> {
    let comps = flood_fill_components(width, height, bits);
    let mut best: Option<OracleComponent> = None;
    for c in comps {
        let better = match &best {
            None => true,
            Some(b) => {
                c.pixels.len() > b.pixels.len()
                    || (c.pixels.len() == b.pixels.len() && (c.min_y, c.min_x) < (b.min_y, b.min_x))
            }
        };
        if better {
            best = Some(c);
        }
    }
    best
}

/// Mean pixel coordinate of the largest component.
pub fn largest_centroid(width: usize, height: usize, bits: &[bool]) -> Option<(f64, f64)> {
    let comp = largest_component(width, height, bits)?;
    let n = comp.pixels.len() as u64;
    let sx: u64 = comp.pixels.iter().map(|p| p.0 as u64).sum();
    let sy: u64 = comp.pixels.iter().map(|p| p.1 as u64).sum();
    Some((sx as f64 / n as f64, sy as f64 / n as f64))
}

/// Outer boundary pixels of the largest component: component pixels with at
/// least one 4-neighbour in the exterior, where the exterior is everything
/// outside the component that a 4-connected flood fill reaches from beyond
/// the frame border. Pixels that only touch holes are excluded.
pub fn outer_boundary(width: usize, height: usize, bits: &[bool]) -> BTreeSet<(usize, usize)> {
    let Some(comp) = largest_component(width, height, bits) else {
        return BTreeSet::new();
    };
    // Padded grid with a one-pixel frame of exterior around the image.
    let pw = width + 2;
    let ph = height + 2;
    let mut inside = vec![false; pw * ph];
    for &(x, y) in &comp.pixels {
        inside[(y + 1) * pw + x + 1] = true;
    }
    let mut exterior = vec![false; pw * ph];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    exterior[0] = true;
    while let Some((x, y)) = queue.pop_front() {
        let neighbours = [
            (x.wrapping_sub(1), y),
            (x + 1, y),
            (x, y.wrapping_sub(1)),
            (x, y + 1),
        ];
        for (nx, ny) in neighbours {
            if nx >= pw || ny >= ph {
                continue;
            }
            let j = ny * pw + nx;
            if !inside[j] && !exterior[j] {
                exterior[j] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    comp.pixels
        .iter()
        .copied()
        .filter(|&(x, y)| {
            let (px, py) = (x + 1, y + 1);
            exterior[py * pw + px - 1]
                || exterior[py * pw + px + 1]
                || exterior[(py - 1) * pw + px]
                || exterior[(py + 1) * pw + px]
        })
        .collect()
}

/// Index of the visible point closest to `click`, lowest index on ties.
pub fn nearest_visible(points: &[(f64, f64, bool)], click: (f64, f64)) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &(x, y, visible)) in points.iter().enumerate() {
        if !visible {
            continue;
        }
        let d2 = (x - click.0).powi(2) + (y - click.1).powi(2);
        match best {
            Some((_, bd)) if bd <= d2 => {}
            _ => best = Some((i, d2)),
        }
    }
    best.map(|b| b.0)
}

/// Source-over for one 8-bit channel, rounded to nearest.
pub fn source_over_channel(src: u8, alpha: f64, dst: u8) -> u8 {
    let v = src as f64 * alpha + dst as f64 * (1.0 - alpha);
    v.round().clamp(0.0, 255.0) as u8
}

/// Euclidean distance from `p` to the closed segment from `a` to `b`.
pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt();
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Distance from `p` to a closed ring given as vertices.
pub fn point_ring_distance(p: (f64, f64), ring: &[(f64, f64)]) -> f64 {
    if ring.len() == 1 {
        return point_segment_distance(p, ring[0], ring[0]);
    }
    (0..ring.len())
        .map(|i| point_segment_distance(p, ring[i], ring[(i + 1) % ring.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// A random mask of overlapping ellipses and rectangles plus salt noise.
pub fn random_blob_mask<R: Rng>(rng: &mut R, width: usize, height: usize) -> Vec<bool> {
    let mut bits = vec![false; width * height];
    let shapes = rng.random_range(1..=5);
    for _ in 0..shapes {
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let rx = rng.random_range(1.0..(width as f64 / 3.0).max(1.5));
        let ry = rng.random_range(1.0..(height as f64 / 3.0).max(1.5));
        let ellipse = rng.random_bool(0.6);
        for y in 0..height {
            for x in 0..width {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                let hit = if ellipse {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if hit {
                    bits[y * width + x] = true;
                }
            }
        }
    }
    // Punch a few holes and sprinkle a few stray pixels.
    let noise = (width * height) / 40;
    for _ in 0..noise {
        let i = rng.random_range(0..bits.len());
        bits[i] = !bits[i];
    }
    bits
}

/// Noisy circle sampled at one-degree steps, as `(x, y)` vertices.
pub fn noisy_circle<R: Rng>(
    rng: &mut R,
    center: (f64, f64),
    radius: f64,
    jitter: f64,
) -> Vec<(f64, f64)> {
    (0..360)
        .map(|deg| {
            let a = (deg as f64).to_radians();
            let r = radius + rng.random_range(-jitter..=jitter);
            (center.0 + r * a.cos(), center.1 + r * a.sin())
        })
        .collect()
}

/// Frames on which a one-shot distance trigger fires.
///
/// Written directly from the rule: the trigger fires when the condition holds
/// while it is armed and no payload is playing; firing disarms it and plays
/// `payload` frames; it re-arms on the first idle frame where the condition
/// is false. `increase` selects `d > threshold`, otherwise `d < threshold`.
pub fn trigger_fire_frames(
    distances: &[f64],
    threshold: f64,
    increase: bool,
    payload: u64,
) -> Vec<usize> {
    let met = |d: f64| {
        if increase {
            d > threshold
        } else {
            d < threshold
        }
    };
    let mut fired = Vec::new();
    let mut playing_until = 0usize;
    let mut armed = true;
    for (i, &d) in distances.iter().enumerate() {
        let idle = i >= playing_until;
        if idle && !armed && !met(d) {
            armed = true;
        }
        if idle && armed && met(d) {
            fired.push(i);
            armed = false;
            playing_until = i + payload as usize;
        }
    }
    fired
}
