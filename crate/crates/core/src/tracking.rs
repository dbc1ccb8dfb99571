//! Color-blob and skeleton keypoint tracking.
//!
//! A color tracker samples one pixel, widens it into a per-channel window of
//! ±10, keeps every pixel inside the window and follows the mean position of
//! the largest 4-connected blob. Keypoint trackers read positions from an
//! ingested pose track. Lost trackers hold their last fix.

use std::collections::VecDeque;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Point2, KEYPOINT_COUNT};

/// Half-width of the color window around the sampled pixel.
pub const COLOR_TOLERANCE: u8 = 10;

/// Frames without a fix before a tracker should be reported as lost.
pub const LOST_WARNING_FRAMES: u32 = 30;

/// Positions kept in a tracker's history ring.
pub const HISTORY_CAPACITY: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackingError {
    #[error("sample-outside-frame: ({x}, {y}) is not inside the frame")]
    SampleOutsideFrame { x: f64, y: f64 },
    #[error("no-pose: no visible keypoint")]
    NoPose,
    #[error("pose-arity: expected 33 keypoints, got {0}")]
    PoseArity(usize),
}

impl TrackingError {
    pub fn code(&self) -> &'static str {
        match self {
            TrackingError::SampleOutsideFrame { .. } => "sample-outside-frame",
            TrackingError::NoPose => "no-pose",
            TrackingError::PoseArity(_) => "pose-arity",
        }
    }
}

/// Inclusive per-channel RGB bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorWindow {
    pub r_lo: u8,
    pub r_hi: u8,
    pub g_lo: u8,
    pub g_hi: u8,
    pub b_lo: u8,
    pub b_hi: u8,
}

impl ColorWindow {
    /// Window of ±10 around `rgb`, clamped to the channel range.
    pub fn from_sample(rgb: [u8; 3]) -> Self {
        let lo = |c: u8| c.saturating_sub(COLOR_TOLERANCE);
        let hi = |c: u8| c.saturating_add(COLOR_TOLERANCE);
        let [r, g, b] = rgb;
        Self {
            r_lo: lo(r),
            r_hi: hi(r),
            g_lo: lo(g),
            g_hi: hi(g),
            b_lo: lo(b),
            b_hi: hi(b),
        }
    }

    #[inline]
    pub fn contains(&self, rgb: [u8; 3]) -> bool {
        (self.r_lo..=self.r_hi).contains(&rgb[0])
            && (self.g_lo..=self.g_hi).contains(&rgb[1])
            && (self.b_lo..=self.b_hi).contains(&rgb[2])
    }

    pub fn is_well_formed(&self) -> bool {
        self.r_lo <= self.r_hi && self.g_lo <= self.g_hi && self.b_lo <= self.b_hi
    }
}

/// Row-major boolean grid with the dimensions of its source frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    /// Panics if `bits.len() != width * height`.
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert_eq!(
            bits.len(),
            width as usize * height as usize,
            "mask bit count does not match dimensions"
        );
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Out-of-range coordinates read as unset.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as u64) < self.width as u64
            && (y as u64) < self.height as u64
            && self.get(x as u32, y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }
}

/// Builds the window from the pixel under `p`.
pub fn sample_color_window(frame: &RgbImage, p: Point2) -> Result<ColorWindow, TrackingError> {
    let inside =
        p.x >= 0.0 && p.y >= 0.0 && p.x < frame.width() as f64 && p.y < frame.height() as f64;
    if !inside {
        return Err(TrackingError::SampleOutsideFrame { x: p.x, y: p.y });
    }
    let px = frame.get_pixel(p.x as u32, p.y as u32);
    Ok(ColorWindow::from_sample(px.0))
}

/// Sets each bit whose pixel lies inside `window` on all three channels.
pub fn segment_by_window(frame: &RgbImage, window: &ColorWindow) -> BinaryMask {
    let bits = frame
        .as_raw()
        .chunks_exact(3)
        .map(|px| window.contains([px[0], px[1], px[2]]))
        .collect();
    BinaryMask::from_bits(frame.width(), frame.height(), bits)
}

/// Summary of one 4-connected component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentStats {
    pub area: u64,
    pub sum_x: u64,
    pub sum_y: u64,
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
}

impl ComponentStats {
    pub fn centroid(&self) -> Point2 {
        Point2::new(
            self.sum_x as f64 / self.area as f64,
            self.sum_y as f64 / self.area as f64,
        )
    }

    /// Larger area wins; equal areas go to the row-major smaller top-left corner.
    fn beats(&self, other: &ComponentStats) -> bool {
        self.area > other.area
            || (self.area == other.area && (self.min_y, self.min_x) < (other.min_y, other.min_x))
    }
}

/// Horizontal run of set bits `[x0, x1)` on row `y`.
#[derive(Debug, Clone, Copy)]
struct Run {
    y: u32,
    x0: u32,
    x1: u32,
}

/// Run-length connected-component labelling with union-find over runs.
struct RunLabels {
    runs: Vec<Run>,
    parent: Vec<usize>,
}

impl RunLabels {
    fn build(mask: &BinaryMask) -> Self {
        let w = mask.width as usize;
        let mut runs = Vec::new();
        let mut parent: Vec<usize> = Vec::new();
        let mut prev_row: std::ops::Range<usize> = 0..0;
        for y in 0..mask.height as usize {
            let row = &mask.bits[y * w..(y + 1) * w];
            let row_start = runs.len();
            let mut x = 0;
            while x < w {
                if !row[x] {
                    x += 1;
                    continue;
                }
                let x0 = x;
                while x < w && row[x] {
                    x += 1;
                }
                runs.push(Run {
                    y: y as u32,
                    x0: x0 as u32,
                    x1: x as u32,
                });
                parent.push(runs.len() - 1);
            }
            // Merge with overlapping runs on the previous row (both lists are sorted by x).
            let cur = row_start..runs.len();
            let mut j = prev_row.start;
            for i in cur.clone() {
                let r = runs[i];
                while j < prev_row.end && runs[j].x1 <= r.x0 {
                    j += 1;
                }
                let mut k = j;
                while k < prev_row.end && runs[k].x0 < r.x1 {
                    union(&mut parent, i, k);
                    k += 1;
                }
            }
            prev_row = cur;
        }
        Self { runs, parent }
    }

    fn root(&mut self, i: usize) -> usize {
        find(&mut self.parent, i)
    }

    /// Stats per root, in order of each component's first run.
    fn components(&mut self) -> Vec<(usize, ComponentStats)> {
        let mut slot = vec![usize::MAX; self.runs.len()];
        let mut out: Vec<(usize, ComponentStats)> = Vec::new();
        for i in 0..self.runs.len() {
            let root = self.root(i);
            let r = self.runs[i];
            let len = (r.x1 - r.x0) as u64;
            let sum_x = (r.x0 as u64 + r.x1 as u64 - 1) * len / 2;
            if slot[root] == usize::MAX {
                slot[root] = out.len();
                out.push((
                    root,
                    ComponentStats {
                        area: 0,
                        sum_x: 0,
                        sum_y: 0,
                        min_x: r.x0,
                        min_y: r.y,
                        max_x: r.x1 - 1,
                        max_y: r.y,
                    },
                ));
            }
            let s = &mut out[slot[root]].1;
            s.area += len;
            s.sum_x += sum_x;
            s.sum_y += r.y as u64 * len;
            s.min_x = s.min_x.min(r.x0);
            s.max_x = s.max_x.max(r.x1 - 1);
            s.min_y = s.min_y.min(r.y);
            s.max_y = s.max_y.max(r.y);
        }
        out
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // Keep the earlier run as root so roots are stable.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// The largest 4-connected component, `None` for an empty mask.
pub fn largest_component(mask: &BinaryMask) -> Option<ComponentStats> {
    let mut labels = RunLabels::build(mask);
    pick_largest(&labels.components()).map(|(_, s)| s)
}

fn pick_largest(comps: &[(usize, ComponentStats)]) -> Option<(usize, ComponentStats)> {
    let mut best: Option<(usize, ComponentStats)> = None;
    for &(root, stats) in comps {
        if best.is_none_or(|(_, b)| stats.beats(&b)) {
            best = Some((root, stats));
        }
    }
    best
}

/// Mask holding only the largest component, with its stats.
pub fn largest_component_mask(mask: &BinaryMask) -> Option<(BinaryMask, ComponentStats)> {
    let mut labels = RunLabels::build(mask);
    let (root, stats) = pick_largest(&labels.components())?;
    let mut out = BinaryMask::new(mask.width, mask.height);
    let w = mask.width as usize;
    for i in 0..labels.runs.len() {
        if labels.root(i) == root {
            let r = labels.runs[i];
            let base = r.y as usize * w;
            out.bits[base + r.x0 as usize..base + r.x1 as usize].fill(true);
        }
    }
    Some((out, stats))
}

/// Mean pixel coordinate of the largest 4-connected component.
pub fn largest_component_centroid(mask: &BinaryMask) -> Option<Point2> {
    largest_component(mask).map(|s| s.centroid())
}

/// Per-frame position of one tracker.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackerState {
    pub tracker_id: String,
    /// Most recent successful fix; `None` until the first one.
    pub last_position: Option<Point2>,
    /// Consecutive frames without a fix.
    pub lost_for: u32,
    pub history: VecDeque<Point2>,
}

impl TrackerState {
    pub fn new(tracker_id: impl Into<String>, initial: Option<Point2>) -> Self {
        let mut history = VecDeque::with_capacity(HISTORY_CAPACITY);
        history.extend(initial);
        Self {
            tracker_id: tracker_id.into(),
            last_position: initial,
            lost_for: 0,
            history,
        }
    }

    /// Records the outcome of one frame.
    pub fn observe(&mut self, fix: Option<Point2>) {
        match fix {
            Some(p) => {
                self.last_position = Some(p);
                self.lost_for = 0;
                if self.history.len() == HISTORY_CAPACITY {
                    self.history.pop_front();
                }
                self.history.push_back(p);
            }
            None => self.lost_for = self.lost_for.saturating_add(1),
        }
    }

    pub fn is_lost(&self) -> bool {
        self.lost_for >= LOST_WARNING_FRAMES
    }
}

/// One color-tracking step: segment, pick the largest blob, update.
pub fn track_color(frame: &RgbImage, state: &TrackerState, window: &ColorWindow) -> TrackerState {
    let mask = segment_by_window(frame, window);
    let mut next = state.clone();
    next.observe(largest_component_centroid(&mask));
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub position: Point2,
    pub visible: bool,
}

/// Exactly 33 skeleton keypoints for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Keypoint>", into = "Vec<Keypoint>")]
pub struct PoseFrame {
    keypoints: Vec<Keypoint>,
}

impl PoseFrame {
    pub fn new(keypoints: Vec<Keypoint>) -> Result<Self, TrackingError> {
        if keypoints.len() != KEYPOINT_COUNT {
            return Err(TrackingError::PoseArity(keypoints.len()));
        }
        Ok(Self { keypoints })
    }

    /// A frame with no detection.
    pub fn invisible() -> Self {
        Self {
            keypoints: vec![
                Keypoint {
                    position: Point2::ORIGIN,
                    visible: false
                };
                KEYPOINT_COUNT
            ],
        }
    }

    pub fn keypoints(&self) -> &[Keypoint] {
        &self.keypoints
    }

    pub fn get(&self, index: usize) -> Option<&Keypoint> {
        self.keypoints.get(index)
    }

    /// Position of a visible keypoint.
    pub fn visible(&self, index: usize) -> Option<Point2> {
        self.get(index).filter(|k| k.visible).map(|k| k.position)
    }
}

impl TryFrom<Vec<Keypoint>> for PoseFrame {
    type Error = TrackingError;
    fn try_from(v: Vec<Keypoint>) -> Result<Self, Self::Error> {
        PoseFrame::new(v)
    }
}

impl From<PoseFrame> for Vec<Keypoint> {
    fn from(p: PoseFrame) -> Self {
        p.keypoints
    }
}

/// Visible keypoint closest to `click`; lowest index wins ties.
pub fn nearest_keypoint(pose: &PoseFrame, click: Point2) -> Result<usize, TrackingError> {
    pose.keypoints
        .iter()
        .enumerate()
        .filter(|(_, k)| k.visible)
        .map(|(i, k)| (i, k.position.distance(click)))
        .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((i, d)),
        })
        .map(|(i, _)| i)
        .ok_or(TrackingError::NoPose)
}

pub fn track_keypoint(
    pose: Option<&PoseFrame>,
    state: &TrackerState,
    index: usize,
) -> TrackerState {
    let mut next = state.clone();
    next.observe(pose.and_then(|p| p.visible(index)));
    next
}

/// Screen-space distance between two trackers; `None` until both have a fix.
pub fn pair_distance(a: &TrackerState, b: &TrackerState) -> Option<f64> {
    Some(a.last_position?.distance(b.last_position?))
}
