//! Shared fixtures for the pipeline benchmarks.

use image::RgbImage;
use scribble_core::model::FrameSize;
use scribble_core::synth::SyntheticVideo;
use scribble_core::{BinaryMask, PoseFrame};

/// Pre-rendered synthetic frames, so benchmarks time only the engine.
pub struct Clip {
    pub video: SyntheticVideo,
    pub frames: Vec<RgbImage>,
    pub poses: Vec<PoseFrame>,
    pub masks: Vec<BinaryMask>,
}

impl Clip {
    pub fn new(size: FrameSize, count: u64) -> Self {
        let video = SyntheticVideo::new(size);
        Self {
            frames: (0..count).map(|f| video.frame(f)).collect(),
            poses: (0..count).map(|f| video.pose(f)).collect(),
            masks: (0..count).map(|f| video.body_mask(f)).collect(),
            video,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
