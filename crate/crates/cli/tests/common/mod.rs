#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use scribble_core::model::{FrameSize, Scene};
use scribble_core::scene_io::{save_masks, save_pose_track, save_scene};
use scribble_core::synth::SyntheticVideo;
use scribble_core::BinaryMask;
use tempfile::TempDir;

/// A synthetic recording on disk: frames, pose track, body masks and a scene.
pub struct Dataset {
    pub dir: TempDir,
    pub video: SyntheticVideo,
    pub scene: PathBuf,
    pub frames: PathBuf,
    pub pose: PathBuf,
    pub masks: PathBuf,
}

impl Dataset {
    pub fn new(
        size: FrameSize,
        count: usize,
        scene: impl FnOnce(&SyntheticVideo) -> Scene,
    ) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let video = SyntheticVideo::new(size);
        let frames = dir.path().join("frames");
        std::fs::create_dir(&frames).unwrap();
        video.write_frames(&frames, count).unwrap();
        let pose = dir.path().join("pose.json");
        save_pose_track(&pose, &video.pose_track(count, 30.0)).unwrap();
        let masks = dir.path().join("masks.bin");
        let all: Vec<BinaryMask> = (0..count as u64).map(|f| video.body_mask(f)).collect();
        save_masks(&masks, &all).unwrap();
        let scene_path = dir.path().join("scene.json");
        save_scene(&scene_path, &scene(&video)).unwrap();
        Self {
            dir,
            video,
            scene: scene_path,
            frames,
            pose,
            masks,
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// File name to contents for every file in `dir`.
pub fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}
