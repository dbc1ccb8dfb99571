use std::collections::BTreeMap;
use std::path::Path;

use scribble_core::scene_io::load_scene;
use serde::Serialize;

use crate::{effect_counts, CliError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub scene: String,
    pub width: u32,
    pub height: u32,
    pub elements: usize,
    pub trackers: usize,
    pub effects: BTreeMap<String, usize>,
}

/// Loads and checks a scene file. Any diagnostic makes it an input error.
pub fn run_validate(path: &Path) -> Result<ValidateReport, CliError> {
    let scene = load_scene(path)?;
    Ok(ValidateReport {
        scene: path.display().to_string(),
        width: scene.frame_size.width,
        height: scene.frame_size.height,
        elements: scene.elements.len(),
        trackers: scene.trackers.len(),
        effects: effect_counts(&scene),
    })
}
