//! Batch front end for the scribble engine.
//!
//! Each subcommand is a plain function over an options struct, so the
//! binary and the tests drive exactly the same code. Reports are emitted as
//! one JSON object per line.

pub mod bench;
pub mod error;
pub mod render;
pub mod report;
pub mod serve;
pub mod validate;

pub use bench::{run_bench, BenchOptions, BenchReport};
pub use error::CliError;
pub use render::{run_render, OutputFormat, RenderOptions, RenderReport};
pub use report::Record;
pub use serve::{run_serve, ServeOptions};
pub use validate::{run_validate, ValidateReport};

use std::collections::BTreeMap;

use scribble_core::model::{EffectKind, FrameSize, Scene};

/// Parses `WIDTHxHEIGHT`, e.g. `640x480`.
pub fn parse_size(text: &str) -> Result<FrameSize, String> {
    let (w, h) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {text:?}"))?;
    let w: u32 = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h: u32 = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("width and height must be positive".into());
    }
    Ok(FrameSize::new(w, h))
}

/// Number of effects of each kind, keyed by kind name.
pub fn effect_counts(scene: &Scene) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = EffectKind::ALL
        .iter()
        .map(|k| (k.name().to_string(), 0))
        .collect();
    for effect in &scene.effects {
        *counts.entry(effect.kind().name().to_string()).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_size("640x480"), Ok(FrameSize::new(640, 480)));
        assert_eq!(parse_size("32X8"), Ok(FrameSize::new(32, 8)));
        assert!(parse_size("640").is_err());
        assert!(parse_size("0x4").is_err());
    }
}
