//! Runs the authoring server until interrupted (or after one client).

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use scribble_core::engine::DEFAULT_FPS;
use scribble_core::model::{FrameSize, Scene};
use scribble_core::scene_io::{load_masks, load_pose_track, load_scene, save_scene, FrameSequence};
use scribble_core::session::server::{self, Server};
use scribble_core::session::{FrameSource, LiveSource, RecordedSource, Session, SyntheticSource};
use scribble_core::synth::SyntheticVideo;

use crate::{parse_size, CliError, Record};

#[derive(Debug, Clone, Args)]
pub struct ServeOptions {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub addr: String,
    /// Scene to start from; otherwise an empty one.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Serve a recorded frame directory instead of the synthetic video.
    #[arg(long, conflicts_with = "live")]
    pub frames: Option<PathBuf>,
    #[arg(long, requires = "frames")]
    pub pose: Option<PathBuf>,
    #[arg(long, requires = "frames")]
    pub masks: Option<PathBuf>,
    /// Accept frames pushed by the client.
    #[arg(long)]
    pub live: bool,
    /// Length of the synthetic video.
    #[arg(long, default_value_t = 600)]
    pub synthetic_frames: u64,
    /// Frame size for the synthetic and live sources.
    #[arg(long, value_parser = parse_size, default_value = "640x480")]
    pub size: FrameSize,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Playback tick in milliseconds; 0 leaves stepping to the client.
    #[arg(long, default_value_t = 33)]
    pub tick_ms: u64,
    /// Send base frames to the client along with overlays.
    #[arg(long)]
    pub send_frames: bool,
    /// Write the scene here whenever a client disconnects.
    #[arg(long)]
    pub save_scene: Option<PathBuf>,
    /// Exit after the first client disconnects.
    #[arg(long)]
    pub once: bool,
}

fn open_session(opts: &ServeOptions) -> Result<Session, CliError> {
    let loaded = opts.scene.as_deref().map(load_scene).transpose()?;
    let (source, size, fps): (Box<dyn FrameSource>, FrameSize, Option<f64>) = match &opts.frames {
        Some(dir) => {
            let frames = FrameSequence::open(dir)?;
            let (w, h) = frames.size();
            let pose = opts.pose.as_deref().map(load_pose_track).transpose()?;
            let masks = opts.masks.as_deref().map(load_masks).transpose()?;
            let fps = pose.as_ref().map(|p| p.fps);
            (
                Box::new(RecordedSource {
                    frames,
                    pose,
                    masks,
                }),
                FrameSize::new(w, h),
                fps,
            )
        }
        None if opts.live => (Box::new(LiveSource::default()), opts.size, None),
        None => {
            let video = SyntheticVideo::new(opts.size);
            (
                Box::new(SyntheticSource {
                    video,
                    frames: opts.synthetic_frames,
                }),
                opts.size,
                None,
            )
        }
    };
    let scene = loaded.unwrap_or_else(|| Scene::empty(size, 0));
    if scene.frame_size != size {
        return Err(CliError::input(
            "size-mismatch(0)",
            format!("scene is {:?}, source is {size:?}", scene.frame_size),
        ));
    }
    let fps = opts.fps.or(fps).unwrap_or(DEFAULT_FPS);
    if !(fps.is_finite() && fps > 0.0) {
        return Err(CliError::input(
            "fps",
            format!("frame rate must be positive, got {fps}"),
        ));
    }
    Ok(Session::new(scene, fps, source))
}

/// Serves clients one after another on `opts.addr`, writing a record per
/// bound address and per finished client to `records`.
pub fn run_serve(opts: &ServeOptions, records: &mut dyn Write) -> Result<Session, CliError> {
    let mut session = open_session(opts)?;
    let options = server::ServeOptions {
        tick: (opts.tick_ms > 0).then(|| Duration::from_millis(opts.tick_ms)),
        send_frames: opts.send_frames,
    };
    let io = |e: std::io::Error| CliError::Internal(e.to_string());
    let mut addr = opts.addr.clone();
    loop {
        let server =
            Server::bind(&addr).map_err(|e| CliError::input("bind", format!("{addr}: {e}")))?;
        let bound = server.local_addr().map_err(io)?;
        // Keep the port stable across clients when an ephemeral one was asked for.
        addr = bound.to_string();
        Record::Listening { addr: addr.clone() }
            .write_line(records)
            .map_err(io)?;
        session = server.serve_one(session, &options).map_err(io)?;
        if let Some(path) = &opts.save_scene {
            save_scene(path, session.scene())?;
        }
        Record::ClientDone {
            next_frame: session.next_frame(),
            effects: session.scene().effects.len(),
        }
        .write_line(records)
        .map_err(io)?;
        if opts.once {
            return Ok(session);
        }
    }
}
