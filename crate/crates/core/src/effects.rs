//! Per-frame state machines for binding, flip-book, trigger, particle and
//! trajectory effects.
//!
//! Every step is a pure function of its inputs; randomness comes only from
//! generators seeded by [`effect_rng`].

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{EffectKind, ParticleParams, Point2, TrajectoryParams, TriggerDirection};
use crate::render::RasterFill;

/// Particle settings; the template element is the effect's single element.
pub type ParticleSpec = ParticleParams;
/// Trajectory settings; the template element is the effect's single element.
pub type TrajectorySpec = TrajectoryParams;

/// Translation, uniform scale about `origin`, and an opacity multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transform {
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
    pub origin: Point2,
    pub opacity: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        dx: 0.0,
        dy: 0.0,
        scale: 1.0,
        origin: Point2::ORIGIN,
        opacity: 1.0,
    };

    pub fn translation(d: Point2) -> Self {
        Transform {
            dx: d.x,
            dy: d.y,
            ..Self::IDENTITY
        }
    }

    pub fn translate(mut self, d: Point2) -> Self {
        self.dx += d.x;
        self.dy += d.y;
        self
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
            || (self.dx == 0.0 && self.dy == 0.0 && self.scale == 1.0 && self.opacity == 1.0)
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        self.origin + (p - self.origin) * self.scale + Point2::new(self.dx, self.dy)
    }
}

/// Tracker position captured when an element was bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BindingState {
    pub anchor_at_bind: Point2,
}

/// Pure translation by how far the anchor moved since bind time.
pub fn update_binding(state: &BindingState, anchor_now: Point2) -> Transform {
    Transform::translation(anchor_now - state.anchor_at_bind)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipBookSpec {
    pub frames: Vec<String>,
    pub fps: f64,
}

impl FlipBookSpec {
    pub fn frame_at(&self, t: f64) -> usize {
        flipbook_frame(self.frames.len(), self.fps, t)
    }
}

/// `floor(t * fps) mod frame_count`.
pub fn flipbook_frame(frame_count: usize, fps: f64, t: f64) -> usize {
    if frame_count == 0 {
        return 0;
    }
    let step = (t.max(0.0) * fps).floor();
    (step as u64 % frame_count as u64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerSpec {
    pub threshold: f64,
    pub direction: TriggerDirection,
    /// Payload playback length in engine frames (at least 1).
    pub payload_frames: u64,
}

impl TriggerSpec {
    fn condition(&self, distance: f64) -> bool {
        match self.direction {
            TriggerDirection::Decrease => distance < self.threshold,
            TriggerDirection::Increase => distance > self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TriggerState {
    pub armed: bool,
    pub playing: bool,
    pub play_started_at: Option<u64>,
}

impl Default for TriggerState {
    fn default() -> Self {
        Self {
            armed: true,
            playing: false,
            play_started_at: None,
        }
    }
}

impl TriggerState {
    /// Frames since the current playback started, if playing.
    pub fn playback_frame(&self, frame: u64) -> Option<u64> {
        if self.playing {
            self.play_started_at.map(|s| frame.saturating_sub(s))
        } else {
            None
        }
    }
}

/// One-shot trigger. Fires when armed and the distance crosses the
/// threshold in the configured direction; re-arms only once playback has
/// finished and the condition has released.
pub fn evaluate_trigger(
    spec: &TriggerSpec,
    state: &TriggerState,
    distance: f64,
    frame: u64,
) -> (TriggerState, bool) {
    let mut next = *state;
    if next.playing {
        let started = next.play_started_at.unwrap_or(frame);
        if frame.saturating_sub(started) >= spec.payload_frames.max(1) {
            next.playing = false;
        }
    }
    let met = spec.condition(distance);
    if !next.playing && !next.armed && !met {
        next.armed = true;
    }
    let fire = next.armed && !next.playing && met;
    if fire {
        next.armed = false;
        next.playing = true;
        next.play_started_at = Some(frame);
    }
    (next, fire)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Particle {
    pub birth_frame: u64,
    /// Spawn position on the emitter.
    pub origin: Point2,
    /// Pixels traveled since spawn.
    pub progress: f64,
    /// Seconds since spawn.
    pub age: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParticleSystem {
    pub particles: Vec<Particle>,
    /// Fractional spawns carried to the next step.
    pub spawn_accumulator: f64,
}

/// Advances, culls, then spawns. New particles land at uniformly random
/// arc-length positions on `emitter_world`.
pub fn step_particles<R: Rng>(
    spec: &ParticleSpec,
    system: &ParticleSystem,
    emitter_world: &[Point2],
    dt: f64,
    frame: u64,
    rng: &mut R,
) -> ParticleSystem {
    let dt = dt.max(0.0);
    let path_len = spec.motion_path.as_deref().map(polyline_length);
    let mut particles: Vec<Particle> = system
        .particles
        .iter()
        .map(|p| Particle {
            progress: p.progress + spec.speed * dt,
            age: p.age + dt,
            ..*p
        })
        .filter(|p| p.age <= spec.lifetime)
        .filter(|p| match path_len {
            Some(len) if !spec.loop_path => p.progress <= len,
            _ => true,
        })
        .collect();

    let mut acc = system.spawn_accumulator + spec.spawn_rate * dt;
    // Small slack so 10/s * 0.1s yields exactly one spawn despite rounding.
    let count = (acc + 1e-9).floor();
    acc = (acc - count).max(0.0);
    let emitter_len = polyline_length(emitter_world);
    for _ in 0..count as u64 {
        let u: f64 = rng.random::<f64>() * emitter_len;
        let origin = point_at_length(emitter_world, u);
        particles.push(Particle {
            birth_frame: frame,
            origin,
            progress: 0.0,
            age: 0.0,
        });
    }
    ParticleSystem {
        particles,
        spawn_accumulator: acc,
    }
}

/// Current position of a particle along its motion path or default heading.
pub fn particle_position(spec: &ParticleSpec, particle: &Particle) -> Point2 {
    match spec.motion_path.as_deref() {
        Some(path) if path.len() >= 2 => {
            let len = polyline_length(path);
            let s = if spec.loop_path && len > 0.0 {
                particle.progress % len
            } else {
                particle.progress.min(len)
            };
            particle.origin + (point_at_length(path, s) - path[0])
        }
        _ => {
            let a = spec.direction_deg.to_radians();
            particle.origin + Point2::new(a.cos(), a.sin()) * particle.progress
        }
    }
}

pub fn polyline_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Point at arc length `s` along an open polyline, clamped to its ends.
pub fn point_at_length(points: &[Point2], s: f64) -> Point2 {
    let Some(&first) = points.first() else {
        return Point2::ORIGIN;
    };
    let mut remaining = s.max(0.0);
    for w in points.windows(2) {
        let seg = w[0].distance(w[1]);
        if remaining <= seg {
            return if seg > 0.0 {
                w[0].lerp(w[1], remaining / seg)
            } else {
                w[0]
            };
        }
        remaining -= seg;
    }
    *points.last().unwrap_or(&first)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrailClone {
    pub position: Point2,
    pub frame: u64,
}

/// Appends a clone at the anchor and drops the oldest beyond the cap.
pub fn update_trajectory(
    spec: &TrajectorySpec,
    clones: &VecDeque<TrailClone>,
    anchor_now: Point2,
    frame: u64,
) -> VecDeque<TrailClone> {
    let mut next = clones.clone();
    next.push_back(TrailClone {
        position: anchor_now,
        frame,
    });
    while next.len() > spec.max_elements.max(1) {
        next.pop_front();
    }
    next
}

/// `(opacity, scale)` of the clone `age` steps older than the newest.
pub fn trail_falloff(spec: &TrajectorySpec, age: usize) -> (f64, f64) {
    let k = age as i32;
    (spec.fade.powi(k), spec.scale_step.powi(k))
}

/// Runtime state of one effect, advanced once per engine frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectState {
    pub effect_id: String,
    /// Engine frame on which the effect first ran.
    pub started_at: Option<u64>,
    pub kind: EffectStateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EffectStateKind {
    Binding {
        binding: Option<BindingState>,
    },
    FlipBook {
        binding: Option<BindingState>,
        /// Index into the effect's frames shown this frame.
        current: usize,
    },
    Trigger {
        trigger: TriggerState,
        binding: Option<BindingState>,
        /// Payload frame shown while playing.
        showing: Option<usize>,
    },
    Particles {
        system: ParticleSystem,
        binding: Option<BindingState>,
    },
    Trajectory {
        clones: VecDeque<TrailClone>,
    },
    Contour {
        outline: Option<Vec<Point2>>,
        closed: bool,
        fill: Option<RasterFill>,
    },
}

impl EffectState {
    pub fn new(effect_id: impl Into<String>, kind: EffectKind) -> Self {
        let kind = match kind {
            EffectKind::Binding => EffectStateKind::Binding { binding: None },
            EffectKind::FlipBook => EffectStateKind::FlipBook {
                binding: None,
                current: 0,
            },
            EffectKind::Trigger => EffectStateKind::Trigger {
                trigger: TriggerState::default(),
                binding: None,
                showing: None,
            },
            EffectKind::Particles => EffectStateKind::Particles {
                system: ParticleSystem::default(),
                binding: None,
            },
            EffectKind::Trajectory => EffectStateKind::Trajectory {
                clones: VecDeque::new(),
            },
            EffectKind::Contour => EffectStateKind::Contour {
                outline: None,
                closed: true,
                fill: None,
            },
        };
        Self {
            effect_id: effect_id.into(),
            started_at: None,
            kind,
        }
    }

    pub fn kind(&self) -> EffectKind {
        match self.kind {
            EffectStateKind::Binding { .. } => EffectKind::Binding,
            EffectStateKind::FlipBook { .. } => EffectKind::FlipBook,
            EffectStateKind::Trigger { .. } => EffectKind::Trigger,
            EffectStateKind::Particles { .. } => EffectKind::Particles,
            EffectStateKind::Trajectory { .. } => EffectKind::Trajectory,
            EffectStateKind::Contour { .. } => EffectKind::Contour,
        }
    }
}

/// Deterministic generator for one effect on one frame.
pub fn effect_rng(scene_seed: u64, effect_id: &str, frame: u64) -> ChaCha8Rng {
    // FNV-1a: stable across platforms and releases, unlike std's hasher.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    mix(&scene_seed.to_le_bytes());
    mix(effect_id.as_bytes());
    mix(&[0xff]);
    mix(&frame.to_le_bytes());
    ChaCha8Rng::seed_from_u64(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binding_translation() {
        let s = BindingState {
            anchor_at_bind: Point2::new(50.0, 50.0),
        };
        assert!(update_binding(&s, Point2::new(50.0, 50.0)).is_identity());
        let t = update_binding(&s, Point2::new(60.0, 46.0));
        assert_eq!((t.dx, t.dy, t.scale), (10.0, -4.0, 1.0));
    }

    #[test]
    fn binding_ignores_intermediate_anchors() {
        let s = BindingState {
            anchor_at_bind: Point2::ORIGIN,
        };
        let path = [
            Point2::new(0.0, 0.0),
            Point2::new(5.0, 0.0),
            Point2::new(2.0, 3.0),
        ];
        let last = path
            .iter()
            .map(|&p| update_binding(&s, p))
            .next_back()
            .unwrap();
        assert_eq!(last, Transform::translation(Point2::new(2.0, 3.0)));
    }

    #[test]
    fn flipbook_indices() {
        assert_eq!(flipbook_frame(3, 8.0, 0.0), 0);
        assert_eq!(flipbook_frame(3, 8.0, 0.25), 2);
        assert_eq!(flipbook_frame(3, 8.0, 0.375), 0);
        assert_eq!(flipbook_frame(3, 8.0, 0.124), 0);
        assert_eq!(flipbook_frame(3, 8.0, 0.125), 1);
    }

    fn decrease(threshold: f64) -> TriggerSpec {
        TriggerSpec {
            threshold,
            direction: TriggerDirection::Decrease,
            payload_frames: 4,
        }
    }

    #[test]
    fn trigger_fires_below_threshold() {
        let (s, fire) = evaluate_trigger(&decrease(60.0), &TriggerState::default(), 50.0, 0);
        assert!(fire);
        assert!(s.playing && !s.armed);
        assert_eq!(s.play_started_at, Some(0));
    }

    #[test]
    fn trigger_is_one_shot() {
        let spec = decrease(60.0);
        let (s, _) = evaluate_trigger(&spec, &TriggerState::default(), 50.0, 0);
        let (s, fire) = evaluate_trigger(&spec, &s, 40.0, 1);
        assert!(!fire);
        // Payload finished but hands still close: stays disarmed.
        let (s, fire) = evaluate_trigger(&spec, &s, 40.0, 10);
        assert!(!fire && !s.armed && !s.playing);
        let (s, fire) = evaluate_trigger(&spec, &s, 80.0, 11);
        assert!(!fire && s.armed);
        let (_, fire) = evaluate_trigger(&spec, &s, 30.0, 12);
        assert!(fire);
    }

    #[test]
    fn trigger_needs_playback_to_finish_before_rearm() {
        let spec = decrease(60.0);
        let (s, _) = evaluate_trigger(&spec, &TriggerState::default(), 10.0, 0);
        let (s, _) = evaluate_trigger(&spec, &s, 100.0, 1);
        assert!(!s.armed && s.playing);
        let (s, fire) = evaluate_trigger(&spec, &s, 10.0, 2);
        assert!(!fire);
        let (s, _) = evaluate_trigger(&spec, &s, 100.0, 4);
        assert!(s.armed && !s.playing);
    }

    #[test]
    fn trigger_increase_direction() {
        let spec = TriggerSpec {
            threshold: 100.0,
            direction: TriggerDirection::Increase,
            payload_frames: 1,
        };
        let (s, fire) = evaluate_trigger(&spec, &TriggerState::default(), 80.0, 0);
        assert!(!fire);
        let (_, fire) = evaluate_trigger(&spec, &s, 120.0, 1);
        assert!(fire);
    }

    fn rain() -> ParticleSpec {
        ParticleSpec {
            emitter: vec![Point2::new(0.0, 0.0), Point2::new(100.0, 0.0)],
            ..ParticleSpec::default()
        }
    }

    #[test]
    fn spawn_count_from_rate() {
        let spec = rain();
        let mut rng = effect_rng(1, "p", 0);
        let s = step_particles(
            &spec,
            &ParticleSystem::default(),
            &spec.emitter,
            0.1,
            0,
            &mut rng,
        );
        assert_eq!(s.particles.len(), 1);
        assert!(s.particles[0].origin.y == 0.0 && (0.0..=100.0).contains(&s.particles[0].origin.x));
    }

    #[test]
    fn fractional_spawns_accumulate() {
        let spec = rain();
        let mut sys = ParticleSystem::default();
        for frame in 0..60 {
            let mut rng = effect_rng(1, "p", frame);
            sys = step_particles(&spec, &sys, &spec.emitter, 1.0 / 60.0, frame, &mut rng);
        }
        assert_eq!(sys.particles.len(), 10);
    }

    #[test]
    fn progress_advances_by_speed() {
        let spec = rain();
        let sys = ParticleSystem {
            particles: vec![Particle {
                birth_frame: 0,
                origin: Point2::ORIGIN,
                progress: 5.0,
                age: 0.0,
            }],
            spawn_accumulator: 0.0,
        };
        let mut rng = effect_rng(1, "p", 1);
        let next = step_particles(&spec, &sys, &spec.emitter, 1.0 / 60.0, 1, &mut rng);
        assert!((next.particles[0].progress - 6.0).abs() < 1e-12);
        // Default heading is straight down.
        let pos = particle_position(&spec, &next.particles[0]);
        assert!(pos.x.abs() < 1e-9 && (pos.y - 6.0).abs() < 1e-9);
    }

    #[test]
    fn particles_expire_after_lifetime() {
        let spec = ParticleSpec {
            lifetime: 0.5,
            spawn_rate: 0.001,
            ..rain()
        };
        let sys = ParticleSystem {
            particles: vec![Particle {
                birth_frame: 0,
                origin: Point2::ORIGIN,
                progress: 0.0,
                age: 0.45,
            }],
            spawn_accumulator: 0.0,
        };
        let mut rng = effect_rng(0, "p", 0);
        let next = step_particles(&spec, &sys, &spec.emitter, 0.1, 1, &mut rng);
        assert!(next.particles.is_empty());
    }

    #[test]
    fn motion_path_despawn_and_loop() {
        let path = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 10.0),
            Point2::new(10.0, 10.0),
        ];
        let mut spec = ParticleSpec {
            motion_path: Some(path),
            spawn_rate: 0.001,
            ..rain()
        };
        let p = Particle {
            birth_frame: 0,
            origin: Point2::new(5.0, 5.0),
            progress: 15.0,
            age: 0.0,
        };
        assert_eq!(particle_position(&spec, &p), Point2::new(10.0, 15.0));
        let sys = ParticleSystem {
            particles: vec![p],
            spawn_accumulator: 0.0,
        };
        let mut rng = effect_rng(0, "p", 0);
        assert!(step_particles(&spec, &sys, &spec.emitter, 0.1, 1, &mut rng)
            .particles
            .is_empty());
        spec.loop_path = true;
        let kept = step_particles(&spec, &sys, &spec.emitter, 0.1, 1, &mut rng);
        assert_eq!(kept.particles.len(), 1);
        assert_eq!(
            particle_position(&spec, &kept.particles[0]),
            Point2::new(5.0, 6.0)
        );
    }

    #[test]
    fn trajectory_cap_and_falloff() {
        let spec = TrajectorySpec::default();
        let mut clones = VecDeque::new();
        for i in 0..30 {
            clones = update_trajectory(&spec, &clones, Point2::new(i as f64, 0.0), i);
        }
        assert_eq!(clones.len(), 30);
        clones = update_trajectory(&spec, &clones, Point2::new(99.0, 0.0), 30);
        assert_eq!(clones.len(), 30);
        assert_eq!(clones.front().unwrap().position, Point2::new(1.0, 0.0));
        assert_eq!(clones.back().unwrap().position, Point2::new(99.0, 0.0));

        let faded = TrajectorySpec { fade: 0.9, ..spec };
        assert_eq!(trail_falloff(&faded, 0).0, 1.0);
        assert_eq!(trail_falloff(&faded, 1).0, 0.9);
    }

    #[test]
    fn stationary_anchor_keeps_every_clone() {
        let spec = TrajectorySpec::default();
        let mut clones = VecDeque::new();
        for i in 0..5 {
            clones = update_trajectory(&spec, &clones, Point2::new(3.0, 3.0), i);
        }
        assert_eq!(clones.len(), 5);
    }

    #[test]
    fn rng_streams_are_independent_per_effect() {
        let a: u64 = effect_rng(7, "a", 3).random();
        let a2: u64 = effect_rng(7, "a", 3).random();
        let b: u64 = effect_rng(7, "b", 3).random();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }
}
