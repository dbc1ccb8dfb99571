use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use scribble_bench::Clip;
use scribble_core::contour::{extract_outer_contour, simplify_polyline};
use scribble_core::engine::{Engine, FrameInput};
use scribble_core::model::FrameSize;
use scribble_core::synth::{teaser_scene, throughput_scene};
use scribble_core::tracking::{largest_component_centroid, segment_by_window};
use scribble_core::{emit_svg, ColorWindow};

const SIZE: FrameSize = FrameSize {
    width: 640,
    height: 480,
};

fn tracking(c: &mut Criterion) {
    let clip = Clip::new(SIZE, 8);
    let window = ColorWindow::from_sample(clip.video.ball_color);
    let mut group = c.benchmark_group("tracking");
    group.throughput(Throughput::Elements(1));
    group.bench_function("segment_640x480", |b| {
        b.iter(|| segment_by_window(black_box(&clip.frames[3]), &window))
    });
    let mask = segment_by_window(&clip.frames[3], &window);
    group.bench_function("largest_component_centroid", |b| {
        b.iter(|| largest_component_centroid(black_box(&mask)))
    });
    group.finish();
}

fn contour(c: &mut Criterion) {
    let clip = Clip::new(SIZE, 8);
    let mask = &clip.masks[5];
    let mut group = c.benchmark_group("contour");
    group.bench_function("trace_body_mask", |b| {
        b.iter(|| extract_outer_contour(black_box(mask), 5))
    });
    let ring = extract_outer_contour(mask, 5).expect("body mask is not empty");
    for eps in [0.5, 1.5, 4.0] {
        group.bench_with_input(BenchmarkId::new("simplify", eps), &eps, |b, &eps| {
            b.iter(|| simplify_polyline(black_box(&ring), eps))
        });
    }
    group.finish();
}

fn full_step(c: &mut Criterion) {
    let clip = Clip::new(SIZE, 60);
    let mut group = c.benchmark_group("frame");
    group.throughput(Throughput::Elements(clip.len() as u64));
    for (name, scene) in [
        ("throughput_scene", throughput_scene(&clip.video)),
        ("teaser_scene", teaser_scene(&clip.video)),
    ] {
        group.bench_function(BenchmarkId::new("step_60_frames", name), |b| {
            b.iter(|| {
                let mut engine = Engine::new(scene.clone(), 30.0);
                for f in 0..clip.len() {
                    let input = FrameInput {
                        image: &clip.frames[f],
                        pose: Some(&clip.poses[f]),
                        body_mask: Some(&clip.masks[f]),
                    };
                    black_box(engine.step(f as u64, &input).expect("sizes match"));
                }
            })
        });
    }
    let mut engine = Engine::new(teaser_scene(&clip.video), 30.0);
    let mut last = None;
    for f in 0..clip.len() {
        let input = FrameInput {
            image: &clip.frames[f],
            pose: Some(&clip.poses[f]),
            body_mask: Some(&clip.masks[f]),
        };
        last = Some(engine.step(f as u64, &input).expect("sizes match"));
    }
    let overlay = last.expect("clip is not empty");
    group.throughput(Throughput::Elements(1));
    group.bench_function("emit_svg_teaser", |b| {
        b.iter(|| emit_svg(black_box(&overlay), SIZE))
    });
    group.finish();
}

criterion_group!(benches, tracking, contour, full_step);
criterion_main!(benches);
