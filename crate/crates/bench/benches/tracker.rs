use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tensegrity_bench::Fixture;
use tensegrity_core::geometry::{closest_points_between_segments, kabsch_weighted};
use tensegrity_core::tracker::{correction_step, track_frame, transition_step, TrackingContext};
use tensegrity_core::{Correspondence, RigidPose, Rotation, Segment, Vec3};

fn geometry(c: &mut Criterion) {
    let pose = RigidPose::new(
        Rotation::from_scaled_axis(Vec3::new(0.3, -0.2, 0.9)),
        Vec3::new(0.1, 0.2, 1.0),
    );
    let pairs: Vec<Correspondence> = (0..200)
        .map(|k| {
            let t = k as f64;
            let m = Vec3::new((t * 0.37).sin(), (t * 0.11).cos(), (t * 0.07).sin()) * 0.02;
            Correspondence::new(
                m,
                pose.transform_point(&m),
                0.5 + 0.5 * (t * 0.3).sin().abs(),
            )
        })
        .collect();
    c.bench_function("kabsch_weighted_200", |b| {
        b.iter(|| kabsch_weighted(black_box(&pairs)).unwrap())
    });
    let s1 = Segment::new(Vec3::new(-0.1, 0.0, 1.0), Vec3::new(0.2, 0.05, 1.1)).unwrap();
    let s2 = Segment::new(Vec3::new(0.0, -0.1, 1.05), Vec3::new(0.05, 0.2, 0.95)).unwrap();
    c.bench_function("closest_points_between_segments", |b| {
        b.iter(|| closest_points_between_segments(black_box(&s1), black_box(&s2)))
    });
}

fn tracker(c: &mut Criterion) {
    let fx = Fixture::new();
    let topo = &fx.sim.topology;
    c.bench_function("transition_step", |b| {
        b.iter(|| transition_step(black_box(&fx.transition_input())))
    });
    c.bench_function("correction_step", |b| {
        b.iter(|| {
            correction_step(
                black_box(&fx.q_hat),
                &fx.weights,
                &fx.frame.cables,
                &fx.constraints,
                topo,
                &fx.config.solver,
            )
            .unwrap()
        })
    });
    let ctx = TrackingContext {
        models: &fx.models,
        intrinsics: fx.sim.intrinsics(),
        topology: topo,
        config: &fx.config,
    };
    c.bench_function("track_frame", |b| {
        b.iter(|| track_frame(black_box(&fx.state), &fx.frame, 1, &ctx).unwrap())
    });
}

fn rendering(c: &mut Criterion) {
    let fx = Fixture::new();
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("render_720p", |b| {
        b.iter(|| fx.sim.observed_frame(black_box(1)))
    });
    group.finish();
}

criterion_group!(benches, geometry, tracker, rendering);
criterion_main!(benches);
