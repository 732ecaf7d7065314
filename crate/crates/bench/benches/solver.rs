use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use evoch_core::forms::assemble;
use evoch_core::{
    build_reference_surface, AdvectiveField, FlowField, FlowPreset, QuadraturePolicy, RunConfig, Simulation,
    SurfacePreset,
};

fn icosphere(c: &mut Criterion) {
    let mut group = c.benchmark_group("icosphere");
    for level in [3u32, 4, 5] {
        group.bench_with_input(BenchmarkId::from_parameter(level), &level, |b, &level| {
            b.iter(|| build_reference_surface(SurfacePreset::UnitSphere, level).unwrap())
        });
    }
    group.finish();
}

fn assembly(c: &mut Criterion) {
    let flow = FlowField::new(FlowPreset::BreathingSphere {
        amplitude: 0.25,
        frequency: 1.0,
    })
    .with_advective(AdvectiveField::RigidRotation { omega: [0.0, 0.0, 1.0] });
    let mut group = c.benchmark_group("assemble");
    for level in [3u32, 4] {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, level)
            .unwrap()
            .advance(&flow, 0.3)
            .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(level), &mesh, |b, mesh| {
            b.iter(|| assemble(mesh, &flow, QuadraturePolicy::Midpoint3).unwrap())
        });
    }
    group.finish();
}

fn time_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    group.sample_size(20);
    for (model, level) in [("advected", 3u32), ("advected", 4), ("weighted", 3)] {
        let text = format!(
            "model = \"{model}\"\ntheta = 0.3\nT = 1.0\ndt = 0.005\n[surface]\npreset = \"unit_sphere\"\nrefinement = {level}\n\
             [flow]\npreset = \"breathing_sphere\"\n[u0]\npreset = \"random_uniform\"\nseed = 7\namplitude = 0.05\nmean = 0.0\n"
        );
        let cfg = RunConfig::from_toml_str(&text, std::path::Path::new("bench.toml")).unwrap();
        let start = Simulation::new(&cfg).unwrap();
        group.bench_function(format!("{model}/{level}"), |b| {
            b.iter_batched(|| start.clone(), |mut sim| sim.step().unwrap(), BatchSize::LargeInput)
        });
    }
    group.finish();
}

criterion_group!(benches, icosphere, assembly, time_step);
criterion_main!(benches);
