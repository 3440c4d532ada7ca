use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use convergema::anchoring::AnchoringStrategy;
use convergema::convergence::{clevel, find_optimal_look_ahead, ProximityCondition, TuningInputs};
use convergema::curve::PowerLawCurve;
use convergema::par::Parallelism;
use convergema::synth::{generate, GeneratorSpec};
use convergema::trace::{LearningTrace, Observation, TraceParams};

fn log(levels: u32) -> Vec<Observation> {
    let truth = PowerLawCurve::new_unchecked(60.0, 0.5, 99.2);
    generate(&GeneratorSpec::noiseless(truth, levels)).unwrap()
}

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn trace_build(c: &mut Criterion) {
    let obs = log(120);
    let mut group = c.benchmark_group("trace_build");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                LearningTrace::from_observations(&obs, TraceParams::default(), AnchoringStrategy::fixed(100.0), None, mode)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn tuning(c: &mut Criterion) {
    let obs = log(120);
    let plain = LearningTrace::from_observations(
        &obs,
        TraceParams::default(),
        AnchoringStrategy::None,
        None,
        Parallelism::Parallel,
    )
    .unwrap();
    let baseline_clevel = clevel(&plain, &ProximityCondition::relative(0.05)).unwrap().unwrap();
    let mut group = c.benchmark_group("look_ahead_sweep");
    group.sample_size(10);
    for (name, mode) in MODES {
        let inputs = TuningInputs {
            observations: obs.clone(),
            params: TraceParams::default(),
            scheme: None,
            condition: ProximityCondition::absolute(0.05),
            baseline_clevel,
            parallelism: mode,
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &inputs, |b, inputs| {
            b.iter(|| find_optimal_look_ahead(inputs, 100.0))
        });
    }
    group.finish();
}

criterion_group!(benches, trace_build, tuning);
criterion_main!(benches);
