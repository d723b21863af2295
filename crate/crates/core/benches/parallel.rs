use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polyphase::ambiguity::auto_and_cross_surfaces;
use polyphase::echo_sim::{suppression_ensemble, RadarParams, TripEcho, TwoTripScenario, Trip};
use polyphase::filter_design::design_set;
use polyphase::optimizer::{global_search, ErrorFunctionConfig, OptimizerConfig};
use polyphase::waveforms::random_unimodular;
use polyphase::Execution;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn label(e: Execution) -> &'static str {
    match e {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn multistart(c: &mut Criterion) {
    let cfg = ErrorFunctionConfig::sidelobes(48, 3, 1).unwrap();
    let mut g = c.benchmark_group("global_search");
    g.sample_size(10);
    for mode in MODES {
        let opt = OptimizerConfig { starts: 8, max_iterations: 60, execution: mode, ..Default::default() };
        g.bench_function(BenchmarkId::new(label(mode), "m2_l12_nf48"), |b| {
            b.iter(|| global_search(2, 12, 48, &cfg, &opt).unwrap())
        });
    }
    g.finish();
}

fn test_set() -> polyphase::filter_design::CodeFilterSet {
    let codes = vec![random_unimodular(40, 1).unwrap(), random_unimodular(40, 2).unwrap()];
    design_set(&codes, 160, 5, Execution::Sequential).unwrap()
}

fn surfaces(c: &mut Criterion) {
    let set = test_set();
    let dopplers: Vec<f64> = (0..=40).map(|k| 50.0 * k as f64).collect();
    let mut g = c.benchmark_group("ambiguity");
    g.sample_size(10);
    for mode in MODES {
        g.bench_function(BenchmarkId::new(label(mode), "four_surfaces"), |b| {
            b.iter(|| auto_and_cross_surfaces(&set, &dopplers, 2e6, mode).unwrap())
        });
    }
    g.finish();
}

fn ensemble(c: &mut Criterion) {
    let set = test_set();
    let radar = RadarParams { pri_s: 100e-6, ..RadarParams::default() };
    let echo = |trip, velocity_mps| TripEcho {
        trip,
        gate_start: 40,
        gate_end: 80,
        power_db: 0.0,
        velocity_mps,
        spectral_width_mps: 1.0,
    };
    let scenario = TwoTripScenario {
        radar,
        trips: vec![echo(Trip::First, 5.0), echo(Trip::Second, -5.0)],
        pulses: 32,
        ..TwoTripScenario::default()
    };
    let seeds: Vec<u64> = (1..=8).collect();
    let mut g = c.benchmark_group("suppression_ensemble");
    g.sample_size(10);
    for mode in MODES {
        g.bench_function(BenchmarkId::new(label(mode), "8_seeds"), |b| {
            b.iter(|| suppression_ensemble(&scenario, &set, &seeds, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, multistart, surfaces, ensemble);
criterion_main!(benches);
