//! Parallel-vs-serial throughput of the Monte Carlo hot paths.
//!
//! Run with the default features to measure the rayon path against the
//! always-sequential twin, or with `--no-default-features` to confirm the
//! fallback build: `cargo bench -p subsearch-core`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use subsearch_core::environment::{CurrentField, PerturbationSpec};
use subsearch_core::geom::Vec3;
use subsearch_core::kinematics::{
    run_ensemble, run_ensemble_serial, Regime, ScenarioParams, VehicleState,
};
use subsearch_core::planner::{
    simulate_mission, simulate_mission_serial, MissionSpec, Policy, SearchSchedule, SonarAsset,
    TruthModel,
};
use subsearch_core::probgrid::{build_poisson_prior, GridSpec, PoissonPriorParams};

fn drift_params() -> ScenarioParams {
    ScenarioParams {
        regime: Regime::Drift,
        initial: VehicleState::new(Vec3::new(4000.0, 3000.0, -1000.0), Vec3::ZERO),
        sink_accel_mps2: 0.0,
        seabed_depth_m: 4000.0,
        dt_s: 1.0,
        horizon_s: 1800.0,
        perturbation: PerturbationSpec::new(0.05, 0.30, 600.0, 1).unwrap(),
        current: CurrentField::uniform(Vec3::new(0.02, 0.01, 0.0)),
    }
}

fn bench_ensemble(c: &mut Criterion) {
    let params = drift_params();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for n in [200usize, 1000] {
        group.bench_with_input(BenchmarkId::new("map_indexed", n), &n, |b, &n| {
            b.iter(|| run_ensemble(&params, n, 42))
        });
        group.bench_with_input(BenchmarkId::new("serial", n), &n, |b, &n| {
            b.iter(|| run_ensemble_serial(&params, n, 42))
        });
    }
    group.finish();
}

fn bench_mission(c: &mut Criterion) {
    let grid = GridSpec::new(300.0, 7800.0, 6000.0, (0.0, 0.0)).unwrap();
    let center = grid.clamp_point_to_cell(4000.0, 3000.0);
    let prior = build_poisson_prior(
        &grid,
        &PoissonPriorParams::with_lambda(1.3, center, None).unwrap(),
    )
    .unwrap();
    let params = drift_params();
    let ensemble = run_ensemble(&params, 200, 7);
    let sonar = |id: usize, col_shift: i64| {
        let (row, col) = grid.row_col(center);
        SonarAsset {
            id,
            speed_mps: 1.0,
            swath_m: 100.0,
            overlap: 0.1,
            start_cell: grid.cell_at(row, (col as i64 + col_shift) as usize).unwrap(),
            cell_time_s: 1800.0,
            pd: 0.9,
        }
    };
    let spec = MissionSpec {
        prior: &prior,
        sonars: vec![sonar(0, -1), sonar(1, 1)],
        schedule: SearchSchedule::new(1200.0, 1800.0, 10).unwrap(),
        policy: Policy::Greedy,
        teleport: false,
        truth: TruthModel::StaticFromEnsemble(&ensemble),
        replications: 0,
        seed: 42,
    };

    let mut group = c.benchmark_group("mission");
    group.sample_size(10);
    for m in [100usize, 400] {
        let mut spec = spec.clone();
        spec.replications = m;
        group.bench_with_input(BenchmarkId::new("map_indexed", m), &spec, |b, spec| {
            b.iter(|| simulate_mission(spec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("serial", m), &spec, |b, spec| {
            b.iter(|| simulate_mission_serial(spec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_ensemble, bench_mission);
criterion_main!(benches);
