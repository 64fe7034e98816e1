use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gridquake_core::fragility::sample_scenario;
use gridquake_core::power_flow::{system_functionality, FunctionalityEvaluator};
use gridquake_core::recovery::simulate;
use gridquake_core::rng::substream;
use gridquake_core::perception::assess_scenario;
use gridquake_core::{
    run_study, DamageScenario, FunctionalityMap, MonitoringConfig, NetworkCase, RecoveryConfig, StudyConfig,
};

const FIXTURE: &str = include_str!("../../core/data/scenarios/two_islands.json");

fn functionality(c: &mut Criterion) {
    let case = NetworkCase::rts24();
    let map = FunctionalityMap::default();
    let intact = DamageScenario::intact(&case);
    let fixture = DamageScenario::from_json(&case, FIXTURE).unwrap();
    c.bench_function("functionality_intact", |b| b.iter(|| system_functionality(&case, black_box(&intact), &map)));
    c.bench_function("functionality_two_islands", |b| {
        b.iter(|| system_functionality(&case, black_box(&fixture), &map))
    });
}

fn hazard_and_damage(c: &mut Criterion) {
    let case = NetworkCase::rts24();
    let cfg = StudyConfig::default();
    let sampler = cfg.hazard.sampler(&case).unwrap();
    let mut rng = substream(1, &[0]);
    c.bench_function("field_and_damage", |b| {
        b.iter(|| {
            let field = sampler.sample(&mut rng).unwrap();
            sample_scenario(&field, &case, &cfg.fragility, &mut rng).unwrap()
        })
    });
}

fn recovery(c: &mut Criterion) {
    let case = NetworkCase::rts24();
    let map = FunctionalityMap::default();
    let fixture = DamageScenario::from_json(&case, FIXTURE).unwrap();
    let rcfg = RecoveryConfig::default();
    let monitoring = MonitoringConfig::sshm(0.9);
    let mut rng = substream(2, &[0]);
    // Warm cache mirrors a study, where one evaluator serves every replicate.
    let mut evaluator = FunctionalityEvaluator::new(&case, &map);
    c.bench_function("recovery_two_islands", |b| {
        b.iter(|| {
            let perceived = assess_scenario(&case, &fixture, &monitoring, &mut rng).unwrap();
            simulate(&fixture, &perceived, &rcfg, &mut evaluator, &mut rng).unwrap()
        })
    });
}

fn study(c: &mut Criterion) {
    let case = NetworkCase::rts24();
    let cfg = StudyConfig { scenarios: 2, perceptions: 5, ..StudyConfig::default() };
    c.bench_function("study_2x5", |b| b.iter(|| run_study(&case, black_box(&cfg), 42).unwrap()));
}

criterion_group!(components, functionality, hazard_and_damage, recovery);
criterion_group! {
    name = studies;
    config = Criterion::default().sample_size(10);
    targets = study
}
criterion_main!(components, studies);
