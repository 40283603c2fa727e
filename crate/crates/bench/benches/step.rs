use std::hint::black_box;

use comanip_core::checks::{random_pose, random_twist, Battery};
use comanip_core::controller::{agent_control, SharedSignals};
use comanip_core::regressors::{regressor_contact_viscous, regressor_object};
use comanip_core::sim::Simulation;
use comanip_core::tracking::reference_accel;
use comanip_core::{run, scenarios, Accel, AgentState, Estimates};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn regressors(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = random_pose(&mut rng);
    let qd = random_twist(&mut rng);
    let qd_r = random_twist(&mut rng);
    let qdd_r = Accel::from_vector(&random_twist(&mut rng).to_vector());
    c.bench_function("regressor_object", |b| {
        b.iter(|| regressor_object(black_box(&q), black_box(&qd), black_box(&qd_r), black_box(&qdd_r)))
    });
    c.bench_function("regressor_contact_viscous", |b| {
        b.iter(|| regressor_contact_viscous(black_box(&q), black_box(&qd_r)))
    });
}

fn control(c: &mut Criterion) {
    let sc = scenarios::se3_nominal(0).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let q = random_pose(&mut rng);
    let qd = random_twist(&mut rng);
    let des = sc.trajectory.state_at(random_pose(&mut rng), 1.0);
    let agent = AgentState::new(0, Estimates::zero());
    c.bench_function("reference_accel", |b| {
        b.iter(|| reference_accel(black_box(&q), black_box(&qd), &des, 1.5))
    });
    c.bench_function("shared_signals", |b| {
        b.iter(|| SharedSignals::new(&sc.controller, black_box(&q), black_box(&qd), &des))
    });
    let sig = SharedSignals::new(&sc.controller, &q, &qd, &des);
    c.bench_function("agent_control", |b| {
        b.iter(|| agent_control(black_box(&agent), &sc.controller, black_box(&sig), None))
    });
}

fn simulation(c: &mut Criterion) {
    let sc = scenarios::se3_nominal(0).build().unwrap();
    c.bench_function("sim_step_six_agents", |b| {
        b.iter_batched_ref(
            || Simulation::new(sc.clone()),
            |sim| sim.step().unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
    let mut short = scenarios::se3_nominal(0);
    short.duration = 5.0;
    let short = short.build().unwrap();
    let mut g = c.benchmark_group("runs");
    g.sample_size(10);
    g.bench_function("se3_nominal_5s", |b| b.iter(|| run(black_box(&short)).unwrap()));
    g.bench_function("check_battery", |b| b.iter(|| Battery::default().run()));
    g.finish();
}

criterion_group!(benches, regressors, control, simulation);
criterion_main!(benches);
