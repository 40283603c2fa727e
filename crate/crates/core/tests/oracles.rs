//! Integrator and kinematics checked against independent references:
//! finite differences, conserved quantities and closed-form fixed points.

use std::convert::Infallible;

use comanip_core::checks::{random_body_up_to, random_pose, random_twist};
use comanip_core::dynamics::{forward_dynamics, inertia_matrix, kinetic_energy};
use comanip_core::integrate::{heun_step, HeunState};
use comanip_core::so3::exp_so3;
use comanip_core::tracking::{reference_accel, reference_velocity, DesiredTrajectory};
use comanip_core::{scenarios, Accel, BodyParams, DesiredState, FrictionParams, Mat3, Pose, Twist, Vec3, Wrench};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone)]
struct Rigid {
    pose: Pose,
    twist: Twist,
}

impl HeunState for Rigid {
    type Tangent = (Twist, Accel);

    fn retract(&self, d: &(Twist, Accel), h: f64) -> Rigid {
        Rigid {
            pose: self.pose.retract(&d.0, h),
            twist: Twist::from_vector(&(self.twist.to_vector() + d.1.to_vector() * h)),
        }
    }

    fn average(a: &(Twist, Accel), b: &(Twist, Accel)) -> (Twist, Accel) {
        (
            Pose::average(&a.0, &b.0),
            Accel::from_vector(&((a.1.to_vector() + b.1.to_vector()) * 0.5)),
        )
    }
}

fn coast(body: &BodyParams, y: &Rigid, h: f64) -> Rigid {
    let idle = vec![(Wrench::zero(), false); body.attachments.len()];
    heun_step(y, 0.0, h, |_, s: &Rigid| {
        forward_dynamics(body, &s.pose, &s.twist, &idle).map(|a| (s.twist, a))
    })
    .unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn heun_scalar_decay_matches_hand_value() {
    let x1 = heun_step(&1.0_f64, 0.0, 0.01, |_, x| Ok::<_, Infallible>(-x)).unwrap();
    assert!((x1 - 0.99005).abs() < 1e-15, "{x1}");
}

#[test]
fn reference_accel_matches_finite_difference() {
    let mut g = rng(11);
    let dt = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let q = random_pose(&mut g);
        let qd = random_twist(&mut g);
        let des = DesiredState {
            pose: random_pose(&mut g),
            twist: random_twist(&mut g),
            accel: Accel::from_vector(&random_twist(&mut g).to_vector()),
        };
        let lambda = 1.5;
        let at = |tau: f64| {
            let d = DesiredState {
                pose: des.pose.retract(&des.twist, tau),
                twist: Twist::from_vector(&(des.twist.to_vector() + des.accel.to_vector() * tau)),
                accel: des.accel,
            };
            reference_velocity(&q.retract(&qd, tau), &d, lambda).to_vector()
        };
        let fd = (at(dt) - at(-dt)) / (2.0 * dt);
        let exact = reference_accel(&q, &qd, &des, lambda).to_vector();
        worst = worst.max((fd - exact).norm() / (1.0 + exact.norm()));
    }
    assert!(worst < 1e-5, "worst {worst:e}");
}

/// Random twist with unit linear and angular speed, twice the fastest
/// rotation the default trajectory asks for.
fn unit_twist(g: &mut ChaCha8Rng) -> Twist {
    let t = random_twist(g);
    Twist::new(t.v.normalize(), t.w.normalize())
}

fn energy_drift(body: &BodyParams, y0: &Rigid, h: f64, duration: f64) -> f64 {
    let e0 = kinetic_energy(body, &y0.pose, &y0.twist);
    let mut y = y0.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..(duration / h).round() as usize {
        y = coast(body, &y, h);
        worst = worst.max((kinetic_energy(body, &y.pose, &y.twist) - e0).abs() / e0);
    }
    worst
}

#[test]
fn free_flight_conserves_kinetic_energy() {
    let mut g = rng(12);
    let mut bodies = vec![BodyParams::cylinder_table()];
    bodies.extend((0..10).map(|_| random_body_up_to(&mut g, 2e4)));
    for mut body in bodies {
        body.friction = FrictionParams::none();
        let y = Rigid {
            pose: random_pose(&mut g),
            twist: unit_twist(&mut g),
        };
        let drift = energy_drift(&body, &y, 1e-2, 10.0);
        assert!(drift < 1e-4, "relative energy drift {drift:e}");
    }
}

#[test]
fn energy_error_is_second_order() {
    let mut g = rng(15);
    let mut body = random_body_up_to(&mut g, 2e4);
    body.friction = FrictionParams::none();
    let y = Rigid {
        pose: random_pose(&mut g),
        twist: Twist::from_vector(&(random_twist(&mut g).to_vector() * 2.0)),
    };
    let ratio = energy_drift(&body, &y, 2e-2, 10.0) / energy_drift(&body, &y, 1e-2, 10.0);
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn free_flight_conserves_momentum() {
    let mut g = rng(13);
    let body = random_body_up_to(&mut g, 1e3);
    let mut y = Rigid {
        pose: random_pose(&mut g),
        twist: unit_twist(&mut g),
    };
    // linear momentum and angular momentum about the world origin
    let momentum = |y: &Rigid| {
        let m = inertia_matrix(&body, &y.pose) * y.twist.to_vector();
        let p = m.fixed_rows::<3>(0).into_owned();
        let l = m.fixed_rows::<3>(3) + y.pose.x.cross(&p);
        (p, l)
    };
    let p0 = momentum(&y);
    for _ in 0..1000 {
        y = coast(&body, &y, 1e-2);
    }
    let p1 = momentum(&y);
    let rel_p = (p1.0 - p0.0).norm() / p0.0.norm();
    let rel_l = (p1.1 - p0.1).norm() / p0.1.norm();
    assert!(rel_p < 1e-4 && rel_l < 1e-4, "{rel_p:e} {rel_l:e}");
}

#[test]
fn torque_free_spin_about_principal_axis() {
    let body = BodyParams {
        mass: 50.0,
        inertia_cm: Mat3::from_diagonal(&Vec3::new(4.0, 6.0, 9.0)),
        r_p: Vec3::zeros(),
        attachments: vec![Vec3::x()],
        gravity: Vec3::zeros(),
        friction: FrictionParams::none(),
    };
    for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
        let w = axis * 0.7;
        let mut y = Rigid {
            pose: Pose::identity(),
            twist: Twist::new(Vec3::zeros(), w),
        };
        for k in 1..=6000 {
            let prev = y.twist.w;
            y = coast(&body, &y, 1e-2);
            assert!(
                (y.twist.w - prev).norm() <= 1e-10,
                "step {k}: {:e}",
                (y.twist.w - prev).norm()
            );
        }
        let exact = exp_so3(&(w * 60.0));
        assert!((y.pose.r.matrix() - exact.matrix()).norm() < 1e-9);
    }
}

#[test]
fn tumbling_rotation_stays_orthogonal() {
    let mut g = rng(14);
    let body = random_body_up_to(&mut g, 100.0);
    let mut y = Rigid {
        pose: random_pose(&mut g),
        twist: random_twist(&mut g),
    };
    for _ in 0..6000 {
        y = coast(&body, &y, 1e-2);
    }
    assert!(y.pose.r.is_valid(1e-9), "defect {:e}", y.pose.r.orthogonality_defect());
}

#[test]
fn desired_rotation_stays_orthogonal() {
    let spec = scenarios::default_trajectory().build().unwrap();
    let mut traj = DesiredTrajectory::new(&spec, 1e-2);
    traj.advance_to(60.0);
    let r = traj.state().pose.r;
    assert!(r.is_valid(1e-9), "defect {:e}", r.orthogonality_defect());
}
