use comanip_core::checks::{random_body_up_to, random_pose, random_twist};
use comanip_core::config::MatrixSpec;
use comanip_core::dynamics::{coriolis_matrix, grasp_apply, grasp_matrix, inertia_matrix};
use comanip_core::regressors::regressor_object;
use comanip_core::so3::{exp_so3, hat, inner, proj_a, proj_s, skew_vee, vee};
use comanip_core::tracking::{composite_error, reference_velocity};
use comanip_core::{
    run_config, scenarios, Accel, DesiredState, Mat3, Mat6, MeasurementModel, Pose, Twist, Vec3, Wrench,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-r..r).prop_map(Vec3::from)
}

fn mat3() -> impl Strategy<Value = Mat3> {
    prop::array::uniform9(-3.0..3.0f64).prop_map(|a| Mat3::from_row_slice(&a))
}

fn pose() -> impl Strategy<Value = Pose> {
    (vec3(5.0), vec3(3.0)).prop_map(|(x, w)| Pose::new(x, exp_so3(&w)))
}

fn twist() -> impl Strategy<Value = Twist> {
    (vec3(2.0), vec3(2.0)).prop_map(|(v, w)| Twist::new(v, w))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #[test]
    fn hat_is_cross_product_and_vee_inverts_it(v in vec3(10.0), w in vec3(10.0)) {
        prop_assert!((hat(&v) * w - v.cross(&w)).norm() <= 1e-12 * (1.0 + v.norm() * w.norm()));
        prop_assert_eq!(vee(&hat(&v)).unwrap(), v);
        prop_assert_eq!(hat(&v).transpose(), -hat(&v));
    }

    #[test]
    fn vee_rejects_symmetric_parts(a in mat3()) {
        let sym = proj_s(&a);
        prop_assume!(sym.norm() > 1e-3);
        prop_assert!(vee(&a).is_err());
    }

    #[test]
    fn exp_lands_in_so3(w in vec3(20.0)) {
        let r = exp_so3(&w);
        prop_assert!(r.is_valid(1e-12));
        prop_assert!((r.matrix() * w - w).norm() <= 1e-12 * (1.0 + w.norm()));
    }

    #[test]
    fn projections_split_orthogonally(a in mat3(), b in mat3()) {
        let (pa, ps) = (proj_a(&a), proj_s(&a));
        prop_assert!((pa + ps - a).norm() <= 1e-14 * (1.0 + a.norm()));
        prop_assert!(inner(&pa, &proj_s(&b)).abs() <= 1e-12 * (1.0 + a.norm() * b.norm()));
        prop_assert!((proj_a(&pa) - pa).norm() == 0.0);
        prop_assert!((inner(&a, &b) - (a.transpose() * b).trace()).abs() <= 1e-12 * (1.0 + a.norm() * b.norm()));
        prop_assert_eq!(skew_vee(&a), vee(&pa).unwrap());
    }

    #[test]
    fn inertia_is_symmetric_positive_definite(seed in any::<u64>()) {
        let mut g = rng(seed);
        let body = random_body_up_to(&mut g, 2e4);
        let h = inertia_matrix(&body, &random_pose(&mut g));
        prop_assert!((h - h.transpose()).abs().max() <= 1e-12 * h.abs().max());
        prop_assert!(h.cholesky().is_some());
    }

    #[test]
    fn coriolis_makes_h_dot_minus_2c_skew(seed in any::<u64>()) {
        let mut g = rng(seed);
        let body = random_body_up_to(&mut g, 100.0);
        let q = random_pose(&mut g);
        let qd = random_twist(&mut g);
        let dt = 1e-6;
        let ahead = Pose::new(q.x + qd.v * dt, q.r.left_exp(&(qd.w * dt)));
        let behind = Pose::new(q.x - qd.v * dt, q.r.left_exp(&(-qd.w * dt)));
        let h_dot = (inertia_matrix(&body, &ahead) - inertia_matrix(&body, &behind)) / (2.0 * dt);
        let n = h_dot - coriolis_matrix(&body, &q, &qd) * 2.0;
        prop_assert!((n + n.transpose()).abs().max() <= 1e-5 * (1.0 + h_dot.abs().max()));
    }

    #[test]
    fn schur_complement_recovers_cm_inertia(seed in any::<u64>()) {
        let mut g = rng(seed);
        let body = random_body_up_to(&mut g, 2e4);
        let q = random_pose(&mut g);
        let h = inertia_matrix(&body, &q);
        let a = h.fixed_view::<3, 3>(0, 0).into_owned();
        let b = h.fixed_view::<3, 3>(0, 3).into_owned();
        let d = h.fixed_view::<3, 3>(3, 3).into_owned();
        let schur = d - b.transpose() * a.try_inverse().unwrap() * b;
        let r = q.r.matrix();
        let expect = r * body.inertia_cm * r.transpose();
        prop_assert!((schur - expect).abs().max() <= 1e-9 * expect.abs().max());
    }

    #[test]
    fn grasp_matrix_inverse_and_composition(q in pose(), a in vec3(3.0), b in vec3(3.0), f in vec3(1e3), t in vec3(1e3)) {
        let (ma, mb) = (grasp_matrix(&q, &a), grasp_matrix(&q, &b));
        prop_assert!((ma * grasp_matrix(&q, &(-a)) - Mat6::identity()).abs().max() <= 1e-12);
        prop_assert!((ma * mb - grasp_matrix(&q, &(a + b))).abs().max() <= 1e-12);
        let w = Wrench::new(f, t);
        prop_assert!((grasp_apply(&q, &a, &w).to_vector() - ma * w.to_vector()).norm() <= 1e-9 * (1.0 + w.to_vector().norm()));
    }

    #[test]
    fn s_is_velocity_minus_reference(q in pose(), qd in twist(), dp in pose(), dt in twist(), lambda in 0.1..5.0f64) {
        let des = DesiredState { pose: dp, twist: dt, accel: Accel::zero() };
        let s = composite_error(&q, &qd, &des, lambda).s;
        let qd_r = reference_velocity(&q, &des, lambda);
        prop_assert!((s - (qd.to_vector() - qd_r.to_vector())).norm() <= 1e-12 * (1.0 + s.norm()));
    }

    #[test]
    fn object_regressor_is_linear_in_reference(
        q in pose(), qd in twist(), u in twist(), v in twist(),
        au in vec3(2.0), av in vec3(2.0), bu in vec3(2.0), bv in vec3(2.0),
        k in -3.0..3.0f64,
    ) {
        let (a1, a2) = (Accel::new(au, bu), Accel::new(av, bv));
        let sum = Twist::from_vector(&(u.to_vector() + v.to_vector() * k));
        let acc = Accel::from_vector(&(a1.to_vector() + a2.to_vector() * k));
        let lhs = regressor_object(&q, &qd, &sum, &acc);
        let rhs = regressor_object(&q, &qd, &u, &a1) + regressor_object(&q, &qd, &v, &a2) * k;
        prop_assert!((lhs - rhs).abs().max() <= 1e-10 * (1.0 + rhs.abs().max()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Renaming the agents permutes their estimates and leaves the motion
    /// unchanged up to summation order.
    #[test]
    fn relabeling_agents_is_equivariant(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
        let mut base = scenarios::se3_nominal(0);
        base.duration = 5.0;
        base.agents.sigma_o = MatrixSpec::Scalar(0.0);
        base.agents.sigma_r = MatrixSpec::Scalar(0.0);
        let mut moved = base.clone();
        moved.body.attachments = perm.iter().map(|&i| base.body.attachments[i]).collect();
        let lead = perm.iter().position(|&i| i == 0).unwrap();
        moved.agents.measurement = MeasurementModel::Broadcast { agent: lead };
        let a = run_config(&base).unwrap();
        let b = run_config(&moved).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            prop_assert!((x.pose.x - y.pose.x).norm() <= 1e-9);
            prop_assert!((x.pose.r.matrix() - y.pose.r.matrix()).norm() <= 1e-9);
        }
        let ea = &a.final_estimates;
        let eb = &b.final_estimates;
        for (j, &i) in perm.iter().enumerate() {
            prop_assert!((ea[i].r - eb[j].r).norm() <= 1e-8);
            prop_assert!((ea[i].o - eb[j].o).norm() <= 1e-8 * (1.0 + ea[i].o.norm()));
        }
    }
}
