//! Linear parameterizations of the dynamics.
//!
//! Object parameters are `o = [m, m r_p, vech(J_p)]` with
//! `vech(J) = (J11, J22, J33, J12, J13, J23)`. Friction parameter layouts
//! are given by [`lump_contact_viscous`] and [`lump_contact_coulomb`].

use std::convert::Infallible;

use nalgebra::{DMatrix, SMatrix, SVector};

use crate::dynamics::{block_rotation, grasp_apply, point_twist, sgn, Accel, BodyParams, Pose, Twist, Vec6, Wrench};
use crate::error::{Error, Result};
use crate::integrate::heun_step;
use crate::so3::{hat, Mat3, Vec3};
use crate::tracking::{DesiredState, TrajectorySpec};

pub const N_OBJECT: usize = 10;
pub const N_GEOM: usize = 3;
pub const N_BODY_FRICTION: usize = 6;
pub const N_CONTACT_VISCOUS: usize = 33;
pub const N_CONTACT_COULOMB: usize = 15;

pub type ObjectParams = SVector<f64, N_OBJECT>;
pub type ObjectRegressor = SMatrix<f64, 6, N_OBJECT>;
pub type GeomRegressor = SMatrix<f64, 6, N_GEOM>;
pub type ContactViscousParams = SVector<f64, N_CONTACT_VISCOUS>;
pub type ContactViscousRegressor = SMatrix<f64, 6, N_CONTACT_VISCOUS>;
pub type ContactCoulombParams = SVector<f64, N_CONTACT_COULOMB>;
pub type ContactCoulombRegressor = SMatrix<f64, 6, N_CONTACT_COULOMB>;

/// Index pairs `(j, l)` with `j ≤ l`, in the order used by the quadratic
/// moment-arm block of the contact-viscous parameters.
const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Matrix `L(u)` with `J u = L(u) vech(J)` for symmetric `J`.
fn vech_apply(u: &Vec3) -> SMatrix<f64, 3, 6> {
    SMatrix::<f64, 3, 6>::from_row_slice(&[
        u.x, 0.0, 0.0, u.y, u.z, 0.0, //
        0.0, u.y, 0.0, u.x, 0.0, u.z, //
        0.0, 0.0, u.z, 0.0, u.x, u.y,
    ])
}

pub fn vech(j: &Mat3) -> SVector<f64, 6> {
    SVector::<f64, 6>::from_column_slice(&[j[(0, 0)], j[(1, 1)], j[(2, 2)], j[(0, 1)], j[(0, 2)], j[(1, 2)]])
}

pub fn unvech(v: &[f64]) -> Mat3 {
    Mat3::new(v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2])
}

/// True object parameters `[m, m r_p, vech(J_p)]`.
pub fn object_params(body: &BodyParams) -> ObjectParams {
    let mut o = ObjectParams::zeros();
    o[0] = body.mass;
    o.fixed_rows_mut::<3>(1).copy_from(&(body.r_p * body.mass));
    o.fixed_rows_mut::<6>(4).copy_from(&vech(&body.j_p()));
    o
}

/// `Y_o` with `Y_o o = H q̈_r + C q̇_r` (no gravity).
pub fn regressor_object(q: &Pose, qd: &Twist, qd_r: &Twist, qdd_r: &Accel) -> ObjectRegressor {
    regressor_object_with_gravity(q, qd, qd_r, qdd_r, &Vec3::zeros())
}

/// `Y_o` with `Y_o o = H q̈_r + C q̇_r + g(q)` for world gravity `gravity`.
/// The gravity term is affine in `m` and `m r_p`, so no extra columns are
/// needed.
pub fn regressor_object_with_gravity(
    q: &Pose,
    qd: &Twist,
    qd_r: &Twist,
    qdd_r: &Accel,
    gravity: &Vec3,
) -> ObjectRegressor {
    let r = q.r.matrix();
    let w = hat(&qd.w);
    let (a_l, a_w) = (qdd_r.linear, qdd_r.angular);
    let (v_r, w_r) = (qd_r.v, qd_r.w);

    let mut y = ObjectRegressor::zeros();
    y.fixed_view_mut::<3, 1>(0, 0).copy_from(&(a_l - gravity));

    let top_p = -(hat(&a_w) + w * hat(&w_r)) * r;
    let bottom_p = (hat(&a_l) + w * hat(&v_r) - hat(&w_r) * hat(&qd.v) - hat(gravity)) * r;
    y.fixed_view_mut::<3, 3>(0, 1).copy_from(&top_p);
    y.fixed_view_mut::<3, 3>(3, 1).copy_from(&bottom_p);

    let bottom_j = r * vech_apply(&(r.transpose() * a_w)) + w * r * vech_apply(&(r.transpose() * w_r));
    y.fixed_view_mut::<3, 6>(3, 4).copy_from(&bottom_j);
    y
}

/// `Y_g = [0; f^× R]`, so that `-(M(r̂) - M(r)) F = Y_g (r̂ - r)`.
pub fn regressor_geometric(f: &Wrench, q: &Pose) -> GeomRegressor {
    let mut y = GeomRegressor::zeros();
    y.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(hat(&f.force) * q.r.matrix()));
    y
}

/// `Y_f` with `Y_f diag(Λ_D) = B Λ_D Bᵀ q̇_r`, `B = blkdiag(R, R)`.
pub fn regressor_body_friction(q: &Pose, qd_r: &Twist) -> nalgebra::Matrix6<f64> {
    let b = block_rotation(q.r.matrix());
    let local = b.transpose() * qd_r.to_vector();
    b * nalgebra::Matrix6::from_diagonal(&local)
}

/// Lumped contact-viscous parameters for one contact with diagonal `d` at
/// body-frame offset `r`:
/// `[d_l (3), d_a (3), d_lk r_j (9, k-major), d_lk r_j r_l (18, k-major over j ≤ l)]`.
pub fn lump_contact_viscous(d: &Vec6, r: &Vec3) -> ContactViscousParams {
    let mut p = ContactViscousParams::zeros();
    for k in 0..6 {
        p[k] = d[k];
    }
    for k in 0..3 {
        for j in 0..3 {
            p[6 + 3 * k + j] = d[k] * r[j];
        }
        for (n, (j, l)) in PAIRS.iter().enumerate() {
            p[15 + 6 * k + n] = d[k] * r[*j] * r[*l];
        }
    }
    p
}

/// `Y_D` with `Y_D lump_contact_viscous(d, r) = M(r) D M(r)ᵀ q̇_r`.
pub fn regressor_contact_viscous(q: &Pose, qd_r: &Twist) -> ContactViscousRegressor {
    let r = q.r.matrix();
    let (v, w) = (qd_r.v, qd_r.w);
    let wr = hat(&w) * r;
    let mut y = ContactViscousRegressor::zeros();
    for k in 0..3 {
        let ek_r = hat(&Vec3::ith(k, 1.0)) * r;
        y[(k, k)] = v[k];
        y[(3 + k, 3 + k)] = w[k];
        for j in 0..3 {
            let col = 6 + 3 * k + j;
            y[(k, col)] = wr[(k, j)];
            y.fixed_view_mut::<3, 1>(3, col).copy_from(&(-ek_r.column(j) * v[k]));
        }
        for (n, (j, l)) in PAIRS.iter().enumerate() {
            let (j, l) = (*j, *l);
            let col = 15 + 6 * k + n;
            let mut c = -ek_r.column(l) * wr[(k, j)];
            if j != l {
                c -= ek_r.column(j) * wr[(k, l)];
            }
            y.fixed_view_mut::<3, 1>(3, col).copy_from(&c);
        }
    }
    y
}

/// Lumped contact-Coulomb parameters `[c_l (3), c_a (3), c_lk r_j (9, k-major)]`.
pub fn lump_contact_coulomb(c: &Vec6, r: &Vec3) -> ContactCoulombParams {
    let mut p = ContactCoulombParams::zeros();
    for k in 0..6 {
        p[k] = c[k];
    }
    for k in 0..3 {
        for j in 0..3 {
            p[6 + 3 * k + j] = c[k] * r[j];
        }
    }
    p
}

/// `Y_C` with `Y_C lump_contact_coulomb(c, r) = M(r) diag(c) sgn(v_i)`,
/// where `v_meas` is the contact's own twist `v_i`.
pub fn regressor_contact_coulomb(q: &Pose, v_meas: &Twist) -> ContactCoulombRegressor {
    let r = q.r.matrix();
    let sigma = sgn(&v_meas.to_vector());
    let mut y = ContactCoulombRegressor::zeros();
    for k in 0..3 {
        y[(k, k)] = sigma[k];
        y[(3 + k, 3 + k)] = sigma[3 + k];
        let ek_r = hat(&Vec3::ith(k, 1.0)) * r;
        for j in 0..3 {
            y.fixed_view_mut::<3, 1>(3, 6 + 3 * k + j)
                .copy_from(&(-ek_r.column(j) * sigma[k]));
        }
    }
    y
}

/// Dense reference for the contact-viscous term, `M(r) D M(r)ᵀ q̇_r`.
pub fn contact_viscous_dense(q: &Pose, r: &Vec3, d: &Vec6, qd_r: &Twist) -> Vec6 {
    let vi = point_twist(q, r, qd_r).to_vector();
    grasp_apply(q, r, &Wrench::from_vector(&d.component_mul(&vi))).to_vector()
}

/// Integrated regressor Gram along a desired trajectory.
#[derive(Debug, Clone)]
pub struct ExcitationReport {
    pub gram: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

/// Relative singular-value cutoff used for numeric rank.
pub const RANK_TOL: f64 = 1e-8;

/// Integrates `Y_Nᵀ Y_N` over `[t0, t0 + window]` (trapezoid rule,
/// `samples` intervals) along the desired trajectory, where
/// `Y_N = [Y_o, Y_g(F_1), ..., Y_o, Y_g(F_N)]` is evaluated at the desired
/// state with `F_i = Y_o o / N` (the converged feedforward wrench).
pub fn excitation_gram(
    spec: &TrajectorySpec,
    body: &BodyParams,
    n_agents: usize,
    t0: f64,
    window: f64,
    samples: usize,
) -> Result<ExcitationReport> {
    if !(window > 0.0) {
        return Err(Error::config("window", "must be positive"));
    }
    if samples < 10 {
        return Err(Error::config("samples", "must be at least 10"));
    }
    if n_agents == 0 {
        return Err(Error::config("agents", "must be at least 1"));
    }
    let o = object_params(body);
    let width = n_agents * (N_OBJECT + N_GEOM);
    let dt = window / samples as f64;

    let mut pose = spec.initial;
    let mut t = 0.0;
    let prefix = (t0 / dt).ceil() as usize;
    let step = |pose: &Pose, t: f64, h: f64| -> Pose {
        heun_step(pose, t, h, |s, _| Ok::<_, Infallible>(spec.twist(s))).unwrap_or_else(|e| match e {})
    };
    for _ in 0..prefix {
        pose = step(&pose, t, dt);
        t += dt;
    }

    let mut gram = DMatrix::<f64>::zeros(width, width);
    for k in 0..=samples {
        let des: DesiredState = spec.state_at(pose, t);
        let yo = regressor_object(&des.pose, &des.twist, &des.twist, &des.accel);
        let f = Wrench::from_vector(&(yo * o / n_agents as f64));
        let yg = regressor_geometric(&f, &des.pose);
        let mut block = DMatrix::<f64>::zeros(6, width);
        for i in 0..n_agents {
            let c = i * (N_OBJECT + N_GEOM);
            block.view_mut((0, c), (6, N_OBJECT)).copy_from(&yo);
            block.view_mut((0, c + N_OBJECT), (6, N_GEOM)).copy_from(&yg);
        }
        let weight = if k == 0 || k == samples { 0.5 * dt } else { dt };
        gram += block.transpose() * &block * weight;
        if k < samples {
            pose = step(&pose, t, dt);
            t += dt;
        }
    }

    // Columns differ in scale by the wrench magnitude, so the rank is read
    // from the unit-diagonal Gram (all-zero columns stay zero).
    let d = gram.diagonal().map(|g| if g > 0.0 { 1.0 / g.sqrt() } else { 0.0 });
    let unit = DMatrix::from_diagonal(&d) * &gram * DMatrix::from_diagonal(&d);
    let mut singular_values: Vec<f64> = unit.svd(false, false).singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max = singular_values.first().copied().unwrap_or(0.0);
    let rank = if max > 0.0 {
        singular_values.iter().filter(|s| **s > RANK_TOL * max).count()
    } else {
        0
    };
    Ok(ExcitationReport {
        gram,
        singular_values,
        rank,
    })
}
