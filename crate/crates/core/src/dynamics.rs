//! Ground-truth rigid-body model about a body-fixed measurement point.
//!
//! The configuration is the pose of the measurement point `P` and the body
//! rotation; rates are stacked as `[ẋ; ω]` with both halves in the world
//! frame. The model is written in manipulator form
//!
//! ```text
//! H(q) q̈ + C(q, q̇) q̇ + g(q) + friction = Σ_active M(q, r_i) τ_i
//! ```

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{hat, Mat3, RotationMatrix, Vec3};

pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

/// Condition number of `H` above which forward dynamics refuses to solve.
pub const MAX_INERTIA_CONDITION: f64 = 1e12;

/// Pose of the measurement point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: Vec3,
    pub r: RotationMatrix,
}

impl Pose {
    pub fn new(x: Vec3, r: RotationMatrix) -> Self {
        Pose { x, r }
    }

    pub fn identity() -> Self {
        Pose {
            x: Vec3::zeros(),
            r: RotationMatrix::identity(),
        }
    }

    /// World position of a body-frame offset `r` from this point.
    pub fn point(&self, r: &Vec3) -> Vec3 {
        self.x + self.r.matrix() * r
    }
}

macro_rules! stacked6 {
    ($name:ident, $a:ident, $b:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct $name {
            pub $a: Vec3,
            pub $b: Vec3,
        }

        impl $name {
            pub fn new($a: Vec3, $b: Vec3) -> Self {
                $name { $a, $b }
            }

            pub fn zero() -> Self {
                Self::default()
            }

            pub fn from_vector(v: &Vec6) -> Self {
                $name {
                    $a: v.fixed_rows::<3>(0).into_owned(),
                    $b: v.fixed_rows::<3>(3).into_owned(),
                }
            }

            pub fn to_vector(&self) -> Vec6 {
                let mut v = Vec6::zeros();
                v.fixed_rows_mut::<3>(0).copy_from(&self.$a);
                v.fixed_rows_mut::<3>(3).copy_from(&self.$b);
                v
            }

            pub fn is_finite(&self) -> bool {
                self.$a.iter().chain(self.$b.iter()).all(|c| c.is_finite())
            }
        }
    };
}

stacked6!(Twist, v, w);
stacked6!(Accel, linear, angular);
stacked6!(Wrench, force, torque);

/// Which friction model acts on the body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionMode {
    #[default]
    None,
    /// `D(q) q̇` with `D = B Λ_D Bᵀ`, `B = blkdiag(R, R)`.
    BodyViscous,
    /// Viscous and Coulomb friction acting at every attachment point.
    Contact,
}

/// Diagonal friction coefficients. All entries are nonnegative.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrictionParams {
    pub mode: FrictionMode,
    pub body_viscous: Vec6,
    /// One diagonal per attachment (empty means zero).
    pub contact_viscous: Vec<Vec6>,
    /// One diagonal per attachment (empty means zero).
    pub contact_coulomb: Vec<Vec6>,
}

impl FrictionParams {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn contact_viscous_at(&self, i: usize) -> Vec6 {
        self.contact_viscous.get(i).copied().unwrap_or_else(Vec6::zeros)
    }

    pub fn contact_coulomb_at(&self, i: usize) -> Vec6 {
        self.contact_coulomb.get(i).copied().unwrap_or_else(Vec6::zeros)
    }
}

/// Physical parameters of the payload and the attachment geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyParams {
    pub mass: f64,
    /// Inertia about the center of mass, body frame.
    pub inertia_cm: Mat3,
    /// Measurement point relative to the center of mass, body frame.
    pub r_p: Vec3,
    /// Agent attachment points relative to the measurement point, body frame.
    pub attachments: Vec<Vec3>,
    /// World-frame gravitational acceleration (zero in free space).
    pub gravity: Vec3,
    pub friction: FrictionParams,
}

impl BodyParams {
    /// Cylindrical payload used in the SE(3) experiments: mass 1.89e4 kg,
    /// principal inertias (1.54e4, 1.54e4, 2.37e3) kg·m², measurement point
    /// 1.5 m up the symmetry axis and collocated with the first agent.
    ///
    /// The six agents sit on the principal axes at ±1.5 m (z) and ±0.5 m
    /// (x, y) from the center of mass; attachments are stored relative to
    /// the measurement point.
    pub fn cylinder_table() -> Self {
        let r_p = Vec3::new(0.0, 0.0, 1.5);
        let from_cm = [
            Vec3::new(0.0, 0.0, 1.5),
            Vec3::new(0.0, 0.0, -1.5),
            Vec3::new(0.5, 0.0, 0.0),
            Vec3::new(-0.5, 0.0, 0.0),
            Vec3::new(0.0, 0.5, 0.0),
            Vec3::new(0.0, -0.5, 0.0),
        ];
        BodyParams {
            mass: 1.89e4,
            inertia_cm: Mat3::from_diagonal(&Vec3::new(1.54e4, 1.54e4, 2.37e3)),
            r_p,
            attachments: from_cm.iter().map(|c| c - r_p).collect(),
            gravity: Vec3::zeros(),
            friction: FrictionParams::none(),
        }
    }

    /// Inertia about the measurement point (parallel-axis theorem).
    pub fn j_p(&self) -> Mat3 {
        self.inertia_cm + (Mat3::identity() * self.r_p.norm_squared() - self.r_p * self.r_p.transpose()) * self.mass
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::InvalidBody(format!("mass {} must be positive", self.mass)));
        }
        if (self.inertia_cm - self.inertia_cm.transpose()).norm() > 1e-9 * self.inertia_cm.norm() {
            return Err(Error::InvalidBody("inertia_cm is not symmetric".into()));
        }
        for (name, m) in [("inertia_cm", self.inertia_cm), ("J_p", self.j_p())] {
            let min = m.symmetric_eigenvalues().min();
            if !(min > 0.0) {
                return Err(Error::InvalidBody(format!(
                    "{name} is not positive definite (min eigenvalue {min})"
                )));
            }
        }
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !finite(&self.r_p) || !finite(&self.gravity) || !self.attachments.iter().all(finite) {
            return Err(Error::InvalidBody("non-finite geometry".into()));
        }
        let f = &self.friction;
        let nonneg = |v: &Vec6| v.iter().all(|c| *c >= 0.0);
        if !nonneg(&f.body_viscous) || !f.contact_viscous.iter().all(nonneg) || !f.contact_coulomb.iter().all(nonneg) {
            return Err(Error::InvalidBody("friction coefficients must be >= 0".into()));
        }
        for (name, list) in [
            ("contact_viscous", &f.contact_viscous),
            ("contact_coulomb", &f.contact_coulomb),
        ] {
            if !list.is_empty() && list.len() != self.attachments.len() {
                return Err(Error::InvalidBody(format!(
                    "{name} has {} entries for {} attachments",
                    list.len(),
                    self.attachments.len()
                )));
            }
        }
        Ok(())
    }

    /// The same body described about a different measurement point, offset
    /// by `delta` (body frame) from the current one.
    pub fn rebased(&self, delta: &Vec3) -> Self {
        BodyParams {
            r_p: self.r_p + delta,
            attachments: self.attachments.iter().map(|r| r - delta).collect(),
            ..self.clone()
        }
    }
}

/// Inertia matrix `H(q)`.
pub fn inertia_matrix(body: &BodyParams, q: &Pose) -> Mat6 {
    let r = q.r.matrix();
    let c = r * body.r_p;
    let m = body.mass;
    let mut h = Mat6::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Mat3::identity() * m));
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&(hat(&c) * m));
    h.fixed_view_mut::<3, 3>(3, 0).copy_from(&(hat(&c) * -m));
    h.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(r * body.j_p() * r.transpose()));
    h
}

/// Centrifugal/Coriolis matrix `C(q, q̇)`, chosen so that `Ḣ - 2C` is
/// antisymmetric.
pub fn coriolis_matrix(body: &BodyParams, q: &Pose, qd: &Twist) -> Mat6 {
    let r = q.r.matrix();
    let c = r * body.r_p;
    let m = body.mass;
    let w = hat(&qd.w);
    let wc = w * hat(&c) * m;
    let mut out = Mat6::zeros();
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&wc);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&-wc);
    out.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(w * r * body.j_p() * r.transpose() - hat(&(c.cross(&qd.v))) * m));
    out
}

/// Generalized gravity term `g(q)` for a uniform field acting at the
/// center of mass.
pub fn gravity_wrench(body: &BodyParams, q: &Pose) -> Vec6 {
    let c = q.r.matrix() * body.r_p;
    let f = body.gravity * body.mass;
    let mut g = Vec6::zeros();
    g.fixed_rows_mut::<3>(0).copy_from(&-f);
    g.fixed_rows_mut::<3>(3).copy_from(&c.cross(&f));
    g
}

/// Grasp matrix `M(q, r) = [[I, 0], [(R r)^×, I]]`.
pub fn grasp_matrix(q: &Pose, r: &Vec3) -> Mat6 {
    grasp_matrix_world(&(q.r.matrix() * r))
}

/// Grasp matrix for a world-frame moment arm.
pub fn grasp_matrix_world(arm: &Vec3) -> Mat6 {
    let mut m = Mat6::identity();
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat(arm));
    m
}

/// `M(r) τ` without forming the 6×6 matrix.
pub fn grasp_apply(q: &Pose, r: &Vec3, tau: &Wrench) -> Wrench {
    let arm = q.r.matrix() * r;
    Wrench::new(tau.force, tau.torque + arm.cross(&tau.force))
}

/// Twist of the body point at offset `r`, `M(r)ᵀ q̇`.
pub fn point_twist(q: &Pose, r: &Vec3, qd: &Twist) -> Twist {
    let arm = q.r.matrix() * r;
    Twist::new(qd.v + qd.w.cross(&arm), qd.w)
}

/// Element-wise sign with `sgn(0) = 0`.
pub fn sgn(v: &Vec6) -> Vec6 {
    v.map(|c| {
        if c > 0.0 {
            1.0
        } else if c < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Body-frame viscous friction matrix `D(q) = B Λ_D Bᵀ`.
pub fn body_viscous_matrix(q: &Pose, lambda_d: &Vec6) -> Mat6 {
    let b = block_rotation(q.r.matrix());
    b * Mat6::from_diagonal(lambda_d) * b.transpose()
}

pub(crate) fn block_rotation(r: &Mat3) -> Mat6 {
    let mut b = Mat6::zeros();
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    b.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    b
}

/// Generalized friction wrench, entering the dynamics on the same side as
/// `C q̇` (i.e. it opposes motion).
pub fn friction_wrench(body: &BodyParams, q: &Pose, qd: &Twist) -> Wrench {
    let f = &body.friction;
    match f.mode {
        FrictionMode::None => Wrench::zero(),
        FrictionMode::BodyViscous => Wrench::from_vector(&(body_viscous_matrix(q, &f.body_viscous) * qd.to_vector())),
        FrictionMode::Contact => {
            let mut total = Vec6::zeros();
            for (i, r) in body.attachments.iter().enumerate() {
                let vi = point_twist(q, r, qd).to_vector();
                let local =
                    f.contact_viscous_at(i).component_mul(&vi) + f.contact_coulomb_at(i).component_mul(&sgn(&vi));
                total += grasp_apply(q, r, &Wrench::from_vector(&local)).to_vector();
            }
            Wrench::from_vector(&total)
        }
    }
}

/// Solves for `q̈` given the agents' wrenches and activity flags.
pub fn forward_dynamics(body: &BodyParams, q: &Pose, qd: &Twist, wrenches: &[(Wrench, bool)]) -> Result<Accel> {
    if wrenches.len() != body.attachments.len() {
        return Err(Error::WrenchCount {
            expected: body.attachments.len(),
            got: wrenches.len(),
        });
    }
    let mut applied = Vec6::zeros();
    for ((tau, active), r) in wrenches.iter().zip(&body.attachments) {
        if *active {
            applied += grasp_apply(q, r, tau).to_vector();
        }
    }
    let rhs = applied
        - coriolis_matrix(body, q, qd) * qd.to_vector()
        - gravity_wrench(body, q)
        - friction_wrench(body, q, qd).to_vector();
    solve_spd(&inertia_matrix(body, q), &rhs).map(|a| Accel::from_vector(&a))
}

/// Solves `H x = b` for symmetric positive-definite `H`, refusing badly
/// conditioned systems.
pub fn solve_spd(h: &Mat6, b: &Vec6) -> Result<Vec6> {
    let eig = h.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_INERTIA_CONDITION) {
        return Err(Error::SingularInertia(cond));
    }
    let chol = h.cholesky().ok_or(Error::SingularInertia(cond))?;
    Ok(chol.solve(b))
}

/// Kinetic energy `½ q̇ᵀ H q̇`.
pub fn kinetic_energy(body: &BodyParams, q: &Pose, qd: &Twist) -> f64 {
    let v = qd.to_vector();
    0.5 * v.dot(&(inertia_matrix(body, q) * v))
}
