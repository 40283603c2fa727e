//! Fast invariant battery: matrix identities, regressor products against
//! dense references, and decay of the reduced rotational flow.
//!
//! Every check draws its own random instances from a fixed seed, so the
//! verdicts are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{
    body_viscous_matrix, coriolis_matrix, friction_wrench, grasp_apply, grasp_matrix, inertia_matrix, point_twist,
    Accel, BodyParams, FrictionMode, FrictionParams, Mat6, Pose, Twist, Vec6, Wrench,
};
use crate::regressors::{
    lump_contact_coulomb, lump_contact_viscous, object_params, regressor_body_friction, regressor_contact_coulomb,
    regressor_contact_viscous, regressor_geometric, regressor_object, GeomRegressor,
};
use crate::so3::{exp_so3, hat, vee, Mat3, RotationMatrix, Vec3};
use crate::tracking::reduced_flow_check;

/// Relative tolerance for the regressor product identities.
pub const REGRESSOR_TOL: f64 = 1e-9;
/// Absolute entrywise tolerance on `sym(Ḣ - 2C)`.
pub const SKEW_TOL: f64 = 1e-5;
/// Central-difference step for `Ḣ`.
pub const FD_STEP: f64 = 1e-6;
pub const SCHUR_TOL: f64 = 1e-9;
/// Rounding floor for the reduced-flow bound and monotonicity.
pub const FLOW_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub type GeometricRegressorFn = fn(&Wrench, &Pose) -> GeomRegressor;

#[derive(Debug, Clone, Copy)]
pub struct Battery {
    pub instances: usize,
    pub flow_instances: usize,
    pub seed: u64,
    /// Regressor under test for the geometric check. Swapping it lets a
    /// test confirm the check notices a broken implementation.
    pub geometric: GeometricRegressorFn,
}

impl Default for Battery {
    fn default() -> Self {
        Battery {
            instances: 1000,
            flow_instances: 100,
            seed: 7,
            geometric: regressor_geometric,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gauss3(rng: &mut impl Rng) -> Vec3 {
    Vec3::from_fn(|_, _| StandardNormal.sample(rng))
}

fn gauss6(rng: &mut impl Rng) -> Vec6 {
    Vec6::from_fn(|_, _| StandardNormal.sample(rng))
}

pub fn random_rotation(rng: &mut impl Rng) -> RotationMatrix {
    let axis = gauss3(rng).normalize();
    exp_so3(&(axis * rng.random_range(0.0..std::f64::consts::PI)))
}

pub fn random_pose(rng: &mut impl Rng) -> Pose {
    Pose::new(gauss3(rng) * 2.0, random_rotation(rng))
}

pub fn random_twist(rng: &mut impl Rng) -> Twist {
    Twist::new(gauss3(rng), gauss3(rng))
}

/// Mass up to 2e4 kg, principal inertias satisfying the triangle
/// inequality, arbitrary principal axes and offset.
pub fn random_body(rng: &mut impl Rng) -> BodyParams {
    random_body_up_to(rng, 2e4)
}

pub fn random_body_up_to(rng: &mut impl Rng, max_mass: f64) -> BodyParams {
    let mass = 10f64.powf(rng.random_range(-1.0..max_mass.log10()));
    let mut p = Vec3::from_fn(|_, _| rng.random_range(0.1..1.0));
    p /= p.sum();
    let scale = mass * rng.random_range(0.05..2.0);
    let principal = Vec3::new(p.y + p.z, p.x + p.z, p.x + p.y) * scale;
    let q = random_rotation(rng);
    let inertia_cm = q.matrix() * Mat3::from_diagonal(&principal) * q.matrix().transpose();
    let inertia_cm = 0.5 * (inertia_cm + inertia_cm.transpose());
    let n = rng.random_range(1..7);
    BodyParams {
        mass,
        inertia_cm,
        r_p: gauss3(rng),
        attachments: (0..n).map(|_| gauss3(rng)).collect(),
        gravity: Vec3::zeros(),
        friction: FrictionParams::none(),
    }
}

fn rel_err(a: &Vec6, b: &Vec6) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

impl Battery {
    pub fn run(&self) -> Vec<Verdict> {
        vec![
            self.hat_vee(),
            self.inertia_spd(),
            self.h_dot_skew(),
            self.schur(),
            self.grasp_algebra(),
            self.object_regressor(),
            self.geometric_regressor(),
            self.body_friction_regressor(),
            self.contact_viscous_regressor(),
            self.contact_coulomb_regressor(),
            self.reduced_flow(),
        ]
    }

    fn tolerance(&self, name: &'static str, worst: f64, tol: f64) -> Verdict {
        Verdict {
            name,
            passed: worst <= tol,
            detail: format!("worst {worst:.3e} (tol {tol:.0e}, {} instances)", self.instances),
        }
    }

    pub fn hat_vee(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 0);
        let worst = max_of((0..self.instances).map(|_| {
            let v = gauss3(&mut rng);
            let w = gauss3(&mut rng);
            let back = vee(&hat(&v)).map(|b| (b - v).norm()).unwrap_or(f64::INFINITY);
            // hat(v) w = v × w
            back.max((hat(&v) * w - v.cross(&w)).norm())
        }));
        self.tolerance("hat_vee", worst, 1e-15)
    }

    pub fn inertia_spd(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 1);
        let mut min_ratio = f64::INFINITY;
        let mut asym: f64 = 0.0;
        for _ in 0..self.instances {
            let body = random_body(&mut rng);
            let h = inertia_matrix(&body, &random_pose(&mut rng));
            asym = asym.max((h - h.transpose()).abs().max() / h.abs().max());
            let eig = h.symmetric_eigen().eigenvalues;
            min_ratio = min_ratio.min(eig.min() / eig.max());
        }
        Verdict {
            name: "inertia_spd",
            passed: min_ratio > 0.0 && asym <= 1e-12,
            detail: format!(
                "min λ/λmax {min_ratio:.3e}, asymmetry {asym:.1e} ({} instances)",
                self.instances
            ),
        }
    }

    /// `Ḣ` by central differences along `x ← x + δ v`, `R ← exp(δ ω) R`.
    /// The difference quotient carries roundoff near `1e-16 ‖H‖ / δ`, so
    /// the absolute tolerance is applied to bodies of at most 100 kg.
    pub fn h_dot_skew(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 2);
        let worst = max_of((0..self.instances).map(|_| {
            let body = random_body_up_to(&mut rng, 100.0);
            let q = random_pose(&mut rng);
            let qd = random_twist(&mut rng);
            let shift = |d: f64| Pose::new(q.x + qd.v * d, q.r.left_exp(&(qd.w * d)));
            let h_dot =
                (inertia_matrix(&body, &shift(FD_STEP)) - inertia_matrix(&body, &shift(-FD_STEP))) / (2.0 * FD_STEP);
            let n: Mat6 = h_dot - coriolis_matrix(&body, &q, &qd) * 2.0;
            (n + n.transpose()).abs().max()
        }));
        self.tolerance("h_dot_minus_2c_skew", worst, SKEW_TOL)
    }

    /// `R J_p Rᵀ + m (R r_p)^× (R r_p)^× = R I_cm Rᵀ`, relative to `‖I_cm‖`.
    pub fn schur(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 3);
        let worst = max_of((0..self.instances).map(|_| {
            let body = random_body(&mut rng);
            let r = random_rotation(&mut rng);
            let r = r.matrix();
            let a = hat(&(r * body.r_p));
            let lhs = r * body.j_p() * r.transpose() + a * a * body.mass;
            let rhs = r * body.inertia_cm * r.transpose();
            (lhs - rhs).abs().max() / rhs.abs().max()
        }));
        self.tolerance("schur_identity", worst, SCHUR_TOL)
    }

    /// `M(r) M(-r) = I` and `M(a) M(b) = M(a) + M(b) - I`.
    pub fn grasp_algebra(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 4);
        let worst = max_of((0..self.instances).map(|_| {
            let q = random_pose(&mut rng);
            let (a, b) = (gauss3(&mut rng), gauss3(&mut rng));
            let inv = (grasp_matrix(&q, &a) * grasp_matrix(&q, &(-a)) - Mat6::identity())
                .abs()
                .max();
            let prod = (grasp_matrix(&q, &a) * grasp_matrix(&q, &b)
                - (grasp_matrix(&q, &a) + grasp_matrix(&q, &b) - Mat6::identity()))
            .abs()
            .max();
            inv.max(prod) / (1.0 + a.norm() + b.norm())
        }));
        self.tolerance("grasp_algebra", worst, 1e-12)
    }

    /// `Y_o o = H q̈_r + C q̇_r` with dense `H` and `C`.
    pub fn object_regressor(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 5);
        let worst = max_of((0..self.instances).map(|_| {
            let body = random_body(&mut rng);
            let q = random_pose(&mut rng);
            let qd = random_twist(&mut rng);
            let qd_r = random_twist(&mut rng);
            let qdd_r = Accel::new(gauss3(&mut rng), gauss3(&mut rng));
            let y = regressor_object(&q, &qd, &qd_r, &qdd_r) * object_params(&body);
            let dense =
                inertia_matrix(&body, &q) * qdd_r.to_vector() + coriolis_matrix(&body, &q, &qd) * qd_r.to_vector();
            rel_err(&y, &dense)
        }));
        self.tolerance("object_regressor", worst, REGRESSOR_TOL)
    }

    /// `-(M(r̂) - M(r)) F = Y_g (r̂ - r)`.
    pub fn geometric_regressor(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 6);
        let worst = max_of((0..self.instances).map(|_| {
            let q = random_pose(&mut rng);
            let f = Wrench::from_vector(&(gauss6(&mut rng) * 1e3));
            let (r, r_hat) = (gauss3(&mut rng), gauss3(&mut rng));
            let dense = grasp_apply(&q, &r, &f).to_vector() - grasp_apply(&q, &r_hat, &f).to_vector();
            rel_err(&((self.geometric)(&f, &q) * (r_hat - r)), &dense)
        }));
        self.tolerance("geometric_regressor", worst, REGRESSOR_TOL)
    }

    /// `Y_f Λ_D = D(q) q̇_r` with the dense body-frame matrix.
    pub fn body_friction_regressor(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 7);
        let worst = max_of((0..self.instances).map(|_| {
            let q = random_pose(&mut rng);
            let qd_r = random_twist(&mut rng);
            let lambda = gauss6(&mut rng).abs() * 10.0;
            let dense = body_viscous_matrix(&q, &lambda) * qd_r.to_vector();
            rel_err(&(regressor_body_friction(&q, &qd_r) * lambda), &dense)
        }));
        self.tolerance("body_friction_regressor", worst, REGRESSOR_TOL)
    }

    fn single_contact(r: Vec3, viscous: Vec6, coulomb: Vec6) -> BodyParams {
        BodyParams {
            mass: 1.0,
            inertia_cm: Mat3::identity(),
            r_p: Vec3::zeros(),
            attachments: vec![r],
            gravity: Vec3::zeros(),
            friction: FrictionParams {
                mode: FrictionMode::Contact,
                body_viscous: Vec6::zeros(),
                contact_viscous: vec![viscous],
                contact_coulomb: vec![coulomb],
            },
        }
    }

    /// `Y_D lump(d, r) = M(r) D M(r)ᵀ q̇_r`, with the right side taken from
    /// the plant's friction model for a single contact.
    pub fn contact_viscous_regressor(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 8);
        let worst = max_of((0..self.instances).map(|_| {
            let q = random_pose(&mut rng);
            let qd_r = random_twist(&mut rng);
            let r = gauss3(&mut rng);
            let d = gauss6(&mut rng).abs() * 10.0;
            let body = Self::single_contact(r, d, Vec6::zeros());
            let dense = friction_wrench(&body, &q, &qd_r).to_vector();
            rel_err(
                &(regressor_contact_viscous(&q, &qd_r) * lump_contact_viscous(&d, &r)),
                &dense,
            )
        }));
        self.tolerance("contact_viscous_regressor", worst, REGRESSOR_TOL)
    }

    /// `Y_C lump(c, r) = M(r) D_C sgn(v_i)`, `v_i = M(r)ᵀ q̇`.
    pub fn contact_coulomb_regressor(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 9);
        let worst = max_of((0..self.instances).map(|_| {
            let q = random_pose(&mut rng);
            let qd = random_twist(&mut rng);
            let r = gauss3(&mut rng);
            let c = gauss6(&mut rng).abs() * 10.0;
            let body = Self::single_contact(r, Vec6::zeros(), c);
            let dense = friction_wrench(&body, &q, &qd).to_vector();
            let vi = point_twist(&q, &r, &qd);
            rel_err(
                &(regressor_contact_coulomb(&q, &vi) * lump_contact_coulomb(&c, &r)),
                &dense,
            )
        }));
        self.tolerance("contact_coulomb_regressor", worst, REGRESSOR_TOL)
    }

    /// `V_R(t) ≤ V_R(0) exp(-2λ q₀²(0) t)` and `q₀²` nondecreasing, for
    /// starts with `tr(R_e) > -0.9`.
    pub fn reduced_flow(&self) -> Verdict {
        let mut rng = rng_for(self.seed, 10);
        let lambda = 1.5;
        let mut excess = f64::NEG_INFINITY;
        let mut decrease = f64::NEG_INFINITY;
        let mut n = 0;
        while n < self.flow_instances {
            let r = random_rotation(&mut rng);
            if r.matrix().trace() <= -0.9 {
                continue;
            }
            n += 1;
            match reduced_flow_check(&r, lambda, 5.0) {
                Ok(rep) => {
                    excess = excess.max(rep.max_bound_excess());
                    decrease = decrease.max(rep.max_q0_decrease());
                }
                Err(_) => excess = f64::INFINITY,
            }
        }
        Verdict {
            name: "reduced_flow",
            passed: excess <= FLOW_FLOOR && decrease <= FLOW_FLOOR,
            detail: format!(
                "max V_R - bound {excess:.3e}, max q0^2 decrease {decrease:.3e} ({} starts)",
                self.flow_instances
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_battery_passes() {
        let b = Battery {
            instances: 50,
            flow_instances: 5,
            ..Battery::default()
        };
        for v in b.run() {
            assert!(v.passed, "{v}");
        }
    }
}
