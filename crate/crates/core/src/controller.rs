//! Per-agent decentralized adaptive controller.
//!
//! Every agent sees the same measurement of the shared point, computes
//! `F_i = Y_o ô_i - K_D s` (plus friction compensation), applies
//! `τ_i = M(-r̂_i) F_i`, and adapts its own estimates from `s`.

use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector, Matrix6, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{grasp_apply, BodyParams, FrictionMode, Mat6, Pose, Twist, Vec6, Wrench};
use crate::error::{Error, Result};
use crate::regressors::{
    lump_contact_coulomb, lump_contact_viscous, object_params, regressor_body_friction, regressor_contact_coulomb,
    regressor_contact_viscous, regressor_geometric, regressor_object_with_gravity, ContactCoulombParams,
    ContactCoulombRegressor, ContactViscousParams, ContactViscousRegressor, ObjectParams, ObjectRegressor,
    N_CONTACT_COULOMB, N_CONTACT_VISCOUS, N_OBJECT,
};
use crate::so3::{Mat3, Vec3};
use crate::tracking::{composite_error, reference_accel, reference_velocity, CompositeError, DesiredState};

pub type GammaO = SMatrix<f64, N_OBJECT, N_OBJECT>;
pub type GammaD = SMatrix<f64, N_CONTACT_VISCOUS, N_CONTACT_VISCOUS>;
pub type GammaC = SMatrix<f64, N_CONTACT_COULOMB, N_CONTACT_COULOMB>;

/// Potential shaping the parameter-error penalty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    /// `ψ(u) = ½‖u‖²`, the usual gradient law.
    #[default]
    Quadratic,
    /// `ψ(u) = Σ √(u_k² + ε²)`, a twice-differentiable stand-in for `‖u‖₁`.
    SmoothedL1 { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainConfig {
    pub lambda: f64,
    pub k_d: Mat6,
    pub gamma_o: GammaO,
    pub gamma_r: Mat3,
    pub gamma_f: Mat6,
    pub gamma_d: GammaD,
    pub gamma_c: GammaC,
    /// Adaptation stops while `‖s‖₂ ≤ deadband`.
    pub deadband: f64,
    pub regularizer: Regularizer,
    /// Which friction terms the agents compensate.
    pub friction: FrictionMode,
    /// World gravity known to the agents (zero in free space).
    pub gravity: Vec3,
}

impl GainConfig {
    /// Gains used for the cylinder experiments, with `Γ_o` scaled by the
    /// magnitudes of `o_scale`.
    pub fn table_defaults(o_scale: &ObjectParams) -> Self {
        GainConfig {
            lambda: 1.5,
            k_d: Matrix6::from_diagonal(&Vec6::new(5e4, 5e4, 5e4, 5e3, 5e3, 5e3)),
            gamma_o: GammaO::from_diagonal(&(o_scale.abs().add_scalar(0.01) * 0.3)),
            gamma_r: Mat3::identity() * 1e-3,
            gamma_f: Mat6::zeros(),
            gamma_d: GammaD::zeros(),
            gamma_c: GammaC::zeros(),
            deadband: 0.01,
            regularizer: Regularizer::Quadratic,
            friction: FrictionMode::None,
            gravity: Vec3::zeros(),
        }
    }
}

/// Symmetric square root and pseudo-inverse square root of a PSD gain.
#[derive(Debug, Clone, PartialEq)]
struct GainRoot<const D: usize> {
    half: SMatrix<f64, D, D>,
    inv_half: SMatrix<f64, D, D>,
}

fn check_psd<const D: usize>(name: &str, m: &SMatrix<f64, D, D>, strict: bool) -> Result<()> {
    let scale = m.abs().max().max(1.0);
    if !m.iter().all(|c| c.is_finite()) {
        return Err(Error::config(name, "non-finite entry"));
    }
    if (m - m.transpose()).abs().max() > 1e-12 * scale {
        return Err(Error::config(name, "not symmetric"));
    }
    let min = DMatrix::from_column_slice(D, D, m.as_slice())
        .symmetric_eigenvalues()
        .min();
    if strict && !(min > 0.0) {
        return Err(Error::config(
            name,
            format!("not positive definite (min eigenvalue {min})"),
        ));
    }
    if !(min >= -1e-12 * scale) {
        return Err(Error::config(
            name,
            format!("not positive semidefinite (min eigenvalue {min})"),
        ));
    }
    Ok(())
}

impl<const D: usize> GainRoot<D> {
    fn new(m: &SMatrix<f64, D, D>) -> Self {
        let eig = DMatrix::from_column_slice(D, D, m.as_slice()).symmetric_eigen();
        let tol = 1e-14 * eig.eigenvalues.abs().max().max(f64::MIN_POSITIVE);
        let half = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let inv = eig.eigenvalues.map(|l| if l > tol { 1.0 / l.sqrt() } else { 0.0 });
        let v = &eig.eigenvectors;
        let build = |d: &DVector<f64>| {
            let full = v * DMatrix::from_diagonal(d) * v.transpose();
            SMatrix::<f64, D, D>::from_column_slice(full.as_slice())
        };
        GainRoot {
            half: build(&half),
            inv_half: build(&inv),
        }
    }
}

/// Validated gains with the factorizations the adaptation laws need.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    gains: GainConfig,
    o_root: GainRoot<N_OBJECT>,
    r_root: GainRoot<3>,
}

impl Controller {
    pub fn new(gains: GainConfig) -> Result<Self> {
        if !(gains.lambda > 0.0) || !gains.lambda.is_finite() {
            return Err(Error::config("gains.lambda", "must be positive"));
        }
        if !(gains.deadband >= 0.0) || !gains.deadband.is_finite() {
            return Err(Error::config("gains.deadband", "must be nonnegative"));
        }
        check_psd("gains.k_d", &gains.k_d, true)?;
        check_psd("gains.gamma_o", &gains.gamma_o, false)?;
        check_psd("gains.gamma_r", &gains.gamma_r, false)?;
        check_psd("gains.gamma_f", &gains.gamma_f, false)?;
        check_psd("gains.gamma_d", &gains.gamma_d, false)?;
        check_psd("gains.gamma_c", &gains.gamma_c, false)?;
        if let Regularizer::SmoothedL1 { epsilon } = gains.regularizer {
            if !(epsilon > 0.0) || !epsilon.is_finite() {
                return Err(Error::NotPositiveDefinite(format!(
                    "smoothed l1 needs epsilon > 0, got {epsilon}"
                )));
            }
        }
        Ok(Controller {
            o_root: GainRoot::new(&gains.gamma_o),
            r_root: GainRoot::new(&gains.gamma_r),
            gains,
        })
    }

    pub fn gains(&self) -> &GainConfig {
        &self.gains
    }
}

/// All quantities an agent adapts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub o: ObjectParams,
    pub r: Vec3,
    pub f: Vec6,
    pub d: ContactViscousParams,
    pub c: ContactCoulombParams,
}

impl Estimates {
    pub fn zero() -> Self {
        Estimates {
            o: ObjectParams::zeros(),
            r: Vec3::zeros(),
            f: Vec6::zeros(),
            d: ContactViscousParams::zeros(),
            c: ContactCoulombParams::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.o
            .iter()
            .chain(self.r.iter())
            .chain(self.f.iter())
            .chain(self.d.iter())
            .chain(self.c.iter())
            .all(|x| x.is_finite())
    }
}

impl Add for Estimates {
    type Output = Estimates;
    fn add(self, b: Estimates) -> Estimates {
        Estimates {
            o: self.o + b.o,
            r: self.r + b.r,
            f: self.f + b.f,
            d: self.d + b.d,
            c: self.c + b.c,
        }
    }
}

impl Mul<f64> for Estimates {
    type Output = Estimates;
    fn mul(self, k: f64) -> Estimates {
        Estimates {
            o: self.o * k,
            r: self.r * k,
            f: self.f * k,
            d: self.d * k,
            c: self.c * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub active: bool,
    pub est: Estimates,
}

impl AgentState {
    pub fn new(id: usize, est: Estimates) -> Self {
        AgentState { id, active: true, est }
    }
}

/// Quantities computed once per measurement and shared by every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedSignals {
    pub pose: Pose,
    pub twist: Twist,
    pub err: CompositeError,
    pub qd_r: Twist,
    pub y_o: ObjectRegressor,
    pub y_f: Option<Matrix6<f64>>,
    pub y_d: Option<ContactViscousRegressor>,
}

impl SharedSignals {
    pub fn new(ctrl: &Controller, pose: &Pose, twist: &Twist, des: &DesiredState) -> Self {
        let g = &ctrl.gains;
        let err = composite_error(pose, twist, des, g.lambda);
        let qd_r = reference_velocity(pose, des, g.lambda);
        let qdd_r = reference_accel(pose, twist, des, g.lambda);
        SharedSignals {
            pose: *pose,
            twist: *twist,
            y_o: regressor_object_with_gravity(pose, twist, &qd_r, &qdd_r, &g.gravity),
            y_f: (g.friction == FrictionMode::BodyViscous).then(|| regressor_body_friction(pose, &qd_r)),
            y_d: (g.friction == FrictionMode::Contact).then(|| regressor_contact_viscous(pose, &qd_r)),
            err,
            qd_r,
        }
    }

    pub fn s(&self) -> &Vec6 {
        &self.err.s
    }

    pub fn in_deadband(&self, ctrl: &Controller) -> bool {
        self.err.norm() <= ctrl.gains.deadband
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Wrench applied at the agent's attachment.
    pub wrench: Wrench,
    /// The wrench the agent wants at the measurement point, `F_i`.
    pub f_pre: Wrench,
    pub rates: Estimates,
}

impl ControlOutput {
    fn idle() -> Self {
        ControlOutput {
            wrench: Wrench::zero(),
            f_pre: Wrench::zero(),
            rates: Estimates::zero(),
        }
    }
}

/// One agent's wrench and estimate rates. `v_self` is the agent's own
/// measured twist, used only by contact-Coulomb compensation.
pub fn agent_control(
    agent: &AgentState,
    ctrl: &Controller,
    sig: &SharedSignals,
    v_self: Option<&Twist>,
) -> ControlOutput {
    if !agent.active {
        return ControlOutput::idle();
    }
    let g = &ctrl.gains;
    let est = &agent.est;
    let s = sig.s();

    let mut f = sig.y_o * est.o - g.k_d * s;
    if let Some(y_f) = &sig.y_f {
        f += y_f * est.f;
    }
    let y_c = match (&sig.y_d, v_self) {
        (Some(y_d), Some(v)) => {
            let y_c = regressor_contact_coulomb(&sig.pose, v);
            f += y_d * est.d + y_c * est.c;
            Some(y_c)
        }
        (Some(y_d), None) => {
            f += y_d * est.d;
            None
        }
        _ => None,
    };
    let f_pre = Wrench::from_vector(&f);
    let wrench = grasp_apply(&sig.pose, &-est.r, &f_pre);

    let rates = adaptation_rates(agent, ctrl, sig, &f_pre, y_c.as_ref());
    ControlOutput { wrench, f_pre, rates }
}

/// Estimate rates for one agent. `f_pre` must be the `F_i` used for the
/// wrench this step. Zero inside the deadband.
pub fn adaptation_rates(
    agent: &AgentState,
    ctrl: &Controller,
    sig: &SharedSignals,
    f_pre: &Wrench,
    y_c: Option<&ContactCoulombRegressor>,
) -> Estimates {
    if !agent.active || sig.in_deadband(ctrl) {
        return Estimates::zero();
    }
    let g = &ctrl.gains;
    let s = sig.s();
    let y_g = regressor_geometric(f_pre, &sig.pose);
    let grad_o = sig.y_o.transpose() * s;
    let grad_r = y_g.transpose() * s;
    let (o, r) = match g.regularizer {
        Regularizer::Quadratic => (-(g.gamma_o * grad_o), -(g.gamma_r * grad_r)),
        Regularizer::SmoothedL1 { epsilon } => (
            mirror_rate(&ctrl.o_root, &agent.est.o, &grad_o, epsilon),
            mirror_rate(&ctrl.r_root, &agent.est.r, &grad_r, epsilon),
        ),
    };
    let mut rates = Estimates {
        o,
        r,
        ..Estimates::zero()
    };
    if let Some(y_f) = &sig.y_f {
        rates.f = -(g.gamma_f * (y_f.transpose() * s));
    }
    if let Some(y_d) = &sig.y_d {
        rates.d = -(g.gamma_d * (y_d.transpose() * s));
        if let Some(y_c) = y_c {
            rates.c = -(g.gamma_c * (y_c.transpose() * s));
        }
    }
    rates
}

/// Inverse Hessian of the smoothed ℓ1 potential (diagonal).
fn smoothed_l1_inv_hessian<const D: usize>(u: &SVector<f64, D>, epsilon: f64) -> SVector<f64, D> {
    let e2 = epsilon * epsilon;
    u.map(|x| (x * x + e2).powf(1.5) / e2)
}

/// `-Γ^{½} (∇²ψ(Γ^{-½} â))⁻¹ Γ^{½} g`.
fn mirror_rate<const D: usize>(
    root: &GainRoot<D>,
    a: &SVector<f64, D>,
    grad: &SVector<f64, D>,
    epsilon: f64,
) -> SVector<f64, D> {
    let u = root.inv_half * a;
    let w = smoothed_l1_inv_hessian(&u, epsilon);
    -(root.half * (root.half * grad).component_mul(&w))
}

/// Bregman-law rates for a stacked `[o; r]` estimate given the stacked
/// gradient `Yᵀ s`. With [`Regularizer::Quadratic`] this is exactly
/// `-Γ Yᵀ s`.
pub fn bregman_rates(
    ctrl: &Controller,
    o_hat: &ObjectParams,
    r_hat: &Vec3,
    grad_o: &ObjectParams,
    grad_r: &Vec3,
) -> Result<(ObjectParams, Vec3)> {
    match ctrl.gains.regularizer {
        Regularizer::Quadratic => {
            let o = -(ctrl.o_root.half * (ctrl.o_root.half * grad_o));
            let r = -(ctrl.r_root.half * (ctrl.r_root.half * grad_r));
            Ok((o, r))
        }
        Regularizer::SmoothedL1 { epsilon } => {
            let rate_o = mirror_rate(&ctrl.o_root, o_hat, grad_o, epsilon);
            let rate_r = mirror_rate(&ctrl.r_root, r_hat, grad_r, epsilon);
            if !rate_o.iter().chain(rate_r.iter()).all(|x| x.is_finite()) {
                return Err(Error::NotPositiveDefinite("smoothed l1 Hessian overflowed".into()));
            }
            Ok((rate_o, rate_r))
        }
    }
}

fn psi(reg: Regularizer, u: f64) -> (f64, f64) {
    match reg {
        Regularizer::Quadratic => (0.5 * u * u, u),
        Regularizer::SmoothedL1 { epsilon } => {
            let n = (u * u + epsilon * epsilon).sqrt();
            (n, u / n)
        }
    }
}

/// Bregman divergence `d(a ‖ â) = ψ_Γ(a) - ψ_Γ(â) - ∇ψ_Γ(â)ᵀ(a - â)` with
/// `ψ_Γ(x) = ψ(Γ^{-½} x)`. Equals `½ ãᵀ Γ⁻¹ ã` for the quadratic potential.
fn divergence<const D: usize>(
    reg: Regularizer,
    root: &GainRoot<D>,
    a: &SVector<f64, D>,
    a_hat: &SVector<f64, D>,
) -> f64 {
    let u = root.inv_half * a;
    let u_hat = root.inv_half * a_hat;
    let mut total = 0.0;
    for k in 0..D {
        let (p, _) = psi(reg, u[k]);
        let (p_hat, dp_hat) = psi(reg, u_hat[k]);
        total += p - p_hat - dp_hat * (u[k] - u_hat[k]);
    }
    total
}

fn quadratic_error<const D: usize>(gamma: &SMatrix<f64, D, D>, err: &SVector<f64, D>) -> f64 {
    match gamma.cholesky() {
        Some(ch) => 0.5 * err.dot(&ch.solve(err)),
        None => 0.0,
    }
}

/// True per-agent parameters used to evaluate the Lyapunov-like function.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTruth {
    pub o: ObjectParams,
    pub r: Vec3,
    pub f: Vec6,
    pub d: ContactViscousParams,
    pub c: ContactCoulombParams,
}

/// Per-agent truth for a body described about the measured point, with
/// the object load split evenly over `n_active` agents.
pub fn agent_truth(body: &BodyParams, i: usize, n_active: usize) -> AgentTruth {
    agent_truth_with_share(body, i, 1.0 / n_active.max(1) as f64)
}

/// As [`agent_truth`] with an explicit load share `α_i`.
pub fn agent_truth_with_share(body: &BodyParams, i: usize, share: f64) -> AgentTruth {
    let r = body.attachments[i];
    AgentTruth {
        o: object_params(body) * share,
        r,
        f: body.friction.body_viscous * share,
        d: lump_contact_viscous(&body.friction.contact_viscous_at(i), &r),
        c: lump_contact_coulomb(&body.friction.contact_coulomb_at(i), &r),
    }
}

/// Lyapunov-like function
/// `V = ½ sᵀ H s + Σ_i [d(α_i o ‖ ô_i) + d(r_i ‖ r̂_i) + friction terms]`.
///
/// Active agents share the load evenly; deactivated agents keep their
/// frozen estimates in the sum with `α_i = 0`, so their terms are
/// constant after the fault. `body` must be described about the measured
/// point. Parameter blocks whose gain is singular (adaptation switched
/// off) are left out.
pub fn lyapunov_value(agents: &[AgentState], ctrl: &Controller, body: &BodyParams, pose: &Pose, s: &Vec6) -> f64 {
    let g = &ctrl.gains;
    let h = crate::dynamics::inertia_matrix(body, pose);
    let mut v = 0.5 * s.dot(&(h * s));
    let n_active = agents.iter().filter(|a| a.active).count();
    let o_on = g.gamma_o.cholesky().is_some();
    let r_on = g.gamma_r.cholesky().is_some();
    for a in agents {
        let share = if a.active { 1.0 / n_active.max(1) as f64 } else { 0.0 };
        let truth = agent_truth_with_share(body, a.id, share);
        if o_on {
            v += divergence(g.regularizer, &ctrl.o_root, &truth.o, &a.est.o);
        }
        if r_on {
            v += divergence(g.regularizer, &ctrl.r_root, &truth.r, &a.est.r);
        }
        match g.friction {
            FrictionMode::None => {}
            FrictionMode::BodyViscous => v += quadratic_error(&g.gamma_f, &(a.est.f - truth.f)),
            FrictionMode::Contact => {
                v += quadratic_error(&g.gamma_d, &(a.est.d - truth.d));
                v += quadratic_error(&g.gamma_c, &(a.est.c - truth.c));
            }
        }
    }
    v
}
