//! Desired trajectories and the composite tracking error on SE(3).

use std::convert::Infallible;

use crate::dynamics::{Accel, Pose, Twist, Vec6};
use crate::error::{Error, Result};
use crate::integrate::heun_step;
use crate::so3::{hat, quaternion_scalar_sq, rotation_error, rotation_potential, skew_vee, RotationMatrix, Vec3};

/// One `amplitude · cos(frequency · t)` term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
}

/// Rate along one axis: `offset + Σ a_k cos(ω_k t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxisBank {
    pub offset: f64,
    pub terms: Vec<Sinusoid>,
}

impl AxisBank {
    pub fn new(terms: Vec<Sinusoid>) -> Self {
        AxisBank { offset: 0.0, terms }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|s| s.amplitude * (s.frequency * t).cos())
                .sum::<f64>()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        -self
            .terms
            .iter()
            .map(|s| s.amplitude * s.frequency * (s.frequency * t).sin())
            .sum::<f64>()
    }
}

/// Desired linear and angular rates as sinusoid banks, plus the pose the
/// desired trajectory starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub linear: [AxisBank; 3],
    pub angular: [AxisBank; 3],
    pub initial: Pose,
}

impl TrajectorySpec {
    /// A trajectory that stays at `initial` forever.
    pub fn stationary(initial: Pose) -> Self {
        let zero = || {
            AxisBank::new(vec![Sinusoid {
                amplitude: 0.0,
                frequency: 1.0,
            }])
        };
        TrajectorySpec {
            linear: [zero(), zero(), zero()],
            angular: [zero(), zero(), zero()],
            initial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, axis) in self.linear.iter().chain(&self.angular).enumerate() {
            if axis.terms.is_empty() {
                return Err(Error::config(
                    format!("trajectory axis {i}"),
                    "needs at least one frequency",
                ));
            }
            let finite = axis.offset.is_finite()
                && axis
                    .terms
                    .iter()
                    .all(|s| s.amplitude.is_finite() && s.frequency.is_finite());
            if !finite {
                return Err(Error::config(format!("trajectory axis {i}"), "non-finite coefficient"));
            }
        }
        Ok(())
    }

    pub fn twist(&self, t: f64) -> Twist {
        let eval = |b: &[AxisBank; 3]| Vec3::new(b[0].value(t), b[1].value(t), b[2].value(t));
        Twist::new(eval(&self.linear), eval(&self.angular))
    }

    pub fn accel(&self, t: f64) -> Accel {
        let eval = |b: &[AxisBank; 3]| Vec3::new(b[0].derivative(t), b[1].derivative(t), b[2].derivative(t));
        Accel::new(eval(&self.linear), eval(&self.angular))
    }

    /// Desired state for a given (integrated) desired pose at time `t`.
    pub fn state_at(&self, pose: Pose, t: f64) -> DesiredState {
        DesiredState {
            pose,
            twist: self.twist(t),
            accel: self.accel(t),
        }
    }
}

/// Desired pose with its (analytic) rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredState {
    pub pose: Pose,
    pub twist: Twist,
    pub accel: Accel,
}

/// Steps the desired pose with the same Heun/exponential-map scheme the
/// plant uses, so that desired poses at sample times match the simulator.
#[derive(Debug, Clone)]
pub struct DesiredTrajectory<'a> {
    spec: &'a TrajectorySpec,
    h: f64,
    t: f64,
    pose: Pose,
}

impl<'a> DesiredTrajectory<'a> {
    pub fn new(spec: &'a TrajectorySpec, h: f64) -> Self {
        DesiredTrajectory {
            spec,
            h,
            t: 0.0,
            pose: spec.initial,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> DesiredState {
        self.spec.state_at(self.pose, self.t)
    }

    pub fn step(&mut self) {
        self.step_by(self.h);
    }

    fn step_by(&mut self, h: f64) {
        let spec = self.spec;
        self.pose =
            heun_step(&self.pose, self.t, h, |t, _| Ok::<_, Infallible>(spec.twist(t))).unwrap_or_else(|e| match e {});
        self.t += h;
    }

    /// Advances to time `t` (whole steps, then one partial step if needed).
    pub fn advance_to(&mut self, t: f64) {
        while self.t + self.h <= t + 1e-9 * self.h {
            self.step();
        }
        let rest = t - self.t;
        if rest > 1e-12 {
            self.step_by(rest);
        }
    }
}

/// Desired state at time `t`, integrating the desired pose from `t = 0` with
/// step `h`.
pub fn desired_state(spec: &TrajectorySpec, t: f64, h: f64) -> DesiredState {
    let mut traj = DesiredTrajectory::new(spec, h);
    traj.advance_to(t);
    traj.state()
}

/// Composite error `s = [ẋ̃ + λ x̃ ; ω_e + λ R_d P_a(R_e)^∨]` and the pieces it
/// is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeError {
    pub s: Vec6,
    pub x_err: Vec3,
    pub r_e: RotationMatrix,
    pub w_e: Vec3,
}

impl CompositeError {
    pub fn norm(&self) -> f64 {
        self.s.norm()
    }
}

pub fn composite_error(q: &Pose, qd: &Twist, des: &DesiredState, lambda: f64) -> CompositeError {
    let x_err = q.x - des.pose.x;
    let r_e = rotation_error(&q.r, &des.pose.r);
    let w_e = qd.w - des.twist.w;
    let s_l = (qd.v - des.twist.v) + x_err * lambda;
    let sigma = w_e + des.pose.r.matrix() * skew_vee(r_e.matrix()) * lambda;
    CompositeError {
        s: Twist::new(s_l, sigma).to_vector(),
        x_err,
        r_e,
        w_e,
    }
}

/// Reference velocity `q̇_r`, so that `s = q̇ - q̇_r`.
pub fn reference_velocity(q: &Pose, des: &DesiredState, lambda: f64) -> Twist {
    let x_err = q.x - des.pose.x;
    let r_e = rotation_error(&q.r, &des.pose.r);
    Twist::new(
        des.twist.v - x_err * lambda,
        des.twist.w - des.pose.r.matrix() * skew_vee(r_e.matrix()) * lambda,
    )
}

/// Time derivative of [`reference_velocity`] along the true motion,
/// using `Ṙ_d = ω_d^× R_d` and `Ṙ_e = (R_dᵀ ω_e)^× R_e`.
pub fn reference_accel(q: &Pose, qd: &Twist, des: &DesiredState, lambda: f64) -> Accel {
    let rd = des.pose.r.matrix();
    let r_e = rotation_error(&q.r, &des.pose.r);
    let re = r_e.matrix();
    let w_e = qd.w - des.twist.w;
    let rd_dot = hat(&des.twist.w) * rd;
    let re_dot = hat(&(rd.transpose() * w_e)) * re;
    Accel::new(
        des.accel.linear - (qd.v - des.twist.v) * lambda,
        des.accel.angular - (rd_dot * skew_vee(re) + rd * skew_vee(&re_dot)) * lambda,
    )
}

/// Samples of the reduced rotational flow `Ṙ_e = -λ P_a(R_e) R_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFlowReport {
    pub lambda: f64,
    pub times: Vec<f64>,
    /// `tr(I - R_e)` at each sample.
    pub potential: Vec<f64>,
    /// Squared quaternion scalar `1 - V_R/4` at each sample.
    pub q0_sq: Vec<f64>,
}

impl ReducedFlowReport {
    /// `V_R(0) exp(-2 λ q₀²(0) t)`.
    pub fn exponential_bound(&self, t: f64) -> f64 {
        self.potential[0] * (-2.0 * self.lambda * self.q0_sq[0] * t).exp()
    }

    /// Largest `V_R(t) - bound(t)` over the samples (≤ 0 when the bound holds).
    pub fn max_bound_excess(&self) -> f64 {
        self.times
            .iter()
            .zip(&self.potential)
            .map(|(t, v)| v - self.exponential_bound(*t))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest decrease of `q₀²` between consecutive samples (≤ 0 when
    /// monotone).
    pub fn max_q0_decrease(&self) -> f64 {
        self.q0_sq
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_potential(&self) -> f64 {
        *self.potential.last().unwrap()
    }
}

/// Right-hand side of the reduced flow as a left angular velocity.
pub fn reduced_flow_rate(r_e: &RotationMatrix, lambda: f64) -> Vec3 {
    -skew_vee(r_e.matrix()) * lambda
}

/// Distance from `tr(R_e) = -1` below which the reduced-flow check refuses
/// to start.
pub const ANTIPODAL_GUARD: f64 = 1e-6;

/// Integrates the reduced flow for `duration` seconds, sampling every
/// `0.01/λ` with ten exponential-map Heun substeps per sample.
pub fn reduced_flow_check(r_e0: &RotationMatrix, lambda: f64, duration: f64) -> Result<ReducedFlowReport> {
    let tr = r_e0.matrix().trace();
    if tr <= -1.0 + ANTIPODAL_GUARD {
        return Err(Error::AntipodalRotation(tr));
    }
    if !(lambda > 0.0) {
        return Err(Error::config("lambda", "must be positive"));
    }
    let sample_dt = 0.01 / lambda;
    let substeps = 10;
    let h = sample_dt / substeps as f64;
    let n = (duration / sample_dt).ceil() as usize;

    let mut r = *r_e0;
    let mut report = ReducedFlowReport {
        lambda,
        times: Vec::with_capacity(n + 1),
        potential: Vec::with_capacity(n + 1),
        q0_sq: Vec::with_capacity(n + 1),
    };
    let mut record = |t: f64, r: &RotationMatrix| {
        report.times.push(t);
        report.potential.push(rotation_potential(r));
        report.q0_sq.push(quaternion_scalar_sq(r));
    };
    record(0.0, &r);
    for k in 1..=n {
        for _ in 0..substeps {
            let w1 = reduced_flow_rate(&r, lambda);
            let pred = r.left_exp(&(w1 * h));
            let w2 = reduced_flow_rate(&pred, lambda);
            r = r.left_exp(&((w1 + w2) * (0.5 * h)));
        }
        record(k as f64 * sample_dt, &r);
    }
    Ok(report)
}
