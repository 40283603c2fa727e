//! Closed-loop simulation of the payload and the agent team.
//!
//! The plant, the desired pose and every agent's estimates form one
//! augmented state, advanced together with Heun's method. Rotations move by
//! `R ← exp(h ω^×) R` at every stage.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{MeasurementModel, Scenario, ScenarioConfig};
use crate::controller::{agent_control, agent_truth, lyapunov_value, AgentState, Estimates, SharedSignals};
use crate::dynamics::{forward_dynamics, point_twist, Accel, Pose, Twist, Vec6, Wrench};
use crate::error::{Error, Result};
use crate::integrate::{heun_step, HeunState};
use crate::regressors::{ObjectParams, N_OBJECT};
use crate::so3::{rotation_error, rotation_potential, Vec3};

/// Plant, desired pose and estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Pose of the plant's reference point.
    pub pose: Pose,
    pub twist: Twist,
    pub desired: Pose,
    pub est: Vec<Estimates>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRate {
    pub twist: Twist,
    pub accel: Accel,
    pub desired: Twist,
    pub est: Vec<Estimates>,
}

impl HeunState for SimState {
    type Tangent = SimRate;

    fn retract(&self, d: &SimRate, h: f64) -> SimState {
        SimState {
            pose: self.pose.retract(&d.twist, h),
            twist: Twist::from_vector(&(self.twist.to_vector() + d.accel.to_vector() * h)),
            desired: self.desired.retract(&d.desired, h),
            est: self.est.iter().zip(&d.est).map(|(e, r)| *e + *r * h).collect(),
        }
    }

    fn average(a: &SimRate, b: &SimRate) -> SimRate {
        SimRate {
            twist: Pose::average(&a.twist, &b.twist),
            accel: Accel::from_vector(&((a.accel.to_vector() + b.accel.to_vector()) * 0.5)),
            desired: Pose::average(&a.desired, &b.desired),
            est: a.est.iter().zip(&b.est).map(|(x, y)| (*x + *y) * 0.5).collect(),
        }
    }
}

/// Pose and twist of a body point at offset `offset` from the reference point.
pub fn measurement(pose: &Pose, twist: &Twist, offset: &Vec3) -> (Pose, Twist) {
    (Pose::new(pose.point(offset), pose.r), point_twist(pose, offset, twist))
}

/// Offset of the measured point for a measurement model.
pub fn measured_offset(model: MeasurementModel, attachments: &[Vec3]) -> Vec3 {
    match model {
        MeasurementModel::Broadcast { agent } => attachments[agent],
        MeasurementModel::CentroidAverage => attachments.iter().sum::<Vec3>() / attachments.len() as f64,
    }
}

/// Result of evaluating the closed loop at one stage.
#[derive(Debug, Clone)]
struct Stage {
    rate: SimRate,
    in_deadband: bool,
    wrenches: Vec<Wrench>,
}

/// What the agents output at one stage, reusable under zero-order hold.
#[derive(Debug, Clone)]
struct Held {
    wrenches: Vec<Wrench>,
    rates: Vec<Estimates>,
    in_deadband: bool,
}

fn evaluate(sc: &Scenario, active: &[bool], t: f64, y: &SimState, held: Option<&Held>) -> Result<(Stage, Held)> {
    let ctrl = &sc.controller;
    let body = &sc.body;
    let out = match held {
        Some(h) => h.clone(),
        None => {
            let (mp, mt) = measurement(&y.pose, &y.twist, &sc.measured_offset);
            let des = sc.trajectory.state_at(y.desired, t);
            let sig = SharedSignals::new(ctrl, &mp, &mt, &des);
            let contact = body.friction.mode == crate::dynamics::FrictionMode::Contact;
            let mut wrenches = Vec::with_capacity(active.len());
            let mut rates = Vec::with_capacity(active.len());
            for (i, est) in y.est.iter().enumerate() {
                let agent = AgentState {
                    id: i,
                    active: active[i],
                    est: *est,
                };
                let v_self = contact.then(|| point_twist(&y.pose, &body.attachments[i], &y.twist));
                let o = agent_control(&agent, ctrl, &sig, v_self.as_ref());
                wrenches.push(o.wrench);
                rates.push(o.rates);
            }
            Held {
                wrenches,
                rates,
                in_deadband: sig.in_deadband(ctrl),
            }
        }
    };
    let applied: Vec<(Wrench, bool)> = out.wrenches.iter().zip(active).map(|(w, a)| (*w, *a)).collect();
    let accel = forward_dynamics(body, &y.pose, &y.twist, &applied)?;
    let stage = Stage {
        rate: SimRate {
            twist: y.twist,
            accel,
            desired: sc.trajectory.twist(t),
            est: out.rates.clone(),
        },
        in_deadband: out.in_deadband,
        wrenches: out.wrenches.clone(),
    };
    Ok((stage, out))
}

/// Tracking and Lyapunov quantities at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub s: Vec6,
    pub s_norm: f64,
    pub rot_err: f64,
    pub x_err: Vec3,
    pub v: f64,
}

/// One recorded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub s_norm: f64,
    pub rot_err: f64,
    pub x_err: Vec3,
    pub v: f64,
    /// `‖ô_i - o_i‖` per agent, with `o_i = o / N_active`.
    pub o_err: Vec<f64>,
    /// `‖r̂_i - r_i‖` per agent.
    pub r_err: Vec<f64>,
    pub pose: Pose,
    pub twist: Twist,
    pub wrenches: Vec<Wrench>,
    pub estimates: Vec<(ObjectParams, Vec3)>,
    pub active: Vec<bool>,
}

/// Output of [`run`]: strided samples plus per-step traces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub name: String,
    pub seed: u64,
    pub h: f64,
    pub deadband: f64,
    pub samples: Vec<Sample>,
    /// `t_k`, `V(t_k)`, `‖s(t_k)‖` and `tr(I - R_e(t_k))` for every step
    /// boundary `k = 0..=steps`, evaluated after faults scheduled at `t_k`.
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    pub s_norm: Vec<f64>,
    pub rot_err: Vec<f64>,
    /// Whether step `k → k+1` adapted at both stages.
    pub adapting: Vec<bool>,
    /// Step boundaries at which agents were deactivated.
    pub fault_steps: Vec<usize>,
    pub final_estimates: Vec<Estimates>,
    pub final_active: Vec<bool>,
    /// Set by [`run_to_failure`] when the state stopped being finite or
    /// the inertia became singular. Traces end at the last good step.
    pub diverged: Option<Divergence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    /// Start of the step that failed.
    pub time: f64,
    pub error: Error,
}

impl SimRecord {
    pub fn n_agents(&self) -> usize {
        self.final_active.len()
    }
}

/// Per-agent initial estimates: `ô ~ N(0, Σ_o)`, `r̂ ~ N(0, Σ_r)`, drawn
/// from a ChaCha stream selected by the agent index.
pub fn initial_estimates(seed: u64, n: usize, sigma_o: &DMatrix<f64>, sigma_r: &DMatrix<f64>) -> Vec<Estimates> {
    let l_o = psd_sqrt(sigma_o);
    let l_r = psd_sqrt(sigma_r);
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut draw = |k: usize| DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let z_o: DVector<f64> = draw(N_OBJECT);
            let z_r: DVector<f64> = draw(3);
            Estimates {
                o: ObjectParams::from_column_slice((&l_o * z_o).as_slice()),
                r: Vec3::from_column_slice((&l_r * z_r).as_slice()),
                ..Estimates::zero()
            }
        })
        .collect()
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// A running simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    sc: Scenario,
    state: SimState,
    active: Vec<bool>,
    k: usize,
    next_fault: usize,
}

impl Simulation {
    pub fn new(sc: Scenario) -> Self {
        let n = sc.n_agents();
        let est = initial_estimates(sc.seed, n, &sc.sigma_o, &sc.sigma_r);
        let state = SimState {
            pose: sc.initial_pose,
            twist: sc.initial_twist,
            desired: sc.trajectory.initial,
            est,
        };
        Simulation {
            sc,
            state,
            active: vec![true; n],
            k: 0,
            next_fault: 0,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.sc
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SimState {
        &mut self.state
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.sc.h
    }

    /// Deactivates agents scheduled at the current step boundary. Returns
    /// whether any agent changed.
    pub fn apply_faults(&mut self) -> bool {
        let mut changed = false;
        while let Some((k, a)) = self.sc.faults.get(self.next_fault) {
            if *k > self.k {
                break;
            }
            changed |= self.active[*a];
            self.active[*a] = false;
            self.next_fault += 1;
        }
        changed
    }

    pub fn agents(&self) -> Vec<AgentState> {
        self.state
            .est
            .iter()
            .enumerate()
            .map(|(i, e)| AgentState {
                id: i,
                active: self.active[i],
                est: *e,
            })
            .collect()
    }

    /// Advances one step. Returns whether both stages were outside the
    /// deadband.
    pub fn step(&mut self) -> Result<bool> {
        let t = self.time();
        let h = self.sc.h;
        let zoh = self.sc.zero_order_hold;
        let mut held: Option<Held> = None;
        let mut adapting = true;
        let sc = &self.sc;
        let active = &self.active;
        let next = heun_step(&self.state, t, h, |ts, y| {
            let (stage, out) = evaluate(sc, active, ts, y, if zoh { held.as_ref() } else { None })?;
            adapting &= !stage.in_deadband;
            if held.is_none() {
                held = Some(out);
            }
            Ok::<_, Error>(stage.rate)
        })?;
        check_finite(&next, t + h)?;
        self.k += 1;
        self.state = next;
        Ok(adapting)
    }

    /// Tracking errors and `V` at the current state.
    pub fn observe(&self) -> Observation {
        let sc = &self.sc;
        let (mp, mt) = measurement(&self.state.pose, &self.state.twist, &sc.measured_offset);
        let des = sc.trajectory.state_at(self.state.desired, self.time());
        let sig = SharedSignals::new(&sc.controller, &mp, &mt, &des);
        let agents = self.agents();
        let v = lyapunov_value(&agents, &sc.controller, &sc.measured_body(), &mp, sig.s());
        Observation {
            s: *sig.s(),
            s_norm: sig.err.norm(),
            rot_err: rotation_potential(&rotation_error(&mp.r, &des.pose.r)),
            x_err: sig.err.x_err,
            v,
        }
    }

    fn sample(&self, obs: &Observation) -> Result<Sample> {
        let sc = &self.sc;
        let (stage, _) = evaluate(sc, &self.active, self.time(), &self.state, None)?;
        let body = sc.measured_body();
        let n_active = self.active.iter().filter(|a| **a).count();
        let mut o_err = Vec::new();
        let mut r_err = Vec::new();
        for (i, e) in self.state.est.iter().enumerate() {
            let truth = agent_truth(&body, i, n_active);
            o_err.push((e.o - truth.o).norm());
            r_err.push((e.r - truth.r).norm());
        }
        let (mp, mt) = measurement(&self.state.pose, &self.state.twist, &sc.measured_offset);
        Ok(Sample {
            t: self.time(),
            s_norm: obs.s_norm,
            rot_err: obs.rot_err,
            x_err: obs.x_err,
            v: obs.v,
            o_err,
            r_err,
            pose: mp,
            twist: mt,
            wrenches: stage.wrenches,
            estimates: self.state.est.iter().map(|e| (e.o, e.r)).collect(),
            active: self.active.clone(),
        })
    }
}

fn check_finite(y: &SimState, time: f64) -> Result<()> {
    let bad = |what: &str| {
        Err(Error::NonFinite {
            time,
            what: what.into(),
        })
    };
    if !y.pose.x.iter().chain(y.pose.r.matrix().iter()).all(|x| x.is_finite()) {
        return bad("pose");
    }
    if !y.twist.is_finite() {
        return bad("twist");
    }
    if !y
        .desired
        .x
        .iter()
        .chain(y.desired.r.matrix().iter())
        .all(|x| x.is_finite())
    {
        return bad("desired pose");
    }
    if let Some(i) = y.est.iter().position(|e| !e.is_finite()) {
        return bad(&format!("estimates of agent {i}"));
    }
    Ok(())
}

/// Runs a scenario to its horizon.
pub fn run(sc: &Scenario) -> Result<SimRecord> {
    simulate(sc, false)
}

/// Like [`run`], but a run that blows up returns the record up to the last
/// finite step with [`SimRecord::diverged`] set.
pub fn run_to_failure(sc: &Scenario) -> Result<SimRecord> {
    simulate(sc, true)
}

fn simulate(sc: &Scenario, keep_partial: bool) -> Result<SimRecord> {
    let mut sim = Simulation::new(sc.clone());
    let steps = sc.steps;
    let mut rec = SimRecord {
        name: sc.name.clone(),
        seed: sc.seed,
        h: sc.h,
        deadband: sc.controller.gains().deadband,
        samples: Vec::with_capacity(steps / sc.record_stride + 1),
        times: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        s_norm: Vec::with_capacity(steps + 1),
        rot_err: Vec::with_capacity(steps + 1),
        adapting: Vec::with_capacity(steps),
        fault_steps: Vec::new(),
        final_estimates: Vec::new(),
        final_active: Vec::new(),
        diverged: None,
    };
    for k in 0..=steps {
        if sim.apply_faults() {
            rec.fault_steps.push(k);
        }
        let obs = sim.observe();
        rec.times.push(sim.time());
        rec.v.push(obs.v);
        rec.s_norm.push(obs.s_norm);
        rec.rot_err.push(obs.rot_err);
        if k % sc.record_stride == 0 {
            rec.samples.push(sim.sample(&obs)?);
        }
        if k < steps {
            match sim.step() {
                Ok(a) => rec.adapting.push(a),
                Err(e @ (Error::NonFinite { .. } | Error::SingularInertia(_))) if keep_partial => {
                    rec.diverged = Some(Divergence {
                        time: sim.time(),
                        error: e,
                    });
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    rec.final_estimates = sim.state.est.clone();
    rec.final_active = sim.active.clone();
    Ok(rec)
}

/// Builds and runs a config.
pub fn run_config(cfg: &ScenarioConfig) -> Result<SimRecord> {
    run(&cfg.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::BodyParams;
    use crate::so3::exp_so3;

    #[test]
    fn measurement_models_agree_for_single_collocated_agent() {
        let pose = Pose::new(Vec3::new(1.0, 2.0, 3.0), exp_so3(&Vec3::new(0.1, 0.2, 0.3)));
        let twist = Twist::new(Vec3::new(0.1, 0.0, 0.3), Vec3::new(0.0, 0.4, -0.2));
        let att = [Vec3::zeros()];
        let a = measured_offset(MeasurementModel::Broadcast { agent: 0 }, &att);
        let b = measured_offset(MeasurementModel::CentroidAverage, &att);
        assert_eq!(measurement(&pose, &twist, &a), measurement(&pose, &twist, &b));
        assert_eq!(measurement(&pose, &twist, &a), (pose, twist));
    }

    #[test]
    fn centroid_of_table_attachments_is_center_of_mass() {
        let body = BodyParams::cylinder_table();
        let c = measured_offset(MeasurementModel::CentroidAverage, &body.attachments);
        assert!((c + body.r_p).norm() < 1e-15);
    }

    #[test]
    fn mean_of_point_twists_is_centroid_twist() {
        let body = BodyParams::cylinder_table();
        let pose = Pose::new(Vec3::zeros(), exp_so3(&Vec3::new(0.4, -0.3, 0.8)));
        let twist = Twist::new(Vec3::new(0.3, -0.1, 0.2), Vec3::new(0.5, 0.2, -0.4));
        let n = body.attachments.len() as f64;
        let mean = body
            .attachments
            .iter()
            .map(|r| point_twist(&pose, r, &twist).to_vector())
            .sum::<Vec6>()
            / n;
        let c = measured_offset(MeasurementModel::CentroidAverage, &body.attachments);
        assert!((mean - point_twist(&pose, &c, &twist).to_vector()).norm() < 1e-14);
    }

    #[test]
    fn initial_estimates_are_per_agent_streams() {
        let so = DMatrix::identity(10, 10);
        let sr = DMatrix::identity(3, 3) * 2.0;
        let a = initial_estimates(5, 3, &so, &sr);
        let b = initial_estimates(5, 6, &so, &sr);
        assert_eq!(a[..], b[..3]);
        assert_ne!(a[0], a[1]);
        let zero = initial_estimates(5, 2, &DMatrix::zeros(10, 10), &DMatrix::zeros(3, 3));
        assert!(zero.iter().all(|e| *e == Estimates::zero()));
    }
}
