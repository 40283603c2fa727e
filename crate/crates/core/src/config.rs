//! Serializable scenario description.
//!
//! A [`ScenarioConfig`] is plain data that round-trips through TOML; the
//! simulator turns it into runtime types with [`ScenarioConfig::build`].

use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, GainConfig, Regularizer};
use crate::dynamics::{BodyParams, FrictionMode, FrictionParams, Pose, Twist, Vec6};
use crate::error::{Error, Result};
use crate::regressors::object_params;
use crate::so3::{exp_so3, Mat3, Vec3};
use crate::tracking::{AxisBank, Sinusoid, TrajectorySpec};

/// A square matrix given compactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSpec {
    /// `k · I`
    Scalar(f64),
    Diagonal(Vec<f64>),
    /// Row-major rows.
    Full(Vec<Vec<f64>>),
    /// `scale · diag((|o| + offset)^power)` for the true object parameters
    /// `o` (power defaults to 1).
    TruthScaled {
        scale: f64,
        offset: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        power: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

impl MatrixSpec {
    /// Builds a `D × D` matrix. `truth` is needed only by `TruthScaled`.
    pub fn build<const D: usize>(&self, field: &str, truth: Option<&[f64]>) -> Result<SMatrix<f64, D, D>> {
        let m = match self {
            MatrixSpec::Scalar(k) => SMatrix::<f64, D, D>::identity() * *k,
            MatrixSpec::Diagonal(d) => {
                if d.len() != D {
                    return Err(Error::config(
                        field,
                        format!("diagonal needs {D} entries, got {}", d.len()),
                    ));
                }
                SMatrix::<f64, D, D>::from_diagonal(&SMatrix::<f64, D, 1>::from_column_slice(d))
            }
            MatrixSpec::Full(rows) => {
                if rows.len() != D || rows.iter().any(|r| r.len() != D) {
                    return Err(Error::config(field, format!("full matrix must be {D}x{D}")));
                }
                SMatrix::<f64, D, D>::from_fn(|i, j| rows[i][j])
            }
            MatrixSpec::TruthScaled { scale, offset, power } => {
                let o = truth.filter(|o| o.len() == D).ok_or_else(|| {
                    Error::config(
                        field,
                        format!("truth_scaled is only available for {D}-parameter gains with known truth"),
                    )
                })?;
                SMatrix::<f64, D, D>::from_fn(|i, j| {
                    if i == j {
                        scale * (o[i].abs() + offset).powf(*power)
                    } else {
                        0.0
                    }
                })
            }
        };
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::config(field, "non-finite entry"));
        }
        Ok(m)
    }

    pub fn build_dyn(&self, field: &str, dim: usize) -> Result<DMatrix<f64>> {
        Ok(match self {
            MatrixSpec::Scalar(k) => DMatrix::identity(dim, dim) * *k,
            MatrixSpec::Diagonal(d) if d.len() == dim => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d))
            }
            MatrixSpec::Full(rows) if rows.len() == dim && rows.iter().all(|r| r.len() == dim) => {
                DMatrix::from_fn(dim, dim, |i, j| rows[i][j])
            }
            _ => return Err(Error::config(field, format!("expected a {dim}x{dim} matrix"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionConfig {
    #[serde(default)]
    pub mode: FrictionMode,
    #[serde(default)]
    pub body_viscous: [f64; 6],
    #[serde(default)]
    pub contact_viscous: Vec<[f64; 6]>,
    #[serde(default)]
    pub contact_coulomb: Vec<[f64; 6]>,
}

impl Default for FrictionConfig {
    fn default() -> Self {
        FrictionConfig {
            mode: FrictionMode::None,
            body_viscous: [0.0; 6],
            contact_viscous: Vec::new(),
            contact_coulomb: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub mass: f64,
    pub inertia_cm: MatrixSpec,
    /// Measurement point relative to the center of mass, body frame.
    pub r_p: [f64; 3],
    /// Attachment points relative to the measurement point, body frame.
    pub attachments: Vec<[f64; 3]>,
    #[serde(default)]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub friction: FrictionConfig,
}

impl BodyConfig {
    pub fn from_params(body: &BodyParams) -> Self {
        let d = body.inertia_cm;
        let inertia_cm = if d == Mat3::from_diagonal(&d.diagonal()) {
            MatrixSpec::Diagonal(d.diagonal().iter().copied().collect())
        } else {
            MatrixSpec::Full((0..3).map(|i| (0..3).map(|j| d[(i, j)]).collect()).collect())
        };
        let f = &body.friction;
        BodyConfig {
            mass: body.mass,
            inertia_cm,
            r_p: body.r_p.into(),
            attachments: body.attachments.iter().map(|r| (*r).into()).collect(),
            gravity: body.gravity.into(),
            friction: FrictionConfig {
                mode: f.mode,
                body_viscous: f.body_viscous.into(),
                contact_viscous: f.contact_viscous.iter().map(|v| (*v).into()).collect(),
                contact_coulomb: f.contact_coulomb.iter().map(|v| (*v).into()).collect(),
            },
        }
    }

    pub fn build(&self) -> Result<BodyParams> {
        let body = BodyParams {
            mass: self.mass,
            inertia_cm: self.inertia_cm.build::<3>("body.inertia_cm", None)?,
            r_p: self.r_p.into(),
            attachments: self.attachments.iter().map(|r| Vec3::from(*r)).collect(),
            gravity: self.gravity.into(),
            friction: FrictionParams {
                mode: self.friction.mode,
                body_viscous: self.friction.body_viscous.into(),
                contact_viscous: self.friction.contact_viscous.iter().map(|v| Vec6::from(*v)).collect(),
                contact_coulomb: self.friction.contact_coulomb.iter().map(|v| Vec6::from(*v)).collect(),
            },
        };
        if body.attachments.is_empty() {
            return Err(Error::config("body.attachments", "need at least one agent"));
        }
        body.validate().map_err(|e| Error::config("body", e.to_string()))?;
        Ok(body)
    }
}

/// Which point's state the agents share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementModel {
    /// Agent `agent` (0-based) broadcasts the pose and twist of its own
    /// attachment point.
    Broadcast { agent: usize },
    /// Pose and twist of the centroid of all attachment points.
    CentroidAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsConfig {
    pub measurement: MeasurementModel,
    /// Covariance of the initial object-parameter estimates.
    pub sigma_o: MatrixSpec,
    /// Covariance of the initial moment-arm estimates.
    pub sigma_r: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub lambda: f64,
    pub k_d: MatrixSpec,
    pub gamma_o: MatrixSpec,
    pub gamma_r: MatrixSpec,
    #[serde(default = "zero_spec")]
    pub gamma_f: MatrixSpec,
    #[serde(default = "zero_spec")]
    pub gamma_d: MatrixSpec,
    #[serde(default = "zero_spec")]
    pub gamma_c: MatrixSpec,
    pub deadband: f64,
    #[serde(default)]
    pub regularizer: Regularizer,
}

fn zero_spec() -> MatrixSpec {
    MatrixSpec::Scalar(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    #[serde(default)]
    pub offset: f64,
    pub amplitudes: Vec<f64>,
    /// rad/s
    pub frequencies: Vec<f64>,
}

impl AxisConfig {
    fn build(&self, field: &str) -> Result<AxisBank> {
        if self.amplitudes.len() != self.frequencies.len() {
            return Err(Error::config(field, "amplitudes and frequencies differ in length"));
        }
        Ok(AxisBank {
            offset: self.offset,
            terms: self
                .amplitudes
                .iter()
                .zip(&self.frequencies)
                .map(|(a, f)| Sinusoid {
                    amplitude: *a,
                    frequency: *f,
                })
                .collect(),
        })
    }

    fn from_bank(b: &AxisBank) -> Self {
        AxisConfig {
            offset: b.offset,
            amplitudes: b.terms.iter().map(|s| s.amplitude).collect(),
            frequencies: b.terms.iter().map(|s| s.frequency).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default)]
    pub initial_position: [f64; 3],
    /// Rotation vector of the initial desired attitude.
    #[serde(default)]
    pub initial_rotation: [f64; 3],
    pub linear: [AxisConfig; 3],
    pub angular: [AxisConfig; 3],
}

impl TrajectoryConfig {
    pub fn build(&self) -> Result<TrajectorySpec> {
        let axes = |list: &[AxisConfig; 3], name: &str| -> Result<[AxisBank; 3]> {
            Ok([
                list[0].build(&format!("trajectory.{name}[0]"))?,
                list[1].build(&format!("trajectory.{name}[1]"))?,
                list[2].build(&format!("trajectory.{name}[2]"))?,
            ])
        };
        let spec = TrajectorySpec {
            linear: axes(&self.linear, "linear")?,
            angular: axes(&self.angular, "angular")?,
            initial: Pose::new(self.initial_position.into(), exp_so3(&self.initial_rotation.into())),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_banks(linear: &[AxisBank; 3], angular: &[AxisBank; 3]) -> Self {
        TrajectoryConfig {
            initial_position: [0.0; 3],
            initial_rotation: [0.0; 3],
            linear: [0, 1, 2].map(|i| AxisConfig::from_bank(&linear[i])),
            angular: [0, 1, 2].map(|i| AxisConfig::from_bank(&angular[i])),
        }
    }
}

/// Plant start relative to the start of the desired trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    /// World-frame position offset of the measurement point (m).
    #[serde(default)]
    pub position_offset: [f64; 3],
    /// Body-frame rotation vector applied after the desired attitude (rad).
    #[serde(default)]
    pub rotation_offset: [f64; 3],
    /// Initial `[ẋ; ω]` of the measurement point.
    #[serde(default)]
    pub twist: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    /// Time at which the agents stop (s).
    pub time: f64,
    /// 0-based agent indices.
    pub agents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    /// Integration step (s).
    pub step: f64,
    /// Horizon (s).
    pub duration: f64,
    /// Record every this many steps.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// Hold the wrenches computed at the start of a step through both
    /// integrator stages.
    #[serde(default)]
    pub zero_order_hold: bool,
    pub body: BodyConfig,
    pub agents: AgentsConfig,
    pub gains: GainsConfig,
    pub trajectory: TrajectoryConfig,
    #[serde(default = "InitialStateConfig::at_rest")]
    pub initial_state: InitialStateConfig,
    #[serde(default)]
    pub faults: Vec<FaultConfig>,
}

fn default_stride() -> usize {
    10
}

impl InitialStateConfig {
    pub fn at_rest() -> Self {
        InitialStateConfig {
            position_offset: [0.0; 3],
            rotation_offset: [0.0; 3],
            twist: [0.0; 6],
        }
    }
}

/// Runtime form of a scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub h: f64,
    pub steps: usize,
    pub record_stride: usize,
    pub zero_order_hold: bool,
    /// The true body, described about the plant's reference point.
    pub body: BodyParams,
    pub measurement: MeasurementModel,
    /// Offset of the measured point from the plant's reference point.
    pub measured_offset: Vec3,
    pub controller: Controller,
    pub trajectory: TrajectorySpec,
    pub sigma_o: DMatrix<f64>,
    pub sigma_r: DMatrix<f64>,
    pub initial_pose: Pose,
    pub initial_twist: Twist,
    /// `(step index, agent)` pairs, sorted by step.
    pub faults: Vec<(usize, usize)>,
}

impl Scenario {
    /// The true body described about the measured point.
    pub fn measured_body(&self) -> BodyParams {
        self.body.rebased(&self.measured_offset)
    }

    pub fn n_agents(&self) -> usize {
        self.body.attachments.len()
    }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {x}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<Scenario> {
        positive("step", self.step)?;
        positive("duration", self.duration)?;
        if self.record_stride == 0 {
            return Err(Error::config("record_stride", "must be at least 1"));
        }
        let body = self.body.build()?;
        let n = body.attachments.len();

        if let MeasurementModel::Broadcast { agent } = self.agents.measurement {
            if agent >= n {
                return Err(Error::config(
                    "agents.measurement.agent",
                    format!("index {agent} out of range for {n} agents"),
                ));
            }
        }
        let measured_offset = crate::sim::measured_offset(self.agents.measurement, &body.attachments);
        let truth = object_params(&body.rebased(&measured_offset));

        let g = &self.gains;
        positive("gains.lambda", g.lambda)?;
        if !(g.deadband >= 0.0) || !g.deadband.is_finite() {
            return Err(Error::config("gains.deadband", "must be nonnegative"));
        }
        let gains = GainConfig {
            lambda: g.lambda,
            k_d: g.k_d.build::<6>("gains.k_d", None)?,
            gamma_o: g.gamma_o.build("gains.gamma_o", Some(truth.as_slice()))?,
            gamma_r: g.gamma_r.build("gains.gamma_r", None)?,
            gamma_f: g.gamma_f.build("gains.gamma_f", None)?,
            gamma_d: g.gamma_d.build("gains.gamma_d", None)?,
            gamma_c: g.gamma_c.build("gains.gamma_c", None)?,
            deadband: g.deadband,
            regularizer: g.regularizer,
            friction: body.friction.mode,
            gravity: body.gravity,
        };
        let controller = Controller::new(gains)?;

        let sigma_o = self.agents.sigma_o.build_dyn("agents.sigma_o", 10)?;
        let sigma_r = self.agents.sigma_r.build_dyn("agents.sigma_r", 3)?;
        for (name, m) in [("agents.sigma_o", &sigma_o), ("agents.sigma_r", &sigma_r)] {
            if m.clone().symmetric_eigenvalues().min() < -1e-12 || (m - m.transpose()).amax() > 1e-12 {
                return Err(Error::config(
                    name,
                    "covariance must be symmetric positive semidefinite",
                ));
            }
        }

        let trajectory = self.trajectory.build()?;
        let init = &self.initial_state;
        let offsets_finite = init
            .position_offset
            .iter()
            .chain(&init.rotation_offset)
            .chain(&init.twist)
            .all(|x| x.is_finite());
        if !offsets_finite {
            return Err(Error::config("initial_state", "non-finite entry"));
        }
        // Offsets describe the measured point; convert to the reference point.
        let r0 = trajectory.initial.r * exp_so3(&init.rotation_offset.into());
        let x_meas = trajectory.initial.x + Vec3::from(init.position_offset);
        let x0 = x_meas - r0.matrix() * measured_offset;
        let meas_twist = Twist::new(
            Vec3::new(init.twist[0], init.twist[1], init.twist[2]),
            Vec3::new(init.twist[3], init.twist[4], init.twist[5]),
        );
        let arm = r0.matrix() * measured_offset;
        let initial_twist = Twist::new(meas_twist.v - meas_twist.w.cross(&arm), meas_twist.w);

        let steps = (self.duration / self.step).round() as usize;
        let mut faults = Vec::new();
        for (k, f) in self.faults.iter().enumerate() {
            if !(f.time >= 0.0 && f.time <= self.duration) {
                return Err(Error::config(
                    format!("faults[{k}].time"),
                    format!("{} is outside [0, duration]", f.time),
                ));
            }
            for a in &f.agents {
                if *a >= n {
                    return Err(Error::config(
                        format!("faults[{k}].agents"),
                        format!("index {a} out of range for {n} agents"),
                    ));
                }
                faults.push(((f.time / self.step - 1e-9).ceil() as usize, *a));
            }
        }
        faults.sort();

        Ok(Scenario {
            name: self.name.clone(),
            seed: self.seed,
            h: self.step,
            steps,
            record_stride: self.record_stride,
            zero_order_hold: self.zero_order_hold,
            body,
            measurement: self.agents.measurement,
            measured_offset,
            controller,
            trajectory,
            sigma_o,
            sigma_r,
            initial_pose: Pose::new(x0, r0),
            initial_twist,
            faults,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_spec_variants() {
        assert_eq!(
            MatrixSpec::Scalar(2.0).build::<3>("m", None).unwrap(),
            Mat3::identity() * 2.0
        );
        let d = MatrixSpec::Diagonal(vec![1.0, 2.0, 3.0]).build::<3>("m", None).unwrap();
        assert_eq!(d, Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0)));
        assert!(MatrixSpec::Diagonal(vec![1.0]).build::<3>("m", None).is_err());
        let t = MatrixSpec::TruthScaled {
            scale: 0.5,
            offset: 1.0,
            power: 1.0,
        }
        .build::<3>("m", Some(&[-2.0, 0.0, 4.0]))
        .unwrap();
        assert_eq!(t, Mat3::from_diagonal(&Vec3::new(1.5, 0.5, 2.5)));
        assert!(MatrixSpec::TruthScaled {
            scale: 0.5,
            offset: 1.0,
            power: 1.0
        }
        .build::<3>("m", None)
        .is_err());
        let sq = MatrixSpec::TruthScaled {
            scale: 1.0,
            offset: 0.0,
            power: 2.0,
        }
        .build::<3>("m", Some(&[3.0, 1.0, 2.0]))
        .unwrap();
        assert_eq!(sq.diagonal(), Vec3::new(9.0, 1.0, 4.0));
    }

    #[test]
    fn matrix_spec_toml_shapes() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct W {
            a: MatrixSpec,
            b: MatrixSpec,
        }
        let w: W =
            toml::from_str("a = { scalar = 0.001 }\nb = { truth_scaled = { scale = 0.3, offset = 0.01 } }").unwrap();
        assert_eq!(w.a, MatrixSpec::Scalar(0.001));
        assert_eq!(toml::from_str::<W>(&toml::to_string(&w).unwrap()).unwrap(), w);
    }
}
