//! Canned scenarios for the cylinder payload.

use crate::config::{
    AgentsConfig, BodyConfig, FaultConfig, GainsConfig, InitialStateConfig, MatrixSpec, MeasurementModel,
    ScenarioConfig, TrajectoryConfig,
};
use crate::controller::Regularizer;
use crate::dynamics::BodyParams;
use crate::so3::Vec3;
use crate::tracking::{AxisBank, Sinusoid};

pub const SE3_NOMINAL: &str = "se3_nominal";
pub const BASELINE_NO_GEOM: &str = "baseline_no_geom";
pub const BASELINE_PD: &str = "baseline_pd";
pub const DROPOUT_T30: &str = "dropout_t30";
pub const BREGMAN_L1: &str = "bregman_l1";
pub const BREGMAN_L2: &str = "bregman_l2";

pub const NAMES: [&str; 6] = [
    SE3_NOMINAL,
    BASELINE_NO_GEOM,
    BASELINE_PD,
    DROPOUT_T30,
    BREGMAN_L1,
    BREGMAN_L2,
];

/// Five-frequency bank per axis. Each term has an amplitude in 0.1–0.5 (m/s
/// or rad/s) and a frequency in 0.1–1.0 rad/s. Frequencies follow a
/// golden-ratio sequence over all thirty terms, so no two coincide and the
/// axes do not pass through zero acceleration together.
pub fn default_banks() -> ([AxisBank; 3], [AxisBank; 3]) {
    let lin_amp = [0.3, 0.25, 0.2, 0.15, 0.1];
    let ang_amp = [0.1; 5];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let bank = |axis: usize, amps: &[f64; 5]| AxisBank {
        offset: 0.0,
        terms: (0..5)
            .map(|k| Sinusoid {
                amplitude: amps[k],
                frequency: 0.1 + 0.9 * ((5 * axis + k + 1) as f64 * phi).fract(),
            })
            .collect(),
    };
    (
        [bank(0, &lin_amp), bank(1, &lin_amp), bank(2, &lin_amp)],
        [bank(3, &ang_amp), bank(4, &ang_amp), bank(5, &ang_amp)],
    )
}

pub fn default_trajectory() -> TrajectoryConfig {
    let (lin, ang) = default_banks();
    TrajectoryConfig::from_banks(&lin, &ang)
}

/// 0.5 m position offset and a 15° attitude offset, at rest.
pub fn default_initial_state() -> InitialStateConfig {
    let angle = 15f64.to_radians();
    let axis = Vec3::new(0.6, 0.0, 0.8);
    InitialStateConfig {
        position_offset: [0.4, 0.3, 0.0],
        rotation_offset: (axis * angle).into(),
        twist: [0.0; 6],
    }
}

fn table_gains() -> GainsConfig {
    GainsConfig {
        lambda: 1.5,
        k_d: MatrixSpec::Diagonal(vec![5e4, 5e4, 5e4, 5e3, 5e3, 5e3]),
        gamma_o: MatrixSpec::TruthScaled {
            scale: 3.0,
            offset: 0.01,
            power: 1.0,
        },
        gamma_r: MatrixSpec::Scalar(1e-3),
        gamma_f: MatrixSpec::Scalar(0.0),
        gamma_d: MatrixSpec::Scalar(0.0),
        gamma_c: MatrixSpec::Scalar(0.0),
        deadband: 0.01,
        regularizer: Regularizer::Quadratic,
    }
}

/// Six agents on the cylinder, the first broadcasting its measurements.
pub fn se3_nominal(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: SE3_NOMINAL.into(),
        seed,
        step: 1e-2,
        duration: 60.0,
        record_stride: 10,
        zero_order_hold: false,
        body: BodyConfig::from_params(&BodyParams::cylinder_table()),
        agents: AgentsConfig {
            measurement: MeasurementModel::Broadcast { agent: 0 },
            sigma_o: MatrixSpec::Scalar(1.0),
            sigma_r: MatrixSpec::Scalar(2.0),
        },
        gains: table_gains(),
        trajectory: default_trajectory(),
        initial_state: default_initial_state(),
        faults: Vec::new(),
    }
}

/// Object parameters adapt, moment arms stay at their initial guesses.
pub fn baseline_no_geom(seed: u64) -> ScenarioConfig {
    let mut c = without_geometry(se3_nominal(seed));
    c.name = BASELINE_NO_GEOM.into();
    c
}

/// PD feedback only: all estimates pinned at zero.
pub fn baseline_pd(seed: u64) -> ScenarioConfig {
    let mut c = pd_only(se3_nominal(seed));
    c.name = BASELINE_PD.into();
    c
}

/// `cfg` with `Γ_r = 0`.
pub fn without_geometry(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.name = format!("{}_no_geom", cfg.name);
    cfg.gains.gamma_r = MatrixSpec::Scalar(0.0);
    cfg
}

/// `cfg` with every estimate held at zero.
pub fn pd_only(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.name = format!("{}_pd", cfg.name);
    for g in [
        &mut cfg.gains.gamma_o,
        &mut cfg.gains.gamma_r,
        &mut cfg.gains.gamma_f,
        &mut cfg.gains.gamma_d,
        &mut cfg.gains.gamma_c,
        &mut cfg.agents.sigma_o,
        &mut cfg.agents.sigma_r,
    ] {
        *g = MatrixSpec::Scalar(0.0);
    }
    cfg
}

/// Half the team stops at t = 30 s; 90 s horizon.
pub fn dropout_t30(seed: u64) -> ScenarioConfig {
    let mut c = se3_nominal(seed);
    c.name = DROPOUT_T30.into();
    c.duration = 90.0;
    c.faults = vec![FaultConfig {
        time: 30.0,
        agents: vec![3, 4, 5],
    }];
    c
}

/// Twenty attachment points on the cylinder (relative to the center of
/// mass): the six principal-axis points plus two rings of seven on the
/// mantle at z = ±0.75 m.
pub fn twenty_agent_body() -> BodyParams {
    let mut body = BodyParams::cylinder_table();
    let mut from_cm: Vec<Vec3> = body.attachments.iter().map(|r| r + body.r_p).collect();
    for (ring, z) in [(0, 0.75), (1, -0.75)] {
        for k in 0..7 {
            let a = (k as f64 + 0.5 * ring as f64) * std::f64::consts::TAU / 7.0;
            from_cm.push(Vec3::new(0.5 * a.cos(), 0.5 * a.sin(), z));
        }
    }
    body.attachments = from_cm.iter().map(|c| c - body.r_p).collect();
    body
}

/// Quadratic-law gain per unit squared parameter magnitude in the
/// twenty-agent study.
pub const BREGMAN_RATE: f64 = 3e-3;
/// Smoothing width of the ℓ1 potential relative to each parameter class
/// magnitude.
pub const BREGMAN_KAPPA: f64 = 0.03;

/// Order-of-magnitude scale of each per-agent object parameter: the mass,
/// the first moment and the largest inertia entry, each divided by `n`.
/// Every entry of a class gets the same scale, zero or not.
pub fn parameter_classes(body: &BodyParams, n: usize) -> [f64; 10] {
    let n = n as f64;
    let m = body.mass / n;
    let mr = body.mass * body.r_p.norm() / n;
    let j = body.j_p().diagonal().max() / n;
    [m, mr, mr, mr, j, j, j, j, j, j]
}

/// Diagonal gain for the smoothed-ℓ1 law whose parameter-space rate at
/// `|a| = c` matches a quadratic law with gain `q`.
///
/// Writing `δ = √γ ε`, the ℓ1 law moves `a` at `√γ (a² + δ²)^{3/2} / δ²`
/// times the gradient.
pub fn matched_l1_gain(q: f64, c: f64, epsilon: f64) -> f64 {
    (c.powi(3) / (epsilon * epsilon * q)).powi(2)
}

fn bregman(seed: u64, name: &str, l1: bool) -> ScenarioConfig {
    let mut c = se3_nominal(seed);
    c.name = name.into();
    c.duration = 120.0;
    let body = twenty_agent_body();
    let classes = parameter_classes(&body, body.attachments.len());
    c.body = BodyConfig::from_params(&body);
    c.agents.sigma_o = MatrixSpec::Scalar(0.0);
    c.agents.sigma_r = MatrixSpec::Scalar(0.0);
    let q_o: Vec<f64> = classes.iter().map(|c| BREGMAN_RATE * c * c).collect();
    let q_r = 1e-3;
    if l1 {
        let epsilon = 1.0 / (BREGMAN_KAPPA * BREGMAN_RATE);
        c.gains.regularizer = Regularizer::SmoothedL1 { epsilon };
        c.gains.gamma_o = MatrixSpec::Diagonal(
            q_o.iter()
                .zip(&classes)
                .map(|(q, c)| matched_l1_gain(*q, *c, epsilon))
                .collect(),
        );
        c.gains.gamma_r = MatrixSpec::Scalar(matched_l1_gain(q_r, 1.0, epsilon));
    } else {
        c.gains.regularizer = Regularizer::Quadratic;
        c.gains.gamma_o = MatrixSpec::Diagonal(q_o);
        c.gains.gamma_r = MatrixSpec::Scalar(q_r);
    }
    c
}

/// Twenty agents, zero initial estimates, smoothed-ℓ1 potential.
pub fn bregman_l1(seed: u64) -> ScenarioConfig {
    bregman(seed, BREGMAN_L1, true)
}

/// As [`bregman_l1`] with the quadratic potential.
pub fn bregman_l2(seed: u64) -> ScenarioConfig {
    bregman(seed, BREGMAN_L2, false)
}

pub fn by_name(name: &str, seed: u64) -> Option<ScenarioConfig> {
    Some(match name {
        SE3_NOMINAL => se3_nominal(seed),
        BASELINE_NO_GEOM => baseline_no_geom(seed),
        BASELINE_PD => baseline_pd(seed),
        DROPOUT_T30 => dropout_t30(seed),
        BREGMAN_L1 => bregman_l1(seed),
        BREGMAN_L2 => bregman_l2(seed),
        _ => return None,
    })
}
