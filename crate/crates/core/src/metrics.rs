//! Summary statistics over a [`SimRecord`].

use crate::config::ScenarioConfig;
use crate::controller::Estimates;
use crate::error::Result;
use crate::scenarios;
use crate::sim::{run_to_failure, SimRecord};

/// Bound on `‖s‖` after the first entry into the deadband.
pub const SETTLE_CEILING: f64 = 0.05;
/// Relative per-step tolerance on `ΔV` while adapting.
pub const DV_TOL: f64 = 1e-6;
/// Relative size of a `ΔV` counted as a jump.
pub const JUMP_TOL: f64 = 1e-2;
/// Magnitude below which an estimate counts as zero.
pub const SPARSITY_THRESHOLD: f64 = 1e-3;

/// How `‖s‖` approached the deadband.
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    /// First time `‖s‖ ≤ deadband`.
    pub entry: Option<f64>,
    /// Largest `‖s‖` from the entry on.
    pub max_after_entry: Option<f64>,
    pub min: f64,
    /// Trapezoidal time average of `‖s‖`; infinite if the run diverged.
    pub time_average: f64,
    pub final_s: f64,
    /// Entered the deadband and stayed below [`SETTLE_CEILING`] after.
    pub settled: bool,
}

pub fn convergence(rec: &SimRecord) -> Convergence {
    let s = &rec.s_norm;
    let entry = s.iter().position(|x| *x <= rec.deadband);
    let max_after = entry.map(|e| {
        if rec.diverged.is_some() {
            f64::INFINITY
        } else {
            s[e..].iter().cloned().fold(0.0, f64::max)
        }
    });
    Convergence {
        entry: entry.map(|e| rec.times[e]),
        max_after_entry: max_after,
        min: s.iter().cloned().fold(f64::INFINITY, f64::min),
        time_average: time_average(rec),
        final_s: *s.last().unwrap_or(&f64::NAN),
        settled: max_after.is_some_and(|m| m <= SETTLE_CEILING),
    }
}

fn time_average(rec: &SimRecord) -> f64 {
    if rec.diverged.is_some() {
        return f64::INFINITY;
    }
    let (t, s) = (&rec.times, &rec.s_norm);
    if t.len() < 2 {
        return s.first().copied().unwrap_or(f64::NAN);
    }
    let area: f64 = (1..t.len()).map(|k| 0.5 * (s[k] + s[k - 1]) * (t[k] - t[k - 1])).sum();
    area / (t[t.len() - 1] - t[0])
}

/// First return to the deadband after `‖s‖` has been pushed out of it at
/// or after step `from`. Pushed out means above [`SETTLE_CEILING`], or if
/// that never happens, above the deadband.
pub fn reentry(rec: &SimRecord, from: usize) -> Option<f64> {
    let tail = rec.s_norm.get(from..)?;
    let exit = tail
        .iter()
        .position(|x| *x > SETTLE_CEILING)
        .or_else(|| tail.iter().position(|x| *x > rec.deadband))?
        + from;
    let back = rec.s_norm[exit..].iter().position(|x| *x <= rec.deadband)?;
    Some(rec.times[exit + back])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    /// Adapting steps checked (steps ending on a fault boundary excluded).
    pub checked: usize,
    /// Steps with `ΔV > DV_TOL · max(V, 1)`.
    pub violations: usize,
    /// Largest `ΔV / max(V, 1)` over checked steps.
    pub worst_ratio: f64,
    pub final_v: f64,
    /// Step-end times where `ΔV > JUMP_TOL · max(V, 1)`, over all steps.
    pub jumps: Vec<f64>,
}

pub fn lyapunov_report(rec: &SimRecord) -> LyapunovReport {
    let v = &rec.v;
    let mut checked = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut jumps = Vec::new();
    for k in 0..v.len().saturating_sub(1) {
        let ratio = (v[k + 1] - v[k]) / v[k].max(1.0);
        if ratio > JUMP_TOL {
            jumps.push(rec.times[k + 1]);
        }
        if rec.adapting.get(k) == Some(&true) && !rec.fault_steps.contains(&(k + 1)) {
            checked += 1;
            worst = worst.max(ratio);
            if ratio > DV_TOL {
                violations += 1;
            }
        }
    }
    LyapunovReport {
        checked,
        violations,
        worst_ratio: worst,
        final_v: *v.last().unwrap_or(&f64::NAN),
        jumps,
    }
}

/// Fraction of the active agents' object and geometry estimates with
/// magnitude below [`SPARSITY_THRESHOLD`].
pub fn sparsity(estimates: &[Estimates], active: &[bool]) -> f64 {
    let (mut small, mut total) = (0usize, 0usize);
    for (e, _) in estimates.iter().zip(active).filter(|(_, a)| **a) {
        for x in e.o.iter().chain(e.r.iter()) {
            total += 1;
            small += (x.abs() < SPARSITY_THRESHOLD) as usize;
        }
    }
    if total == 0 {
        return f64::NAN;
    }
    small as f64 / total as f64
}

/// Largest per-agent parameter error over the recorded samples, relative to
/// its value in the first sample. `(s, o, r)`.
pub fn growth_ratios(rec: &SimRecord) -> (f64, f64, f64) {
    let Some(first) = rec.samples.first() else {
        return (f64::NAN, f64::NAN, f64::NAN);
    };
    let env = |xs: &[f64]| xs.iter().cloned().fold(0.0, f64::max);
    let s0 = first.s_norm;
    let o0 = env(&first.o_err);
    let r0 = env(&first.r_err);
    let (mut s, mut o, mut r) = (0.0f64, 0.0f64, 0.0f64);
    for smp in &rec.samples {
        s = s.max(smp.s_norm);
        o = o.max(env(&smp.o_err));
        r = r.max(env(&smp.r_err));
    }
    (s / s0, o / o0, r / r0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub convergence: Convergence,
    /// Time at which the state stopped being finite.
    pub diverged: Option<f64>,
}

impl RunSummary {
    pub fn of(rec: &SimRecord) -> Self {
        RunSummary {
            name: rec.name.clone(),
            convergence: convergence(rec),
            diverged: rec.diverged.as_ref().map(|d| d.time),
        }
    }
}

/// Nominal run against the same config with `Γ_r = 0` and with PD only.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub nominal: RunSummary,
    pub no_geometry: RunSummary,
    pub pd_only: RunSummary,
}

impl BaselineReport {
    /// Nominal time-averaged `‖s‖` strictly below both baselines.
    pub fn nominal_best(&self) -> bool {
        let n = self.nominal.convergence.time_average;
        n < self.no_geometry.convergence.time_average && n < self.pd_only.convergence.time_average
    }
}

pub fn compare_baselines(cfg: &ScenarioConfig) -> Result<BaselineReport> {
    let run = |c: &ScenarioConfig| -> Result<RunSummary> { Ok(RunSummary::of(&run_to_failure(&c.build()?)?)) };
    Ok(BaselineReport {
        nominal: run(cfg)?,
        no_geometry: run(&scenarios::without_geometry(cfg.clone()))?,
        pd_only: run(&scenarios::pd_only(cfg.clone()))?,
    })
}
