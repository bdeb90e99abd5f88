//! The measure → feedback → reset erasure protocol and its open-loop baseline.
//!
//! Timeline of one run:
//!
//! ```text
//! 0 ──── t_m ──────────── t_f = t_m + τ ──── t_e = t_f + t_relax
//!   d=0.5  │ measure      d = d_erase       │ d = 0.5
//!          │ (tilt only if m > 0)           │
//! ```
//!
//! Duty switches are instantaneous, so the work of a run is the sum of the
//! two potential-energy jumps at t_m and t_f. The reset of the sensor at
//! t_e does nothing to the particle.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Field, Integrator, SimConfig};
use crate::energetics::switch_work;
use crate::error::{Error, Result};
use crate::measurement::{decide_action, sample_measurement, Action, SensorModel};
use crate::potential::{PotentialParams, Well};

/// Duty ratio of the symmetric memory.
pub const SYMMETRIC_DUTY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    /// Measurement time t_m, s.
    pub t_m: f64,
    /// Tilt duration τ, s.
    pub tau: f64,
    /// Relaxation after the tilt, s.
    pub t_relax: f64,
    /// Duty ratio while tilted.
    pub d_erase: f64,
}

impl ProtocolSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_m.is_finite() && self.t_m >= 0.0) {
            return Err(Error::invalid("t_m", format!("{} must be >= 0", self.t_m)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid("tau", format!("{} must be > 0", self.tau)));
        }
        if !(self.t_relax.is_finite() && self.t_relax >= 0.0) {
            return Err(Error::invalid("t_relax", format!("{} must be >= 0", self.t_relax)));
        }
        if !(self.d_erase > 0.5 && self.d_erase < 1.0) {
            return Err(Error::invalid("d_erase", format!("{} outside (0.5, 1)", self.d_erase)));
        }
        Ok(())
    }

    pub fn t_f(&self) -> f64 {
        self.t_m + self.tau
    }

    pub fn t_e(&self) -> f64 {
        self.t_f() + self.t_relax
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialWell {
    Left,
    Right,
    /// Either well with probability ½.
    #[default]
    Random,
}

/// One protocol execution. Work in k_BT, positions in nm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErasureRun {
    pub run_id: u64,
    pub duty: f64,
    /// Sensor noise; `None` for open-loop runs, which never measure.
    pub sigma_n: Option<f64>,
    pub initial_well: Well,
    pub x_at_tm: f64,
    pub m: Option<f64>,
    pub action: Action,
    pub w1: f64,
    pub w2: f64,
    pub w_total: f64,
    pub x_final: f64,
    pub success: bool,
}

/// Erasure succeeded iff the particle ends on the reset (left) side.
#[inline]
pub fn classify_outcome(x_final: f64) -> bool {
    x_final < 0.0
}

/// τ(d) = τ_ref · g(d)/g(d_ref) with g(d) = exp(0.99/(d − 0.5))·(d − 0.5)^a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauScaling {
    pub tau_ref: f64,
    pub d_ref: f64,
    /// Exponent a of the algebraic factor; +0.5 or −0.5.
    pub exponent: f64,
}

impl Default for TauScaling {
    fn default() -> Self {
        Self {
            tau_ref: 30.0,
            d_ref: 0.7,
            exponent: 0.5,
        }
    }
}

/// Exponent constant shared with the work model.
pub const ESCAPE_EXPONENT: f64 = 0.99;

impl TauScaling {
    pub fn tau(&self, duty: f64) -> Result<f64> {
        tau_for_duty(duty, self.tau_ref, self.d_ref, self.exponent)
    }
}

pub fn tau_for_duty(duty: f64, tau_ref: f64, d_ref: f64, exponent: f64) -> Result<f64> {
    for (name, d) in [("duty ratio", duty), ("reference duty ratio", d_ref)] {
        if !(d > 0.5 && d < 1.0) {
            return Err(Error::invalid(name, format!("{d} outside (0.5, 1)")));
        }
    }
    if !(tau_ref.is_finite() && tau_ref > 0.0) {
        return Err(Error::invalid("tau_ref", format!("{tau_ref} must be > 0")));
    }
    // ratio in log space: exp(0.99/(d−½)) overflows long before d reaches ½
    let log_g = |d: f64| ESCAPE_EXPONENT / (d - 0.5) + exponent * (d - 0.5).ln();
    Ok(tau_ref * (log_g(duty) - log_g(d_ref)).exp())
}

/// Tilt policy that distinguishes the two protocols.
#[derive(Debug, Clone, Copy)]
enum Policy<'a> {
    Feedback(&'a SensorModel),
    OpenLoop,
}

fn execute(
    policy: Policy<'_>,
    sched: &ProtocolSchedule,
    cfg: &SimConfig,
    params: &PotentialParams,
    init: InitialWell,
    run_id: u64,
    stream_id: u64,
) -> Result<ErasureRun> {
    sched.validate()?;
    if let Policy::Feedback(sensor) = policy {
        sensor.validate()?;
    }
    let kt = cfg.thermal_energy();
    let mut integ = Integrator::new(cfg, params, stream_id)?;

    // The coin and the sensor noise are always drawn so that every variant
    // of a run consumes the stream identically up to the first divergence.
    let coin = integ.rng().uniform();
    let initial_well = match init {
        InitialWell::Left => Well::Left,
        InitialWell::Right => Well::Right,
        InitialWell::Random if coin < 0.5 => Well::Left,
        InitialWell::Random => Well::Right,
    };

    let symmetric = Field::Duty(SYMMETRIC_DUTY);
    let tilted = Field::Duty(sched.d_erase);
    let tilt_steps = integ.steps_for(sched.tau);
    let relax_steps = integ.steps_for(sched.t_relax);

    let x0 = params.center(initial_well);
    let t_m_steps = integ.steps_for(sched.t_m);
    let x_at_tm = integ.advance(x0, symmetric, t_m_steps)?;

    let noise = integ.rng().standard_normal();
    let (m, action) = match policy {
        Policy::Feedback(sensor) => {
            let m = sample_measurement(x_at_tm, sensor, noise);
            (Some(m), decide_action(m))
        }
        Policy::OpenLoop => (None, Action::Act),
    };

    let (x_final, w1, w2) = match action {
        Action::Act => {
            let w1 = switch_work(x_at_tm, SYMMETRIC_DUTY, sched.d_erase, params, kt)?;
            let x_tf = integ.advance(x_at_tm, tilted, tilt_steps)?;
            let w2 = switch_work(x_tf, sched.d_erase, SYMMETRIC_DUTY, params, kt)?;
            let x_e = integ.advance(x_tf, symmetric, relax_steps)?;
            (x_e, w1, w2)
        }
        Action::NoAction => {
            let x_e = integ.advance(x_at_tm, symmetric, tilt_steps + relax_steps)?;
            (x_e, 0.0, 0.0)
        }
    };

    Ok(ErasureRun {
        run_id,
        duty: sched.d_erase,
        sigma_n: match policy {
            Policy::Feedback(sensor) => Some(sensor.sigma_n),
            Policy::OpenLoop => None,
        },
        initial_well,
        x_at_tm,
        m,
        action,
        w1,
        w2,
        w_total: w1 + w2,
        x_final,
        success: classify_outcome(x_final),
    })
}

/// Measures at t_m and tilts only if the reading is strictly positive.
pub fn run_feedback_erasure(
    sched: &ProtocolSchedule,
    cfg: &SimConfig,
    params: &PotentialParams,
    sensor: &SensorModel,
    init: InitialWell,
    run_id: u64,
    stream_id: u64,
) -> Result<ErasureRun> {
    execute(Policy::Feedback(sensor), sched, cfg, params, init, run_id, stream_id)
}

/// Tilts unconditionally at t_m.
pub fn run_openloop_erasure(
    sched: &ProtocolSchedule,
    cfg: &SimConfig,
    params: &PotentialParams,
    init: InitialWell,
    run_id: u64,
    stream_id: u64,
) -> Result<ErasureRun> {
    execute(Policy::OpenLoop, sched, cfg, params, init, run_id, stream_id)
}
