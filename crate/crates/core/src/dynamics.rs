//! Overdamped Langevin dynamics, γ dx/dt = −∂U/∂x + ξ(t) with
//! ⟨ξ(t)ξ(t′)⟩ = 2γk_BT δ(t−t′), integrated by Euler–Maruyama.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::potential::{check_duty, PotentialParams, Well};
use crate::rng::StreamRng;
use crate::units::thermal_energy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Force from the duty-averaged potential.
    #[default]
    Averaged,
    /// Force from whichever trap the laser currently occupies.
    Multiplexed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Bath temperature in K.
    pub temperature: f64,
    /// Drag coefficient γ in pN·s/nm.
    pub gamma: f64,
    /// Time step in s.
    pub dt: f64,
    pub mode: Mode,
    /// Laser multiplexing period in s.
    pub t_mux: f64,
    pub seed: u64,
    /// Integration steps per recorded trajectory sample.
    pub record_stride: u64,
    /// |x| beyond which an integration is declared blown up, in nm.
    pub escape_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            temperature: 300.0,
            gamma: 4.5e-6,
            dt: 5e-5,
            mode: Mode::Averaged,
            t_mux: 1e-5,
            seed: 2024,
            record_stride: 1,
            escape_bound: 5000.0,
        }
    }
}

impl SimConfig {
    #[inline]
    pub fn thermal_energy(&self) -> f64 {
        thermal_energy(self.temperature)
    }

    /// Diffusion coefficient k_BT/γ in nm²/s.
    pub fn diffusivity(&self) -> f64 {
        self.thermal_energy() / self.gamma
    }

    pub fn validate(&self, params: &PotentialParams) -> Result<()> {
        params.validate()?;
        let positive = |v: f64, name: &'static str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be > 0")))
            }
        };
        positive(self.temperature, "temperature")?;
        positive(self.gamma, "gamma")?;
        positive(self.dt, "dt")?;
        positive(self.t_mux, "t_mux")?;
        positive(self.escape_bound, "escape_bound")?;
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be >= 1"));
        }
        let stability = 2.0 * self.gamma / params.stiffness;
        if self.dt >= stability {
            return Err(Error::invalid(
                "dt",
                format!("{} s is not below the Euler–Maruyama limit 2γ/k = {stability} s", self.dt),
            ));
        }
        if self.mode == Mode::Multiplexed && self.dt > self.t_mux / 10.0 * (1.0 + 1e-9) {
            return Err(Error::invalid(
                "dt",
                format!("{} s must be <= t_mux/10 = {} s in multiplexed mode", self.dt, self.t_mux / 10.0),
            ));
        }
        Ok(())
    }
}

/// Laser site at time `t`: left for the first `d·t_mux` of every period, right after.
pub fn multiplex_r(t: f64, duty: f64, t_mux: f64) -> Well {
    let phase = (t / t_mux).fract();
    if phase < duty {
        Well::Left
    } else {
        Well::Right
    }
}

/// One Euler–Maruyama step with an externally supplied standard normal draw.
///
/// `site` must be given exactly when `cfg.mode` is multiplexed.
pub fn step_em(
    x: f64,
    duty: f64,
    site: Option<Well>,
    cfg: &SimConfig,
    params: &PotentialParams,
    noise: f64,
) -> Result<f64> {
    ensure_finite(x, "position")?;
    ensure_finite(noise, "noise")?;
    check_duty(duty)?;
    let force = match (cfg.mode, site) {
        (Mode::Averaged, None) => params.effective_force_unchecked(x, duty),
        (Mode::Multiplexed, Some(site)) => params.well_force(x, site),
        (Mode::Averaged, Some(_)) => {
            return Err(Error::invalid("laser site", "given in averaged mode"));
        }
        (Mode::Multiplexed, None) => {
            return Err(Error::invalid("laser site", "missing in multiplexed mode"));
        }
    };
    let next = x + force / cfg.gamma * cfg.dt + (2.0 * cfg.thermal_energy() * cfg.dt / cfg.gamma).sqrt() * noise;
    if next.abs() > cfg.escape_bound {
        return Err(Error::Escaped {
            time: None,
            position: next,
            bound: cfg.escape_bound,
        });
    }
    Ok(next)
}

/// Landscape the particle moves in for a stretch of integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Field {
    /// The isolated trap at the origin.
    SingleWell,
    /// The double well at the given duty ratio (averaged or multiplexed per config).
    Duty(f64),
}

/// Stateful integrator bound to one random stream. Tracks elapsed steps so
/// that multiplexing phase and error times are absolute.
pub struct Integrator<'a> {
    cfg: &'a SimConfig,
    params: &'a PotentialParams,
    rng: StreamRng,
    step: u64,
    drift: f64,
    kick: f64,
}

impl<'a> Integrator<'a> {
    pub fn new(cfg: &'a SimConfig, params: &'a PotentialParams, stream_id: u64) -> Result<Self> {
        cfg.validate(params)?;
        Ok(Self {
            cfg,
            params,
            rng: StreamRng::new(cfg.seed, stream_id),
            step: 0,
            drift: cfg.dt / cfg.gamma,
            kick: (2.0 * cfg.thermal_energy() * cfg.dt / cfg.gamma).sqrt(),
        })
    }

    pub fn rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Number of steps that best covers `duration`.
    pub fn steps_for(&self, duration: f64) -> u64 {
        (duration / self.cfg.dt).round().max(0.0) as u64
    }

    #[inline]
    fn force(&self, x: f64, field: Field) -> f64 {
        match field {
            Field::SingleWell => self.params.single_well_force_unchecked(x),
            Field::Duty(d) => match self.cfg.mode {
                Mode::Averaged => self.params.effective_force_unchecked(x, d),
                Mode::Multiplexed => {
                    let site = multiplex_r(self.time(), d, self.cfg.t_mux);
                    self.params.well_force(x, site)
                }
            },
        }
    }

    /// Advances one step.
    #[inline]
    pub fn step(&mut self, x: f64, field: Field) -> Result<f64> {
        let noise = self.rng.standard_normal();
        let next = x + self.force(x, field) * self.drift + self.kick * noise;
        self.step += 1;
        if next.abs() > self.cfg.escape_bound {
            return Err(Error::Escaped {
                time: Some(self.time()),
                position: next,
                bound: self.cfg.escape_bound,
            });
        }
        Ok(next)
    }

    pub fn advance(&mut self, mut x: f64, field: Field, steps: u64) -> Result<f64> {
        if let Field::Duty(d) = field {
            check_duty(d)?;
        }
        for _ in 0..steps {
            x = self.step(x, field)?;
        }
        Ok(x)
    }

    /// Advances `steps` steps, calling `record` with every `stride`-th new position.
    pub fn advance_recording(
        &mut self,
        mut x: f64,
        field: Field,
        steps: u64,
        stride: u64,
        mut record: impl FnMut(f64, f64),
    ) -> Result<f64> {
        if let Field::Duty(d) = field {
            check_duty(d)?;
        }
        for _ in 0..steps {
            x = self.step(x, field)?;
            if self.step.is_multiple_of(stride) {
                record(self.time(), x);
            }
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutySegment {
    pub start: f64,
    pub duty: f64,
}

/// Piecewise-constant d(t) on [0, horizon].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutySchedule {
    segments: Vec<DutySegment>,
    horizon: f64,
}

impl DutySchedule {
    pub fn new(segments: Vec<DutySegment>, horizon: f64) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::invalid("duty schedule", "no segments"))?;
        if first.start != 0.0 {
            return Err(Error::invalid("duty schedule", "must start at t = 0"));
        }
        for pair in segments.windows(2) {
            if !(pair[1].start > pair[0].start) {
                return Err(Error::invalid("duty schedule", "segment starts must increase"));
            }
        }
        for s in &segments {
            check_duty(s.duty)?;
        }
        let last = segments.last().map(|s| s.start).unwrap_or(0.0);
        if !(horizon.is_finite() && horizon > last) {
            return Err(Error::invalid(
                "duty schedule",
                format!("horizon {horizon} does not cover the last segment at {last}"),
            ));
        }
        Ok(Self { segments, horizon })
    }

    pub fn constant(duty: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![DutySegment { start: 0.0, duty }], horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn segments(&self) -> &[DutySegment] {
        &self.segments
    }

    /// Duty ratio in force at `t` (segments are closed on the left).
    pub fn at(&self, t: f64) -> f64 {
        let idx = self.segments.partition_point(|s| s.start <= t);
        self.segments[idx.saturating_sub(1)].duty
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub duty_schedule: DutySchedule,
    pub seed_used: u64,
    pub stream_id: u64,
}

impl Trajectory {
    /// CSV `t_s,x_nm,d`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        use crate::io::format_float as f;
        writeln!(out, "t_s,x_nm,d")?;
        for (&t, &x) in self.times.iter().zip(&self.positions) {
            writeln!(out, "{},{},{}", f(t), f(x), f(self.duty_schedule.at(t)))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufWriter::new(file);
        self.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
        buf.flush().map_err(|e| Error::io(path, e))
    }

    /// Positions whose time lies in `[start, end]`.
    pub fn window(&self, start: f64, end: f64) -> &[f64] {
        let lo = self.times.partition_point(|&t| t < start);
        let hi = self.times.partition_point(|&t| t <= end);
        &self.positions[lo..hi.max(lo)]
    }
}

/// Integrates from `x0` under `schedule`, recording every `record_stride`-th
/// position (the initial position included).
pub fn simulate_trajectory(
    x0: f64,
    schedule: &DutySchedule,
    cfg: &SimConfig,
    params: &PotentialParams,
    stream_id: u64,
) -> Result<Trajectory> {
    ensure_finite(x0, "initial position")?;
    let mut integ = Integrator::new(cfg, params, stream_id)?;
    let stride = cfg.record_stride;
    let total = integ.steps_for(schedule.horizon());
    let mut times = Vec::with_capacity((total / stride + 1) as usize);
    let mut positions = Vec::with_capacity(times.capacity());
    times.push(0.0);
    positions.push(x0);
    let mut x = x0;
    let segs = schedule.segments();
    for (i, seg) in segs.iter().enumerate() {
        let end = segs.get(i + 1).map_or(total, |next| integ.steps_for(next.start));
        let steps = end.saturating_sub(integ.steps_taken());
        x = integ.advance_recording(x, Field::Duty(seg.duty), steps, stride, |t, x| {
            times.push(t);
            positions.push(x);
        })?;
    }
    Ok(Trajectory {
        times,
        positions,
        duty_schedule: schedule.clone(),
        seed_used: cfg.seed,
        stream_id,
    })
}

/// Sample mean and (population) variance of the positions recorded in `[start, end]`.
pub fn stationary_stats(traj: &Trajectory, start: f64, end: f64) -> Result<(f64, f64)> {
    let (first, last) = match (traj.times.first(), traj.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InsufficientData("empty trajectory".into())),
    };
    let slack = 1e-9 * last.abs().max(1.0);
    if !(start <= end) || start < first - slack || end > last + slack {
        return Err(Error::invalid(
            "window",
            format!("[{start}, {end}] not within trajectory span [{first}, {last}]"),
        ));
    }
    mean_variance(traj.window(start, end))
        .ok_or_else(|| Error::InsufficientData(format!("no samples in [{start}, {end}]")))
}

pub(crate) fn mean_variance(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var))
}

/// Normalized autocorrelation at `lag` samples.
pub fn autocorrelation(xs: &[f64], lag: usize) -> Option<f64> {
    if xs.len() <= lag + 1 {
        return None;
    }
    let (mean, var) = mean_variance(xs)?;
    if var == 0.0 {
        return None;
    }
    let n = xs.len() - lag;
    let cov = (0..n).map(|i| (xs[i] - mean) * (xs[i + lag] - mean)).sum::<f64>() / n as f64;
    Some(cov / var)
}

/// Relaxation time from the lag-one autocorrelation, −Δt / ln ρ(Δt), for
/// samples spaced `sample_dt` apart.
pub fn relaxation_time(xs: &[f64], sample_dt: f64) -> Option<f64> {
    let rho = autocorrelation(xs, 1)?;
    (rho > 0.0 && rho < 1.0).then(|| -sample_dt / rho.ln())
}
