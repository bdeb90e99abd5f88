//! Noisy position sensor M = X + η, the feedback decision rule, and the
//! mutual information I(X; M) for a two-Gaussian position density.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// Standard deviation of the additive Gaussian measurement noise, nm.
    pub sigma_n: f64,
}

impl SensorModel {
    pub fn new(sigma_n: f64) -> Result<Self> {
        let s = Self { sigma_n };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_n.is_finite() && self.sigma_n >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("sigma_n", format!("{} must be >= 0", self.sigma_n)))
        }
    }
}

/// f_X = p·N(−L, σ_T²) + (1−p)·N(L, σ_T²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    /// Probability of the left well.
    pub p_left: f64,
    pub half_separation: f64,
    /// Thermal position spread σ_T within a well, nm.
    pub sigma_thermal: f64,
}

impl MixtureModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_left) {
            return Err(Error::invalid("p_left", format!("{} outside [0, 1]", self.p_left)));
        }
        if !(self.sigma_thermal.is_finite() && self.sigma_thermal > 0.0) {
            return Err(Error::invalid("sigma_T", format!("{} must be > 0", self.sigma_thermal)));
        }
        if !self.half_separation.is_finite() {
            return Err(Error::NonFinite("half_separation"));
        }
        Ok(())
    }

    /// Spread of the measured position in either component.
    fn measured_sd(&self, sensor: &SensorModel) -> f64 {
        self.sigma_thermal.hypot(sensor.sigma_n)
    }

    /// ln f_M(m) for M = X + η.
    pub fn measurement_log_density(&self, m: f64, sensor: &SensorModel) -> f64 {
        let s = self.measured_sd(sensor);
        let l = self.half_separation;
        let left = self.p_left.ln() + normal_log_pdf(m, -l, s);
        let right = (1.0 - self.p_left).ln() + normal_log_pdf(m, l, s);
        log_add_exp(left, right)
    }

    /// Draws a paired sample (x, m).
    pub fn draw_pair(&self, sensor: &SensorModel, rng: &mut StreamRng) -> (f64, f64) {
        let center = if rng.uniform() < self.p_left {
            -self.half_separation
        } else {
            self.half_separation
        };
        let x = center + self.sigma_thermal * rng.standard_normal();
        let m = sample_measurement(x, sensor, rng.standard_normal());
        (x, m)
    }
}

fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// m = x + σ_n·noise for a standard normal `noise`.
#[inline]
pub fn sample_measurement(x: f64, sensor: &SensorModel, noise: f64) -> f64 {
    x + sensor.sigma_n * noise
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Act,
    NoAction,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Act => "act",
            Action::NoAction => "no_action",
        }
    }
}

/// Tilt only on a strictly positive reading; m = 0 means no action.
#[inline]
pub fn decide_action(m: f64) -> Action {
    if m > 0.0 {
        Action::Act
    } else {
        Action::NoAction
    }
}

/// Absolute tolerance requested from the entropy quadrature, in nats.
const MI_ABS_TOL: f64 = 1e-9;

/// I(X; M) = h(M) − h(η) in nats, with h(M) integrated numerically over
/// ±(L + 10σ_M).
pub fn mi_quadrature(mix: &MixtureModel, sensor: &SensorModel) -> Result<f64> {
    mix.validate()?;
    sensor.validate()?;
    if sensor.sigma_n == 0.0 {
        return Err(Error::invalid(
            "sigma_n",
            "mutual information diverges for a noiseless sensor",
        ));
    }
    let s = mix.measured_sd(sensor);
    let reach = mix.half_separation.abs() + 10.0 * s;
    let (h_m, _err) = quadrature::integrate(
        |m| {
            let lf = mix.measurement_log_density(m, sensor);
            if lf == f64::NEG_INFINITY {
                0.0
            } else {
                -lf.exp() * lf
            }
        },
        -reach,
        reach,
        MI_ABS_TOL,
        4000,
    );
    let h_noise = 0.5 * (2.0 * PI * E * sensor.sigma_n * sensor.sigma_n).ln();
    Ok((h_m - h_noise).max(0.0))
}

/// Closed form for a single Gaussian channel, ½ ln(1 + σ_T²/σ_n²).
pub fn gaussian_channel_mi(sigma_thermal: f64, sigma_n: f64) -> f64 {
    0.5 * (1.0 + (sigma_thermal / sigma_n).powi(2)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub const MIN_MI_SAMPLES: usize = 1000;

/// Plug-in estimate (1/N) Σ [ln f_η(m − x) − ln f_M(m)] with its standard error.
pub fn mi_monte_carlo(samples: &[(f64, f64)], mix: &MixtureModel, sensor: &SensorModel) -> Result<MiEstimate> {
    mix.validate()?;
    sensor.validate()?;
    if sensor.sigma_n == 0.0 {
        return Err(Error::invalid("sigma_n", "must be > 0"));
    }
    if samples.len() < MIN_MI_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} paired samples, need at least {MIN_MI_SAMPLES}",
            samples.len()
        )));
    }
    let terms: Vec<f64> = samples
        .iter()
        .map(|&(x, m)| normal_log_pdf(m - x, 0.0, sensor.sigma_n) - mix.measurement_log_density(m, sensor))
        .collect();
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MiEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        samples: terms.len(),
    })
}

/// Draws `n` paired samples from the mixture and sensor on one stream.
pub fn draw_pairs(mix: &MixtureModel, sensor: &SensorModel, n: usize, seed: u64, stream_id: u64) -> Vec<(f64, f64)> {
    let mut rng = StreamRng::new(seed, stream_id);
    (0..n).map(|_| mix.draw_pair(sensor, &mut rng)).collect()
}

/// Probability that a right-well particle is read as left (or zero),
/// 0.5·Φ(−L/√(σ_T² + σ_n²)). Only feedback runs pay this loss.
pub fn misdecision_loss(mix: &MixtureModel, sensor: &SensorModel) -> f64 {
    let z = -mix.half_separation / mix.measured_sd(sensor);
    0.5 * standard_normal_cdf(z)
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErasureProbability {
    pub value: f64,
    /// Set when the prediction falls outside [0, 1]; the value is not clamped.
    pub out_of_range: bool,
}

/// Feedback success probability predicted from the open-loop one:
/// p = p_ol − 0.5·Φ(−L/√(σ_T² + σ_n²)).
pub fn erasure_prob_analytic(p_ol: f64, mix: &MixtureModel, sensor: &SensorModel) -> Result<ErasureProbability> {
    if !(0.0..=1.0).contains(&p_ol) {
        return Err(Error::invalid("p_ol", format!("{p_ol} outside [0, 1]")));
    }
    mix.validate()?;
    sensor.validate()?;
    let value = p_ol - misdecision_loss(mix, sensor);
    Ok(ErasureProbability {
        value,
        out_of_range: !(0.0..=1.0).contains(&value),
    })
}
