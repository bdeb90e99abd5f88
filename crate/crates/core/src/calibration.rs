//! Equilibrium calibration runs: single-well statistics, the bistable
//! memory at d = ½, Boltzmann inversion and the averaged/multiplexed check.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::CalibrationSettings;
use crate::dynamics::{mean_variance, relaxation_time, Field, Integrator, Mode, SimConfig};
use crate::error::{Error, Result};
use crate::potential::{reconstruct_potential, PositionHistogram, PotentialCurve, PotentialParams, Well};
use crate::protocol::SYMMETRIC_DUTY;
use crate::rng::stream_id;

const SINGLE_WELL_ENSEMBLE: u32 = 0xCA11_0000;
const BISTABLE_ENSEMBLE: u32 = 0xCA11_0001;
const AVERAGED_ENSEMBLE: u32 = 0xCA11_0002;
const MULTIPLEXED_ENSEMBLE: u32 = 0xCA11_0003;

/// Fraction of each equilibrium trajectory dropped before sampling.
const BURN_IN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleWellReport {
    pub steps: u64,
    /// nm²
    pub variance: f64,
    pub expected_variance: f64,
    /// s
    pub relaxation_time: f64,
    pub expected_relaxation_time: f64,
}

impl SingleWellReport {
    pub fn variance_error(&self) -> f64 {
        (self.variance / self.expected_variance - 1.0).abs()
    }

    pub fn relaxation_error(&self) -> f64 {
        (self.relaxation_time / self.expected_relaxation_time - 1.0).abs()
    }
}

/// Integrates the isolated harmonic trap and compares the stationary
/// variance and relaxation time with k_BT/k and γ/k.
pub fn single_well_check(sim: &SimConfig, params: &PotentialParams, steps: u64) -> Result<SingleWellReport> {
    let mut integ = Integrator::new(sim, params, stream_id(SINGLE_WELL_ENSEMBLE, 0))?;
    let burn = (steps as f64 * BURN_IN) as u64;
    let x = integ.advance(0.0, Field::SingleWell, burn)?;
    let mut xs = Vec::with_capacity(steps as usize);
    integ.advance_recording(x, Field::SingleWell, steps, 1, |_, x| xs.push(x))?;
    let (_, variance) = mean_variance(&xs).ok_or_else(|| Error::InsufficientData("no samples".into()))?;
    let relaxation_time =
        relaxation_time(&xs, sim.dt).ok_or_else(|| Error::InsufficientData("autocorrelation outside (0, 1)".into()))?;
    Ok(SingleWellReport {
        steps,
        variance,
        expected_variance: sim.thermal_energy() / params.stiffness,
        relaxation_time,
        expected_relaxation_time: sim.gamma / params.stiffness,
    })
}

/// Equilibrium samples of independent trajectories started alternately in
/// the left and right wells at constant duty ratio.
fn equilibrium_samples(
    sim: &SimConfig,
    params: &PotentialParams,
    duty: f64,
    trajectories: usize,
    duration: f64,
    stride: u64,
    ensemble: u32,
) -> Result<Vec<Vec<f64>>> {
    let n = u32::try_from(trajectories).map_err(|_| Error::invalid("trajectories", "too many"))?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut integ = Integrator::new(sim, params, stream_id(ensemble, i))?;
            let well = if i % 2 == 0 { Well::Left } else { Well::Right };
            let total = integ.steps_for(duration);
            let burn = (total as f64 * BURN_IN) as u64;
            let x = integ.advance(params.center(well), Field::Duty(duty), burn)?;
            let mut xs = Vec::with_capacity(((total - burn) / stride) as usize + 1);
            integ.advance_recording(x, Field::Duty(duty), total - burn, stride, |_, x| xs.push(x))?;
            Ok(xs)
        })
        .collect()
}

fn symmetric_histogram(params: &PotentialParams, bin_nm: f64) -> Result<PositionHistogram> {
    // tails reach 8 σ past the outer well edges
    let half_span = params.half_separation + 2.0 * params.half_width;
    let bins = (2.0 * half_span / bin_nm).round().max(1.0) as usize;
    PositionHistogram::new(-half_span, half_span, bins)
}

#[derive(Debug, Clone, Serialize)]
pub struct BistableReport {
    pub samples: u64,
    /// Within-well position variances, nm².
    pub variance_left: f64,
    pub variance_right: f64,
    /// Pooled thermal spread about the well centres, nm.
    pub sigma_thermal: f64,
    pub fraction_left: f64,
    #[serde(skip)]
    pub histogram: PositionHistogram,
}

/// Samples the symmetric memory and measures the per-well spread σ_T.
pub fn bistable_equilibrium(sim: &SimConfig, params: &PotentialParams, settings: &CalibrationSettings) -> Result<BistableReport> {
    let sim = SimConfig { dt: settings.dt, mode: Mode::Averaged, ..sim.clone() };
    let runs = equilibrium_samples(
        &sim,
        params,
        SYMMETRIC_DUTY,
        settings.bistable_trajectories,
        settings.bistable_duration,
        settings.record_stride,
        BISTABLE_ENSEMBLE,
    )?;
    let mut hist = symmetric_histogram(params, settings.histogram_bin_nm)?;
    // spreads use only samples inside a trap; the rare visits to the flat
    // region between the wells would otherwise dominate the variance
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let (cl, cr) = (params.center(Well::Left), params.center(Well::Right));
    for &x in runs.iter().flatten() {
        hist.add(x);
        if (x - cl).abs() <= params.half_width {
            left.push(x);
        } else if (x - cr).abs() <= params.half_width {
            right.push(x);
        }
    }
    let (_, variance_left) = mean_variance(&left).ok_or_else(|| Error::InsufficientData("no left-well samples".into()))?;
    let (_, variance_right) = mean_variance(&right).ok_or_else(|| Error::InsufficientData("no right-well samples".into()))?;
    let samples = hist.total();
    let trapped = (left.len() + right.len()) as f64;
    let pooled = (variance_left * left.len() as f64 + variance_right * right.len() as f64) / trapped;
    Ok(BistableReport {
        samples,
        variance_left,
        variance_right,
        sigma_thermal: pooled.sqrt(),
        fraction_left: left.len() as f64 / trapped,
        histogram: hist,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconstructionCheck {
    pub min_count: u64,
    pub bins_compared: usize,
    /// Largest |U_rec − U_eff − c| over the compared bins, k_BT.
    pub max_abs_error: f64,
    /// Count-weighted mean offset c, k_BT.
    pub offset: f64,
}

/// Compares a reconstructed curve with U_eff at `duty`, after removing the
/// best additive constant, over bins holding at least `min_count` samples.
pub fn compare_reconstruction(
    curve: &PotentialCurve,
    histogram: &PositionHistogram,
    params: &PotentialParams,
    duty: f64,
    thermal_energy: f64,
    min_count: u64,
) -> Result<ReconstructionCheck> {
    let mut diffs = Vec::new();
    for (i, (&count, u)) in histogram.counts.iter().zip(&curve.values).enumerate() {
        if let (true, Some(u)) = (count >= min_count, u) {
            let exact = crate::potential::effective_energy(histogram.center(i), duty, params)?;
            diffs.push(((u - exact) / thermal_energy, count as f64));
        }
    }
    if diffs.is_empty() {
        return Err(Error::InsufficientData(format!("no bin holds {min_count} samples")));
    }
    let weight: f64 = diffs.iter().map(|d| d.1).sum();
    let offset = diffs.iter().map(|d| d.0 * d.1).sum::<f64>() / weight;
    let max_abs_error = diffs.iter().map(|d| (d.0 - offset).abs()).fold(0.0, f64::max);
    Ok(ReconstructionCheck {
        min_count,
        bins_compared: diffs.len(),
        max_abs_error,
        offset,
    })
}

/// Boltzmann inversion of the bistable histogram.
pub fn reconstruct(report: &BistableReport, temperature_k: f64) -> Result<PotentialCurve> {
    reconstruct_potential(&report.histogram, temperature_k)
}

/// Total-variation distance ½ Σ |p_i − q_i| between two equally binned histograms.
pub fn total_variation(a: &PositionHistogram, b: &PositionHistogram) -> Result<f64> {
    if a.counts.len() != b.counts.len() || a.lower != b.lower || a.bin_width != b.bin_width {
        return Err(Error::invalid("histogram", "binning mismatch"));
    }
    if a.total() == 0 || b.total() == 0 {
        return Err(Error::InsufficientData("empty histogram".into()));
    }
    let (pa, pb) = (a.probabilities(), b.probabilities());
    Ok(0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeEquivalence {
    pub windows: usize,
    pub samples_per_mode: u64,
    pub total_variation: f64,
}

/// Equilibrium histograms at d = ½ from independent windows in each mode.
pub fn mode_equivalence(sim: &SimConfig, params: &PotentialParams, settings: &CalibrationSettings) -> Result<ModeEquivalence> {
    let hist_for = |mode: Mode, ensemble: u32| -> Result<PositionHistogram> {
        let cfg = SimConfig { dt: settings.mode_dt, mode, ..sim.clone() };
        let runs = equilibrium_samples(
            &cfg,
            params,
            SYMMETRIC_DUTY,
            settings.mode_windows,
            settings.mode_window,
            settings.mode_record_stride,
            ensemble,
        )?;
        let mut h = symmetric_histogram(params, settings.mode_bin_nm)?;
        h.extend(runs.into_iter().flatten());
        Ok(h)
    };
    let averaged = hist_for(Mode::Averaged, AVERAGED_ENSEMBLE)?;
    let multiplexed = hist_for(Mode::Multiplexed, MULTIPLEXED_ENSEMBLE)?;
    Ok(ModeEquivalence {
        windows: settings.mode_windows,
        samples_per_mode: averaged.total().min(multiplexed.total()),
        total_variation: total_variation(&averaged, &multiplexed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::thermal_energy;

    #[test]
    fn tv_of_identical_and_disjoint() {
        let mut a = PositionHistogram::new(0.0, 4.0, 4).unwrap();
        let mut b = a.clone();
        a.extend([0.5, 1.5]);
        b.extend([0.5, 1.5]);
        assert_eq!(total_variation(&a, &b).unwrap(), 0.0);
        let mut c = PositionHistogram::new(0.0, 4.0, 4).unwrap();
        c.extend([2.5, 3.5]);
        assert_eq!(total_variation(&a, &c).unwrap(), 1.0);
        let d = PositionHistogram::new(0.0, 4.0, 5).unwrap();
        assert!(total_variation(&a, &d).is_err());
    }

    #[test]
    fn exact_histogram_reconstructs_exactly() {
        let p = PotentialParams::default();
        let kt = thermal_energy(300.0);
        let mut h = symmetric_histogram(&p, 10.0).unwrap();
        for i in 0..h.counts.len() {
            let u = crate::potential::effective_energy(h.center(i), 0.5, &p).unwrap();
            h.counts[i] = (1e9 * (-u / kt).exp()).round() as u64;
        }
        let curve = reconstruct_potential(&h, 300.0).unwrap();
        let check = compare_reconstruction(&curve, &h, &p, 0.5, kt, 1000).unwrap();
        assert!(check.max_abs_error < 1e-3, "{check:?}");
        assert!(check.bins_compared > 20);
    }

    #[test]
    fn fast_single_well() {
        let sim = SimConfig { gamma: 4.5e-8, dt: 2e-7, ..SimConfig::default() };
        let r = single_well_check(&sim, &PotentialParams::default(), 200_000).unwrap();
        assert!(r.variance_error() < 0.1, "{r:?}");
        assert!(r.relaxation_error() < 0.1, "{r:?}");
    }
}
