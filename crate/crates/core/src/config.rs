//! Run configuration: a strict JSON document whose every key is optional.
//! Missing keys take the defaults below; unknown keys are an error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Mode, SimConfig};
use crate::error::{Error, Result};
use crate::measurement::{MixtureModel, SensorModel};
use crate::potential::{OuterFlank, PotentialParams};
use crate::protocol::{InitialWell, ProtocolSchedule, TauScaling};

/// Factor applied to γ and every time by the fast-bath preset.
pub const FAST_BATH_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[default]
    Full,
    /// γ and all times × 0.01. Overdamped dynamics are invariant under
    /// (t, γ) → (ct, cγ), so results are statistically unchanged.
    FastBath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolSettings {
    pub t_m: f64,
    pub t_relax: f64,
    /// Tilt duty ratio used by the single-ensemble `erase` command.
    pub d_erase: f64,
    pub init: InitialWell,
    pub tau: TauScaling,
}

impl ProtocolSettings {
    pub fn schedule(&self, d_erase: f64) -> Result<ProtocolSchedule> {
        let sched = ProtocolSchedule {
            t_m: self.t_m,
            tau: self.tau.tau(d_erase)?,
            t_relax: self.t_relax,
            d_erase,
        };
        sched.validate()?;
        Ok(sched)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSettings {
    /// Time step of the equilibrium runs, s.
    pub dt: f64,
    pub single_well_steps: u64,
    pub bistable_trajectories: usize,
    /// Length of each bistable equilibrium trajectory, s.
    pub bistable_duration: f64,
    /// Steps between recorded samples in the bistable runs.
    pub record_stride: u64,
    pub histogram_bin_nm: f64,
    /// Windows per mode in the averaged/multiplexed comparison.
    pub mode_windows: usize,
    /// Length of each comparison window, s.
    pub mode_window: f64,
    /// Time step of the comparison; must resolve t_mux.
    pub mode_dt: f64,
    pub mode_record_stride: u64,
    pub mode_bin_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub potential: PotentialParams,
    pub sim: SimConfig,
    pub sensor: SensorModel,
    pub mixture: MixtureModel,
    pub protocol: ProtocolSettings,
    pub d_list: Vec<f64>,
    pub n_runs: usize,
    pub output_dir: PathBuf,
    pub preset: Preset,
    /// Success rate an erasure must reach to count as admissible.
    pub p_target: f64,
    pub mi_samples: usize,
    pub work_bin_width: f64,
    pub calibration: CalibrationSettings,
}

// ---- file schema ------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    potential: Option<RawPotential>,
    sim: Option<RawSim>,
    sensor: Option<RawSensor>,
    mixture: Option<RawMixture>,
    protocol: Option<RawProtocol>,
    d_list: Option<Vec<f64>>,
    n_runs: Option<usize>,
    output_dir: Option<PathBuf>,
    preset: Option<Preset>,
    p_target: Option<f64>,
    mi: Option<RawMi>,
    analysis: Option<RawAnalysis>,
    calibration: Option<RawCalibration>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawPotential {
    k_pN_per_nm: Option<f64>,
    w_nm: Option<f64>,
    L_nm: Option<f64>,
    U_r_pNnm: Option<f64>,
    outer_flank: Option<OuterFlank>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawSim {
    temperature_K: Option<f64>,
    gamma_pN_s_per_nm: Option<f64>,
    dt_s: Option<f64>,
    mode: Option<Mode>,
    t_mux_s: Option<f64>,
    seed: Option<u64>,
    record_stride: Option<u64>,
    escape_bound_nm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    sigma_n_nm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawMixture {
    p_left: Option<f64>,
    sigma_T_nm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    t_m_s: Option<f64>,
    t_relax_s: Option<f64>,
    d_erase: Option<f64>,
    init: Option<InitialWell>,
    tau_ref_s: Option<f64>,
    d_ref: Option<f64>,
    tau_exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMi {
    samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawAnalysis {
    work_bin_kBT: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCalibration {
    dt_s: Option<f64>,
    single_well_steps: Option<u64>,
    bistable_trajectories: Option<usize>,
    bistable_duration_s: Option<f64>,
    record_stride: Option<u64>,
    histogram_bin_nm: Option<f64>,
    mode_windows: Option<usize>,
    mode_window_s: Option<f64>,
    mode_dt_s: Option<f64>,
    mode_record_stride: Option<u64>,
    mode_bin_nm: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        resolve(RawConfig::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        resolve(raw)
    }

    /// Applies a `--seed` override.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.sim.seed
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn bad(key: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {reason}"))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, format!("{v} must be > 0")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(bad(key, format!("{v} must be >= 0")))
    }
}

fn resolve(raw: RawConfig) -> Result<RunConfig> {
    let rp = raw.potential.unwrap_or_default();
    let rs = raw.sim.unwrap_or_default();
    let rn = raw.sensor.unwrap_or_default();
    let rm = raw.mixture.unwrap_or_default();
    let rpr = raw.protocol.unwrap_or_default();
    let rc = raw.calibration.unwrap_or_default();
    let preset = raw.preset.unwrap_or_default();

    let defaults = PotentialParams::default();
    let potential = PotentialParams {
        stiffness: positive("potential.k_pN_per_nm", rp.k_pN_per_nm.unwrap_or(defaults.stiffness))?,
        half_width: positive("potential.w_nm", rp.w_nm.unwrap_or(defaults.half_width))?,
        half_separation: positive("potential.L_nm", rp.L_nm.unwrap_or(defaults.half_separation))?,
        offset: rp.U_r_pNnm.unwrap_or(defaults.offset),
        outer_flank: rp.outer_flank.unwrap_or_default(),
    };
    if !potential.offset.is_finite() {
        return Err(bad("potential.U_r_pNnm", "must be finite"));
    }
    if potential.half_separation <= potential.half_width {
        return Err(bad(
            "potential.L_nm",
            format!(
                "L = {} must exceed w = {} so the wells do not overlap",
                potential.half_separation, potential.half_width
            ),
        ));
    }

    let sd = SimConfig::default();
    let mut sim = SimConfig {
        temperature: positive("sim.temperature_K", rs.temperature_K.unwrap_or(sd.temperature))?,
        gamma: positive("sim.gamma_pN_s_per_nm", rs.gamma_pN_s_per_nm.unwrap_or(sd.gamma))?,
        dt: positive("sim.dt_s", rs.dt_s.unwrap_or(sd.dt))?,
        mode: rs.mode.unwrap_or(sd.mode),
        t_mux: positive("sim.t_mux_s", rs.t_mux_s.unwrap_or(sd.t_mux))?,
        seed: rs.seed.unwrap_or(sd.seed),
        record_stride: rs.record_stride.unwrap_or(sd.record_stride),
        escape_bound: positive("sim.escape_bound_nm", rs.escape_bound_nm.unwrap_or(sd.escape_bound))?,
    };
    if sim.record_stride == 0 {
        return Err(bad("sim.record_stride", "must be >= 1"));
    }

    let sensor = SensorModel {
        sigma_n: non_negative("sensor.sigma_n_nm", rn.sigma_n_nm.unwrap_or(300.0))?,
    };

    let p_left = rm.p_left.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&p_left) {
        return Err(bad("mixture.p_left", format!("{p_left} outside [0, 1]")));
    }
    let mixture = MixtureModel {
        p_left,
        half_separation: potential.half_separation,
        sigma_thermal: positive("mixture.sigma_T_nm", rm.sigma_T_nm.unwrap_or(43.0))?,
    };

    let td = TauScaling::default();
    let mut protocol = ProtocolSettings {
        t_m: non_negative("protocol.t_m_s", rpr.t_m_s.unwrap_or(0.1))?,
        t_relax: non_negative("protocol.t_relax_s", rpr.t_relax_s.unwrap_or(2.0))?,
        d_erase: rpr.d_erase.unwrap_or(0.7),
        init: rpr.init.unwrap_or_default(),
        tau: TauScaling {
            tau_ref: positive("protocol.tau_ref_s", rpr.tau_ref_s.unwrap_or(td.tau_ref))?,
            d_ref: rpr.d_ref.unwrap_or(td.d_ref),
            exponent: rpr.tau_exponent.unwrap_or(td.exponent),
        },
    };
    let tilt = |key: &str, d: f64| {
        if d > 0.5 && d < 1.0 {
            Ok(d)
        } else {
            Err(bad(key, format!("{d} outside (0.5, 1)")))
        }
    };
    tilt("protocol.d_erase", protocol.d_erase)?;
    tilt("protocol.d_ref", protocol.tau.d_ref)?;
    if protocol.tau.exponent.abs() != 0.5 {
        return Err(bad("protocol.tau_exponent", format!("{} must be 0.5 or -0.5", protocol.tau.exponent)));
    }

    let d_list = raw.d_list.unwrap_or_else(|| vec![0.7, 0.75, 0.8, 0.85]);
    if d_list.is_empty() {
        return Err(bad("d_list", "must not be empty"));
    }
    for &d in &d_list {
        tilt("d_list", d)?;
    }
    let n_runs = raw.n_runs.unwrap_or(300);
    if n_runs == 0 {
        return Err(bad("n_runs", "must be >= 1"));
    }
    let p_target = raw.p_target.unwrap_or(0.95);
    if !(0.0..=1.0).contains(&p_target) {
        return Err(bad("p_target", format!("{p_target} outside [0, 1]")));
    }
    let mi_samples = raw.mi.and_then(|m| m.samples).unwrap_or(100_000);
    if mi_samples < crate::measurement::MIN_MI_SAMPLES {
        return Err(bad("mi.samples", format!("{mi_samples} < {}", crate::measurement::MIN_MI_SAMPLES)));
    }
    let work_bin_width = positive("analysis.work_bin_kBT", raw.analysis.and_then(|a| a.work_bin_kBT).unwrap_or(0.25))?;

    let mut calibration = CalibrationSettings {
        dt: positive("calibration.dt_s", rc.dt_s.unwrap_or(2e-5))?,
        single_well_steps: rc.single_well_steps.unwrap_or(1_000_000),
        bistable_trajectories: rc.bistable_trajectories.unwrap_or(64),
        bistable_duration: positive("calibration.bistable_duration_s", rc.bistable_duration_s.unwrap_or(20.0))?,
        record_stride: rc.record_stride.unwrap_or(250),
        histogram_bin_nm: positive("calibration.histogram_bin_nm", rc.histogram_bin_nm.unwrap_or(10.0))?,
        mode_windows: rc.mode_windows.unwrap_or(64),
        mode_window: positive("calibration.mode_window_s", rc.mode_window_s.unwrap_or(1.0))?,
        mode_dt: positive("calibration.mode_dt_s", rc.mode_dt_s.unwrap_or(1e-6))?,
        mode_record_stride: rc.mode_record_stride.unwrap_or(1000),
        mode_bin_nm: positive("calibration.mode_bin_nm", rc.mode_bin_nm.unwrap_or(20.0))?,
    };
    if calibration.single_well_steps < 1000 {
        return Err(bad("calibration.single_well_steps", "must be >= 1000"));
    }
    if calibration.bistable_trajectories < 2 {
        return Err(bad("calibration.bistable_trajectories", "must be >= 2"));
    }
    if calibration.record_stride == 0 {
        return Err(bad("calibration.record_stride", "must be >= 1"));
    }
    if calibration.mode_record_stride == 0 {
        return Err(bad("calibration.mode_record_stride", "must be >= 1"));
    }
    if calibration.mode_windows == 0 {
        return Err(bad("calibration.mode_windows", "must be >= 1"));
    }

    if preset == Preset::FastBath {
        let c = FAST_BATH_SCALE;
        sim.gamma *= c;
        sim.dt *= c;
        sim.t_mux *= c;
        protocol.t_m *= c;
        protocol.t_relax *= c;
        protocol.tau.tau_ref *= c;
        calibration.dt *= c;
        calibration.bistable_duration *= c;
        calibration.mode_window *= c;
        calibration.mode_dt *= c;
    }

    sim.validate(&potential).map_err(|e| bad("sim", e))?;
    let calib_sim = SimConfig { dt: calibration.dt, ..sim.clone() };
    calib_sim.validate(&potential).map_err(|e| bad("calibration.dt_s", e))?;
    let mode_sim = SimConfig { dt: calibration.mode_dt, mode: Mode::Multiplexed, ..sim.clone() };
    mode_sim.validate(&potential).map_err(|e| bad("calibration.mode_dt_s", e))?;
    protocol.schedule(protocol.d_erase).map_err(|e| bad("protocol", e))?;

    Ok(RunConfig {
        potential,
        sim,
        sensor,
        mixture,
        protocol,
        d_list,
        n_runs,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        preset,
        p_target,
        mi_samples,
        work_bin_width,
        calibration,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn empty_object_gives_paper_defaults() {
        let c = RunConfig::from_json_str("{}").unwrap();
        assert_eq!(c.potential.stiffness, 0.0045);
        assert_eq!(c.potential.half_width, 175.0);
        assert_eq!(c.potential.half_separation, 550.0);
        assert_eq!(c.sensor.sigma_n, 300.0);
        assert_eq!(c.d_list, vec![0.7, 0.75, 0.8, 0.85]);
        assert_eq!(c.n_runs, 300);
        assert_eq!(c.protocol.tau.tau_ref, 30.0);
        assert_eq!(c.protocol.tau.d_ref, 0.7);
        assert_eq!(c.sim.gamma, 4.5e-6);
        assert_eq!(c.sim.dt, 5e-5);
        assert_eq!(c.sim.t_mux, 1e-5);
        assert_eq!(c.sim.temperature, 300.0);
        assert_eq!(c.mixture.sigma_thermal, 43.0);
        assert_eq!(c.preset, Preset::Full);
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn negative_noise_names_the_key() {
        let err = RunConfig::from_json_str(r#"{"sensor":{"sigma_n_nm":-1}}"#).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("sigma_n"), "{err}");
    }

    #[test]
    fn misspelled_key_fails_loudly() {
        for text in [r#"{"sensor":{"sigma_nm":1}}"#, r#"{"nruns":3}"#, r#"{"potential":{"k":1}}"#] {
            let err = RunConfig::from_json_str(text).unwrap_err();
            assert!(err.to_string().contains("unknown field"), "{err}");
        }
    }

    #[test]
    fn fast_bath_scales_gamma_and_times() {
        let full = RunConfig::default();
        let fast = RunConfig::from_json_str(r#"{"preset":"fast-bath"}"#).unwrap();
        assert_relative_eq!(fast.sim.gamma, 0.01 * full.sim.gamma);
        assert_relative_eq!(fast.sim.dt, 0.01 * full.sim.dt);
        assert_relative_eq!(fast.sim.t_mux, 0.01 * full.sim.t_mux);
        assert_relative_eq!(fast.protocol.t_m, 0.01 * full.protocol.t_m);
        assert_relative_eq!(fast.protocol.t_relax, 0.01 * full.protocol.t_relax);
        assert_relative_eq!(fast.protocol.tau.tau_ref, 0.01 * full.protocol.tau.tau_ref);
        assert_relative_eq!(fast.calibration.dt, 0.01 * full.calibration.dt);
        // the dimensionless step γ/(k·dt) is preserved
        assert_relative_eq!(fast.sim.gamma / fast.sim.dt, full.sim.gamma / full.sim.dt, max_relative = 1e-12);
        assert_eq!(fast.sim.temperature, full.sim.temperature);
    }

    #[test]
    fn invariant_violations() {
        for text in [
            r#"{"d_list":[0.5]}"#,
            r#"{"d_list":[]}"#,
            r#"{"n_runs":0}"#,
            r#"{"potential":{"L_nm":100}}"#,
            r#"{"sim":{"dt_s":0.01}}"#,
            r#"{"sim":{"mode":"multiplexed"}}"#,
            r#"{"protocol":{"tau_exponent":1.0}}"#,
            r#"{"mixture":{"p_left":1.5}}"#,
        ] {
            assert!(RunConfig::from_json_str(text).is_err(), "{text}");
        }
        assert!(RunConfig::from_json_str(r#"{"sim":{"mode":"multiplexed","dt_s":1e-6},"calibration":{"dt_s":1e-6}}"#).is_ok());
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(RunConfig::from_json_str("{"), Err(Error::Config(_))));
    }

    #[test]
    fn missing_file() {
        let err = load_config(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn seed_override() {
        assert_eq!(RunConfig::default().with_seed(9).seed(), 9);
    }
}
