//! Switch work, Landauer-type bounds and the per-phase second-law ledger.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{check_duty, PotentialParams};
use crate::protocol::ErasureRun;

/// Work of an instantaneous duty switch with the particle held at `x`,
/// [U_eff(x, d_new) − U_eff(x, d_old)] / k_BT.
pub fn switch_work(x: f64, d_old: f64, d_new: f64, params: &PotentialParams, thermal_energy: f64) -> Result<f64> {
    crate::error::ensure_finite(x, "position")?;
    check_duty(d_old)?;
    check_duty(d_new)?;
    let du = params.effective_energy_unchecked(x, d_new) - params.effective_energy_unchecked(x, d_old);
    Ok(du / thermal_energy)
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Generalized Landauer bound ln2 + p ln p + (1−p) ln(1−p), in k_BT.
pub fn glb(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("probability", format!("{p} outside [0, 1]")));
    }
    Ok(LN_2 + xlnx(p) + xlnx(1.0 - p))
}

/// Lower bound on the mean feedback work, glb(p) − I, in k_BT. May be negative.
pub fn feedback_bound(mutual_information: f64, p: f64) -> Result<f64> {
    if !(mutual_information.is_finite() && mutual_information >= 0.0) {
        return Err(Error::invalid("mutual information", format!("{mutual_information} must be >= 0")));
    }
    Ok(glb(p)? - mutual_information)
}

/// Largest work deficit below ln2 allowed by the feedback bound,
/// ln2 − glb(p) + I. Equals I exactly for p = 1.
pub fn max_deficit(mutual_information: f64, p: f64) -> Result<f64> {
    feedback_bound(mutual_information, p)?;
    Ok((LN_2 - glb(p)?) + mutual_information)
}

/// Second-law check of the feedback phase. All energies in k_BT, I in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    #[serde(rename = "mean_W_fb")]
    pub mean_w_fb: f64,
    #[serde(rename = "se_W_fb")]
    pub se_w_fb: f64,
    #[serde(rename = "delta_F_particle")]
    pub delta_f_particle: f64,
    #[serde(rename = "I")]
    pub mutual_information: f64,
    pub bound_fb: f64,
    /// Minimum of ⟨W_meas⟩ + ⟨W_res⟩: the sensor free-energy terms cancel, leaving k_BT·I.
    pub bound_meas_plus_reset: f64,
    pub slack_fb: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerCheck {
    pub report: LedgerReport,
    pub p_hat: f64,
    /// Whether the observed success rate reaches `p_target`.
    pub admissible: bool,
}

pub const MIN_LEDGER_RUNS: usize = 30;

/// Mean and standard error of the mean.
pub(crate) fn mean_and_se(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Checks ⟨W_fb⟩ ≥ ΔF_particle − I over an ensemble, with ΔF_particle taken
/// as glb(p̂) for the observed success rate p̂.
pub fn ledger_check(runs: &[ErasureRun], mutual_information: f64, p_target: f64) -> Result<LedgerCheck> {
    if runs.len() < MIN_LEDGER_RUNS {
        return Err(Error::InsufficientData(format!(
            "{} runs, the ledger needs at least {MIN_LEDGER_RUNS}",
            runs.len()
        )));
    }
    if !(0.0..=1.0).contains(&p_target) {
        return Err(Error::invalid("p_target", format!("{p_target} outside [0, 1]")));
    }
    let (mean, se) = mean_and_se(runs.iter().map(|r| r.w_total));
    let p_hat = runs.iter().filter(|r| r.success).count() as f64 / runs.len() as f64;
    let delta_f = glb(p_hat)?;
    let bound = feedback_bound(mutual_information, p_hat)?;
    let slack = mean - bound;
    Ok(LedgerCheck {
        report: LedgerReport {
            mean_w_fb: mean,
            se_w_fb: se,
            delta_f_particle: delta_f,
            mutual_information,
            bound_fb: bound,
            bound_meas_plus_reset: mutual_information,
            slack_fb: slack,
            satisfied: slack > -2.0 * se,
        },
        p_hat,
        admissible: p_hat >= p_target,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::measurement::Action;
    use crate::potential::Well;
    use crate::units::thermal_energy;

    fn kt() -> f64 {
        thermal_energy(300.0)
    }

    #[test]
    fn switch_work_examples() {
        let p = PotentialParams::default();
        assert_eq!(switch_work(123.0, 0.6, 0.6, &p, kt()).unwrap(), 0.0);
        let w = switch_work(550.0, 0.5, 0.7, &p, kt()).unwrap();
        assert_abs_diff_eq!(w, 0.2 * 68.90625 / kt(), epsilon = 1e-12);
        assert_abs_diff_eq!(w, 3.3272, epsilon = 1e-4);
        assert_eq!(switch_work(0.0, 0.5, 0.85, &p, kt()).unwrap(), 0.0);
    }

    #[test]
    fn glb_examples() {
        assert_eq!(glb(1.0).unwrap(), LN_2);
        assert_eq!(glb(0.0).unwrap(), LN_2);
        assert_eq!(glb(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(glb(0.95).unwrap(), 0.4946319, epsilon = 1e-6);
        // within 29 % of the Landauer limit
        assert!(glb(0.95).unwrap() / LN_2 > 0.71);
        assert!(glb(1.01).is_err());
    }

    #[test]
    fn feedback_bound_examples() {
        assert_eq!(feedback_bound(0.0, 1.0).unwrap(), LN_2);
        assert_abs_diff_eq!(feedback_bound(0.6, 1.0).unwrap(), 0.0931472, epsilon = 1e-6);
        assert_abs_diff_eq!(feedback_bound(0.6, 0.95).unwrap(), -0.1053681, epsilon = 1e-6);
        assert!(feedback_bound(-0.1, 1.0).is_err());
    }

    #[test]
    fn deficit_at_bound_is_the_information() {
        for i in [0.0, 0.1, 0.6, 0.612826, 2.5] {
            assert_eq!(max_deficit(i, 1.0).unwrap(), i);
        }
        assert_abs_diff_eq!(max_deficit(0.6, 0.95).unwrap(), LN_2 - feedback_bound(0.6, 0.95).unwrap(), epsilon = 1e-15);
    }

    fn run(w: f64, success: bool) -> ErasureRun {
        ErasureRun {
            run_id: 0,
            duty: 0.7,
            sigma_n: Some(300.0),
            initial_well: Well::Left,
            x_at_tm: -550.0,
            m: Some(-550.0),
            action: if w == 0.0 { Action::NoAction } else { Action::Act },
            w1: 0.0,
            w2: 0.0,
            w_total: w,
            x_final: if success { -550.0 } else { 550.0 },
            success,
        }
    }

    #[test]
    fn ledger_quasistatic_endpoint() {
        // ⟨W⟩ = 0.58, I = 0.6, p̂ = 1
        let runs: Vec<_> = (0..100).map(|_| run(0.58, true)).collect();
        let check = ledger_check(&runs, 0.6, 0.95).unwrap();
        let r = check.report;
        assert_abs_diff_eq!(r.mean_w_fb, 0.58, epsilon = 1e-12);
        assert_abs_diff_eq!(r.slack_fb, 0.58 - (LN_2 - 0.6), epsilon = 1e-12);
        assert_abs_diff_eq!(r.slack_fb, 0.4869, epsilon = 1e-4);
        assert!(r.satisfied);
        assert!(check.admissible);
        assert_eq!(r.bound_meas_plus_reset, 0.6);
    }

    #[test]
    fn ledger_vacuous_bound() {
        let runs: Vec<_> = (0..60).map(|i| run(0.0, i % 2 == 0)).collect();
        let check = ledger_check(&runs, 0.6, 0.95).unwrap();
        assert_eq!(check.p_hat, 0.5);
        assert_abs_diff_eq!(check.report.bound_fb, -0.6, epsilon = 1e-15);
        assert!(check.report.satisfied);
        assert!(!check.admissible);
    }

    #[test]
    fn ledger_needs_thirty_runs() {
        let runs: Vec<_> = (0..29).map(|_| run(1.0, true)).collect();
        assert!(ledger_check(&runs, 0.6, 0.95).is_err());
    }

    #[test]
    fn ledger_json_field_names() {
        let runs: Vec<_> = (0..30).map(|_| run(1.0, true)).collect();
        let json = serde_json::to_value(ledger_check(&runs, 0.6, 0.95).unwrap().report).unwrap();
        let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["I", "bound_fb", "bound_meas_plus_reset", "delta_F_particle", "mean_W_fb", "satisfied", "se_W_fb", "slack_fb"]
        );
    }

    proptest! {
        #[test]
        fn switch_work_antisymmetric(x in -1500.0f64..1500.0, a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let p = PotentialParams::default();
            let fwd = switch_work(x, a, b, &p, kt()).unwrap();
            let back = switch_work(x, b, a, &p, kt()).unwrap();
            prop_assert!((fwd + back).abs() < 1e-9);
            // closed cycle at fixed x
            let round = switch_work(x, 0.5, a, &p, kt()).unwrap() + switch_work(x, a, 0.5, &p, kt()).unwrap();
            prop_assert!(round.abs() < 1e-9);
        }

        #[test]
        fn glb_shape(p in 0.5f64..1.0, q in 0.0f64..1.0, t in 0.0f64..1.0) {
            let g = glb(p).unwrap();
            prop_assert!(g <= LN_2 + 1e-15);
            prop_assert!(glb((p + 1e-3).min(1.0)).unwrap() >= g);
            prop_assert!((glb(1.0 - q).unwrap() - glb(q).unwrap()).abs() < 1e-12);
            // ln2 − H(p) is convex
            let mid = glb(t * p + (1.0 - t) * q).unwrap();
            prop_assert!(mid <= t * g + (1.0 - t) * glb(q).unwrap() + 1e-12);
        }
    }
}
