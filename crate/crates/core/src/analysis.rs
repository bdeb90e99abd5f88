//! Ensemble statistics, work histograms and the quasistatic extrapolation
//! ⟨W⟩(d) = A + B·exp(−0.99/(d − 0.5))/√(d − 0.5) by weighted least squares.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::energetics::mean_and_se;
use crate::error::{Error, Result};
use crate::protocol::{ErasureRun, ESCAPE_EXPONENT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub d: f64,
    /// `None` for open-loop ensembles.
    pub sigma_n: Option<f64>,
    pub n_runs: usize,
    /// k_BT
    pub mean_w: f64,
    pub se_w: f64,
    pub p_hat: f64,
    pub se_p: f64,
    /// Fraction of runs with exactly zero work.
    pub zero_mass: f64,
}

pub fn aggregate(runs: &[ErasureRun]) -> Result<EnsembleStats> {
    let first = match runs {
        [] | [_] => {
            return Err(Error::InsufficientData(format!(
                "{} runs, aggregation needs at least 2",
                runs.len()
            )))
        }
        [first, ..] => first,
    };
    if let Some(odd) = runs.iter().find(|r| r.duty != first.duty || r.sigma_n != first.sigma_n) {
        return Err(Error::invalid(
            "ensemble",
            format!(
                "mixed parameters: run {} has (d, σ_n) = ({}, {:?}), run {} has ({}, {:?})",
                first.run_id, first.duty, first.sigma_n, odd.run_id, odd.duty, odd.sigma_n
            ),
        ));
    }
    let n = runs.len() as f64;
    let (mean_w, se_w) = mean_and_se(runs.iter().map(|r| r.w_total));
    let p_hat = runs.iter().filter(|r| r.success).count() as f64 / n;
    let zero_mass = runs.iter().filter(|r| r.w_total == 0.0).count() as f64 / n;
    Ok(EnsembleStats {
        d: first.duty,
        sigma_n: first.sigma_n,
        n_runs: runs.len(),
        mean_w,
        se_w,
        p_hat,
        se_p: (p_hat * (1.0 - p_hat) / n).sqrt(),
        zero_mass,
    })
}

/// Work distribution with the exactly-zero runs held in a separate atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkHistogram {
    pub bin_width: f64,
    pub zero_mass: f64,
    /// (lower edge, probability mass) of every occupied bin, ascending.
    pub bins: Vec<(f64, f64)>,
}

impl WorkHistogram {
    pub fn total_mass(&self) -> f64 {
        self.zero_mass + self.bins.iter().map(|(_, m)| m).sum::<f64>()
    }
}

pub fn work_histogram(runs: &[ErasureRun], bin_width: f64) -> Result<WorkHistogram> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::invalid("bin_width", format!("{bin_width} must be > 0")));
    }
    if runs.is_empty() {
        return Err(Error::InsufficientData("no runs".into()));
    }
    let n = runs.len() as f64;
    let mut zeros = 0usize;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for r in runs {
        if r.w_total == 0.0 {
            zeros += 1;
        } else {
            *counts.entry((r.w_total / bin_width).floor() as i64).or_default() += 1;
        }
    }
    Ok(WorkHistogram {
        bin_width,
        zero_mass: zeros as f64 / n,
        bins: counts
            .into_iter()
            .map(|(k, c)| (k as f64 * bin_width, c as f64 / n))
            .collect(),
    })
}

/// Regressor g(d) = exp(−0.99/(d − 0.5)) / √(d − 0.5) of the work model.
pub fn work_regressor(d: f64) -> f64 {
    let e = d - 0.5;
    (-ESCAPE_EXPONENT / e).exp() / e.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Quasistatic limit of the mean feedback work, k_BT.
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Covariance of (A, B), k_BT².
    pub cov: [[f64; 2]; 2],
    pub chi2: f64,
    pub dof: usize,
}

impl FitResult {
    pub fn predict(&self, d: f64) -> f64 {
        self.a + self.b * work_regressor(d)
    }

    pub fn se_a(&self) -> f64 {
        self.cov[0][0].sqrt()
    }

    pub fn se_b(&self) -> f64 {
        self.cov[1][1].sqrt()
    }

    /// Mahalanobis distance² of (a, b) from the estimate.
    pub fn mahalanobis2(&self, a: f64, b: f64) -> f64 {
        let [[caa, cab], [_, cbb]] = self.cov;
        let det = caa * cbb - cab * cab;
        let (da, db) = (a - self.a, b - self.b);
        (cbb * da * da - 2.0 * cab * da * db + caa * db * db) / det
    }

    /// Whether (a, b) lies in the joint confidence ellipse at `level`.
    pub fn ellipse_contains(&self, a: f64, b: f64, level: f64) -> bool {
        // χ² quantile with two degrees of freedom
        let threshold = -2.0 * (1.0 - level).ln();
        self.mahalanobis2(a, b) <= threshold
    }
}

/// Weighted least squares for (A, B) with weights 1/se_W².
pub fn fit_work_model(points: &[EnsembleStats]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points, the fit needs at least 3", points.len())));
    }
    for p in points {
        if !(p.d > 0.5 && p.d < 1.0) {
            return Err(Error::invalid("d", format!("{} outside (0.5, 1)", p.d)));
        }
        if !(p.se_w.is_finite() && p.se_w > 0.0) {
            return Err(Error::invalid("se_W", format!("{} at d = {} must be > 0", p.se_w, p.d)));
        }
    }
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let w = 1.0 / (p.se_w * p.se_w);
        let g = work_regressor(p.d);
        s0 += w;
        s1 += w * g;
        s2 += w * g * g;
        t0 += w * p.mean_w;
        t1 += w * g * p.mean_w;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det.is_finite() && det > 1e-12 * s0 * s2) {
        return Err(Error::Singular(
            "normal equations are singular; the duty ratios must differ".into(),
        ));
    }
    let cov = [[s2 / det, -s1 / det], [-s1 / det, s0 / det]];
    let a = cov[0][0] * t0 + cov[0][1] * t1;
    let b = cov[1][0] * t0 + cov[1][1] * t1;
    let chi2 = points
        .iter()
        .map(|p| ((p.mean_w - a - b * work_regressor(p.d)) / p.se_w).powi(2))
        .sum();
    Ok(FitResult {
        a,
        b,
        cov,
        chi2,
        dof: points.len() - 2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    /// ln2 − A, k_BT.
    pub deficit: f64,
    pub se_deficit: f64,
    #[serde(rename = "I")]
    pub mutual_information: f64,
    /// deficit − I.
    pub difference: f64,
    /// |deficit − I| ≤ 2·SE(A).
    pub consistent: bool,
}

pub fn deficit_report(fit: &FitResult, mutual_information: f64) -> DeficitReport {
    let deficit = LN_2 - fit.a;
    let se = fit.se_a();
    let difference = deficit - mutual_information;
    DeficitReport {
        deficit,
        se_deficit: se,
        mutual_information,
        difference,
        consistent: difference.abs() <= 2.0 * se,
    }
}
