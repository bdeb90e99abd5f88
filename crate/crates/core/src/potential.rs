//! Capped-quadratic trap potentials.
//!
//! A single optical trap is harmonic out to a cut-off width `w` and flat
//! beyond it. Two such traps at ±L, time-multiplexed with a duty ratio `d`,
//! form the memory's double well. Because the multiplexing period is far
//! below the particle's relaxation time, the particle sees the duty-weighted
//! average `d·U_left + (1−d)·U_right`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::units::thermal_energy;

/// Which trap site (and which memory state) is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Well {
    /// Laser flag r = 0, trap center at −L, logical 0 (reset state).
    Left,
    /// Laser flag r = 1, trap center at +L, logical 1.
    Right,
}

impl Well {
    pub fn from_flag(r: u8) -> Result<Self> {
        match r {
            0 => Ok(Well::Left),
            1 => Ok(Well::Right),
            other => Err(Error::invalid("laser flag", format!("{other} is not 0 or 1"))),
        }
    }

    pub fn flag(self) -> u8 {
        match self {
            Well::Left => 0,
            Well::Right => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Well::Left => "left",
            Well::Right => "right",
        }
    }
}

/// Shape of each well on the side facing away from the other well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OuterFlank {
    /// The harmonic branch continues for |x| > L: only the inner side is capped.
    #[default]
    Confining,
    /// Capped on both sides, exactly as for an isolated trap.
    Plateau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    /// Trap stiffness k in pN/nm.
    pub stiffness: f64,
    /// Harmonic half-width w in nm.
    pub half_width: f64,
    /// Half-separation L of the two trap centers in nm.
    pub half_separation: f64,
    /// Reference energy U_r in pN·nm.
    pub offset: f64,
    pub outer_flank: OuterFlank,
}

impl Default for PotentialParams {
    fn default() -> Self {
        Self {
            stiffness: 0.0045,
            half_width: 175.0,
            half_separation: 550.0,
            offset: 0.0,
            outer_flank: OuterFlank::Confining,
        }
    }
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        let Self {
            stiffness: k,
            half_width: w,
            half_separation: l,
            offset,
            ..
        } = *self;
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid("stiffness", format!("k = {k} must be > 0")));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::invalid("half_width", format!("w = {w} must be > 0")));
        }
        if !(l.is_finite() && l > w) {
            return Err(Error::invalid(
                "half_separation",
                format!("L = {l} must exceed w = {w} so the wells do not overlap"),
            ));
        }
        ensure_finite(offset, "offset")?;
        Ok(())
    }

    /// Height of the flat plateau above a well bottom, ½kw² (pN·nm).
    #[inline]
    pub fn plateau_height(&self) -> f64 {
        0.5 * self.stiffness * self.half_width * self.half_width
    }

    #[inline]
    pub fn center(&self, well: Well) -> f64 {
        match well {
            Well::Left => -self.half_separation,
            Well::Right => self.half_separation,
        }
    }

    /// Whether `x` lies on the harmonic branch of `well`. Seams belong to
    /// the harmonic branch.
    #[inline]
    fn on_branch(&self, x: f64, well: Well) -> bool {
        let u = x - self.center(well);
        if u.abs() <= self.half_width {
            return true;
        }
        match (self.outer_flank, well) {
            (OuterFlank::Plateau, _) => false,
            (OuterFlank::Confining, Well::Left) => u < 0.0,
            (OuterFlank::Confining, Well::Right) => u > 0.0,
        }
    }

    /// Energy of one trap without the offset.
    #[inline]
    pub(crate) fn well_energy(&self, x: f64, well: Well) -> f64 {
        if self.on_branch(x, well) {
            let u = x - self.center(well);
            0.5 * self.stiffness * u * u
        } else {
            self.plateau_height()
        }
    }

    #[inline]
    pub(crate) fn well_force(&self, x: f64, well: Well) -> f64 {
        if self.on_branch(x, well) {
            -self.stiffness * (x - self.center(well))
        } else {
            0.0
        }
    }

    #[inline]
    pub(crate) fn effective_energy_unchecked(&self, x: f64, duty: f64) -> f64 {
        duty * self.well_energy(x, Well::Left)
            + (1.0 - duty) * self.well_energy(x, Well::Right)
            + self.offset
    }

    #[inline]
    pub(crate) fn effective_force_unchecked(&self, x: f64, duty: f64) -> f64 {
        duty * self.well_force(x, Well::Left) + (1.0 - duty) * self.well_force(x, Well::Right)
    }

    #[inline]
    pub(crate) fn single_well_force_unchecked(&self, x: f64) -> f64 {
        if x.abs() <= self.half_width {
            -self.stiffness * x
        } else {
            0.0
        }
    }
}

pub(crate) fn check_duty(duty: f64) -> Result<f64> {
    if duty.is_finite() && duty > 0.0 && duty < 1.0 {
        Ok(duty)
    } else {
        Err(Error::invalid("duty ratio", format!("d = {duty} outside (0, 1)")))
    }
}

/// Isolated trap at the origin: ½kx² + U_r inside |x| ≤ w, ½kw² + U_r outside.
pub fn single_well_energy(x: f64, params: &PotentialParams) -> Result<f64> {
    ensure_finite(x, "position")?;
    let k = params.stiffness;
    let u = if x.abs() <= params.half_width {
        0.5 * k * x * x
    } else {
        params.plateau_height()
    };
    Ok(u + params.offset)
}

pub fn single_well_force(x: f64, params: &PotentialParams) -> Result<f64> {
    ensure_finite(x, "position")?;
    Ok(params.single_well_force_unchecked(x))
}

/// Instantaneous energy with the laser parked at `site`.
pub fn bistable_energy(x: f64, site: Well, params: &PotentialParams) -> Result<f64> {
    ensure_finite(x, "position")?;
    Ok(params.well_energy(x, site) + params.offset)
}

pub fn bistable_force(x: f64, site: Well, params: &PotentialParams) -> Result<f64> {
    ensure_finite(x, "position")?;
    Ok(params.well_force(x, site))
}

/// Duty-averaged potential U_eff(x, d) = d·U_left + (1−d)·U_right.
pub fn effective_energy(x: f64, duty: f64, params: &PotentialParams) -> Result<f64> {
    ensure_finite(x, "position")?;
    check_duty(duty)?;
    Ok(params.effective_energy_unchecked(x, duty))
}

/// −∂U_eff/∂x. Exactly zero on the plateau.
pub fn effective_force(x: f64, duty: f64, params: &PotentialParams) -> Result<f64> {
    ensure_finite(x, "position")?;
    check_duty(duty)?;
    Ok(params.effective_force_unchecked(x, duty))
}

/// Uniformly binned position counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionHistogram {
    pub lower: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl PositionHistogram {
    pub fn new(lower: f64, upper: f64, bins: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) || bins == 0 {
            return Err(Error::invalid(
                "histogram range",
                format!("[{lower}, {upper}) with {bins} bins"),
            ));
        }
        Ok(Self {
            lower,
            bin_width: (upper - lower) / bins as f64,
            counts: vec![0; bins],
        })
    }

    pub fn upper(&self) -> f64 {
        self.lower + self.bin_width * self.counts.len() as f64
    }

    /// Adds a sample; samples outside the range are dropped and reported as `false`.
    pub fn add(&mut self, x: f64) -> bool {
        let idx = ((x - self.lower) / self.bin_width).floor();
        if idx >= 0.0 && (idx as usize) < self.counts.len() {
            self.counts[idx as usize] += 1;
            true
        } else {
            false
        }
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, samples: I) {
        for x in samples {
            self.add(x);
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lower + (i as f64 + 0.5) * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin probabilities (counts / total).
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Adds another histogram with identical binning.
    pub fn merge(&mut self, other: &PositionHistogram) -> Result<()> {
        if self.counts.len() != other.counts.len()
            || self.lower != other.lower
            || self.bin_width != other.bin_width
        {
            return Err(Error::invalid("histogram", "binning mismatch"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialCurve {
    /// Bin centers in nm, strictly increasing.
    pub grid: Vec<f64>,
    /// Energy in pN·nm; `None` where the bin was empty.
    pub values: Vec<Option<f64>>,
    /// The constant C in U = −k_BT ln(P/C); equals the largest bin probability.
    pub normalization: f64,
}

impl PotentialCurve {
    /// Present (x, U) pairs only.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .zip(&self.values)
            .filter_map(|(&x, u)| u.map(|u| (x, u)))
    }

    /// CSV with header `x_nm,U_pNnm`; empty bins are omitted.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x_nm,U_pNnm")?;
        for (x, u) in self.points() {
            writeln!(
                out,
                "{},{}",
                crate::io::format_float(x),
                crate::io::format_float(u)
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufWriter::new(file);
        self.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
        buf.flush().map_err(|e| Error::io(path, e))
    }
}

/// Boltzmann inversion U_i = −k_BT ln(P_i / C), with C chosen so that the
/// lowest reconstructed energy is zero.
pub fn reconstruct_potential(histogram: &PositionHistogram, temperature_k: f64) -> Result<PotentialCurve> {
    if !(temperature_k.is_finite() && temperature_k > 0.0) {
        return Err(Error::invalid("temperature", format!("{temperature_k} K")));
    }
    if histogram.total() == 0 {
        return Err(Error::InsufficientData("histogram has no counts".into()));
    }
    let kt = thermal_energy(temperature_k);
    let probs = histogram.probabilities();
    let c = probs.iter().cloned().fold(0.0, f64::max);
    let values = probs
        .iter()
        .map(|&p| (p > 0.0).then(|| -kt * (p / c).ln()))
        .collect();
    Ok(PotentialCurve {
        grid: (0..probs.len()).map(|i| histogram.center(i)).collect(),
        values,
        normalization: c,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn defaults() -> PotentialParams {
        PotentialParams::default()
    }

    #[test]
    fn single_well_examples() {
        let p = defaults();
        assert_eq!(single_well_energy(0.0, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(single_well_energy(175.0, &p).unwrap(), 68.90625, epsilon = 1e-12);
        assert_abs_diff_eq!(single_well_energy(500.0, &p).unwrap(), 68.90625, epsilon = 1e-12);
        assert!(single_well_energy(f64::NAN, &p).is_err());
        assert!(single_well_energy(f64::INFINITY, &p).is_err());
    }

    #[test]
    fn bistable_examples() {
        let p = defaults();
        assert_eq!(bistable_energy(550.0, Well::Right, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(bistable_energy(-550.0, Well::Right, &p).unwrap(), 68.90625, epsilon = 1e-12);
        assert_eq!(bistable_energy(-550.0, Well::Left, &p).unwrap(), 0.0);
    }

    #[test]
    fn effective_examples() {
        let p = defaults();
        let left = effective_energy(-550.0, 0.5, &p).unwrap();
        assert_abs_diff_eq!(left, 34.453125, epsilon = 1e-12);
        assert_eq!(left, effective_energy(550.0, 0.5, &p).unwrap());
        assert_abs_diff_eq!(effective_energy(-550.0, 0.7, &p).unwrap(), 0.3 * 68.90625, epsilon = 1e-9);
        for d in [0.1, 0.5, 0.7, 0.95] {
            assert_abs_diff_eq!(effective_energy(0.0, d, &p).unwrap(), 68.90625, epsilon = 1e-12);
        }
        assert!(effective_energy(0.0, 1.0, &p).is_err());
        assert!(effective_energy(0.0, 0.0, &p).is_err());
    }

    #[test]
    fn well_bottoms_follow_duty() {
        let p = PotentialParams { offset: 2.0, ..defaults() };
        let h = p.plateau_height();
        assert_abs_diff_eq!(effective_energy(-550.0, 0.8, &p).unwrap(), 0.2 * h + 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(effective_energy(550.0, 0.8, &p).unwrap(), 0.8 * h + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn force_examples() {
        let p = defaults();
        for d in [0.3, 0.5, 0.9] {
            assert_eq!(effective_force(-550.0, d, &p).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(effective_force(-500.0, 0.5, &p).unwrap(), -0.1125, epsilon = 1e-15);
        assert_eq!(effective_force(0.0, 0.7, &p).unwrap(), 0.0);
    }

    #[test]
    fn outer_flank_choice() {
        let confining = defaults();
        let literal = PotentialParams { outer_flank: OuterFlank::Plateau, ..defaults() };
        // beyond the outer seam
        let x = 550.0 + 300.0;
        assert_abs_diff_eq!(confining.well_energy(x, Well::Right), 0.5 * 0.0045 * 300.0 * 300.0, epsilon = 1e-9);
        assert_eq!(literal.well_energy(x, Well::Right), literal.plateau_height());
        assert!(effective_force(x, 0.5, &confining).unwrap() < 0.0);
        assert_eq!(effective_force(x, 0.5, &literal).unwrap(), 0.0);
        // the inner side is capped for both
        assert_eq!(confining.well_energy(0.0, Well::Right), confining.plateau_height());
    }

    #[test]
    fn params_validation() {
        assert!(defaults().validate().is_ok());
        assert!(PotentialParams { stiffness: 0.0, ..defaults() }.validate().is_err());
        assert!(PotentialParams { half_width: -1.0, ..defaults() }.validate().is_err());
        assert!(PotentialParams { half_separation: 175.0, ..defaults() }.validate().is_err());
        assert!(Well::from_flag(2).is_err());
    }

    #[test]
    fn reconstruction_uniform_is_flat() {
        let h = PositionHistogram { lower: 0.0, bin_width: 1.0, counts: vec![10, 10] };
        let curve = reconstruct_potential(&h, 300.0).unwrap();
        assert_eq!(curve.values, vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn reconstruction_inverts_boltzmann_weight() {
        // P ∝ [e^-1, 1]; counts scaled large so the ratio is exact to 1e-9
        let big = 1e12;
        let counts = vec![(big * (-1f64).exp()).round() as u64, big as u64];
        let h = PositionHistogram { lower: 0.0, bin_width: 1.0, counts };
        let curve = reconstruct_potential(&h, 300.0).unwrap();
        let kt = thermal_energy(300.0);
        assert_abs_diff_eq!(curve.values[0].unwrap() / kt, 1.0, epsilon = 1e-9);
        assert_eq!(curve.values[1], Some(0.0));
    }

    #[test]
    fn reconstruction_marks_empty_bins_missing() {
        let h = PositionHistogram { lower: 0.0, bin_width: 1.0, counts: vec![5, 0, 5] };
        let curve = reconstruct_potential(&h, 300.0).unwrap();
        assert_eq!(curve.values[1], None);
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap(), "x_nm,U_pNnm");
    }

    #[test]
    fn reconstruction_rejects_empty() {
        let h = PositionHistogram::new(0.0, 1.0, 4).unwrap();
        assert!(reconstruct_potential(&h, 300.0).is_err());
    }

    proptest! {
        #[test]
        fn continuous_at_seams(k in 1e-4f64..0.05, w in 10.0f64..300.0, extra in 1.0f64..400.0, d in 0.01f64..0.99) {
            let p = PotentialParams { stiffness: k, half_width: w, half_separation: w + extra, offset: 0.0, outer_flank: OuterFlank::Plateau };
            let eps = 1e-7;
            let jump = (single_well_energy(w - eps, &p).unwrap() - single_well_energy(w + eps, &p).unwrap()).abs();
            prop_assert!(jump < 1e-6 * p.plateau_height().max(1.0));
            let l = p.half_separation;
            for seam in [-l - w, -l + w, l - w, l + w] {
                let a = effective_energy(seam - eps, d, &p).unwrap();
                let b = effective_energy(seam + eps, d, &p).unwrap();
                prop_assert!((a - b).abs() < 1e-6 * p.plateau_height().max(1.0));
            }
        }

        #[test]
        fn symmetric_at_half_duty(x in -2000.0f64..2000.0) {
            let p = defaults();
            let a = effective_energy(x, 0.5, &p).unwrap();
            let b = effective_energy(-x, 0.5, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn tilt_is_monotone(d1 in 0.01f64..0.98, delta in 1e-3f64..0.01) {
            let p = defaults();
            let d2 = (d1 + delta).min(0.999);
            prop_assert!(effective_energy(-550.0, d2, &p).unwrap() < effective_energy(-550.0, d1, &p).unwrap());
            prop_assert!(effective_energy(550.0, d2, &p).unwrap() > effective_energy(550.0, d1, &p).unwrap());
        }

        #[test]
        fn force_matches_finite_difference(x in -1500.0f64..1500.0, d in 0.05f64..0.95) {
            let p = defaults();
            let h = 1e-4;
            let seams = [-725.0, -375.0, 375.0, 725.0];
            prop_assume!(seams.iter().all(|s| (x - s).abs() > 10.0 * h));
            let fd = -(effective_energy(x + h, d, &p).unwrap() - effective_energy(x - h, d, &p).unwrap()) / (2.0 * h);
            prop_assert!((fd - effective_force(x, d, &p).unwrap()).abs() < 1e-6);
        }
    }
}
