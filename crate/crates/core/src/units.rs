//! Physical constants in the pN·nm unit system.

/// Boltzmann constant in pN·nm/K (1.380649e-23 J/K, 1 J = 1e21 pN·nm).
pub const BOLTZMANN_PN_NM_PER_K: f64 = 1.380649e-2;

/// k_BT in pN·nm.
#[inline]
pub fn thermal_energy(temperature_k: f64) -> f64 {
    BOLTZMANN_PN_NM_PER_K * temperature_k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_temperature() {
        assert!((thermal_energy(300.0) - 4.141947).abs() < 1e-6);
    }
}
