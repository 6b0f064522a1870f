//! Unit convention and physical constants.
//!
//! All energies are stored as `E/h` in MHz (ordinary frequencies), all times
//! in µs, all lengths in µm. Since MHz·µs = 1, the phase accumulated by an
//! energy `f` over a time `t` is `2π·f·t`. Velocities in µm/µs coincide with
//! m/s, which keeps the thermal kinematics free of conversion factors.
//!
//! Formulas quoted in ħ·(angular frequency) form are used with angular
//! frequencies replaced by ordinary ones; this is exact whenever the formula
//! is homogeneous of degree one in the energies involved, which holds for
//! every dressed-state expression in this crate.

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Atomic mass unit, kg.
pub const ATOMIC_MASS: f64 = 1.660_539_068_92e-27;

/// Standard gravity in µm/µs² (= 9.80665 m/s² · 1e-6).
pub const GRAVITY: f64 = 9.806_65e-6;

/// Mass of ¹³³Cs in atomic mass units.
pub const CS_MASS_AMU: f64 = 132.905_451_96;

/// Ground-state hyperfine splitting of ¹³³Cs in GHz.
///
/// Documentation constant only: the dynamics module works in the rotating
/// frame of the microwave drive, so this splitting never enters a
/// Hamiltonian.
pub const CS_CLOCK_SPLITTING_GHZ: f64 = 9.192_631_77;

/// Default wavelength of the Rydberg dressing laser, nm.
pub const DRESSING_WAVELENGTH_NM: f64 = 319.0;

/// Default wavelength of the tweezer (trap) laser, nm.
pub const TRAP_WAVELENGTH_NM: f64 = 938.0;

/// Thermal rms velocity along one axis, in µm/µs (equivalently m/s).
pub fn thermal_velocity(temperature_uk: f64, mass_amu: f64) -> f64 {
    (BOLTZMANN * temperature_uk * 1e-6 / (mass_amu * ATOMIC_MASS)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_velocity_scales_as_sqrt_t() {
        let v1 = thermal_velocity(20.0, CS_MASS_AMU);
        let v4 = thermal_velocity(80.0, CS_MASS_AMU);
        assert!((v4 / v1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cesium_at_20_uk_moves_at_a_few_cm_per_s() {
        let v = thermal_velocity(20.0, CS_MASS_AMU);
        assert!(v > 0.03 && v < 0.04, "v = {v}");
    }
}
