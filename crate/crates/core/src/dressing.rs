//! Dressed-state energies, amplitudes, and the two-atom interaction `J`.
//!
//! A laser of Rabi frequency `Ω` couples the qubit state `|0⟩` to a Rydberg
//! level `|r⟩` at detuning `Δ` (blue positive). In the rotating frame the
//! single atom is the 2×2 problem `[[0, Ω/2], [Ω/2, -Δ]]`; the eigenstate
//! adiabatically connected to the bare ground state is the *dressed ground
//! state* and its eigenvalue is the single-atom light shift.
//!
//! For two atoms the symmetric subspace `{|00⟩, (|0r⟩+|r0⟩)/√2, |rr⟩}`
//! carries the same structure with √2-enhanced couplings and a pair shift
//! `u_dd` on `|rr⟩`. The interaction strength is defined as
//!
//! ```text
//! J = ΔE⁽²⁾ - 2 ΔE⁽¹⁾
//! ```
//!
//! i.e. the failure of the two-atom light shift to be twice the single-atom
//! one. When `|u_dd|` dominates every drive scale the doubly excited state
//! decouples and `J` plateaus at the closed form implemented by
//! [`j_perfect_blockade`]; at finite `u_dd` the 3×3 problem is solved
//! numerically with adiabatic branch tracking.
//!
//! All energies are `E/h` in MHz (see [`crate::units`]).

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairpotential::{PairPotentialModel, PairShift};
use crate::units;

/// The 319-nm dressing drive (also reused for the resonant-excitation pulses
/// of the lifetime measurement, where `detuning = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserDrive {
    /// Rabi frequency Ω/2π in MHz. Nonnegative.
    pub rabi_freq: f64,
    /// Detuning Δ/2π in MHz, signed; blue is positive.
    pub detuning: f64,
    /// Wavelength in nm. Only the Doppler model consumes it.
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
}

fn default_wavelength() -> f64 {
    units::DRESSING_WAVELENGTH_NM
}

impl LaserDrive {
    pub fn new(rabi_freq: f64, detuning: f64) -> Result<Self> {
        let drive = Self {
            rabi_freq,
            detuning,
            wavelength: units::DRESSING_WAVELENGTH_NM,
        };
        drive.validate()?;
        Ok(drive)
    }

    pub fn with_wavelength(mut self, wavelength: f64) -> Result<Self> {
        self.wavelength = wavelength;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rabi_freq.is_finite() || self.rabi_freq < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "drive rabi_freq must be finite and nonnegative, got {}",
                self.rabi_freq
            )));
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("drive detuning must be finite".into()));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "drive wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }

    /// Rejects the `Δ = 0, Ω > 0` point where the two dressed branches are
    /// symmetric superpositions and no ground-connected branch exists.
    fn require_branch(&self) -> Result<()> {
        self.validate()?;
        if self.detuning == 0.0 && self.rabi_freq > 0.0 {
            return Err(Error::DegenerateBranch);
        }
        Ok(())
    }
}

/// Dressed energies and amplitudes for one drive and one pair shift.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DressedSpectrum {
    /// Single-atom light shift ΔE⁽¹⁾/h in MHz.
    pub single_atom_shift: f64,
    /// Two-atom light shift ΔE⁽²⁾/h in MHz.
    pub two_atom_shift: f64,
    /// Interaction strength J/h in MHz, signed. Equals
    /// `two_atom_shift - 2·single_atom_shift` by construction.
    pub j: f64,
    /// |⟨0|dressed⟩|, in [0, 1].
    pub ground_amplitude: f64,
    /// |⟨r|dressed⟩|, in [0, 1].
    pub rydberg_amplitude: f64,
}

impl DressedSpectrum {
    pub fn compute(drive: &LaserDrive, shift: &PairShift) -> Result<Self> {
        let single = single_atom_light_shift(drive)?;
        let (ground_amplitude, rydberg_amplitude) = dressed_ground_amplitude(drive)?;
        let j = match shift {
            PairShift::Blockaded => j_perfect_blockade(drive)?,
            PairShift::Finite(u) => j_finite_blockade(drive, *u)?,
        };
        Ok(Self {
            single_atom_shift: single,
            two_atom_shift: j + 2.0 * single,
            j,
            ground_amplitude,
            rydberg_amplitude,
        })
    }
}

/// Light shift of the dressed ground state of a single atom, in MHz.
///
/// This is the eigenvalue branch of `[[0, Ω/2], [Ω/2, -Δ]]` that goes to 0
/// as Ω → 0: `(-Δ + sign(Δ)·√(Δ² + Ω²)) / 2`.
pub fn single_atom_light_shift(drive: &LaserDrive) -> Result<f64> {
    drive.require_branch()?;
    let (om, d) = (drive.rabi_freq, drive.detuning);
    if om == 0.0 {
        return Ok(0.0);
    }
    Ok((-d + d.signum() * (d * d + om * om).sqrt()) / 2.0)
}

/// Probability amplitudes (ground, Rydberg) of the dressed ground state.
///
/// The ground amplitude is `√[(Δ/√(Δ²+Ω²) + 1)/2]`, between `1/√2` at
/// maximal dressing and 1 with the drive off.
pub fn dressed_ground_amplitude(drive: &LaserDrive) -> Result<(f64, f64)> {
    drive.require_branch()?;
    let (om, d) = (drive.rabi_freq, drive.detuning);
    if om == 0.0 {
        return Ok((1.0, 0.0));
    }
    let ground = ((d / (d * d + om * om).sqrt() + 1.0) / 2.0).sqrt();
    let rydberg = (1.0 - ground * ground).max(0.0).sqrt();
    Ok((ground, rydberg))
}

/// Interaction strength in the perfect-blockade limit, in MHz:
///
/// ```text
/// J = ½·[Δ + sign(Δ)·(√(Δ² + 2Ω²) - 2√(Δ² + Ω²))]
/// ```
///
/// For blue detuning (Δ > 0) the result is nonpositive.
pub fn j_perfect_blockade(drive: &LaserDrive) -> Result<f64> {
    drive.require_branch()?;
    let (om, d) = (drive.rabi_freq, drive.detuning);
    if om == 0.0 {
        return Ok(0.0);
    }
    let s = d.signum();
    Ok(0.5 * (d + s * ((d * d + 2.0 * om * om).sqrt() - 2.0 * (d * d + om * om).sqrt())))
}

/// Number of Rabi-frequency steps used for adiabatic branch tracking.
const RAMP_STEPS: usize = 64;
/// An overlap below this between consecutive tracked eigenvectors means the
/// branch identity was lost.
const MIN_OVERLAP: f64 = 0.6;

/// Interaction strength at a finite pair shift `u_dd` (MHz), from the 3×3
/// symmetric-subspace Hamiltonian
///
/// ```text
///        |00⟩      S       |rr⟩           S = (|0r⟩+|r0⟩)/√2
/// ⎡       0      Ω/√2       0   ⎤
/// ⎢      Ω/√2     -Δ       Ω/√2 ⎥
/// ⎣       0      Ω/√2   -2Δ+u_dd⎦
/// ```
///
/// The eigenvalue adiabatically connected to the bare `|00⟩` state is found
/// by ramping Ω from zero and following the eigenvector of maximal overlap;
/// `J` is that eigenvalue minus twice the single-atom shift.
pub fn j_finite_blockade(drive: &LaserDrive, u_dd: f64) -> Result<f64> {
    drive.require_branch()?;
    if !u_dd.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "u_dd must be finite, got {u_dd}; use the perfect-blockade path for the plateau"
        )));
    }
    let (om, d) = (drive.rabi_freq, drive.detuning);
    if om == 0.0 {
        return Ok(0.0);
    }
    let pair = tracked_pair_energy(om, d, u_dd)?;
    Ok(pair - 2.0 * single_atom_light_shift(drive)?)
}

fn symmetric_hamiltonian(omega: f64, detuning: f64, u_dd: f64) -> Array2<f64> {
    let c = omega / std::f64::consts::SQRT_2;
    let mut h = Array2::zeros((3, 3));
    h[[0, 1]] = c;
    h[[1, 0]] = c;
    h[[1, 2]] = c;
    h[[2, 1]] = c;
    h[[1, 1]] = -detuning;
    h[[2, 2]] = -2.0 * detuning + u_dd;
    h
}

fn tracked_pair_energy(omega: f64, detuning: f64, u_dd: f64) -> Result<f64> {
    let scale = omega.abs().max(detuning.abs()).max(u_dd.abs()).max(1.0);
    let gap_tol = 1e-9 * scale.min(1e6);

    // A bare crossing of |rr⟩ with |00⟩ (u_dd = 2Δ) is the anti-blockade
    // resonance: the branch is not defined there.
    if (u_dd - 2.0 * detuning).abs() <= gap_tol {
        return Err(Error::BranchTracking {
            step: 0,
            overlap: 1.0,
        });
    }

    let mut tracked: Array1<f64> = Array1::from(vec![1.0, 0.0, 0.0]);
    let mut energy = 0.0;
    for step in 1..=RAMP_STEPS {
        let om_k = omega * step as f64 / RAMP_STEPS as f64;
        let (vals, vecs) = symmetric_hamiltonian(om_k, detuning, u_dd).eigh(UPLO::Lower)?;
        let mut best = 0;
        let mut best_ovl = -1.0;
        for i in 0..3 {
            let ovl = vecs.column(i).dot(&tracked).abs();
            if ovl > best_ovl {
                best_ovl = ovl;
                best = i;
            }
        }
        if best_ovl < MIN_OVERLAP {
            return Err(Error::BranchTracking {
                step,
                overlap: best_ovl,
            });
        }
        let min_gap = (0..3)
            .filter(|&i| i != best)
            .map(|i| (vals[i] - vals[best]).abs())
            .fold(f64::INFINITY, f64::min);
        if min_gap <= gap_tol {
            return Err(Error::BranchTracking {
                step,
                overlap: best_ovl,
            });
        }
        tracked = vecs.column(best).to_owned();
        energy = vals[best];
    }
    Ok(energy)
}

/// `J` as a function of interatomic distance for a pair-potential model.
///
/// Returns `(R, J)` pairs. The perfect-blockade model yields the constant
/// plateau; finite models flatten onto the plateau at small `R` and decay
/// toward zero at large `R`.
pub fn j_vs_r(
    drive: &LaserDrive,
    model: &PairPotentialModel,
    r_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    drive.require_branch()?;
    r_grid
        .iter()
        .map(|&r| {
            let j = match model.u_dd(r)? {
                PairShift::Blockaded => j_perfect_blockade(drive)?,
                PairShift::Finite(u) => j_finite_blockade(drive, u)?,
            };
            Ok((r, j))
        })
        .collect()
}

/// 1-σ width in MHz of the Gaussian detuning-noise distribution caused by
/// thermal motion along the dressing beam: `σ = v_rms / λ` with
/// `v_rms = √(k_B T / m)`.
pub fn doppler_detuning_sigma(temperature_uk: f64, wavelength_nm: f64, mass_amu: f64) -> Result<f64> {
    if !(temperature_uk >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be nonnegative, got {temperature_uk} µK"
        )));
    }
    if !(wavelength_nm > 0.0) || !(mass_amu > 0.0) {
        return Err(Error::InvalidParameter(
            "wavelength and mass must be positive".into(),
        ));
    }
    let v = units::thermal_velocity(temperature_uk, mass_amu); // µm/µs = m/s
    Ok(v * 1e3 / wavelength_nm) // (m/s)/(nm·1e-9) in Hz, expressed in MHz
}
