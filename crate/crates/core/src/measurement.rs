//! Detection, state preparation imperfection, and trap recapture.
//!
//! Detection resolves only hyperfine manifolds: an atom in the `|0⟩`
//! manifold scatters the cycling light (bright), `|1⟩` stays dark, and an
//! atom that left the trap is lost. Logical populations `P_{x,y}` are
//! reported conditioned on both atoms being present, the same accounting an
//! experiment applies when it discards invalid runs.

use ndarray::linalg::kron;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::entanglement::global_rotation;
use crate::error::{Error, Result};
use crate::register::{Level, QubitPopulations, TwoAtomRegister};
use crate::units;

/// Per-atom detection outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    /// Scatters on the cycling transition: the `|0⟩` manifold.
    Bright,
    /// Present but dark: the `|1⟩` manifold.
    Dark,
    /// Not recaptured.
    Lost,
}

pub const OUTCOMES: [Outcome; 3] = [Outcome::Bright, Outcome::Dark, Outcome::Lost];

/// How residual Rydberg population maps onto detection outcomes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DetectionModel {
    /// Fraction of `|r⟩` population that is lost (anti-trapped). The
    /// remainder models atoms that decayed back to the ground state within
    /// the recapture window.
    pub r_loss_fraction: f64,
    /// Bright share of the surviving `|r⟩` fraction. Decay from the
    /// Rydberg state feeds both ground manifolds; an even split is assumed.
    pub r_bright_fraction: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            r_loss_fraction: 1.0,
            r_bright_fraction: 0.5,
        }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_loss_fraction", self.r_loss_fraction),
            ("r_bright_fraction", self.r_bright_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Outcome weights (bright, dark, lost) of one atomic level.
    fn weights(&self, level: Level) -> [f64; 3] {
        match level {
            Level::One => [0.0, 1.0, 0.0],
            Level::Zero => [1.0, 0.0, 0.0],
            Level::Rydberg => {
                let kept = 1.0 - self.r_loss_fraction;
                [
                    kept * self.r_bright_fraction,
                    kept * (1.0 - self.r_bright_fraction),
                    self.r_loss_fraction,
                ]
            }
            Level::Dark => [0.0, 0.0, 1.0],
        }
    }
}

/// Joint detection statistics of one register.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeasurementRecord {
    /// `joint[a][b]` = probability of outcome `a` on atom 1 and `b` on
    /// atom 2, ordered (bright, dark, lost).
    pub joint: [[f64; 3]; 3],
    /// Logical populations conditioned on both atoms present
    /// (bright ↦ `0`, dark ↦ `1`); zero when nothing survives.
    pub conditional: QubitPopulations,
    /// Probability that both atoms are present.
    pub survival: f64,
}

/// Detect with the default model (all residual `|r⟩` population lost).
pub fn detect(register: &TwoAtomRegister) -> MeasurementRecord {
    detect_with(register, &DetectionModel::default())
}

/// Map the register onto joint bright/dark/lost probabilities.
pub fn detect_with(register: &TwoAtomRegister, model: &DetectionModel) -> MeasurementRecord {
    let mut joint = [[0.0; 3]; 3];
    for a in Level::ALL {
        let wa = model.weights(a);
        for b in Level::ALL {
            let wb = model.weights(b);
            let p = register.population(a, b);
            for (i, row) in joint.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell += p * wa[i] * wb[j];
                }
            }
        }
    }
    let survival: f64 = joint[0][0] + joint[0][1] + joint[1][0] + joint[1][1];
    let conditional = if survival > 0.0 {
        QubitPopulations {
            p11: joint[1][1] / survival,
            p10: joint[1][0] / survival,
            p01: joint[0][1] / survival,
            p00: joint[0][0] / survival,
        }
    } else {
        QubitPopulations::default()
    };
    MeasurementRecord {
        joint,
        conditional,
        survival,
    }
}

/// Initial-state preparation with a finite optical-pumping efficiency.
///
/// Each atom is pumped into `|0⟩` with probability `pump_efficiency`; the
/// remainder stays spread over the other manifold, modeled as `|1⟩` weight
/// since detection cannot resolve sublevels. A global π rotation then maps
/// the pair onto the `|1,1⟩`-dominant starting state.
pub fn prepare_initial(pump_efficiency: f64) -> Result<TwoAtomRegister> {
    if !(0.0..=1.0).contains(&pump_efficiency) {
        return Err(Error::InvalidParameter(format!(
            "pump efficiency must be in [0, 1], got {pump_efficiency}"
        )));
    }
    let mut single: Array2<C64> = Array2::zeros((4, 4));
    single[[Level::Zero.index(), Level::Zero.index()]] = C64::new(pump_efficiency, 0.0);
    single[[Level::One.index(), Level::One.index()]] = C64::new(1.0 - pump_efficiency, 0.0);
    let rho = kron(&single, &single);
    let mut register = TwoAtomRegister::from_density(rho)?;
    global_rotation(&mut register, std::f64::consts::PI, 0.0);
    Ok(register)
}

/// Optical-tweezer parameters for the recapture Monte Carlo.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrapParams {
    /// 1/e² intensity waist, µm.
    pub waist: f64,
    /// Trap depth as a temperature equivalent, mK.
    pub depth_mk: f64,
    /// Atom temperature, µK.
    pub temperature_uk: f64,
    /// Time the trap stays off, µs.
    pub release_time: f64,
    /// Nominal window of efficient recapture, µs (metadata for grids).
    pub recapture_window: f64,
    /// Trap-laser wavelength, nm; sets the Rayleigh range.
    pub wavelength_nm: f64,
    /// Atomic mass, u.
    pub mass_amu: f64,
}

impl Default for TrapParams {
    fn default() -> Self {
        Self {
            waist: 1.29,
            depth_mk: 1.0,
            temperature_uk: 20.0,
            release_time: 10.0,
            recapture_window: 10.0,
            wavelength_nm: units::TRAP_WAVELENGTH_NM,
            mass_amu: units::CS_MASS_AMU,
        }
    }
}

impl TrapParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("waist", self.waist),
            ("depth_mk", self.depth_mk),
            ("wavelength_nm", self.wavelength_nm),
            ("mass_amu", self.mass_amu),
            ("recapture_window", self.recapture_window),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "trap {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.temperature_uk >= 0.0) || !(self.release_time >= 0.0) {
            return Err(Error::InvalidParameter(
                "temperature and release_time must be ≥ 0".into(),
            ));
        }
        Ok(())
    }

    /// Rayleigh range in µm.
    pub fn rayleigh_range(&self) -> f64 {
        std::f64::consts::PI * self.waist * self.waist / (self.wavelength_nm * 1e-3)
    }
}

/// Monte Carlo recapture estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RecaptureEstimate {
    pub probability: f64,
    /// Binomial standard error.
    pub std_error: f64,
}

/// Ballistic release-and-recapture Monte Carlo.
///
/// Positions are drawn from the thermal distribution in the harmonic
/// approximation of the Gaussian-beam trap, velocities from
/// Maxwell–Boltzmann. Atoms fall freely (gravity along a radial axis) for
/// `release_time`; an atom is recaptured if its total energy in the
/// restored trap is negative. Samples use one counter-based RNG stream per
/// index, so the estimate is deterministic for a fixed seed at any thread
/// count.
pub fn recapture_probability(
    trap: &TrapParams,
    n_samples: usize,
    seed: u64,
) -> Result<RecaptureEstimate> {
    trap.validate()?;
    if n_samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "recapture Monte Carlo needs ≥ 1000 samples, got {n_samples}"
        )));
    }
    let depth_k = trap.depth_mk * 1e-3;
    let temp_k = trap.temperature_uk * 1e-6;
    let w0 = trap.waist;
    let zr = trap.rayleigh_range();
    let sigma_r = w0 / 2.0 * (temp_k / depth_k).sqrt();
    let sigma_z = zr * (temp_k / (2.0 * depth_k)).sqrt();
    let sigma_v = units::thermal_velocity(trap.temperature_uk, trap.mass_amu);
    let mass_kg = trap.mass_amu * units::ATOMIC_MASS;
    let t = trap.release_time;

    let recaptured: u64 = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng, sigma: f64| {
                if sigma > 0.0 {
                    Normal::new(0.0, sigma).unwrap().sample(rng)
                } else {
                    0.0
                }
            };
            let mut x = draw(&mut rng, sigma_r);
            let mut y = draw(&mut rng, sigma_r);
            let mut z = draw(&mut rng, sigma_z);
            let vx = draw(&mut rng, sigma_v);
            let mut vy = draw(&mut rng, sigma_v);
            let vz = draw(&mut rng, sigma_v);

            x += vx * t;
            y += vy * t - 0.5 * units::GRAVITY * t * t;
            vy -= units::GRAVITY * t;
            z += vz * t;

            let axial = 1.0 + (z / zr).powi(2);
            let w2 = w0 * w0 * axial;
            let potential_k = -depth_k * (-2.0 * (x * x + y * y) / w2).exp() / axial;
            let kinetic_k =
                mass_kg * (vx * vx + vy * vy + vz * vz) / (2.0 * units::BOLTZMANN);
            u64::from(kinetic_k + potential_k < 0.0)
        })
        .sum();

    let p = recaptured as f64 / n_samples as f64;
    Ok(RecaptureEstimate {
        probability: p,
        std_error: (p * (1.0 - p) / n_samples as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::BellTarget;
    use approx::assert_relative_eq;

    #[test]
    fn detect_pure_dark_dark() {
        let reg = TwoAtomRegister::pure_product(Level::One, Level::One);
        let rec = detect(&reg);
        assert_relative_eq!(rec.joint[1][1], 1.0);
        assert_relative_eq!(rec.survival, 1.0);
        assert_relative_eq!(rec.conditional.p11, 1.0);
    }

    #[test]
    fn detect_bell_state_born_rule() {
        let reg = TwoAtomRegister::from_pure(&BellTarget::PsiPlus.state_vector()).unwrap();
        let rec = detect(&reg);
        assert_relative_eq!(rec.conditional.p01, 0.5, epsilon = 1e-12);
        assert_relative_eq!(rec.conditional.p10, 0.5, epsilon = 1e-12);
        assert!(rec.conditional.p11.abs() < 1e-12);
        assert!(rec.conditional.p00.abs() < 1e-12);
    }

    #[test]
    fn rydberg_population_routes_to_loss() {
        // 36% |r⟩ per atom with full loss: two-atom survival 0.64² ≈ 0.41
        let mut single: Array2<C64> = Array2::zeros((4, 4));
        single[[Level::Zero.index(), Level::Zero.index()]] = C64::new(0.64, 0.0);
        single[[Level::Rydberg.index(), Level::Rydberg.index()]] = C64::new(0.36, 0.0);
        let reg = TwoAtomRegister::from_density(kron(&single, &single)).unwrap();
        let rec = detect(&reg);
        assert_relative_eq!(rec.survival, 0.64 * 0.64, epsilon = 1e-12);
        assert_relative_eq!(rec.conditional.p00, 1.0, epsilon = 1e-12);
        // joint probabilities are a distribution
        let total: f64 = rec.joint.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-9);

        // with partial loss the survivors split between the manifolds
        let model = DetectionModel {
            r_loss_fraction: 0.5,
            r_bright_fraction: 0.5,
        };
        let rec = detect_with(&reg, &model);
        assert!(rec.survival > 0.64 * 0.64);
        let total: f64 = rec.joint.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detect_is_linear_in_the_register() {
        let a = TwoAtomRegister::pure_product(Level::One, Level::Zero);
        let b = TwoAtomRegister::from_pure(&BellTarget::PhiPlus.state_vector()).unwrap();
        let alpha = 0.3;
        let mix = TwoAtomRegister::mixture(&[(alpha, a.clone()), (1.0 - alpha, b.clone())]).unwrap();
        let (ra, rb, rm) = (detect(&a), detect(&b), detect(&mix));
        for i in 0..3 {
            for j in 0..3 {
                let expect = alpha * ra.joint[i][j] + (1.0 - alpha) * rb.joint[i][j];
                assert_relative_eq!(rm.joint[i][j], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn conditioning_is_invariant_under_symmetric_loss_scaling() {
        // mixing in a state-independent, atom-symmetric lost component
        // must not change the conditional populations
        let core = TwoAtomRegister::from_pure(&BellTarget::PsiPlus.state_vector()).unwrap();
        let lost = TwoAtomRegister::pure_product(Level::Dark, Level::Dark);
        let before = detect(&core).conditional;
        for loss in [0.1, 0.5, 0.9] {
            let mix =
                TwoAtomRegister::mixture(&[(1.0 - loss, core.clone()), (loss, lost.clone())])
                    .unwrap();
            let after = detect(&mix).conditional;
            assert_relative_eq!(after.p01, before.p01, epsilon = 1e-12);
            assert_relative_eq!(after.p10, before.p10, epsilon = 1e-12);
        }
    }

    #[test]
    fn prepare_initial_efficiencies() {
        let reg = prepare_initial(1.0).unwrap();
        assert_relative_eq!(reg.population(Level::One, Level::One), 1.0, epsilon = 1e-12);

        let reg = prepare_initial(0.95).unwrap();
        assert_relative_eq!(
            reg.population(Level::One, Level::One),
            0.9025,
            epsilon = 1e-12
        );
        reg.check_physical().unwrap();

        // efficiency 0 prepares the orthogonal product state
        let reg = prepare_initial(0.0).unwrap();
        assert_relative_eq!(reg.population(Level::Zero, Level::Zero), 1.0, epsilon = 1e-12);

        assert!(prepare_initial(1.5).is_err());
    }

    #[test]
    fn recapture_trivial_limits() {
        let trap = TrapParams {
            release_time: 0.0,
            ..TrapParams::default()
        };
        let est = recapture_probability(&trap, 2000, 1).unwrap();
        assert_eq!(est.probability, 1.0);

        // zero temperature, centered atoms: gravity drop over 10 µs is
        // ~0.5 nm, far below the waist
        let trap = TrapParams {
            temperature_uk: 0.0,
            release_time: 10.0,
            ..TrapParams::default()
        };
        let est = recapture_probability(&trap, 2000, 1).unwrap();
        assert_eq!(est.probability, 1.0);
    }

    #[test]
    fn recapture_decreases_with_release_time() {
        let mut last = f64::INFINITY;
        for t in [5.0, 10.0, 20.0, 40.0] {
            let trap = TrapParams {
                release_time: t,
                ..TrapParams::default()
            };
            let est = recapture_probability(&trap, 20_000, 7).unwrap();
            assert!(
                est.probability < last,
                "p({t} µs) = {} after {last}",
                est.probability
            );
            last = est.probability;
        }
    }

    #[test]
    fn recapture_is_deterministic_and_needs_enough_samples() {
        let trap = TrapParams::default();
        let a = recapture_probability(&trap, 5000, 42).unwrap();
        let b = recapture_probability(&trap, 5000, 42).unwrap();
        assert_eq!(a.probability, b.probability);
        assert!(recapture_probability(&trap, 10, 42).is_err());
    }

    #[test]
    fn recapture_standard_error_scales_as_inverse_sqrt_n() {
        // compare the binomial error model across sample counts
        let trap = TrapParams {
            release_time: 20.0,
            ..TrapParams::default()
        };
        let e3 = recapture_probability(&trap, 1000, 9).unwrap();
        let e4 = recapture_probability(&trap, 10_000, 9).unwrap();
        let e5 = recapture_probability(&trap, 100_000, 9).unwrap();
        let r43 = e3.std_error / e4.std_error;
        let r54 = e4.std_error / e5.std_error;
        let sqrt10 = 10f64.sqrt();
        assert!((r43 / sqrt10 - 1.0).abs() < 0.2, "ratio {r43}");
        assert!((r54 / sqrt10 - 1.0).abs() < 0.2, "ratio {r54}");
    }
}
