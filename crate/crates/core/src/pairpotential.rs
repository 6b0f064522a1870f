//! Models of the distance-dependent shift `U_dd(R)` of the doubly excited
//! pair state `|rr⟩`.
//!
//! Three parameterizations cover the regimes that matter for dressing:
//! an idealized perfect blockade, a van der Waals tail `-C₆/R⁶`, and a
//! two-channel Förster model whose shift crosses over from `1/R⁶` at long
//! range to `1/R³` once the dipole-dipole coupling exceeds the Förster
//! defect.

use serde::{Deserialize, Serialize};

use crate::dressing::LaserDrive;
use crate::error::{Error, Result};

/// Pair shift returned by [`PairPotentialModel::u_dd`].
///
/// The perfect-blockade model never produces a finite number; callers must
/// take the plateau path instead of feeding a huge float downstream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairShift {
    /// Infinitely strong blockade; use the closed-form plateau.
    Blockaded,
    /// Finite shift in MHz, signed (red shifts are negative).
    Finite(f64),
}

impl PairShift {
    /// The finite value, if there is one.
    pub fn finite(&self) -> Option<f64> {
        match self {
            PairShift::Blockaded => None,
            PairShift::Finite(u) => Some(*u),
        }
    }
}

/// Parametric model of `U_dd(R)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum PairPotentialModel {
    /// `U_dd = -∞` at every distance.
    PerfectBlockade,
    /// `U_dd(R) = -c6/R⁶`. With the conventional `c6 > 0` this is a red
    /// shift, matching a pair state pushed down by dipole-dipole coupling.
    VanDerWaals {
        /// MHz·µm⁶, signed.
        c6: f64,
    },
    /// Two coupled pair channels separated by a Förster defect `δ_F` and
    /// mixed by a dipole-dipole element `c3/R³`:
    ///
    /// ```text
    /// [[0,      c3/R³],
    ///  [c3/R³,  δ_F  ]]
    /// ```
    ///
    /// `U_dd` is the eigenvalue branch adiabatically connected to the
    /// zero-defect pair state, i.e. `(δ_F - sign(δ_F)·√(δ_F² + 4c²))/2`
    /// with `c = c3/R³`. It behaves as `-c²/δ_F` in the far tail and as
    /// `∓|c|` at short range.
    ForsterTwoChannel {
        /// MHz·µm³, signed.
        c3: f64,
        /// MHz, nonzero.
        forster_defect: f64,
    },
}

impl PairPotentialModel {
    /// Order-of-magnitude van der Waals default. The knee of the resulting
    /// `J(R)` curve falls near R ≈ 5 µm for MHz-scale drives; the value is a
    /// placeholder, not a literature coefficient.
    pub fn default_van_der_waals() -> Self {
        PairPotentialModel::VanDerWaals { c6: 1e5 }
    }

    /// Illustrative Förster defaults; not literature values.
    pub fn default_forster() -> Self {
        PairPotentialModel::ForsterTwoChannel {
            c3: 3e3,
            forster_defect: -100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PairPotentialModel::PerfectBlockade => Ok(()),
            PairPotentialModel::VanDerWaals { c6 } => {
                if !c6.is_finite() {
                    return Err(Error::InvalidParameter("c6 must be finite".into()));
                }
                Ok(())
            }
            PairPotentialModel::ForsterTwoChannel { c3, forster_defect } => {
                if !c3.is_finite() || !forster_defect.is_finite() {
                    return Err(Error::InvalidParameter(
                        "Förster parameters must be finite".into(),
                    ));
                }
                if *forster_defect == 0.0 {
                    return Err(Error::InvalidParameter(
                        "Förster defect must be nonzero".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Pair shift at distance `r` in µm.
    pub fn u_dd(&self, r: f64) -> Result<PairShift> {
        self.validate()?;
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "interatomic distance must be positive, got {r} µm"
            )));
        }
        match self {
            PairPotentialModel::PerfectBlockade => Ok(PairShift::Blockaded),
            PairPotentialModel::VanDerWaals { c6 } => Ok(PairShift::Finite(-c6 / r.powi(6))),
            PairPotentialModel::ForsterTwoChannel { c3, forster_defect } => {
                let c = c3 / r.powi(3);
                let d = *forster_defect;
                let u = (d - d.signum() * (d * d + 4.0 * c * c).sqrt()) / 2.0;
                Ok(PairShift::Finite(u))
            }
        }
    }

    /// Distance at which `|u_dd(R)|` equals the drive scale `√(Δ² + 2Ω²)`,
    /// found by bisection on [0.1, 100] µm to 1e-4 µm.
    pub fn blockade_radius(&self, drive: &LaserDrive) -> Result<f64> {
        self.validate()?;
        drive.validate()?;
        if matches!(self, PairPotentialModel::PerfectBlockade) {
            return Err(Error::UnboundedModel);
        }
        let target =
            (drive.detuning * drive.detuning + 2.0 * drive.rabi_freq * drive.rabi_freq).sqrt();
        if target == 0.0 {
            return Err(Error::InvalidParameter(
                "blockade radius is undefined for a drive with zero scale".into(),
            ));
        }
        let (lo, hi) = (0.1, 100.0);
        let excess = |r: f64| -> Result<f64> {
            let u = self
                .u_dd(r)?
                .finite()
                .expect("finite-ranged model checked above");
            Ok(u.abs() - target)
        };
        let (mut a, mut b) = (lo, hi);
        let (fa, fb) = (excess(a)?, excess(b)?);
        if fa.signum() == fb.signum() {
            return Err(Error::BlockadeRadiusNotFound { lo, hi });
        }
        while b - a > 1e-4 {
            let m = 0.5 * (a + b);
            if excess(m)?.signum() == fa.signum() {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_blockade_is_a_sentinel() {
        let u = PairPotentialModel::PerfectBlockade.u_dd(3.0).unwrap();
        assert_eq!(u, PairShift::Blockaded);
        assert_eq!(u.finite(), None);
    }

    #[test]
    fn van_der_waals_power_law() {
        let m = PairPotentialModel::VanDerWaals { c6: 1e5 };
        assert_relative_eq!(m.u_dd(10.0).unwrap().finite().unwrap(), -0.1);
        assert!(m.u_dd(0.0).is_err());
        assert!(m.u_dd(-1.0).is_err());
    }

    /// 2×2 eigensolve oracle for the Förster branch, tracking the branch
    /// connected to the zero-defect channel by ramping the coupling.
    fn forster_oracle(c: f64, defect: f64) -> f64 {
        let mut prev = [1.0, 0.0];
        let mut energy = 0.0;
        for k in 1..=512 {
            let ck = c * k as f64 / 512.0;
            let disc = ((defect / 2.0).powi(2) + ck * ck).sqrt();
            for e in [defect / 2.0 - disc, defect / 2.0 + disc] {
                let n = (ck * ck + e * e).sqrt();
                let v = if n > 1e-300 { [ck / n, e / n] } else { [1.0, 0.0] };
                if (v[0] * prev[0] + v[1] * prev[1]).abs() > 0.7 {
                    prev = v;
                    energy = e;
                    break;
                }
            }
        }
        energy
    }

    #[test]
    fn forster_tail_is_effective_van_der_waals() {
        let (c3, df) = (3e3, -100.0);
        let m = PairPotentialModel::ForsterTwoChannel {
            c3,
            forster_defect: df,
        };
        // far tail: -(c3/r³)²/δ_F within 1% once c3/r³ ≤ |δ_F|/100
        let r = (c3 / (df.abs() / 100.0)).powf(1.0 / 3.0) * 1.01;
        let c = c3 / r.powi(3);
        let u = m.u_dd(r).unwrap().finite().unwrap();
        assert_relative_eq!(u, -c * c / df, max_relative = 1e-2);
        assert_relative_eq!(u, forster_oracle(c, df), max_relative = 1e-9);
    }

    #[test]
    fn forster_short_range_is_linear_in_coupling() {
        // sign(δ_F) = sign(c3) > 0 → u_dd/(c3/r³) → -1 at short range
        let (c3, df) = (3e3, 100.0);
        let m = PairPotentialModel::ForsterTwoChannel {
            c3,
            forster_defect: df,
        };
        let r = (c3 / (100.0 * df)).powf(1.0 / 3.0) * 0.99;
        let c = c3 / r.powi(3);
        assert!(c >= 100.0 * df.abs());
        let u = m.u_dd(r).unwrap().finite().unwrap();
        assert!((u / c + 1.0).abs() < 0.01, "ratio = {}", u / c);
        assert_relative_eq!(u, forster_oracle(c, df), max_relative = 1e-9);
        // opposite defect sign pushes the branch up instead
        let m2 = PairPotentialModel::ForsterTwoChannel {
            c3,
            forster_defect: -df,
        };
        let u2 = m2.u_dd(r).unwrap().finite().unwrap();
        assert!((u2 / c - 1.0).abs() < 0.01);
    }

    #[test]
    fn forster_requires_nonzero_defect() {
        let m = PairPotentialModel::ForsterTwoChannel {
            c3: 3e3,
            forster_defect: 0.0,
        };
        assert!(m.u_dd(3.0).is_err());
    }

    #[test]
    fn monotone_and_vanishing_at_long_range() {
        for m in [
            PairPotentialModel::default_van_der_waals(),
            PairPotentialModel::default_forster(),
            PairPotentialModel::ForsterTwoChannel {
                c3: 3e3,
                forster_defect: 250.0,
            },
        ] {
            // |u_dd| strictly decreasing on a log grid, 200 points/decade
            let mut prev = f64::INFINITY;
            let mut r = 0.3;
            while r < 300.0 {
                let u = m.u_dd(r).unwrap().finite().unwrap().abs();
                assert!(u < prev, "|u_dd| not monotone at r = {r} for {m:?}");
                prev = u;
                r *= 10f64.powf(1.0 / 200.0);
            }
            assert!(m.u_dd(1e4).unwrap().finite().unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn blockade_radius_matches_closed_form() {
        let drive = LaserDrive::new(4.3, 1.3).unwrap();
        let m = PairPotentialModel::VanDerWaals { c6: 1e5 };
        let target = (1.3f64 * 1.3 + 2.0 * 4.3 * 4.3).sqrt();
        assert_relative_eq!(target, 6.2185207244167, max_relative = 1e-10);
        let rb = m.blockade_radius(&drive).unwrap();
        assert!((rb - (1e5f64 / target).powf(1.0 / 6.0)).abs() < 1e-4);
        assert!((rb - 5.024).abs() < 1e-3);
    }

    #[test]
    fn blockade_radius_scalings() {
        let drive = LaserDrive::new(4.3, 1.3).unwrap();
        let rb1 = PairPotentialModel::VanDerWaals { c6: 1e5 }
            .blockade_radius(&drive)
            .unwrap();
        let rb64 = PairPotentialModel::VanDerWaals { c6: 64.0 * 1e5 }
            .blockade_radius(&drive)
            .unwrap();
        assert!((rb64 / rb1 - 2.0).abs() < 1e-3, "sixth-root scaling");
        // R_b decreases monotonically as the drive grows
        let mut prev = f64::INFINITY;
        for om in [1.0, 4.0, 16.0, 64.0, 256.0] {
            let d = LaserDrive::new(om, 1.3).unwrap();
            let rb = PairPotentialModel::VanDerWaals { c6: 1e5 }
                .blockade_radius(&d)
                .unwrap();
            assert!(rb < prev);
            prev = rb;
        }
    }

    #[test]
    fn blockade_radius_error_paths() {
        let drive = LaserDrive::new(4.3, 1.3).unwrap();
        assert!(matches!(
            PairPotentialModel::PerfectBlockade.blockade_radius(&drive),
            Err(Error::UnboundedModel)
        ));
        // a vanishing c6 never crosses the drive scale
        let weak = PairPotentialModel::VanDerWaals { c6: 1e-12 };
        assert!(matches!(
            weak.blockade_radius(&drive),
            Err(Error::BlockadeRadiusNotFound { .. })
        ));
    }
}
