//! Simulation of two optically tweezed atoms whose ground-state spins
//! interact through Rydberg dressing.
//!
//! A single off-resonant laser admixes a Rydberg level into one qubit state
//! of each atom. When the doubly excited pair state is blockaded, the
//! two-atom light shift no longer equals twice the single-atom shift; the
//! difference `J` acts as a tunable spin-spin interaction. The crate builds
//! everything on top of that mechanism:
//!
//! - [`dressing`] — dressed-state energies, amplitudes, and `J`, both in the
//!   perfect-blockade limit and for a finite pair shift;
//! - [`pairpotential`] — models of the distance-dependent pair shift
//!   `U_dd(R)`;
//! - [`dynamics`] — open-system evolution of the two-atom register under
//!   piecewise-constant microwave and dressing drives;
//! - [`spectroscopy`] — simulated microwave scans, peak fitting, and the
//!   two-resonance extraction of `J`;
//! - [`entanglement`] — Bell-state preparation through the spin-flip
//!   blockade, parity scans, and fidelity bounds;
//! - [`measurement`] — detection-manifold mapping, state-preparation
//!   imperfection, and a ballistic recapture Monte Carlo.
//!
//! Units follow one convention throughout: energies are `E/h` in MHz, times
//! in µs, lengths in µm. See [`units`].

pub mod dressing;
pub mod dynamics;
pub mod entanglement;
mod error;
pub mod fit;
pub mod linalg;
pub mod measurement;
pub mod pairpotential;
pub mod register;
pub mod spectroscopy;
pub mod units;

pub use dressing::{DressedSpectrum, LaserDrive};
pub use dynamics::{
    DecayChannels, EvolutionMethod, MicrowaveDrive, Propagator, PulseSegment, PulseSequence,
    Trajectory,
};
pub use entanglement::{BellTarget, FidelityReport, ParityScan, PhiPlusMethod};
pub use error::{Error, Result};
pub use measurement::{MeasurementRecord, TrapParams};
pub use pairpotential::{PairPotentialModel, PairShift};
pub use register::{Level, QubitPopulations, TwoAtomRegister};
pub use spectroscopy::{PeakFit, ScanResult};
