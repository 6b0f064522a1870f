//! The two-atom register: a density operator on the product space of two
//! four-level atoms.
//!
//! Per-atom levels are ordered `(|1⟩, |0⟩, |r⟩, |d⟩)`: the two qubit
//! (clock) states, the Rydberg level, and a dark/lost level that collects
//! decayed or untrapped population. The pair basis index is
//! `4·(atom 1 level) + (atom 2 level)`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Number of levels per atom.
pub const LEVELS: usize = 4;
/// Dimension of the two-atom product space.
pub const DIM: usize = LEVELS * LEVELS;

/// One atomic level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Level {
    /// Qubit state `|1⟩` (the lower clock state; dark to detection).
    One,
    /// Qubit state `|0⟩` (the upper clock state; bright to detection, and
    /// the state the dressing laser couples to `|r⟩`).
    Zero,
    /// The Rydberg level `|r⟩`.
    Rydberg,
    /// Dark/lost bookkeeping level `|d⟩`; uncoupled from every drive.
    Dark,
}

impl Level {
    pub const ALL: [Level; LEVELS] = [Level::One, Level::Zero, Level::Rydberg, Level::Dark];

    pub fn index(self) -> usize {
        match self {
            Level::One => 0,
            Level::Zero => 1,
            Level::Rydberg => 2,
            Level::Dark => 3,
        }
    }

    pub fn label(self) -> char {
        match self {
            Level::One => '1',
            Level::Zero => '0',
            Level::Rydberg => 'r',
            Level::Dark => 'd',
        }
    }
}

/// Index of the pair basis state `|a, b⟩`.
pub fn pair_index(a: Level, b: Level) -> usize {
    LEVELS * a.index() + b.index()
}

/// Labels of the 16 pair basis states in index order: "11", "10", "1r", …
pub fn basis_labels() -> [String; DIM] {
    std::array::from_fn(|i| {
        let a = Level::ALL[i / LEVELS];
        let b = Level::ALL[i % LEVELS];
        format!("{}{}", a.label(), b.label())
    })
}

/// Populations of the four two-qubit logical states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct QubitPopulations {
    pub p11: f64,
    pub p10: f64,
    pub p01: f64,
    pub p00: f64,
}

impl QubitPopulations {
    /// Population of the single-flip manifold, `P_{1,0} + P_{0,1}`.
    pub fn p_single(&self) -> f64 {
        self.p10 + self.p01
    }

    pub fn sum(&self) -> f64 {
        self.p11 + self.p10 + self.p01 + self.p00
    }
}

/// Density operator over the two-atom product space.
#[derive(Clone, Debug)]
pub struct TwoAtomRegister {
    rho: Array2<C64>,
}

impl TwoAtomRegister {
    /// The pure product state `|a, b⟩`.
    pub fn pure_product(a: Level, b: Level) -> Self {
        let mut rho = Array2::zeros((DIM, DIM));
        let i = pair_index(a, b);
        rho[[i, i]] = C64::new(1.0, 0.0);
        Self { rho }
    }

    /// A register from a pure 16-component state vector (renormalized).
    pub fn from_pure(psi: &Array1<C64>) -> Result<Self> {
        if psi.len() != DIM {
            return Err(Error::InvalidParameter(format!(
                "state vector must have length {DIM}, got {}",
                psi.len()
            )));
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidParameter("state vector has zero norm".into()));
        }
        let mut rho = Array2::zeros((DIM, DIM));
        for (i, zi) in psi.iter().enumerate() {
            for (j, zj) in psi.iter().enumerate() {
                rho[[i, j]] = zi * zj.conj() / norm2;
            }
        }
        Ok(Self { rho })
    }

    /// A register from an explicit density matrix, validated.
    pub fn from_density(rho: Array2<C64>) -> Result<Self> {
        if rho.shape() != [DIM, DIM] {
            return Err(Error::InvalidParameter(format!(
                "density matrix must be {DIM}×{DIM}, got {:?}",
                rho.shape()
            )));
        }
        let reg = Self { rho };
        reg.check_physical()?;
        Ok(reg)
    }

    /// A classical mixture `Σ wᵢ ρᵢ`; weights are renormalized.
    pub fn mixture(parts: &[(f64, TwoAtomRegister)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.is_empty() || total <= 0.0 {
            return Err(Error::InvalidParameter(
                "mixture needs positively weighted parts".into(),
            ));
        }
        let mut rho: Array2<C64> = Array2::zeros((DIM, DIM));
        for (w, reg) in parts {
            if *w < 0.0 {
                return Err(Error::InvalidParameter("mixture weights must be ≥ 0".into()));
            }
            rho = rho + reg.rho.mapv(|z| z * (w / total));
        }
        Ok(Self { rho })
    }

    pub fn density(&self) -> &Array2<C64> {
        &self.rho
    }

    pub(crate) fn density_mut(&mut self) -> &mut Array2<C64> {
        &mut self.rho
    }

    /// ρ → UρU†.
    pub fn apply_unitary(&mut self, u: &Array2<C64>) {
        self.rho = u.dot(&self.rho).dot(&linalg::dagger(u));
    }

    pub fn trace(&self) -> f64 {
        self.rho.diag().iter().map(|z| z.re).sum()
    }

    /// Tr ρ², real part.
    pub fn purity(&self) -> f64 {
        self.rho
            .iter()
            .zip(self.rho.t().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    /// Populations of all 16 basis states, in index order.
    pub fn populations(&self) -> [f64; DIM] {
        std::array::from_fn(|i| self.rho[[i, i]].re)
    }

    pub fn population(&self, a: Level, b: Level) -> f64 {
        let i = pair_index(a, b);
        self.rho[[i, i]].re
    }

    /// Raw (unconditioned) populations of the four logical states.
    pub fn qubit_populations(&self) -> QubitPopulations {
        QubitPopulations {
            p11: self.population(Level::One, Level::One),
            p10: self.population(Level::One, Level::Zero),
            p01: self.population(Level::Zero, Level::One),
            p00: self.population(Level::Zero, Level::Zero),
        }
    }

    /// The 4×4 block of ρ on the qubit⊗qubit subspace, ordered
    /// `(11, 10, 01, 00)`, together with its trace (the probability that
    /// neither atom has left the qubit manifold).
    pub fn qubit_block(&self) -> (Array2<C64>, f64) {
        let idx = [
            pair_index(Level::One, Level::One),
            pair_index(Level::One, Level::Zero),
            pair_index(Level::Zero, Level::One),
            pair_index(Level::Zero, Level::Zero),
        ];
        let mut block = Array2::zeros((4, 4));
        for (bi, &i) in idx.iter().enumerate() {
            for (bj, &j) in idx.iter().enumerate() {
                block[[bi, bj]] = self.rho[[i, j]];
            }
        }
        let survival = block.diag().iter().map(|z| z.re).sum();
        (block, survival)
    }

    /// Overlap ⟨ψ|ρ|ψ⟩ with a pure 16-component state.
    pub fn fidelity_pure(&self, psi: &Array1<C64>) -> f64 {
        let v = self.rho.dot(psi);
        psi.iter().zip(v.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..DIM {
            for j in 0..=i {
                worst = worst.max((self.rho[[i, j]] - self.rho[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of ρ.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = linalg::hermitian_eigen(&self.rho)?;
        Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Check the register invariants: Hermitian to 1e-10, unit trace to
    /// 1e-8, eigenvalues above -1e-8.
    pub fn check_physical(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::NonPhysicalState(format!(
                "hermiticity violation {herm:.3e}"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::NonPhysicalState(format!("trace {tr} is not 1")));
        }
        let min = self.min_eigenvalue()?;
        if min < -1e-8 {
            return Err(Error::NonPhysicalState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}
