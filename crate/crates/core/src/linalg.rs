//! Small dense linear-algebra helpers shared by the dynamics and
//! entanglement modules.
//!
//! Everything here works on `ndarray` arrays of `Complex64` and stays
//! dimension-agnostic; the register type fixes the dimension to 16.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Inverse, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Largest elementwise modulus of the difference.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    Ok(h.eigh(UPLO::Lower)?)
}

/// The unitary `exp(-i 2π H t)` for Hermitian `H` (in MHz) and `t` in µs,
/// from the precomputed eigendecomposition of `H`.
pub fn unitary_at(energies: &Array1<f64>, vectors: &Array2<C64>, t: f64) -> Array2<C64> {
    let phases: Array1<C64> = energies.mapv(|e| (-C64::i() * std::f64::consts::TAU * e * t).exp());
    let scaled = vectors * &phases; // columns scaled by e^{-i2πEt}
    scaled.dot(&dagger(vectors))
}

/// Spectral decomposition `M = V diag(λ) V⁻¹` of a general complex matrix,
/// with the inverse materialized so that `exp(M t)` applications reduce to
/// two matrix-vector products.
pub struct SpectralDecomposition {
    pub values: Array1<C64>,
    pub vectors: Array2<C64>,
    pub inverse: Array2<C64>,
}

impl SpectralDecomposition {
    /// Decompose `m`, rejecting defective or ill-conditioned cases by a
    /// reconstruction-residual check.
    ///
    /// The LAPACK inversion behind this needs a few MiB of stack, more
    /// than rayon or test worker threads provide, so the decomposition
    /// runs on a dedicated thread.
    pub fn new(m: &Array2<C64>) -> Result<Self> {
        let owned = m.to_owned();
        std::thread::Builder::new()
            .name("spectral-decomposition".into())
            .stack_size(16 * 1024 * 1024)
            .spawn(move || Self::decompose(owned))
            .map_err(|e| Error::InvalidParameter(format!("worker thread spawn failed: {e}")))?
            .join()
            .map_err(|_| Error::NonPhysicalState("eigendecomposition worker panicked".into()))?
    }

    fn decompose(m: Array2<C64>) -> Result<Self> {
        let (values, vectors) = m.eig()?;
        let inverse = vectors.inv()?;
        let recon = vectors.dot(&Array2::from_diag(&values)).dot(&inverse);
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let resid = max_abs_diff(&recon, &m) / scale;
        if resid > 1e-9 {
            return Err(Error::NonPhysicalState(format!(
                "superoperator eigendecomposition residual {resid:.3e} exceeds 1e-9; \
                 the generator is too close to defective"
            )));
        }
        Ok(Self {
            values,
            vectors,
            inverse,
        })
    }

    /// Apply `exp(M t)` to a vector.
    pub fn propagate(&self, v: &Array1<C64>, t: f64) -> Array1<C64> {
        let mut c = self.inverse.dot(v);
        c.zip_mut_with(&self.values, |ci, &li| *ci *= (li * t).exp());
        self.vectors.dot(&c)
    }
}
