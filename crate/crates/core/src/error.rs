use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The dressed ground branch is undefined at zero detuning.
    #[error("degenerate branch: detuning must be nonzero to define the ground-connected branch")]
    DegenerateBranch,

    /// Adiabatic eigenvector tracking lost the dressed ground branch, which
    /// happens inside the anti-blockade resonance region where the pair
    /// shift tunes the doubly excited state across the dressed ground state.
    #[error(
        "branch tracking failed at ramp step {step} (best overlap {overlap:.3}): \
         the drive sits in the anti-blockade resonance region"
    )]
    BranchTracking { step: usize, overlap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The perfect-blockade model has no finite pair shift or range.
    #[error("the perfect-blockade model has no finite range; use a distance-dependent model")]
    UnboundedModel,

    #[error("no blockade radius in [{lo}, {hi}] µm: |u_dd| never crosses the drive scale")]
    BlockadeRadiusNotFound { lo: f64, hi: f64 },

    #[error("integrator tolerance breach: trace drift {drift:.3e} after a step of {dt:.3e} µs")]
    TraceDrift { drift: f64, dt: f64 },

    #[error("register is not a physical density operator: {0}")]
    NonPhysicalState(String),

    #[error("no interior local maximum in the fit window")]
    NoLocalMaximum,

    #[error("fit did not converge after {iterations} iterations; last iterate {last:?}")]
    FitDidNotConverge { iterations: usize, last: Vec<f64> },

    #[error("missing {channel} peak: no resolvable resonance in the scan")]
    MissingPeak { channel: String },

    #[error("strict mode: {0}")]
    StrictViolation(String),

    #[error("linear algebra backend error: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}
