//! Error type shared by every module of the crate.
//!
//! Variants are grouped by failure mode rather than by module: invertibility
//! preconditions, resolution/convergence limits, structural rejections, and
//! input problems. The CLI maps these groups onto process exit codes.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The symbol comes too close to zero on the unit circle.
    #[error("symbol is not invertible on the unit circle (margin {margin:.3e} < {tol:.3e})")]
    NotInvertible { margin: f64, tol: f64 },

    /// Phase or curve sampling hit the refinement cap without resolving.
    #[error("grid under-resolved: {context} (refinement capped at {cap} samples)")]
    GridUnderresolved { context: &'static str, cap: usize },

    /// Factor series did not reach the residual target within the degree cap.
    #[error("factor truncation failed: residual {residual:.3e} at degree cap {cap}")]
    TruncationFailure { residual: f64, cap: usize },

    /// A truncation window does not cover the finite correction.
    #[error("window half-width {n} too small (needs more than {required})")]
    WindowTooSmall { n: i64, required: i64 },

    /// A windowed linear system is numerically singular.
    #[error("truncated system is singular (condition estimate {cond:.3e})")]
    SingularTruncation { cond: f64 },

    /// Two-scale window solves disagree beyond tolerance.
    #[error("windowed solve did not converge (disagreement {disagreement:.3e} > {tol:.3e})")]
    NotConverged { disagreement: f64, tol: f64 },

    /// The window schedule never produced three consecutive equal indices.
    #[error("numeric index did not stabilize over windows {windows:?}: values {values:?}")]
    NotStabilized { windows: Vec<i64>, values: Vec<Option<i64>> },

    /// A kernel candidate neither decays nor is clean truncation junk.
    #[error("kernel candidate does not decay at window {window} (tail weight {tail:.3e}); window too small or operator not Fredholm-compressible as assumed")]
    DecayCheckFailed { window: i64, tail: f64 },

    /// Off-diagonal blocks fail the partial-isometry test.
    #[error("blocks are not a skeleton unitary (partial isometry defect {defect:.3e})")]
    NotSkeleton { defect: f64 },

    /// The block-diagonal factor is singular on the solve window.
    #[error("diagonal block singular on window (condition estimate {cond:.3e})")]
    DiagonalBlockSingular { cond: f64 },

    /// Reconstruction residual above the certification threshold.
    #[error("factorization residual {residual:.3e} exceeds {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    /// Contraction precondition of the dilation construction.
    #[error("windowed norm estimate {norm:.6} exceeds 1")]
    NormExceedsOne { norm: f64 },

    /// Input to the dilation skeleton is not a partial isometry.
    #[error("operator is not a partial isometry (projection defect {defect:.3e})")]
    NotPartialIsometry { defect: f64 },

    /// Defect projections keep growing with the window.
    #[error("defect projection is not finite rank (rank {rank_small} at window {small}, {rank_large} at window {large})")]
    InfiniteDefect { rank_small: usize, small: i64, rank_large: usize, large: i64 },

    /// Adjacent samples of a loop have different indices.
    #[error("index jump between samples {at} and {}: {left} vs {right}", at + 1)]
    IndexJump { at: usize, left: i64, right: i64 },

    /// A family sample's index differs from the component's.
    #[error("sample {at} has index {found}, component expects {expected}")]
    IndexMismatch { at: usize, expected: i64, found: i64 },

    /// Interior probes of a spectral component disagree.
    #[error("component {component} inconsistent: {context}")]
    InconsistentComponent { component: usize, context: String },

    /// Two routes to the index disagree inside one report.
    #[error("index report disagreement: {left_name} = {left} but {right_name} = {right}")]
    ReportDisagreement { left_name: &'static str, left: i64, right_name: &'static str, right: i64 },

    /// Malformed input file or option.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
