//! Numerical thresholds used across the crate.
//!
//! Every algorithmic cutoff lives here so that reports can state exactly which
//! thresholds produced them. Defaults are the certified operating point; all
//! fields are plain data and can be overridden per call.

/// Threshold bundle attached to index and factorization computations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Minimum admissible modulus of a symbol on the unit circle.
    pub margin_tol: f64,
    /// Relative singular-value cutoff for kernel detection.
    pub sv_rel_tol: f64,
    /// Tail-weight bound a kernel candidate must satisfy to count.
    pub decay_tol: f64,
    /// Tail weights in (decay_tol, decay_ambiguous) mean the window is too small.
    pub decay_ambiguous: f64,
    /// Relative two-scale disagreement accepted by windowed solves.
    pub solve_tol: f64,
    /// Condition-estimate ceiling before a truncation counts as singular.
    pub condition_cap: f64,
    /// Relative reconstruction residual a factorization must reach.
    pub residual_tol: f64,
    /// Projection / unitarity defect allowed in dilation blocks.
    pub projection_tol: f64,
    /// Two-scale agreement required of windowed square roots.
    pub sqrt_agree_tol: f64,
    /// Entries of the compact factor below this are dropped.
    pub compact_trim: f64,
    /// Window half-width schedule for index stabilization.
    pub schedule: Vec<i64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            margin_tol: 1e-6,
            sv_rel_tol: 1e-8,
            decay_tol: 1e-6,
            decay_ambiguous: 1e-2,
            solve_tol: 1e-9,
            condition_cap: 1e12,
            residual_tol: 1e-8,
            projection_tol: 1e-10,
            sqrt_agree_tol: 1e-8,
            compact_trim: 1e-12,
            schedule: vec![64, 128, 256, 512],
        }
    }
}

/// Hard cap on circle-grid refinement (samples).
pub const GRID_CAP: usize = 1 << 20;

/// Hard cap on factor series degree.
pub const DEGREE_CAP: usize = 4096;

/// A sampled modulus below this is reported as an exact zero margin.
pub const ZERO_MARGIN: f64 = 1e-14;

/// Number of power-iteration steps in condition estimates.
pub const POWER_ITERS: usize = 20;
