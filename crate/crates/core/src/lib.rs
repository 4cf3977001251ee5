//! Factorization toolkit for invertible operators on the bilateral sequence
//! space that essentially commute with the Hardy-type projection.
//!
//! The crate works with the concrete class of operators `M_f + F`: a Laurent
//! polynomial multiplication part `M_f` plus a finite correction `F`. For this
//! class the index of the compression to the half-line is computable three
//! independent ways (winding count, stabilized kernel counts on rectangular
//! truncations, and rank differences of factorization blocks), and every
//! invertible member factors as `(1 + k) * x_p * u0^{-n}` with `k` compact,
//! `x_p` commuting with the projection, and `u0` the bilateral shift.
//!
//! Modules:
//! - [`symbol`]: Laurent symbols, winding numbers, analytic/co-analytic splits
//! - [`operators`]: the operator class, block decompositions, windowing
//! - [`window`]: dense truncation numerics shared by everything downstream
//! - [`index`]: analytic, numeric, and factorization routes to the index
//! - [`factorize`]: skeleton, direct-sum, and dilation factorizations
//! - [`specmap`]: essential spectrum sampling and component labeling
//! - [`formats`]: file formats and deterministic report serialization

pub mod error;
pub mod factorize;
pub mod formats;
pub mod index;
pub mod operators;
pub mod specmap;
pub mod symbol;
pub mod tol;
pub mod window;

pub use error::{Error, Result};
pub use factorize::{
    alternative_factor, dilation_skeleton, family_factor, halmos_dilation, skeleton_factor,
    skeleton_factor_scheduled, verify_factorization, AlternativeFactorization, AlternativeForm,
    DilationUnitary, FamilyFactorization, HalmosDilation, LowRankOperator, ProgressionSubspace,
    ShiftDirection, SkeletonFactorization, SupportedVec, VerificationReport,
};
pub use formats::{
    emit_components, emit_factor_dump, emit_factor_report, emit_grid_csv, emit_index_report,
    emit_verify_report, parse_config, parse_factor_dump, parse_operator, parse_symbol, RunConfig,
};
pub use index::{
    analytic_index, family_index, index_of_factorization, numeric_index, FamilyIndex, IndexReport,
    NumericIndex,
};
pub use operators::{
    BlockDecomposition, CorrectedLaurentOp, HalfLineBlock, HardyProjection, Side, SparseFinite,
    SplitLaurentOp,
};
pub use specmap::{
    cyclic_metadata, label_components, polyline_winding, refinement_stable, spectrum_curve,
    winding_map, Component, ComponentMap, CyclicRecord, GridSpec, LabeledGrid, SpectrumCurve,
    SPECTRUM_ADJACENT,
};
pub use symbol::{LaurentSymbol, WienerHopfSplit};
pub use tol::Tolerances;
pub use window::{invert_on_window, OpWindow, SparseVec, TruncationWindow, WindowSolve};
