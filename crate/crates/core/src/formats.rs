//! Input file formats and deterministic report emitters.
//!
//! Inputs are small JSON documents parsed strictly: unknown fields and
//! duplicate offsets are rejected so a typo cannot silently change an
//! operator. Reports are emitted by hand with a fixed key order and floats
//! formatted to 17 significant digits, so identical runs produce
//! byte-identical artifacts; nothing time-dependent goes into a payload.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::factorize::{LowRankOperator, SkeletonFactorization, SupportedVec, VerificationReport};
use crate::index::IndexReport;
use crate::operators::{CorrectedLaurentOp, SparseFinite, SplitLaurentOp};
use crate::specmap::{ComponentMap, GridSpec};
use crate::symbol::LaurentSymbol;
use crate::tol::Tolerances;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolSpec {
    coeffs: Vec<CoeffSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffSpec {
    m: i64,
    re: f64,
    im: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorSpec {
    symbol: SymbolSpec,
    #[serde(default)]
    correction: Vec<EntrySpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntrySpec {
    i: i64,
    j: i64,
    re: f64,
    im: f64,
}

fn symbol_from_spec(spec: SymbolSpec) -> Result<LaurentSymbol> {
    let mut seen = std::collections::BTreeSet::new();
    for c in &spec.coeffs {
        if !seen.insert(c.m) {
            return Err(Error::InvalidInput(format!("duplicate symbol offset m = {}", c.m)));
        }
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite coefficient at m = {}", c.m)));
        }
    }
    Ok(LaurentSymbol::from_coeffs(
        spec.coeffs.into_iter().map(|c| (c.m, Complex64::new(c.re, c.im))),
    ))
}

/// Parses a symbol file: `{"coeffs": [{"m", "re", "im"}, ...]}`.
pub fn parse_symbol(text: &str) -> Result<LaurentSymbol> {
    let spec: SymbolSpec =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
    symbol_from_spec(spec)
}

/// Parses an operator file:
/// `{"symbol": <symbol spec>, "correction": [{"i", "j", "re", "im"}, ...]}`.
pub fn parse_operator(text: &str) -> Result<CorrectedLaurentOp> {
    let spec: OperatorSpec =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let symbol = symbol_from_spec(spec.symbol)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut corr = SparseFinite::new();
    for e in &spec.correction {
        if !seen.insert((e.i, e.j)) {
            return Err(Error::InvalidInput(format!(
                "duplicate correction entry at ({}, {})",
                e.i, e.j
            )));
        }
        if !e.re.is_finite() || !e.im.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite correction entry at ({}, {})",
                e.i, e.j
            )));
        }
        corr.add_entry(e.i, e.j, Complex64::new(e.re, e.im));
    }
    Ok(CorrectedLaurentOp::new(symbol, corr))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigSpec {
    margin_tol: Option<f64>,
    residual_tol: Option<f64>,
    window_schedule: Option<Vec<i64>>,
    grid: Option<GridConfig>,
    output_dir: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridConfig {
    re_lo: f64,
    re_hi: f64,
    im_lo: f64,
    im_hi: f64,
    nx: usize,
    ny: usize,
}

/// Run-wide configuration, all fields defaulted.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub margin_tol: f64,
    pub residual_tol: f64,
    pub window_schedule: Vec<i64>,
    pub grid: Option<GridSpec>,
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tol = Tolerances::default();
        RunConfig {
            margin_tol: tol.margin_tol,
            residual_tol: tol.residual_tol,
            window_schedule: tol.schedule,
            grid: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    /// The tolerance block with this config's overrides applied.
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            margin_tol: self.margin_tol,
            residual_tol: self.residual_tol,
            schedule: self.window_schedule.clone(),
            ..Tolerances::default()
        }
    }
}

/// Parses a config file; missing fields keep their defaults. The window
/// schedule must be strictly increasing and the tolerances positive.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let spec: ConfigSpec =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut config = RunConfig::default();
    if let Some(m) = spec.margin_tol {
        config.margin_tol = m;
    }
    if let Some(r) = spec.residual_tol {
        config.residual_tol = r;
    }
    if let Some(s) = spec.window_schedule {
        config.window_schedule = s;
    }
    if let Some(g) = spec.grid {
        config.grid = Some(GridSpec::new(g.re_lo, g.re_hi, g.im_lo, g.im_hi, g.nx, g.ny)?);
    }
    config.output_dir = spec.output_dir;

    if !(config.margin_tol > 0.0 && config.residual_tol > 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    if config.window_schedule.is_empty()
        || config.window_schedule.windows(2).any(|w| w[0] >= w[1])
        || config.window_schedule[0] <= 0
    {
        return Err(Error::InvalidInput(
            "window schedule must be positive and strictly increasing".into(),
        ));
    }
    Ok(config)
}

/// Fixed float formatting: 17 significant digits, scientific.
fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt_i(v: Option<i64>) -> String {
    v.map_or_else(|| "null".to_string(), |n| n.to_string())
}

/// `{"analytic", "numeric", "from_factorization", "stabilized", "window"}`.
pub fn emit_index_report(report: &IndexReport) -> String {
    format!(
        "{{\"analytic\": {}, \"numeric\": {}, \"from_factorization\": {}, \"stabilized\": {}, \"window\": {}}}\n",
        fmt_opt_i(report.analytic),
        fmt_opt_i(report.numeric),
        fmt_opt_i(report.from_factorization),
        report.stabilized,
        report.window_used,
    )
}

/// `{"n", "k_rank", "k_support_radius", "residual", "window",
/// "stable_under_doubling"}`.
pub fn emit_factor_report(report: &VerificationReport) -> String {
    format!(
        "{{\"n\": {}, \"k_rank\": {}, \"k_support_radius\": {}, \"residual\": {}, \"window\": {}, \"stable_under_doubling\": {}}}\n",
        report.n,
        report.k_rank,
        report.k_support_radius,
        fmt_f(report.residual),
        report.window,
        report.stable_under_doubling,
    )
}

/// Verification verdict: the factor report fields plus the doubled-window
/// residual and the overall pass flag.
pub fn emit_verify_report(report: &VerificationReport, tol: &Tolerances) -> String {
    format!(
        "{{\"passed\": {}, \"n\": {}, \"residual\": {}, \"residual_doubled\": {}, \"stable_under_doubling\": {}, \"index_consistent\": {}}}\n",
        report.passed(tol),
        report.n,
        fmt_f(report.residual),
        fmt_f(report.residual_doubled),
        report.stable_under_doubling,
        report.index_consistent,
    )
}

/// `{"components": [{"id", "lambda": [re, im], "n", "cyclic"}, ...]}`.
pub fn emit_components(map: &ComponentMap) -> String {
    let mut out = String::from("{\"components\": [");
    for (k, c) in map.components.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        let _ = write!(
            out,
            "{{\"id\": {}, \"lambda\": [{}, {}], \"n\": {}, \"cyclic\": \"{}\"}}",
            c.id,
            fmt_f(c.lambda.re),
            fmt_f(c.lambda.im),
            c.n,
            c.cyclic,
        );
    }
    out.push_str("]}\n");
    out
}

/// Grid export, header `re,im,component,n`, one row per cell in row-major
/// order (imaginary axis outer). Spectrum-adjacent cells carry component -1
/// and n 0.
pub fn emit_grid_csv(map: &ComponentMap) -> String {
    let grid = &map.grid;
    let mut out = String::from("re,im,component,n\n");
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let cell = grid.idx(ix, iy);
            let z = grid.center(ix, iy);
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f(z.re),
                fmt_f(z.im),
                map.labels[cell],
                map.cell_n(cell),
            );
        }
    }
    out
}

fn emit_vec(out: &mut String, v: &SupportedVec) {
    let _ = write!(out, "{{\"lo\": {}, \"values\": [", v.lo);
    for (k, c) in v.values.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "[{}, {}]", fmt_f(c.re), fmt_f(c.im));
    }
    out.push_str("]}");
}

fn emit_symbol_coeffs(out: &mut String, f: &LaurentSymbol) {
    out.push('[');
    for (k, (m, c)) in f.support().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{{\"m\": {m}, \"re\": {}, \"im\": {}}}", fmt_f(c.re), fmt_f(c.im));
    }
    out.push(']');
}

fn emit_sparse(out: &mut String, s: &SparseFinite) {
    out.push('[');
    for (k, (i, j, v)) in s.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        let _ = write!(
            out,
            "{{\"i\": {i}, \"j\": {j}, \"re\": {}, \"im\": {}}}",
            fmt_f(v.re),
            fmt_f(v.im)
        );
    }
    out.push(']');
}

/// Complete factorization dump, losslessly re-parsable by
/// [`parse_factor_dump`].
pub fn emit_factor_dump(fact: &SkeletonFactorization) -> String {
    let mut out = String::from("{");
    let _ = write!(
        out,
        "\"n\": {}, \"cut\": {}, \"window\": {}, \"residual\": {}, ",
        fact.n,
        fact.cut,
        fact.window,
        fmt_f(fact.residual)
    );
    out.push_str("\"k\": [");
    for (t, (left, right)) in fact.k.terms.iter().enumerate() {
        if t > 0 {
            out.push_str(", ");
        }
        out.push_str("{\"left\": ");
        emit_vec(&mut out, left);
        out.push_str(", \"right\": ");
        emit_vec(&mut out, right);
        out.push('}');
    }
    out.push_str("], \"xp\": {");
    let _ = write!(out, "\"cut\": {}, \"upper\": ", fact.xp.cut());
    emit_symbol_coeffs(&mut out, fact.xp.upper());
    out.push_str(", \"lower\": ");
    emit_symbol_coeffs(&mut out, fact.xp.lower());
    out.push_str(", \"sparse\": ");
    emit_sparse(&mut out, fact.xp.sparse());
    out.push_str("}}\n");
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpSpec {
    n: i64,
    cut: i64,
    window: i64,
    residual: f64,
    k: Vec<DumpTerm>,
    xp: DumpSplit,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpTerm {
    left: DumpVec,
    right: DumpVec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpVec {
    lo: i64,
    values: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpSplit {
    cut: i64,
    upper: Vec<CoeffSpec>,
    lower: Vec<CoeffSpec>,
    sparse: Vec<EntrySpec>,
}

impl DumpVec {
    fn build(self) -> SupportedVec {
        SupportedVec {
            lo: self.lo,
            values: self.values.into_iter().map(|(re, im)| Complex64::new(re, im)).collect(),
        }
    }
}

/// Parses a factor dump back into a factorization.
pub fn parse_factor_dump(text: &str) -> Result<SkeletonFactorization> {
    let spec: DumpSpec =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let k = LowRankOperator {
        terms: spec.k.into_iter().map(|t| (t.left.build(), t.right.build())).collect(),
    };
    let upper = LaurentSymbol::from_coeffs(
        spec.xp.upper.into_iter().map(|c| (c.m, Complex64::new(c.re, c.im))),
    );
    let lower = LaurentSymbol::from_coeffs(
        spec.xp.lower.into_iter().map(|c| (c.m, Complex64::new(c.re, c.im))),
    );
    let sparse = SparseFinite::from_entries(
        spec.xp.sparse.into_iter().map(|e| (e.i, e.j, Complex64::new(e.re, e.im))),
    );
    Ok(SkeletonFactorization {
        n: spec.n,
        k,
        xp: SplitLaurentOp::new(spec.xp.cut, upper, lower, sparse),
        cut: spec.cut,
        residual: spec.residual,
        window: spec.window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorize::{skeleton_factor, verify_factorization};
    use crate::operators::HardyProjection;
    use crate::specmap::winding_map;
    use crate::window::TruncationWindow;

    #[test]
    fn parses_symbol_spec() {
        let f = parse_symbol(
            r#"{"coeffs": [{"m": 1, "re": 1.0, "im": 0.0}, {"m": -1, "re": 0.0, "im": -0.5}]}"#,
        )
        .unwrap();
        assert_eq!(f.coeff(1), Complex64::ONE);
        assert_eq!(f.coeff(-1), Complex64::new(0.0, -0.5));
    }

    #[test]
    fn rejects_duplicate_offsets() {
        let err = parse_symbol(
            r#"{"coeffs": [{"m": 1, "re": 1.0, "im": 0.0}, {"m": 1, "re": 2.0, "im": 0.0}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = parse_symbol(r#"{"coeffs": [], "extra": 1}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn parses_operator_with_correction() {
        let x = parse_operator(
            r#"{"symbol": {"coeffs": [{"m": 0, "re": 1.0, "im": 0.0}]},
                "correction": [{"i": 0, "j": 1, "re": 0.25, "im": 0.0}]}"#,
        )
        .unwrap();
        assert_eq!(x.correction().get(0, 1), Complex64::new(0.25, 0.0));
    }

    #[test]
    fn config_defaults_and_overrides() {
        let c = parse_config(r#"{"window_schedule": [32, 64]}"#).unwrap();
        assert_eq!(c.window_schedule, vec![32, 64]);
        assert_eq!(c.margin_tol, 1e-6);
        let err = parse_config(r#"{"window_schedule": [64, 64]}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn index_report_shape_is_fixed() {
        let tol = Tolerances::default();
        let r = IndexReport::new(Some(-1), Some(-1), None, true, 128, tol).unwrap();
        assert_eq!(
            emit_index_report(&r),
            "{\"analytic\": -1, \"numeric\": -1, \"from_factorization\": null, \"stabilized\": true, \"window\": 128}\n"
        );
    }

    #[test]
    fn factor_dump_round_trips() {
        let tol = Tolerances::default();
        let x = CorrectedLaurentOp::laurent_op(LaurentSymbol::from_reals(0, &[0.5, 1.0]));
        let fact = skeleton_factor(
            &x,
            &HardyProjection::default(),
            TruncationWindow::new(48, 8),
            &tol,
        )
        .unwrap();
        let dump = emit_factor_dump(&fact);
        let back = parse_factor_dump(&dump).unwrap();
        assert_eq!(back.n, fact.n);
        assert_eq!(back.k.terms.len(), fact.k.terms.len());
        let report = verify_factorization(&back, &x, &tol).unwrap();
        assert!(report.passed(&tol));
        // Emission is deterministic.
        assert_eq!(dump, emit_factor_dump(&fact));
    }

    #[test]
    fn grid_csv_has_header_and_rows() {
        let tol = Tolerances::default();
        let g = GridSpec::new(-2.0, 2.0, -2.0, 2.0, 21, 21).unwrap();
        let m = winding_map(&LaurentSymbol::monomial(1), &g, &tol).unwrap();
        let csv = emit_grid_csv(&m);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("re,im,component,n"));
        assert_eq!(csv.lines().count(), 1 + 21 * 21);
        let components = emit_components(&m);
        assert!(components.contains("\"cyclic\": \"Z_1\""));
        assert_eq!(components, emit_components(&m));
    }

    #[test]
    fn float_format_is_seventeen_digits() {
        assert_eq!(fmt_f(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f(-0.5), "-5.0000000000000000e-1");
    }
}
