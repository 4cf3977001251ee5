//! The Fredholm index of the compression `pxp`, computed three ways.
//!
//! The analytic route reads the index off the symbol's winding number. The
//! numeric route counts decaying kernel vectors of rectangular truncations on
//! a growing window schedule. The factorization route takes rank differences
//! of the finite off-diagonal blocks of a skeleton unitary. All three must
//! agree; the report constructor enforces that.
//!
//! Square truncations are useless here: they pin a spurious kernel vector at
//! the window edge and generically report index zero. The truncations below
//! keep the domain window longer than the range window by the bandwidth plus
//! the correction extent, so that everything an honest kernel vector needs is
//! inside the domain, and then reject candidates whose weight fails to decay
//! toward the far end of the window.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{BlockDecomposition, CorrectedLaurentOp, HardyProjection, SparseFinite};
use crate::symbol::LaurentSymbol;
use crate::tol::Tolerances;
use crate::window::{dense_rect, max_entry, numerical_kernel, sigma_max, OpWindow};

/// Index of the compression of the multiplication operator `M_f`: minus the
/// winding number of `f`.
pub fn analytic_index(f: &LaurentSymbol, tol: &Tolerances) -> Result<i64> {
    Ok(-f.winding_number(tol)?)
}

/// Outcome of the window-schedule route.
#[derive(Debug, Clone)]
pub struct NumericIndex {
    /// The stabilized index.
    pub value: i64,
    /// Window at which stabilization was confirmed (third of the agreeing run).
    pub window_used: i64,
    /// Every window evaluated, with its count (`None` when unusable).
    pub per_window: Vec<(i64, Option<i64>)>,
}

/// Counts `dim ker(pxp) - dim ker((pxp)^*)` on truncations over the window
/// schedule; requires the same integer on three consecutive windows.
///
/// The schedule is walked lazily, so cheap windows settle most operators.
pub fn numeric_index(
    x: &CorrectedLaurentOp,
    p: &HardyProjection,
    tol: &Tolerances,
) -> Result<NumericIndex> {
    let adj = x.adjoint();
    let mut per_window: Vec<(i64, Option<i64>)> = Vec::new();
    let mut ambiguity: Option<(i64, f64)> = None;
    let mut run: Vec<i64> = Vec::new();

    for &n in &tol.schedule {
        let ker = half_line_kernel_count(x, p.cut, n, tol);
        let coker = half_line_kernel_count(&adj, p.cut, n, tol);
        let value = match (ker, coker) {
            (KernelCount::Count(a), KernelCount::Count(b)) => Some(a as i64 - b as i64),
            (KernelCount::Ambiguous(t), _) | (_, KernelCount::Ambiguous(t)) => {
                ambiguity.get_or_insert((n, t));
                None
            }
            (KernelCount::WindowUnusable, _) | (_, KernelCount::WindowUnusable) => None,
        };
        per_window.push((n, value));

        match value {
            Some(v) if run.last() == Some(&v) || run.is_empty() => run.push(v),
            Some(v) => run = vec![v],
            None => run.clear(),
        }
        if run.len() >= 3 {
            return Ok(NumericIndex { value: *run.last().unwrap(), window_used: n, per_window });
        }
    }

    if let Some((window, tail)) = ambiguity {
        Err(Error::DecayCheckFailed { window, tail })
    } else {
        Err(Error::NotStabilized {
            windows: per_window.iter().map(|&(n, _)| n).collect(),
            values: per_window.iter().map(|&(_, v)| v).collect(),
        })
    }
}

enum KernelCount {
    Count(usize),
    /// A candidate's tail weight fell between decaying and clean junk.
    Ambiguous(f64),
    /// The window cannot hold the correction and bands.
    WindowUnusable,
}

/// Decaying-kernel dimension of the compression of `x` to `[cut, inf)` on a
/// rectangular truncation with range rows `[cut, cut + n)` and domain columns
/// `[cut, cut + n + excess)`.
fn half_line_kernel_count(
    x: &CorrectedLaurentOp,
    cut: i64,
    n: i64,
    tol: &Tolerances,
) -> KernelCount {
    let corr_extent = x
        .correction()
        .iter()
        .filter(|&(i, j, _)| i >= cut && j >= cut)
        .map(|(i, j, _)| i.max(j) - cut + 1)
        .max()
        .unwrap_or(0);
    let excess = x.symbol().bandwidth() + corr_extent;
    if n <= 2 * (excess + 2) {
        return KernelCount::WindowUnusable;
    }
    let a = dense_rect(x, cut, cut + n, cut, cut + n + excess);
    let kernel = numerical_kernel(&a, tol.sv_rel_tol);
    let k = kernel.basis.ncols();
    if k == 0 {
        return KernelCount::Count(0);
    }

    // Tail block: the last quarter of the domain window. True kernel vectors
    // decay there; truncation artifacts concentrate there.
    let dom = kernel.basis.nrows();
    let q = dom.div_ceil(4);
    let tail = kernel.basis.view_range(dom - q..dom, 0..k).into_owned();
    let svd = tail.svd(false, false);
    let mut decaying = 0usize;
    for &mu in svd.singular_values.iter() {
        if mu <= tol.decay_tol {
            decaying += 1;
        } else if mu < tol.decay_ambiguous {
            return KernelCount::Ambiguous(mu);
        }
    }
    KernelCount::Count(decaying)
}

/// Index read off the finite corner blocks of a skeleton unitary decomposed
/// along `p`: `rank(c c^*) - rank(b b^*)`.
///
/// Both corners must be partial isometries; the products `b^* b` and `b b^*`
/// are required to be projections within `tol.projection_tol`.
pub fn index_of_factorization(blocks: &BlockDecomposition, tol: &Tolerances) -> Result<i64> {
    let b_defect = partial_isometry_defect(&blocks.b);
    let c_defect = partial_isometry_defect(&blocks.c);
    let defect = b_defect.max(c_defect);
    if defect > tol.projection_tol {
        return Err(Error::NotSkeleton { defect });
    }
    Ok(blocks.c.rank(tol.sv_rel_tol) as i64 - blocks.b.rank(tol.sv_rel_tol) as i64)
}

/// How far `b^* b` and `b b^*` are from being projections, in max-entry norm.
fn partial_isometry_defect(b: &SparseFinite) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    let m = b.compact_dense();
    let left = m.adjoint() * &m;
    let right = &m * m.adjoint();
    let d1 = max_entry(&(&left * &left - &left));
    let d2 = max_entry(&(&right * &right - &right));
    d1.max(d2)
}

/// The combined report: every route that was computed, cross-checked.
#[derive(Debug, Clone)]
pub struct IndexReport {
    pub analytic: Option<i64>,
    pub numeric: Option<i64>,
    pub from_factorization: Option<i64>,
    pub stabilized: bool,
    pub window_used: i64,
    pub tolerances: Tolerances,
}

impl IndexReport {
    /// Builds a report, rejecting any disagreement between present routes.
    pub fn new(
        analytic: Option<i64>,
        numeric: Option<i64>,
        from_factorization: Option<i64>,
        stabilized: bool,
        window_used: i64,
        tolerances: Tolerances,
    ) -> Result<Self> {
        let named = [
            ("analytic", analytic),
            ("numeric", numeric),
            ("from_factorization", from_factorization),
        ];
        for (ln, l) in named.iter().filter_map(|&(n, v)| v.map(|v| (n, v))) {
            for (rn, r) in named.iter().filter_map(|&(n, v)| v.map(|v| (n, v))) {
                if l != r {
                    return Err(Error::ReportDisagreement {
                        left_name: ln,
                        left: l,
                        right_name: rn,
                        right: r,
                    });
                }
            }
        }
        Ok(IndexReport { analytic, numeric, from_factorization, stabilized, window_used, tolerances })
    }

    /// The agreed value, if any route is present.
    pub fn value(&self) -> Option<i64> {
        self.analytic.or(self.numeric).or(self.from_factorization)
    }
}

/// Index of a sampled family over the circle.
#[derive(Debug, Clone)]
pub struct FamilyIndex {
    pub value: i64,
    pub per_sample: Vec<i64>,
    /// Largest windowed distance between consecutive samples.
    pub max_adjacent_distance: f64,
}

/// Computes the numeric index of every sample of a loop of operators and
/// checks local constancy. `continuity_budget` bounds the windowed distance
/// between consecutive samples (cyclically); `None` skips that check.
pub fn family_index(
    samples: &[CorrectedLaurentOp],
    p: &HardyProjection,
    continuity_budget: Option<f64>,
    tol: &Tolerances,
) -> Result<FamilyIndex> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("family has no samples".into()));
    }
    let max_adjacent_distance = windowed_distance(samples);
    if let Some(budget) = continuity_budget {
        if max_adjacent_distance > budget {
            return Err(Error::InvalidInput(format!(
                "adjacent samples are {max_adjacent_distance:.3e} apart, above the continuity budget {budget:.3e}"
            )));
        }
    }
    let indices: Vec<Result<NumericIndex>> = samples
        .par_iter()
        .map(|x| numeric_index(x, p, tol))
        .collect();
    let mut per_sample = Vec::with_capacity(samples.len());
    for r in indices {
        per_sample.push(r?.value);
    }
    for at in 0..per_sample.len().saturating_sub(1) {
        if per_sample[at] != per_sample[at + 1] {
            return Err(Error::IndexJump {
                at,
                left: per_sample[at],
                right: per_sample[at + 1],
            });
        }
    }
    Ok(FamilyIndex { value: per_sample[0], per_sample, max_adjacent_distance })
}

/// Largest windowed spectral-norm distance between consecutive samples,
/// cyclically.
pub(crate) fn windowed_distance(samples: &[CorrectedLaurentOp]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let radius = samples
        .iter()
        .map(|x| x.sparse_radius().max(x.bandwidth()))
        .max()
        .unwrap_or(0)
        .max(8)
        + 8;
    let mut worst = 0.0f64;
    for j in 0..samples.len() {
        let a = &samples[j];
        let b = &samples[(j + 1) % samples.len()];
        let diff: DMatrix<_> = dense_rect(a, -radius, radius, -radius, radius)
            - dense_rect(b, -radius, radius, -radius, radius);
        worst = worst.max(sigma_max(&diff));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_index_of_monomials() {
        let tol = Tolerances::default();
        for n in -3..=3 {
            assert_eq!(analytic_index(&LaurentSymbol::monomial(n), &tol).unwrap(), -n);
        }
    }

    #[test]
    fn numeric_index_of_shift() {
        let tol = Tolerances::default();
        let r = numeric_index(
            &CorrectedLaurentOp::shift_power(1),
            &HardyProjection::default(),
            &tol,
        )
        .unwrap();
        assert_eq!(r.value, -1);
        assert!(r.window_used <= 256);
    }

    #[test]
    fn numeric_index_of_identity() {
        let tol = Tolerances::default();
        let r = numeric_index(
            &CorrectedLaurentOp::identity(),
            &HardyProjection::default(),
            &tol,
        )
        .unwrap();
        assert_eq!(r.value, 0);
    }

    #[test]
    fn numeric_index_of_mixed_zero_pattern() {
        // (z + 0.5)(z - 2): one zero inside, so index -1.
        let tol = Tolerances::default();
        let f = LaurentSymbol::from_reals(0, &[-1.0, -1.5, 1.0]);
        let r = numeric_index(
            &CorrectedLaurentOp::laurent_op(f.clone()),
            &HardyProjection::default(),
            &tol,
        )
        .unwrap();
        assert_eq!(r.value, -1);
        assert_eq!(r.value, analytic_index(&f, &tol).unwrap());
    }

    #[test]
    fn index_of_factorization_counts_shift_blocks() {
        let tol = Tolerances::default();
        for n in -3..=3i64 {
            let w = CorrectedLaurentOp::shift_power(n);
            let blocks = w.block_decompose(&HardyProjection::default());
            assert_eq!(index_of_factorization(&blocks, &tol).unwrap(), -n, "n = {n}");
        }
    }

    #[test]
    fn index_of_factorization_rejects_non_isometry() {
        let tol = Tolerances::default();
        let w = CorrectedLaurentOp::shift_power(1).scale(num_complex::Complex64::new(0.5, 0.0));
        let blocks = w.block_decompose(&HardyProjection::default());
        assert!(matches!(
            index_of_factorization(&blocks, &tol),
            Err(Error::NotSkeleton { .. })
        ));
    }

    #[test]
    fn report_rejects_disagreement() {
        let tol = Tolerances::default();
        let err = IndexReport::new(Some(1), Some(0), None, true, 64, tol).unwrap_err();
        assert!(matches!(err, Error::ReportDisagreement { .. }));
    }

    #[test]
    fn family_of_constant_shift() {
        let tol = Tolerances::default();
        let samples = vec![CorrectedLaurentOp::shift_power(1); 4];
        let fam = family_index(&samples, &HardyProjection::default(), Some(1e-9), &tol).unwrap();
        assert_eq!(fam.value, -1);
        assert_eq!(fam.max_adjacent_distance, 0.0);
    }

    #[test]
    fn family_detects_index_jump() {
        let tol = Tolerances::default();
        // Zeros at 0.5 (inside) and 1.5 (outside): indices -1 and 0.
        let inside = CorrectedLaurentOp::laurent_op(LaurentSymbol::from_reals(0, &[-0.5, 1.0]));
        let outside = CorrectedLaurentOp::laurent_op(LaurentSymbol::from_reals(0, &[-1.5, 1.0]));
        let samples = vec![inside.clone(), inside, outside.clone(), outside];
        let err = family_index(&samples, &HardyProjection::default(), None, &tol).unwrap_err();
        assert!(matches!(err, Error::IndexJump { .. }));
    }
}
