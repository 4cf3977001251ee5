//! Skeleton, direct-sum, and dilation factorizations for the operator class.
//!
//! The skeleton form writes an invertible `x` as `(1 + k) * x_p * u0^{-n}`:
//! `n` is the index of the compression `pxp`, `x_p` commutes with `p` exactly
//! (it is stored block-diagonally, so the commutation is structural), and `k`
//! is a finite-rank correction supported near the cut. The construction is
//! direct: with `y = x * u0^n`, the off-diagonal part `H` of `y` along `p` is
//! finite, `D = y - H` is block diagonal, and `k = H * D^{-1}` has one row
//! per nonzero row of `H`, each obtained from a windowed adjoint solve.
//!
//! Alternative views of the same data: a relabeling of `u0^{-n}` as a direct
//! sum of |n| shifts on arithmetic-progression subspaces, and two-by-two
//! dilations (square-root dilation for contractions, projection dilation for
//! partial isometries) whose corner ranks recover the index.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::{analytic_index, index_of_factorization, numeric_index, windowed_distance};
use crate::operators::{CorrectedLaurentOp, HardyProjection, SplitLaurentOp};
use crate::tol::Tolerances;
use crate::window::{
    condition_estimate, dense_rank, dense_square, hermitian_sqrt, invert_on_window, max_entry,
    sigma_max, OpWindow, SparseVec, TruncationWindow,
};

/// A vector with contiguous finite support starting at `lo`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportedVec {
    pub lo: i64,
    pub values: Vec<Complex64>,
}

impl SupportedVec {
    pub fn basis(i: i64) -> Self {
        SupportedVec { lo: i, values: vec![Complex64::ONE] }
    }

    pub fn get(&self, i: i64) -> Complex64 {
        let off = i - self.lo;
        if off < 0 || off >= self.values.len() as i64 {
            Complex64::ZERO
        } else {
            self.values[off as usize]
        }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64
    }

    /// Drops entries below `threshold` at both ends of the support.
    fn trim(&mut self, threshold: f64) {
        let keep: Vec<usize> = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() >= threshold)
            .map(|(t, _)| t)
            .collect();
        match (keep.first(), keep.last()) {
            (Some(&a), Some(&b)) => {
                self.values = self.values[a..=b].to_vec();
                self.lo += a as i64;
            }
            _ => self.values.clear(),
        }
    }

    fn radius(&self) -> i64 {
        if self.values.is_empty() {
            0
        } else {
            self.lo.abs().max((self.hi() - 1).abs())
        }
    }
}

/// A finite sum of rank-one terms `left (x) right`:
/// entry `(i, j)` is `sum_s left_s[i] * right_s[j]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LowRankOperator {
    pub terms: Vec<(SupportedVec, SupportedVec)>,
}

impl LowRankOperator {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn entry(&self, i: i64, j: i64) -> Complex64 {
        self.terms
            .iter()
            .map(|(l, r)| l.get(i) * r.get(j))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn support_radius(&self) -> i64 {
        self.terms
            .iter()
            .map(|(l, r)| l.radius().max(r.radius()))
            .max()
            .unwrap_or(0)
    }

    /// Numerical rank over the occupied rows and columns.
    pub fn rank(&self, rel_tol: f64) -> usize {
        if self.is_zero() {
            return 0;
        }
        let r = self.support_radius();
        let m = self.dense_on(-r - 1, r + 2);
        dense_rank(&m, rel_tol)
    }

    pub fn dense_on(&self, lo: i64, hi: i64) -> DMatrix<Complex64> {
        let size = (hi - lo) as usize;
        let mut m = DMatrix::zeros(size, size);
        for (l, r) in &self.terms {
            for li in l.lo..l.hi() {
                if li < lo || li >= hi {
                    continue;
                }
                let lv = l.get(li);
                for rj in r.lo..r.hi() {
                    if rj < lo || rj >= hi {
                        continue;
                    }
                    m[((li - lo) as usize, (rj - lo) as usize)] += lv * r.get(rj);
                }
            }
        }
        m
    }

    fn trim(&mut self, threshold: f64) {
        for (l, r) in &mut self.terms {
            l.trim(threshold);
            r.trim(threshold);
        }
        self.terms.retain(|(l, r)| !l.values.is_empty() && !r.values.is_empty());
    }
}

impl OpWindow for LowRankOperator {
    fn entry(&self, i: i64, j: i64) -> Complex64 {
        LowRankOperator::entry(self, i, j)
    }
    fn band_below(&self) -> i64 {
        0
    }
    fn band_above(&self) -> i64 {
        0
    }
    fn sparse_radius(&self) -> i64 {
        self.support_radius()
    }
}

/// The certified skeleton form `x = (1 + k) * x_p * u0^{-n}`.
#[derive(Debug, Clone)]
pub struct SkeletonFactorization {
    /// Index of the compression `pxp`.
    pub n: i64,
    /// Finite-rank factor; `1 + k` is the compact-correction part.
    pub k: LowRankOperator,
    /// Block-diagonal factor: commutes with `p` by storage.
    pub xp: SplitLaurentOp,
    /// Cut of the projection used.
    pub cut: i64,
    /// Relative max-entry reconstruction residual on the window.
    pub residual: f64,
    /// Half-width of the certification window.
    pub window: i64,
}

impl SkeletonFactorization {
    /// Dense `(1 + k) * x_p * u0^{-n}` over `[-half, half)`.
    pub fn reconstruct_window(&self, half: i64) -> DMatrix<Complex64> {
        let pad = self.xp.bandwidth() + self.n.abs() + 2;
        let m = half + pad.max(self.k.support_radius() + 1 - half).max(0) + pad;
        product_window(&self.k, &self.xp, self.n, m, half)
    }

    /// Index of the shift factor `u0^{-n}` read off its corner blocks;
    /// equals `n` for a sound factorization.
    pub fn skeleton_index(&self, tol: &Tolerances) -> Result<i64> {
        let shift = CorrectedLaurentOp::shift_power(-self.n);
        let blocks = shift.block_decompose(&HardyProjection::new(self.cut));
        index_of_factorization(&blocks, tol)
    }
}

/// Dense `(1 + k) * xp * u0^{-n}` assembled over `[-m, m)` and restricted to
/// `[-half, half)`.
fn product_window(
    k: &LowRankOperator,
    xp: &SplitLaurentOp,
    n: i64,
    m: i64,
    half: i64,
) -> DMatrix<Complex64> {
    let size = (2 * m) as usize;
    // B = xp * u0^{-n}: column j of B is column j - n of xp.
    let b = DMatrix::from_fn(size, size, |r, c| {
        xp.entry(r as i64 - m, c as i64 - m - n)
    });
    let mut p = b.clone();
    for (l, r) in &k.terms {
        for li in l.lo..l.hi() {
            if li < -m || li >= m {
                continue;
            }
            let lv = l.get(li);
            let row = (li + m) as usize;
            for rj in r.lo..r.hi() {
                if rj < -m || rj >= m {
                    continue;
                }
                let rv = lv * r.get(rj);
                for c in 0..size {
                    p[(row, c)] += rv * b[((rj + m) as usize, c)];
                }
            }
        }
    }
    let off = (m - half) as usize;
    let inner = (2 * half) as usize;
    p.view_range(off..off + inner, off..off + inner).into_owned()
}

/// Relative max-entry distance between the reconstructed product and `x`
/// over `[-half, half)`.
fn reconstruction_residual(
    fact: &SkeletonFactorization,
    x: &CorrectedLaurentOp,
    half: i64,
) -> f64 {
    let p = fact.reconstruct_window(half);
    let xw = dense_square(x, -half, half);
    let scale = max_entry(&xw).max(1e-300);
    max_entry(&(&p - &xw)) / scale
}

/// Computes the skeleton factorization of an invertible `x`.
///
/// The index is taken analytically (winding) for correction-free operators
/// and from the window schedule otherwise. The compact factor's rows are
/// solved through the adjoint of the block-diagonal factor on the given
/// window; entries below `tol.compact_trim` are dropped. The reported
/// residual is measured on twice the solve window, where rows truncated at
/// the window edge become visible; it would be vacuously small on the solve
/// window itself. Fails with `ResidualTooLarge` when that residual misses
/// `tol.residual_tol`.
pub fn skeleton_factor(
    x: &CorrectedLaurentOp,
    p: &HardyProjection,
    w: TruncationWindow,
    tol: &Tolerances,
) -> Result<SkeletonFactorization> {
    let n = if x.is_correction_free() {
        analytic_index(x.symbol(), tol)?
    } else {
        numeric_index(x, p, tol)?.value
    };
    let y = x.compose(&CorrectedLaurentOp::shift_power(n));
    let blocks = y.block_decompose(p);
    let h = blocks.b.add(&blocks.c);
    let xp = SplitLaurentOp::block_diagonal(
        p.cut,
        y.symbol().clone(),
        y.symbol().clone(),
        &blocks.a.correction,
        &blocks.d.correction,
    );

    let required = h.radius().max(y.correction().radius()).max(n.abs() + y.symbol().bandwidth()) + 2;
    if w.n <= required {
        return Err(Error::WindowTooSmall { n: w.n, required });
    }

    // Rows of k = H * D^{-1}: for row i, solve D^H w = conj(h_i) and
    // conjugate back.
    let mut row_indices: Vec<i64> = h.iter().map(|(i, _, _)| i).collect();
    row_indices.sort_unstable();
    row_indices.dedup();
    let rhs: Vec<SparseVec> = row_indices
        .iter()
        .map(|&i| {
            h.iter()
                .filter(|&(r, _, _)| r == i)
                .map(|(_, j, v)| (j, v.conj()))
                .collect()
        })
        .collect();

    let mut k = LowRankOperator::zero();
    if !rhs.is_empty() {
        let adj = xp.adjoint();
        let solve = invert_on_window(&adj, w, &rhs, tol).map_err(|e| match e {
            Error::SingularTruncation { cond } => Error::DiagonalBlockSingular { cond },
            other => other,
        })?;
        for (&i, sol) in row_indices.iter().zip(solve.solutions.iter()) {
            let right = SupportedVec {
                lo: solve.lo,
                values: sol.iter().map(|v| v.conj()).collect(),
            };
            k.terms.push((SupportedVec::basis(i), right));
        }
        k.trim(tol.compact_trim);
    }

    let mut fact = SkeletonFactorization {
        n,
        k,
        xp,
        cut: p.cut,
        residual: 0.0,
        window: w.n,
    };
    fact.residual = reconstruction_residual(&fact, x, 2 * w.n);
    if fact.residual > tol.residual_tol {
        return Err(Error::ResidualTooLarge { residual: fact.residual, tol: tol.residual_tol });
    }
    Ok(fact)
}

/// Tries `skeleton_factor` over increasing window half-widths, returning the
/// first success; convergence failures escalate to the next window.
pub fn skeleton_factor_scheduled(
    x: &CorrectedLaurentOp,
    p: &HardyProjection,
    windows: &[i64],
    tol: &Tolerances,
) -> Result<SkeletonFactorization> {
    let mut last = None;
    for &n in windows {
        match skeleton_factor(x, p, TruncationWindow::new(n, 8), tol) {
            Ok(f) => return Ok(f),
            Err(e @ (Error::NotConverged { .. } | Error::WindowTooSmall { .. } | Error::ResidualTooLarge { .. })) => {
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::InvalidInput("empty window schedule".into())))
}

/// Re-verification of a factorization against `x` at twice the stored solve
/// window and at four times it. Both scales see the compact factor's
/// window-edge truncation, so a sound factorization keeps them comparable
/// while a defective one degrades.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub n: i64,
    pub k_rank: usize,
    pub k_support_radius: i64,
    pub residual: f64,
    pub residual_doubled: f64,
    pub window: i64,
    pub stable_under_doubling: bool,
    /// Largest cut-crossing entry of `x_p` (structurally zero).
    pub commutation_defect: f64,
    /// Whether the shift factor's corner-block index equals `n`.
    pub index_consistent: bool,
}

impl VerificationReport {
    pub fn passed(&self, tol: &Tolerances) -> bool {
        self.residual <= tol.residual_tol
            && self.stable_under_doubling
            && self.index_consistent
            && self.commutation_defect <= tol.projection_tol
    }
}

pub fn verify_factorization(
    fact: &SkeletonFactorization,
    x: &CorrectedLaurentOp,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    let residual = reconstruction_residual(fact, x, 2 * fact.window);
    let residual_doubled = reconstruction_residual(fact, x, 4 * fact.window);
    let commutation_defect = fact
        .xp
        .sparse()
        .iter()
        .filter(|&(i, j, _)| (i >= fact.cut) != (j >= fact.cut))
        .map(|(_, _, v)| v.norm())
        .fold(0.0, f64::max);
    let index_consistent = fact.skeleton_index(tol)? == fact.n;
    Ok(VerificationReport {
        n: fact.n,
        k_rank: fact.k.rank(tol.sv_rel_tol),
        k_support_radius: fact.k.support_radius(),
        residual,
        residual_doubled,
        window: fact.window,
        stable_under_doubling: residual_doubled <= 10.0 * residual.max(1e-14),
        commutation_defect,
        index_consistent,
    })
}

/// How the shift factor of a skeleton form is presented.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlternativeForm {
    /// `n = 0`: the factorization is the two-factor form `(1 + k) * x_p`.
    TwoFactor,
    /// `|n| > 0`: `u0^{-n}` is the direct sum of `|n|` bilateral shifts on
    /// the arithmetic-progression subspaces `span{ e_{r + m |n|} : m }`.
    DirectSum {
        subspaces: Vec<ProgressionSubspace>,
        direction: ShiftDirection,
    },
}

/// The residue-class subspace `span{ e_{residue + m * modulus} }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgressionSubspace {
    pub residue: i64,
    pub modulus: i64,
}

impl ProgressionSubspace {
    pub fn contains(&self, i: i64) -> bool {
        i.rem_euclid(self.modulus) == self.residue
    }

    /// Position of `e_i` within the relabeled copy of the bilateral lattice.
    pub fn position(&self, i: i64) -> i64 {
        debug_assert!(self.contains(i));
        (i - self.residue).div_euclid(self.modulus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDirection {
    /// Each summand advances one step (`n < 0`).
    Forward,
    /// Each summand retreats one step (`n > 0`).
    Backward,
}

/// Skeleton factorization together with the direct-sum relabeling of its
/// shift factor.
#[derive(Debug, Clone)]
pub struct AlternativeFactorization {
    pub base: SkeletonFactorization,
    pub form: AlternativeForm,
}

/// Computes the skeleton form and relabels `u0^{-n}` as a direct sum of
/// one-step shifts on residue classes mod `|n|`. With `n = 0` the direct sum
/// is vacuous and the two-factor form is returned.
pub fn alternative_factor(
    x: &CorrectedLaurentOp,
    p: &HardyProjection,
    w: TruncationWindow,
    tol: &Tolerances,
) -> Result<AlternativeFactorization> {
    let base = skeleton_factor(x, p, w, tol)?;
    let n = base.n;
    let form = if n == 0 {
        AlternativeForm::TwoFactor
    } else {
        let modulus = n.abs();
        AlternativeForm::DirectSum {
            subspaces: (0..modulus)
                .map(|residue| ProgressionSubspace { residue, modulus })
                .collect(),
            direction: if n < 0 { ShiftDirection::Forward } else { ShiftDirection::Backward },
        }
    };
    Ok(AlternativeFactorization { base, form })
}

/// Two-by-two dilation of a windowed contraction:
/// `(x, (1-xx*)^{1/2}; (1-x*x)^{1/2}, -x*)`.
#[derive(Debug, Clone)]
pub struct HalmosDilation {
    /// Half-width of the stored blocks' window `[-half, half)`.
    pub half: i64,
    pub x_block: DMatrix<Complex64>,
    pub defect_upper: DMatrix<Complex64>,
    pub defect_lower: DMatrix<Complex64>,
    pub neg_adjoint: DMatrix<Complex64>,
    /// Windowed norm estimate of `x`.
    pub norm_estimate: f64,
    /// Two-scale agreement of the square-root blocks.
    pub two_scale_defect: f64,
    /// Rank of `1 - x x*` on the window.
    pub defect_rank_upper: usize,
    /// Rank of `1 - x* x` on the window.
    pub defect_rank_lower: usize,
    /// Condition estimate of the assembled two-by-two block matrix.
    pub condition: f64,
    /// Max-entry unitarity defect of the assembled blocks on the window.
    pub unitary_defect: f64,
}

/// Builds the square-root dilation of a contraction on truncation windows.
///
/// The defect square roots are computed by eigendecomposition at half-widths
/// `w.n` and `2 w.n` (each padded); their restrictions to `[-w.n, w.n)` must
/// agree within `tol.sqrt_agree_tol`. Fails with `NormExceedsOne` when the
/// windowed norm estimate exceeds one.
pub fn halmos_dilation<T: OpWindow + ?Sized>(
    x: &T,
    w: TruncationWindow,
    tol: &Tolerances,
) -> Result<HalmosDilation> {
    let pad = w.pad.max(x.bandwidth()).max(1);
    let small = dilation_blocks_at(x, w.n + pad);
    let large = dilation_blocks_at(x, 2 * w.n + pad);
    let norm_estimate = large.norm;
    if norm_estimate > 1.0 + tol.projection_tol {
        return Err(Error::NormExceedsOne { norm: norm_estimate });
    }

    let inner = |m: &DMatrix<Complex64>| {
        let lo = m.nrows() / 2 - w.n as usize;
        let n = (2 * w.n) as usize;
        m.view_range(lo..lo + n, lo..lo + n).into_owned()
    };
    let su = inner(&small.sqrt_upper);
    let sl = inner(&small.sqrt_lower);
    let lu = inner(&large.sqrt_upper);
    let ll = inner(&large.sqrt_lower);
    let two_scale_defect = max_entry(&(&su - &lu)).max(max_entry(&(&sl - &ll)));
    if two_scale_defect > tol.sqrt_agree_tol {
        return Err(Error::NotConverged { disagreement: two_scale_defect, tol: tol.sqrt_agree_tol });
    }

    let x_block = inner(&large.x);
    let neg_adjoint = -x_block.adjoint();
    let defect_rank_upper = dense_rank(&inner(&large.defect_upper), tol.sv_rel_tol);
    let defect_rank_lower = dense_rank(&inner(&large.defect_lower), tol.sv_rel_tol);

    // Unitarity and invertibility on the assembled large window, judged on
    // the inner part only (the outer pad absorbs truncation junk).
    let big = assemble_two_by_two(&large.x, &large.sqrt_upper, &large.sqrt_lower);
    let gram = big.adjoint() * &big;
    let unitary_defect = two_by_two_inner_defect(&gram, large.half, w.n);
    let condition = condition_estimate(&big);

    Ok(HalmosDilation {
        half: w.n,
        x_block,
        defect_upper: lu,
        defect_lower: ll,
        neg_adjoint,
        norm_estimate,
        two_scale_defect,
        defect_rank_upper,
        defect_rank_lower,
        condition,
        unitary_defect,
    })
}

struct DilationBlocks {
    half: i64,
    x: DMatrix<Complex64>,
    defect_upper: DMatrix<Complex64>,
    defect_lower: DMatrix<Complex64>,
    sqrt_upper: DMatrix<Complex64>,
    sqrt_lower: DMatrix<Complex64>,
    norm: f64,
}

fn dilation_blocks_at<T: OpWindow + ?Sized>(x: &T, half: i64) -> DilationBlocks {
    let xd = dense_square(x, -half, half);
    let id = DMatrix::<Complex64>::identity(xd.nrows(), xd.ncols());
    let defect_upper = &id - &xd * xd.adjoint();
    let defect_lower = &id - xd.adjoint() * &xd;
    DilationBlocks {
        half,
        norm: sigma_max(&xd),
        sqrt_upper: hermitian_sqrt(&defect_upper),
        sqrt_lower: hermitian_sqrt(&defect_lower),
        x: xd,
        defect_upper,
        defect_lower,
    }
}

fn assemble_two_by_two(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    c: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let n = a.nrows();
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    let d = -a.adjoint();
    w.view_range_mut(0..n, 0..n).copy_from(a);
    w.view_range_mut(0..n, n..2 * n).copy_from(b);
    w.view_range_mut(n..2 * n, 0..n).copy_from(c);
    w.view_range_mut(n..2 * n, n..2 * n).copy_from(&d);
    w
}

/// Max deviation of a two-by-two gram matrix from the identity over the inner
/// `[-inner, inner)` coordinates of both components.
fn two_by_two_inner_defect(gram: &DMatrix<Complex64>, half: i64, inner: i64) -> f64 {
    let n = gram.nrows() / 2;
    let off = (half - inner) as usize;
    let len = (2 * inner) as usize;
    let mut worst = 0.0f64;
    for (bi, bj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let view = gram.view_range(bi * n + off..bi * n + off + len, bj * n + off..bj * n + off + len);
        for r in 0..len {
            for c in 0..len {
                let expect = if bi == bj && r == c { Complex64::ONE } else { Complex64::ZERO };
                worst = worst.max((view[(r, c)] - expect).norm());
            }
        }
    }
    worst
}

/// Projection dilation of a partial isometry:
/// `w = (v, 1 - v v*; 1 - v* v, -v*)` with finite defect projections.
#[derive(Debug, Clone)]
pub struct DilationUnitary {
    pub v: SplitLaurentOp,
    /// Half-width of the stored blocks' window.
    pub half: i64,
    pub v_block: DMatrix<Complex64>,
    /// `1 - v v*` on the window.
    pub range_defect: DMatrix<Complex64>,
    /// `1 - v* v` on the window.
    pub domain_defect: DMatrix<Complex64>,
    pub rank_range_defect: usize,
    pub rank_domain_defect: usize,
    /// `rank(1 - v* v) - rank(1 - v v*)`, the index of `v`.
    pub index: i64,
    pub unitary_defect: f64,
}

/// Builds the projection dilation of a partial isometry `v` and reads the
/// index off the defect ranks.
///
/// Fails with `NotPartialIsometry` when `1 - v v*` or `1 - v* v` is not a
/// projection on the window, and with `InfiniteDefect` when a defect rank
/// keeps growing as the window doubles.
pub fn dilation_skeleton(
    v: &SplitLaurentOp,
    w: TruncationWindow,
    tol: &Tolerances,
) -> Result<DilationUnitary> {
    let pad = w.pad.max(v.bandwidth()).max(1);
    let small = defect_pair(v, w.n + pad, w.n / 2);
    let large = defect_pair(v, 2 * w.n + pad, w.n);

    let defect = large.projection_defect.max(small.projection_defect);
    if defect > tol.projection_tol {
        return Err(Error::NotPartialIsometry { defect });
    }
    // Finite-rank defects do not grow once the window covers them; compare
    // the halved inner window against the full one.
    if small.rank_range != large.rank_range || small.rank_domain != large.rank_domain {
        let (rank_small, rank_large) = if small.rank_range != large.rank_range {
            (small.rank_range, large.rank_range)
        } else {
            (small.rank_domain, large.rank_domain)
        };
        return Err(Error::InfiniteDefect {
            rank_small,
            small: w.n / 2,
            rank_large,
            large: w.n,
        });
    }

    let big = assemble_two_by_two(&large.v_full, &large.range_full, &large.domain_full);
    let gram = big.adjoint() * &big;
    let unitary_defect = two_by_two_inner_defect(&gram, large.half, w.n);
    if unitary_defect > tol.projection_tol {
        return Err(Error::NotPartialIsometry { defect: unitary_defect });
    }

    Ok(DilationUnitary {
        v: v.clone(),
        half: w.n,
        v_block: large.v_inner,
        range_defect: large.range_inner,
        domain_defect: large.domain_inner,
        rank_range_defect: large.rank_range,
        rank_domain_defect: large.rank_domain,
        index: large.rank_domain as i64 - large.rank_range as i64,
        unitary_defect,
    })
}

struct DefectPair {
    half: i64,
    v_full: DMatrix<Complex64>,
    range_full: DMatrix<Complex64>,
    domain_full: DMatrix<Complex64>,
    v_inner: DMatrix<Complex64>,
    range_inner: DMatrix<Complex64>,
    domain_inner: DMatrix<Complex64>,
    rank_range: usize,
    rank_domain: usize,
    projection_defect: f64,
}

fn defect_pair(v: &SplitLaurentOp, half: i64, inner: i64) -> DefectPair {
    let vd = dense_square(v, -half, half);
    let id = DMatrix::<Complex64>::identity(vd.nrows(), vd.ncols());
    let range = &id - &vd * vd.adjoint();
    let domain = &id - vd.adjoint() * &vd;
    let restrict = |m: &DMatrix<Complex64>| {
        let off = (half - inner) as usize;
        let len = (2 * inner) as usize;
        m.view_range(off..off + len, off..off + len).into_owned()
    };
    let range_inner = restrict(&range);
    let domain_inner = restrict(&domain);
    let proj_defect = |p: &DMatrix<Complex64>| {
        let sq = p * p - p;
        max_entry(&restrict(&sq))
    };
    let projection_defect = proj_defect(&range).max(proj_defect(&domain));
    DefectPair {
        half,
        rank_range: dense_rank(&range_inner, 1e-8),
        rank_domain: dense_rank(&domain_inner, 1e-8),
        v_inner: restrict(&vd),
        v_full: vd,
        range_full: range,
        domain_full: domain,
        range_inner,
        domain_inner,
        projection_defect,
    }
}

/// Factorizations of a sampled family, with a continuity proxy.
#[derive(Debug, Clone)]
pub struct FamilyFactorization {
    pub factorizations: Vec<SkeletonFactorization>,
    pub n: i64,
    pub max_adjacent_distance: f64,
    /// Set when the distance exceeds the caller's budget.
    pub flagged: bool,
}

/// Factors every sample of a family and requires one common index.
///
/// `expected_n` pins the index (from a component map); `None` adopts the
/// first sample's. A sample disagreeing fails with `IndexMismatch`.
pub fn family_factor(
    samples: &[CorrectedLaurentOp],
    p: &HardyProjection,
    w: TruncationWindow,
    expected_n: Option<i64>,
    continuity_budget: Option<f64>,
    tol: &Tolerances,
) -> Result<FamilyFactorization> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("family has no samples".into()));
    }
    let results: Vec<Result<SkeletonFactorization>> = samples
        .par_iter()
        .map(|x| skeleton_factor(x, p, w, tol))
        .collect();
    let mut factorizations = Vec::with_capacity(samples.len());
    for r in results {
        factorizations.push(r?);
    }
    let n = expected_n.unwrap_or(factorizations[0].n);
    for (at, f) in factorizations.iter().enumerate() {
        if f.n != n {
            return Err(Error::IndexMismatch { at, expected: n, found: f.n });
        }
    }
    let max_adjacent_distance = windowed_distance(samples);
    let flagged = continuity_budget.is_some_and(|b| max_adjacent_distance > b);
    Ok(FamilyFactorization { factorizations, n, max_adjacent_distance, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::SparseFinite;
    use crate::symbol::LaurentSymbol;

    fn tolerances() -> Tolerances {
        Tolerances::default()
    }

    fn window() -> TruncationWindow {
        TruncationWindow::new(48, 8)
    }

    #[test]
    fn skeleton_of_shift_is_pure() {
        let tol = tolerances();
        let x = CorrectedLaurentOp::shift_power(1);
        let f = skeleton_factor(&x, &HardyProjection::default(), window(), &tol).unwrap();
        assert_eq!(f.n, -1);
        assert!(f.k.is_zero());
        assert!(f.residual <= 1e-14);
        assert_eq!(f.skeleton_index(&tol).unwrap(), -1);
        // x_p is the identity.
        for i in -4..4 {
            assert_eq!(f.xp.entry(i, i), Complex64::ONE);
        }
    }

    #[test]
    fn skeleton_of_zero_winding_symbol() {
        let tol = tolerances();
        let x = CorrectedLaurentOp::laurent_op(LaurentSymbol::from_reals(0, &[-2.0, 1.0]));
        let f = skeleton_factor(&x, &HardyProjection::default(), window(), &tol).unwrap();
        assert_eq!(f.n, 0);
        assert!(f.residual <= tol.residual_tol);
        assert!(f.k.rank(1e-8) <= 1);
    }

    #[test]
    fn skeleton_of_winding_one_symbol() {
        let tol = tolerances();
        let x = CorrectedLaurentOp::laurent_op(LaurentSymbol::from_reals(0, &[0.5, 1.0]));
        let f = skeleton_factor(&x, &HardyProjection::default(), window(), &tol).unwrap();
        assert_eq!(f.n, -1);
        assert!(f.residual <= tol.residual_tol);
        assert_eq!(f.k.rank(1e-8), 1);
        assert_eq!(f.skeleton_index(&tol).unwrap(), -1);
    }

    #[test]
    fn verify_flags_corrupted_compact_factor() {
        let tol = tolerances();
        let x = CorrectedLaurentOp::laurent_op(LaurentSymbol::from_reals(0, &[0.5, 1.0]));
        let mut f = skeleton_factor(&x, &HardyProjection::default(), window(), &tol).unwrap();
        let clean = verify_factorization(&f, &x, &tol).unwrap();
        assert!(clean.passed(&tol));
        // Corrupt one stored entry of k by +0.1.
        let (_, right) = &mut f.k.terms[0];
        let mid = right.values.len() / 2;
        right.values[mid] += Complex64::new(0.1, 0.0);
        let bad = verify_factorization(&f, &x, &tol).unwrap();
        assert!(bad.residual >= 0.05, "residual {}", bad.residual);
        assert!(!bad.passed(&tol));
    }

    #[test]
    fn diagonal_block_singularity_is_reported() {
        // Symbol (z - 2)(1/z - 3) has winding zero; a correction that zeroes
        // the first column of the upper compression makes the diagonal block
        // singular while x itself stays invertible.
        let tol = tolerances();
        let f = LaurentSymbol::from_coeffs([
            (-1, Complex64::new(-2.0, 0.0)),
            (0, Complex64::new(7.0, 0.0)),
            (1, Complex64::new(-3.0, 0.0)),
        ]);
        let mut corr = SparseFinite::new();
        corr.add_entry(0, 0, Complex64::new(-7.0, 0.0));
        corr.add_entry(1, 0, Complex64::new(3.0, 0.0));
        let x = CorrectedLaurentOp::new(f, corr);
        let err = skeleton_factor(&x, &HardyProjection::default(), window(), &tolerances());
        match err {
            Err(Error::DiagonalBlockSingular { .. }) => {}
            other => panic!("expected DiagonalBlockSingular, got {other:?}"),
        }
        let _ = tol;
    }

    #[test]
    fn alternative_form_of_square_shift() {
        let tol = tolerances();
        let x = CorrectedLaurentOp::shift_power(2);
        let alt = alternative_factor(&x, &HardyProjection::default(), window(), &tol).unwrap();
        assert_eq!(alt.base.n, -2);
        match &alt.form {
            AlternativeForm::DirectSum { subspaces, direction } => {
                assert_eq!(subspaces.len(), 2);
                assert_eq!(*direction, ShiftDirection::Forward);
                // The relabeling splits the lattice by parity, and the shift
                // factor advances each class by one relabeled step.
                for s in subspaces {
                    for m in -3..3 {
                        let i = s.residue + m * s.modulus;
                        assert!(s.contains(i));
                        assert_eq!(s.position(i), m);
                        assert!(s.contains(i + s.modulus));
                        assert_eq!(s.position(i + s.modulus), m + 1);
                    }
                }
            }
            other => panic!("expected direct sum, got {other:?}"),
        }
    }

    #[test]
    fn alternative_form_collapses_at_zero_index() {
        let tol = tolerances();
        let x = CorrectedLaurentOp::laurent_op(LaurentSymbol::from_reals(0, &[-2.0, 1.0]));
        let alt = alternative_factor(&x, &HardyProjection::default(), window(), &tol).unwrap();
        assert_eq!(alt.form, AlternativeForm::TwoFactor);
    }

    #[test]
    fn halmos_dilation_of_zero() {
        let tol = tolerances();
        let x = CorrectedLaurentOp::laurent_op(LaurentSymbol::zero());
        let d = halmos_dilation(&x, TruncationWindow::new(8, 2), &tol).unwrap();
        // (0, 1; 1, 0): both square-root blocks are the identity.
        let n = d.defect_upper.nrows();
        for r in 0..n {
            for c in 0..n {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((d.defect_upper[(r, c)].re - expect).abs() < 1e-12);
                assert!((d.defect_lower[(r, c)].re - expect).abs() < 1e-12);
                assert!(d.x_block[(r, c)].norm() < 1e-14);
            }
        }
        assert!(d.unitary_defect < 1e-10);
    }

    #[test]
    fn halmos_dilation_of_half_identity() {
        let tol = tolerances();
        let x = CorrectedLaurentOp::identity().scale(Complex64::new(0.5, 0.0));
        let d = halmos_dilation(&x, TruncationWindow::new(8, 2), &tol).unwrap();
        let root = (3.0f64).sqrt() / 2.0;
        let n = d.defect_upper.nrows();
        for r in 0..n {
            let got = d.defect_upper[(r, r)].re;
            assert!((got - root).abs() < 1e-12, "{got} vs {root}");
            assert!((d.neg_adjoint[(r, r)].re + 0.5).abs() < 1e-14);
        }
        assert!(d.unitary_defect < 1e-10);
    }

    #[test]
    fn halmos_dilation_of_embedded_shift() {
        let tol = tolerances();
        let v = SplitLaurentOp::embedded_shift(0, 1);
        let d = halmos_dilation(&v, TruncationWindow::new(16, 4), &tol).unwrap();
        assert_eq!(d.defect_rank_upper, 1);
        assert_eq!(d.defect_rank_lower, 0);
        assert!(d.norm_estimate <= 1.0 + 1e-10);
    }

    #[test]
    fn halmos_dilation_rejects_expansions() {
        let tol = tolerances();
        let x = CorrectedLaurentOp::identity().scale(Complex64::new(2.0, 0.0));
        assert!(matches!(
            halmos_dilation(&x, TruncationWindow::new(8, 2), &tol),
            Err(Error::NormExceedsOne { .. })
        ));
    }

    #[test]
    fn dilation_skeleton_of_embedded_shifts() {
        let tol = tolerances();
        for m in 1..=3i64 {
            let v = SplitLaurentOp::embedded_shift(0, m);
            let d = dilation_skeleton(&v, TruncationWindow::new(16, 4), &tol).unwrap();
            assert_eq!(d.rank_range_defect, m as usize);
            assert_eq!(d.rank_domain_defect, 0);
            assert_eq!(d.index, -m);
            assert!(d.unitary_defect <= 1e-10);
        }
    }

    #[test]
    fn dilation_skeleton_of_unitary_shift() {
        let tol = tolerances();
        let v = CorrectedLaurentOp::shift_power(1).split_along(0);
        let d = dilation_skeleton(&v, TruncationWindow::new(16, 4), &tol).unwrap();
        assert_eq!(d.index, 0);
        assert_eq!(d.rank_range_defect, 0);
        assert_eq!(d.rank_domain_defect, 0);
    }

    #[test]
    fn dilation_skeleton_rejects_scaled_shift() {
        let tol = tolerances();
        let v = CorrectedLaurentOp::shift_power(1)
            .scale(Complex64::new(0.5, 0.0))
            .split_along(0);
        assert!(matches!(
            dilation_skeleton(&v, TruncationWindow::new(16, 4), &tol),
            Err(Error::NotPartialIsometry { .. })
        ));
    }

    #[test]
    fn dilation_skeleton_rejects_half_line_cutoff() {
        let tol = tolerances();
        // Shift above the cut, zero below: the domain defect is a half-line
        // projection, never finite rank.
        let v = SplitLaurentOp::new(
            0,
            LaurentSymbol::monomial(1),
            LaurentSymbol::zero(),
            SparseFinite::new(),
        );
        assert!(matches!(
            dilation_skeleton(&v, TruncationWindow::new(16, 4), &tol),
            Err(Error::InfiniteDefect { .. })
        ));
    }

    #[test]
    fn family_factor_of_translated_resolvents() {
        let tol = tolerances();
        // x - lambda for lambda on a small circle around 0, x = u0: all
        // samples have index -1.
        let samples: Vec<CorrectedLaurentOp> = (0..6)
            .map(|j| {
                let angle = std::f64::consts::TAU * j as f64 / 6.0;
                let lambda = Complex64::from_polar(0.3, angle);
                CorrectedLaurentOp::laurent_op(LaurentSymbol::from_coeffs([
                    (1, Complex64::ONE),
                    (0, -lambda),
                ]))
            })
            .collect();
        let fam = family_factor(
            &samples,
            &HardyProjection::default(),
            window(),
            Some(-1),
            Some(1.0),
            &tol,
        )
        .unwrap();
        assert_eq!(fam.n, -1);
        assert!(!fam.flagged);
        assert!(fam.max_adjacent_distance < 0.5);
    }

    #[test]
    fn family_factor_rejects_mixed_indices() {
        let tol = tolerances();
        let inside = CorrectedLaurentOp::laurent_op(LaurentSymbol::from_reals(0, &[-0.5, 1.0]));
        let outside = CorrectedLaurentOp::laurent_op(LaurentSymbol::from_reals(0, &[-2.0, 1.0]));
        let err = family_factor(
            &[inside, outside],
            &HardyProjection::default(),
            window(),
            None,
            None,
            &tol,
        )
        .unwrap_err();
        assert!(matches!(err, Error::IndexMismatch { .. }));
    }
}
