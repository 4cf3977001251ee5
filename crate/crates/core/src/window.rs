//! Finite truncation windows and the dense numerics performed on them.
//!
//! Infinite operators enter through the [`OpWindow`] entry oracle; every
//! numerical statement the crate makes is certified on finite windows, usually
//! by solving at two scales and comparing on the inner window.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol::{Tolerances, POWER_ITERS};

/// Entry oracle plus band bookkeeping for operators on the bilateral
/// sequence space.
pub trait OpWindow {
    /// Matrix entry at row `i`, column `j`.
    fn entry(&self, i: i64, j: i64) -> Complex64;
    /// Furthest reach of nonzero band entries below the diagonal (`i - j`).
    fn band_below(&self) -> i64;
    /// Furthest reach above the diagonal (`j - i`).
    fn band_above(&self) -> i64;
    /// Radius `max(|i|, |j|)` of the finite part, 0 when absent.
    fn sparse_radius(&self) -> i64;

    /// Band width `band_below + band_above`.
    fn bandwidth(&self) -> i64 {
        self.band_below() + self.band_above()
    }
}

/// Symmetric index window `[-n, n)` with padding used during solves and
/// discarded from results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationWindow {
    pub n: i64,
    pub pad: i64,
}

impl TruncationWindow {
    pub fn new(n: i64, pad: i64) -> Self {
        assert!(n > 0 && pad >= 0);
        TruncationWindow { n, pad }
    }
}

/// Dense matrix of `op` over rows `[row_lo, row_hi)`, columns `[col_lo, col_hi)`.
pub fn dense_rect<T: OpWindow + ?Sized>(
    op: &T,
    row_lo: i64,
    row_hi: i64,
    col_lo: i64,
    col_hi: i64,
) -> DMatrix<Complex64> {
    let rows = (row_hi - row_lo) as usize;
    let cols = (col_hi - col_lo) as usize;
    DMatrix::from_fn(rows, cols, |r, c| {
        op.entry(row_lo + r as i64, col_lo + c as i64)
    })
}

/// Dense matrix of `op` over the square window `[lo, hi)`.
pub fn dense_square<T: OpWindow + ?Sized>(op: &T, lo: i64, hi: i64) -> DMatrix<Complex64> {
    dense_rect(op, lo, hi, lo, hi)
}

/// A right-hand side with finitely many labeled entries.
pub type SparseVec = Vec<(i64, Complex64)>;

/// Solutions of windowed systems `x * sol = rhs`, restricted to `[-n, n)`.
#[derive(Debug, Clone)]
pub struct WindowSolve {
    /// Start index of the solution slices (always `-n`).
    pub lo: i64,
    /// One solution per right-hand side, length `2n` each.
    pub solutions: Vec<Vec<Complex64>>,
    /// Relative two-scale disagreement over all right-hand sides.
    pub disagreement: f64,
    /// Condition estimate of the large solve window.
    pub condition_estimate: f64,
}

/// Solves `x * v = rhs` on padded windows of half-width `n` and `2n` and
/// returns the large-window solutions restricted to `[-n, n)`.
///
/// Convergence means the two restrictions agree to within `tol.solve_tol`
/// relatively; otherwise the call fails with `NotConverged`. A condition
/// estimate above `tol.condition_cap` fails with `SingularTruncation`.
pub fn invert_on_window<T: OpWindow + ?Sized>(
    x: &T,
    w: TruncationWindow,
    rhs: &[SparseVec],
    tol: &Tolerances,
) -> Result<WindowSolve> {
    let pad = w.pad.max(x.bandwidth()).max(1);
    let n = w.n;
    for (k, r) in rhs.iter().enumerate() {
        for &(i, _) in r {
            if i < -n || i >= n {
                return Err(Error::InvalidInput(format!(
                    "right-hand side {k} has support at {i}, outside the window [{}, {})",
                    -n, n
                )));
            }
        }
    }

    let small = solve_at(x, n + pad, rhs, n, tol)?;
    let large = solve_at(x, 2 * n + pad, rhs, n, tol)?;

    let mut disagreement = 0.0f64;
    for (a, b) in small.0.iter().zip(large.0.iter()) {
        let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        for (u, v) in a.iter().zip(b.iter()) {
            disagreement = disagreement.max((u - v).norm() / scale);
        }
    }
    if disagreement > tol.solve_tol {
        return Err(Error::NotConverged { disagreement, tol: tol.solve_tol });
    }
    Ok(WindowSolve {
        lo: -n,
        solutions: large.0,
        disagreement,
        condition_estimate: large.1,
    })
}

/// One dense solve over `[-half, half)`, restricted to `[-inner, inner)`.
/// Returns the restricted solutions and the condition estimate.
fn solve_at<T: OpWindow + ?Sized>(
    x: &T,
    half: i64,
    rhs: &[SparseVec],
    inner: i64,
    tol: &Tolerances,
) -> Result<(Vec<Vec<Complex64>>, f64)> {
    let (lo, hi) = (-half, half);
    let a = dense_square(x, lo, hi);
    let cond = condition_estimate(&a);
    if !cond.is_finite() || cond > tol.condition_cap {
        return Err(Error::SingularTruncation { cond });
    }
    let lu = a.clone().lu();
    let size = (hi - lo) as usize;
    let mut out = Vec::with_capacity(rhs.len());
    for r in rhs {
        let mut b = DVector::from_element(size, Complex64::ZERO);
        for &(i, v) in r {
            b[(i - lo) as usize] += v;
        }
        let sol = lu
            .solve(&b)
            .ok_or(Error::SingularTruncation { cond: f64::INFINITY })?;
        let slice: Vec<Complex64> = (-inner..inner)
            .map(|i| sol[(i - lo) as usize])
            .collect();
        if slice.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SingularTruncation { cond: f64::INFINITY });
        }
        out.push(slice);
    }
    Ok((out, cond))
}

/// Power-iteration condition estimate `sigma_max / sigma_min`, twenty steps
/// each from a deterministic start. Returns infinity for exactly singular
/// matrices.
pub fn condition_estimate(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let start = DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));

    let mut v = start.clone();
    let mut sigma_max = 0.0f64;
    for _ in 0..POWER_ITERS {
        let w = a.adjoint() * (a * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        sigma_max = norm.sqrt();
        v = w / Complex64::new(norm, 0.0);
    }

    let lu = a.clone().lu();
    let lu_adj = a.adjoint().lu();
    let mut w = start;
    let mut inv_norm = 0.0f64;
    for _ in 0..POWER_ITERS {
        // One step of power iteration on (A^H A)^{-1} = A^{-1} A^{-H}.
        let t = match lu_adj.solve(&w) {
            Some(t) => t,
            None => return f64::INFINITY,
        };
        let y = match lu.solve(&t) {
            Some(y) => y,
            None => return f64::INFINITY,
        };
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            return f64::INFINITY;
        }
        inv_norm = norm.sqrt();
        w = y / Complex64::new(norm, 0.0);
    }
    sigma_max * inv_norm
}

/// Orthonormal basis of the numerical kernel of a rectangular matrix,
/// through the eigendecomposition of `A^H A` (which exposes the full right
/// singular basis even for wide matrices).
pub struct KernelBasis {
    pub sigma_max: f64,
    /// Columns span the numerical kernel, ordered by ascending singular value.
    pub basis: DMatrix<Complex64>,
}

pub fn numerical_kernel(a: &DMatrix<Complex64>, rel_tol: f64) -> KernelBasis {
    let gram = a.adjoint() * a;
    let eig = gram.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| {
        eig.eigenvalues[p]
            .partial_cmp(&eig.eigenvalues[q])
            .unwrap()
            .then(p.cmp(&q))
    });
    let sigma = |k: usize| eig.eigenvalues[k].max(0.0).sqrt();
    let sigma_max = order.last().map_or(0.0, |&k| sigma(k));
    // Gram eigenvalues square the singular values, so a purely relative
    // threshold can dip below what the eigensolver resolves and a true kernel
    // value then surfaces as roundoff noise above the cut. An absolute floor
    // at the eigen roundoff scale keeps the classification honest; anything
    // living between the floor and the operator's margin is outside the
    // class this crate certifies.
    let floor = f64::EPSILON * sigma_max * sigma_max * n as f64;
    let cut = (rel_tol * sigma_max).powi(2).max(floor);
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&k| eig.eigenvalues[k] <= cut)
        .collect();
    let mut basis = DMatrix::zeros(n, kept.len());
    for (col, &k) in kept.iter().enumerate() {
        basis.set_column(col, &eig.eigenvectors.column(k));
    }
    KernelBasis { sigma_max, basis }
}

/// Largest singular value.
pub fn sigma_max(a: &DMatrix<Complex64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().copied().fold(0.0, f64::max)
}

/// Number of singular values above `rel_tol * max(sigma_max, 1)`.
pub fn dense_rank(a: &DMatrix<Complex64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let svd = a.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = rel_tol * sigma_max.max(1.0);
    svd.singular_values.iter().filter(|&&s| s > cut).count()
}

/// Hermitian square root of a positive semidefinite matrix; negative
/// eigenvalues from roundoff are clamped to zero.
pub fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (col, &lambda) in eig.eigenvalues.iter().enumerate() {
        let root = Complex64::new(lambda.max(0.0).sqrt(), 0.0);
        scaled.column_mut(col).scale_mut(1.0);
        for r in 0..scaled.nrows() {
            scaled[(r, col)] *= root;
        }
    }
    &scaled * eig.eigenvectors.adjoint()
}

/// Largest entry modulus of a matrix.
pub fn max_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
