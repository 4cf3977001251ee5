//! Operators on the bilateral sequence space: Laurent (constant-diagonal)
//! parts plus finite corrections.
//!
//! The working class is closed under sum, product, adjoint, and scalar
//! multiple, with the bookkeeping done exactly: entry `(i, j)` of a
//! [`CorrectedLaurentOp`] is `c_{i-j} + F_{ij}` where `c` are the symbol
//! coefficients and `F` the finite correction. Decomposing along a Hardy-type
//! projection produces finite off-diagonal blocks, which is what makes index
//! and factorization computations finite.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::symbol::LaurentSymbol;
use crate::window::{dense_square, OpWindow, TruncationWindow};

/// Finitely supported matrix, canonical in the sense that no zeros are stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseFinite {
    entries: BTreeMap<(i64, i64), Complex64>,
}

impl SparseFinite {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (i64, i64, Complex64)>,
    {
        let mut s = Self::new();
        for (i, j, v) in entries {
            s.add_entry(i, j, v);
        }
        s
    }

    pub fn add_entry(&mut self, i: i64, j: i64, v: Complex64) {
        if v == Complex64::ZERO {
            return;
        }
        let slot = self.entries.entry((i, j)).or_insert(Complex64::ZERO);
        *slot += v;
        if *slot == Complex64::ZERO {
            self.entries.remove(&(i, j));
        }
    }

    pub fn get(&self, i: i64, j: i64) -> Complex64 {
        self.entries.get(&(i, j)).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Largest `max(|i|, |j|)` over stored entries, 0 when empty.
    pub fn radius(&self) -> i64 {
        self.entries
            .keys()
            .map(|&(i, j)| i.abs().max(j.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (i, j, v) in other.iter() {
            out.add_entry(i, j, v);
        }
        out
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::from_entries(self.iter().map(|(i, j, v)| (i, j, a * v)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_entries(self.iter().map(|(i, j, v)| (j, i, v.conj())))
    }

    /// Dense matrix over exactly the occupied rows and columns (in increasing
    /// index order); 0 by 0 when empty.
    pub fn compact_dense(&self) -> DMatrix<Complex64> {
        let rows: Vec<i64> = {
            let mut r: Vec<i64> = self.entries.keys().map(|&(i, _)| i).collect();
            r.sort_unstable();
            r.dedup();
            r
        };
        let cols: Vec<i64> = {
            let mut c: Vec<i64> = self.entries.keys().map(|&(_, j)| j).collect();
            c.sort_unstable();
            c.dedup();
            c
        };
        let mut m = DMatrix::<Complex64>::zeros(rows.len(), cols.len());
        for (i, j, v) in self.iter() {
            let r = rows.binary_search(&i).unwrap();
            let c = cols.binary_search(&j).unwrap();
            m[(r, c)] = v;
        }
        m
    }

    /// Numerical rank of the dense span of the stored entries.
    pub fn rank(&self, rel_tol: f64) -> usize {
        if self.is_empty() {
            return 0;
        }
        crate::window::dense_rank(&self.compact_dense(), rel_tol)
    }
}

impl OpWindow for SparseFinite {
    fn entry(&self, i: i64, j: i64) -> Complex64 {
        self.get(i, j)
    }
    fn band_below(&self) -> i64 {
        0
    }
    fn band_above(&self) -> i64 {
        0
    }
    fn sparse_radius(&self) -> i64 {
        self.radius()
    }
}

/// A Laurent operator plus finite correction. Entry `(i, j)` equals
/// `symbol.coeff(i - j) + correction.get(i, j)` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedLaurentOp {
    symbol: LaurentSymbol,
    correction: SparseFinite,
}

impl CorrectedLaurentOp {
    pub fn new(symbol: LaurentSymbol, correction: SparseFinite) -> Self {
        CorrectedLaurentOp { symbol, correction }
    }

    /// The pure multiplication operator of a symbol.
    pub fn laurent_op(symbol: LaurentSymbol) -> Self {
        Self::new(symbol, SparseFinite::new())
    }

    /// The bilateral shift power `u0^n`, mapping `e_i` to `e_{i+n}`.
    pub fn shift_power(n: i64) -> Self {
        Self::laurent_op(LaurentSymbol::monomial(n))
    }

    pub fn identity() -> Self {
        Self::shift_power(0)
    }

    pub fn symbol(&self) -> &LaurentSymbol {
        &self.symbol
    }

    pub fn correction(&self) -> &SparseFinite {
        &self.correction
    }

    pub fn is_correction_free(&self) -> bool {
        self.correction.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.symbol.add(&other.symbol), self.correction.add(&other.correction))
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::new(self.symbol.scale(a), self.correction.scale(a))
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.symbol.reflect(), self.correction.adjoint())
    }

    /// Operator product. The symbol part multiplies as symbols; the finite
    /// correction of the product is assembled entry by entry and stays finite
    /// because each cross term pairs a band with a finite support.
    pub fn compose(&self, other: &Self) -> Self {
        let symbol = self.symbol.mul(&other.symbol);
        let mut corr = SparseFinite::new();
        // (Laurent part of self) * correction of other.
        for (k, j, v) in other.correction.iter() {
            for (m, c) in self.symbol.support() {
                corr.add_entry(k + m, j, c * v);
            }
        }
        // Correction of self * (Laurent part of other).
        for (i, k, u) in self.correction.iter() {
            for (m, c) in other.symbol.support() {
                corr.add_entry(i, k - m, u * c);
            }
        }
        // Correction * correction.
        for (i, k, u) in self.correction.iter() {
            for (kk, j, v) in other.correction.iter() {
                if k == kk {
                    corr.add_entry(i, j, u * v);
                }
            }
        }
        Self::new(symbol, corr)
    }

    /// The commutator `x p - p x` with a Hardy-type projection; finite for
    /// every member of the class.
    pub fn commutator_with_p(&self, p: &HardyProjection) -> SparseFinite {
        let c = p.cut;
        let mut out = SparseFinite::new();
        for (m, v) in self.symbol.support() {
            if m > 0 {
                // j < cut <= i: the projection acts on the right only.
                for i in c..c + m {
                    out.add_entry(i, i - m, -v);
                }
            } else if m < 0 {
                // i < cut <= j.
                for i in c + m..c {
                    out.add_entry(i, i - m, v);
                }
            }
        }
        for (i, j, v) in self.correction.iter() {
            let s = i64::from(j >= c) - i64::from(i >= c);
            if s != 0 {
                out.add_entry(i, j, Complex64::new(s as f64, 0.0) * v);
            }
        }
        out
    }

    /// Splits the operator into the four corner blocks along `p`.
    pub fn block_decompose(&self, p: &HardyProjection) -> BlockDecomposition {
        let cut = p.cut;
        let mut b = SparseFinite::new();
        let mut c_blk = SparseFinite::new();
        for (m, v) in self.symbol.support() {
            if m > 0 {
                for i in cut..cut + m {
                    b.add_entry(i, i - m, v);
                }
            } else if m < 0 {
                for i in cut + m..cut {
                    c_blk.add_entry(i, i - m, v);
                }
            }
        }
        let mut upper_corr = SparseFinite::new();
        let mut lower_corr = SparseFinite::new();
        for (i, j, v) in self.correction.iter() {
            match (i >= cut, j >= cut) {
                (true, true) => upper_corr.add_entry(i, j, v),
                (false, false) => lower_corr.add_entry(i, j, v),
                (true, false) => b.add_entry(i, j, v),
                (false, true) => c_blk.add_entry(i, j, v),
            }
        }
        BlockDecomposition {
            cut,
            a: HalfLineBlock { side: Side::Upper, cut, symbol: self.symbol.clone(), correction: upper_corr },
            b,
            c: c_blk,
            d: HalfLineBlock { side: Side::Lower, cut, symbol: self.symbol.clone(), correction: lower_corr },
        }
    }

    /// Dense truncation to the window `[-n, n)`. Fails when the window does
    /// not strictly contain the finite correction.
    pub fn truncate(&self, w: TruncationWindow) -> Result<DMatrix<Complex64>> {
        let radius = self.correction.radius();
        if w.n <= radius {
            return Err(Error::WindowTooSmall { n: w.n, required: radius });
        }
        Ok(dense_square(self, -w.n, w.n))
    }

    /// Lossless conversion into the cut-split representation: the band
    /// entries crossing the cut move into the finite part.
    pub fn split_along(&self, cut: i64) -> SplitLaurentOp {
        let mut sparse = self.correction.clone();
        for (m, v) in self.symbol.support() {
            if m > 0 {
                for i in cut..cut + m {
                    sparse.add_entry(i, i - m, v);
                }
            } else if m < 0 {
                for i in cut + m..cut {
                    sparse.add_entry(i, i - m, v);
                }
            }
        }
        SplitLaurentOp {
            cut,
            upper: self.symbol.clone(),
            lower: self.symbol.clone(),
            sparse,
        }
    }
}

impl OpWindow for CorrectedLaurentOp {
    fn entry(&self, i: i64, j: i64) -> Complex64 {
        self.symbol.coeff(i - j) + self.correction.get(i, j)
    }
    fn band_below(&self) -> i64 {
        self.symbol.d_plus()
    }
    fn band_above(&self) -> i64 {
        self.symbol.d_minus()
    }
    fn sparse_radius(&self) -> i64 {
        self.correction.radius()
    }
}

/// Projection onto the coordinates at or above an integer cut.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HardyProjection {
    pub cut: i64,
}

impl HardyProjection {
    pub fn new(cut: i64) -> Self {
        HardyProjection { cut }
    }

    pub fn contains(&self, i: i64) -> bool {
        i >= self.cut
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Indices at or above the cut.
    Upper,
    /// Indices below the cut.
    Lower,
}

/// One diagonal corner of a block decomposition: the symbol restricted to a
/// half-line plus the correction entries falling in that quadrant.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineBlock {
    pub side: Side,
    pub cut: i64,
    pub symbol: LaurentSymbol,
    pub correction: SparseFinite,
}

impl HalfLineBlock {
    fn on_side(&self, i: i64) -> bool {
        match self.side {
            Side::Upper => i >= self.cut,
            Side::Lower => i < self.cut,
        }
    }

    pub fn entry(&self, i: i64, j: i64) -> Complex64 {
        if self.on_side(i) && self.on_side(j) {
            self.symbol.coeff(i - j) + self.correction.get(i, j)
        } else {
            Complex64::ZERO
        }
    }
}

/// The four corners of an operator along a Hardy-type projection `p`:
/// `a = pxp`, `b = px(1-p)`, `c = (1-p)xp`, `d = (1-p)x(1-p)`.
/// For this class `b` and `c` are finitely supported.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    pub cut: i64,
    pub a: HalfLineBlock,
    pub b: SparseFinite,
    pub c: SparseFinite,
    pub d: HalfLineBlock,
}

impl BlockDecomposition {
    /// Entry of the reassembled operator `a + b + c + d`.
    pub fn entry(&self, i: i64, j: i64) -> Complex64 {
        self.a.entry(i, j) + self.b.get(i, j) + self.c.get(i, j) + self.d.entry(i, j)
    }
}

/// An operator that is Laurent on each side of a cut, plus a finite part:
/// entry `(i, j)` is `upper.coeff(i-j)` when both indices are at or above the
/// cut, `lower.coeff(i-j)` when both are below, plus `sparse.get(i, j)`
/// everywhere. This class contains every [`CorrectedLaurentOp`] (via
/// [`CorrectedLaurentOp::split_along`]) together with operators such as the
/// half-line shift extended by the identity, and is closed under adjoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitLaurentOp {
    cut: i64,
    upper: LaurentSymbol,
    lower: LaurentSymbol,
    sparse: SparseFinite,
}

impl SplitLaurentOp {
    pub fn new(cut: i64, upper: LaurentSymbol, lower: LaurentSymbol, sparse: SparseFinite) -> Self {
        SplitLaurentOp { cut, upper, lower, sparse }
    }

    /// Block-diagonal operator with the given half-line symbols and
    /// quadrant-respecting corrections.
    pub fn block_diagonal(
        cut: i64,
        upper: LaurentSymbol,
        lower: LaurentSymbol,
        upper_corr: &SparseFinite,
        lower_corr: &SparseFinite,
    ) -> Self {
        let mut sparse = SparseFinite::new();
        for (i, j, v) in upper_corr.iter() {
            assert!(i >= cut && j >= cut);
            sparse.add_entry(i, j, v);
        }
        for (i, j, v) in lower_corr.iter() {
            assert!(i < cut && j < cut);
            sparse.add_entry(i, j, v);
        }
        SplitLaurentOp { cut, upper, lower, sparse }
    }

    /// The isometry shifting by `m >= 0` on the half-line at the cut and
    /// acting as the identity below it.
    pub fn embedded_shift(cut: i64, m: i64) -> Self {
        assert!(m >= 0);
        SplitLaurentOp {
            cut,
            upper: LaurentSymbol::monomial(m),
            lower: LaurentSymbol::one(),
            sparse: SparseFinite::new(),
        }
    }

    pub fn cut(&self) -> i64 {
        self.cut
    }

    pub fn upper(&self) -> &LaurentSymbol {
        &self.upper
    }

    pub fn lower(&self) -> &LaurentSymbol {
        &self.lower
    }

    pub fn sparse(&self) -> &SparseFinite {
        &self.sparse
    }

    pub fn adjoint(&self) -> Self {
        SplitLaurentOp {
            cut: self.cut,
            upper: self.upper.reflect(),
            lower: self.lower.reflect(),
            sparse: self.sparse.adjoint(),
        }
    }

    /// True when no stored entry couples the two sides of the cut.
    pub fn is_block_diagonal(&self) -> bool {
        self.sparse
            .iter()
            .all(|(i, j, _)| (i >= self.cut) == (j >= self.cut))
    }
}

impl OpWindow for SplitLaurentOp {
    fn entry(&self, i: i64, j: i64) -> Complex64 {
        let band = if i >= self.cut && j >= self.cut {
            self.upper.coeff(i - j)
        } else if i < self.cut && j < self.cut {
            self.lower.coeff(i - j)
        } else {
            Complex64::ZERO
        };
        band + self.sparse.get(i, j)
    }
    fn band_below(&self) -> i64 {
        self.upper.d_plus().max(self.lower.d_plus())
    }
    fn band_above(&self) -> i64 {
        self.upper.d_minus().max(self.lower.d_minus())
    }
    fn sparse_radius(&self) -> i64 {
        self.sparse.radius().max(self.cut.abs())
    }
}
