//! Laurent polynomial symbols on the unit circle.
//!
//! A symbol is a finitely supported family of Fourier coefficients `c_m`,
//! `m` ranging over a window `[-d_minus, d_plus]` of integers. Everything the
//! rest of the crate does with multiplication operators starts from the three
//! scalar questions answered here: how close does the symbol come to zero on
//! the circle, how many times does it wind around zero, and how does it split
//! into analytic and co-analytic factors.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::tol::{Tolerances, DEGREE_CAP, GRID_CAP, ZERO_MARGIN};

/// Finitely supported Fourier coefficients, trimmed so that stored
/// coefficients are nonzero. The zero symbol has empty support.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentSymbol {
    coeffs: BTreeMap<i64, Complex64>,
}

impl LaurentSymbol {
    /// Builds a symbol from `(offset, coefficient)` pairs. Duplicate offsets
    /// accumulate; exact zeros are dropped.
    pub fn from_coeffs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        let mut coeffs: BTreeMap<i64, Complex64> = BTreeMap::new();
        for (m, c) in pairs {
            *coeffs.entry(m).or_insert(Complex64::ZERO) += c;
        }
        coeffs.retain(|_, c| *c != Complex64::ZERO);
        LaurentSymbol { coeffs }
    }

    pub fn zero() -> Self {
        LaurentSymbol { coeffs: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::monomial(0)
    }

    /// The symbol `z^m`.
    pub fn monomial(m: i64) -> Self {
        Self::from_coeffs([(m, Complex64::ONE)])
    }

    pub fn constant(c: Complex64) -> Self {
        Self::from_coeffs([(0, c)])
    }

    /// Convenience for real-coefficient symbols, lowest offset first.
    pub fn from_reals(lowest: i64, coeffs: &[f64]) -> Self {
        Self::from_coeffs(
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| (lowest + k as i64, Complex64::new(c, 0.0))),
        )
    }

    pub fn coeff(&self, m: i64) -> Complex64 {
        self.coeffs.get(&m).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn support(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().map(|(&m, &c)| (m, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Depth of the support below zero (0 for the zero symbol).
    pub fn d_minus(&self) -> i64 {
        self.coeffs.keys().next().map_or(0, |&m| (-m).max(0))
    }

    /// Height of the support above zero.
    pub fn d_plus(&self) -> i64 {
        self.coeffs.keys().next_back().map_or(0, |&m| m.max(0))
    }

    /// Total width `d_minus + d_plus` of the coefficient window.
    pub fn bandwidth(&self) -> i64 {
        self.d_minus() + self.d_plus()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&m, &c)| c * z.powi(m as i32))
            .sum()
    }

    /// Samples the symbol at the `grid_size`-th roots of unity,
    /// `z_j = exp(2 pi i j / grid_size)`, in order of increasing `j`.
    pub fn evaluate(&self, grid_size: usize) -> Vec<Complex64> {
        assert!(grid_size >= 1, "grid must have at least one point");
        let mut buf = vec![Complex64::ZERO; grid_size];
        for (&m, &c) in &self.coeffs {
            buf[m.rem_euclid(grid_size as i64) as usize] += c;
        }
        // An unnormalized inverse DFT of the coefficient buffer evaluates the
        // symbol at all roots of unity at once; wrapping offsets mod the grid
        // size is exact there.
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(grid_size).process(&mut buf);
        buf
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_coeffs(self.support().chain(other.support()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-Complex64::ONE))
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::from_coeffs(self.support().map(|(m, c)| (m, a * c)))
    }

    /// Product of symbols (convolution of coefficients).
    pub fn mul(&self, other: &Self) -> Self {
        let mut pairs = Vec::with_capacity(self.coeffs.len() * other.coeffs.len());
        for (m, c) in self.support() {
            for (k, d) in other.support() {
                pairs.push((m + k, c * d));
            }
        }
        Self::from_coeffs(pairs)
    }

    /// Multiplication by `z^n`.
    pub fn shift(&self, n: i64) -> Self {
        Self::from_coeffs(self.support().map(|(m, c)| (m + n, c)))
    }

    /// The conjugate-reflected symbol with coefficients `conj(c_{-m})`; on the
    /// unit circle this is the pointwise complex conjugate.
    pub fn reflect(&self) -> Self {
        Self::from_coeffs(self.support().map(|(m, c)| (-m, c.conj())))
    }

    /// Minimum modulus on the unit circle, via grid refinement: the grid
    /// doubles until the sampled minimum changes by less than 1%. An exact
    /// zero is reported only when a sample falls below `1e-14`.
    pub fn invertibility_margin(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut grid = 64usize.max((4 * self.bandwidth() as usize).next_power_of_two());
        let mut prev = self.grid_min(grid);
        loop {
            if prev < ZERO_MARGIN {
                return 0.0;
            }
            if grid >= GRID_CAP {
                return prev;
            }
            grid *= 2;
            let cur = self.grid_min(grid);
            if cur < ZERO_MARGIN {
                return 0.0;
            }
            if (prev - cur).abs() < 0.01 * cur {
                return cur;
            }
            prev = cur;
        }
    }

    fn grid_min(&self, grid: usize) -> f64 {
        self.evaluate(grid)
            .iter()
            .map(|s| s.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Total phase change along the unit circle divided by `2 pi`.
    ///
    /// The phase is unwrapped on a grid fine enough that every adjacent step
    /// is below `pi/2`; the grid doubles until that holds. The result is an
    /// exact integer for any symbol invertible on the circle.
    pub fn winding_number(&self, tol: &Tolerances) -> Result<i64> {
        let margin = self.invertibility_margin();
        if margin < tol.margin_tol {
            return Err(Error::NotInvertible { margin, tol: tol.margin_tol });
        }
        let mut grid = 256usize.max((8 * self.bandwidth() as usize).next_power_of_two());
        loop {
            if let Some(total) = phase_sum(&self.evaluate(grid)) {
                let turns = total / TAU;
                debug_assert!((turns - turns.round()).abs() < 0.25);
                return Ok(turns.round() as i64);
            }
            if grid >= GRID_CAP {
                return Err(Error::GridUnderresolved {
                    context: "phase step at or above pi/2 everywhere on the schedule",
                    cap: GRID_CAP,
                });
            }
            grid *= 2;
        }
    }

    /// Splits an invertible symbol as `f = f_minus * z^n * f_plus` with
    /// `f_plus` supported on nonnegative offsets and constant term one,
    /// `f_minus` supported on nonpositive offsets, and `n` the winding number.
    ///
    /// The logarithm of `f * z^{-n}` is computed by unwrapped phase on a
    /// circle grid; its nonnegative-offset part exponentiates to `f_plus` by
    /// the series recurrence, the rest (including the constant, which carries
    /// the scalar freedom) to `f_minus`. The truncation degree grows until the
    /// recomposition residual is at or below `tol.residual_tol`.
    pub fn wiener_hopf(&self, tol: &Tolerances) -> Result<WienerHopfSplit> {
        let n = self.winding_number(tol)?;
        let g = self.shift(-n);
        let band = g.bandwidth().max(1) as usize;
        let mut degree = 16usize.max((2 * band).next_power_of_two());
        loop {
            let split = self.split_at_degree(n, &g, degree, tol)?;
            let residual = split.residual;
            if residual <= tol.residual_tol {
                debug_assert_eq!(split.f_plus.winding_number(tol).ok(), Some(0));
                debug_assert_eq!(split.f_minus.winding_number(tol).ok(), Some(0));
                return Ok(split);
            }
            if degree >= DEGREE_CAP {
                return Err(Error::TruncationFailure { residual, cap: DEGREE_CAP });
            }
            degree *= 2;
        }
    }

    fn split_at_degree(
        &self,
        n: i64,
        g: &LaurentSymbol,
        degree: usize,
        _tol: &Tolerances,
    ) -> Result<WienerHopfSplit> {
        // Fourier coefficients of log g, with enough headroom that aliasing
        // is far below the residual target.
        let mut fft_len = 1024usize.max((8 * degree).next_power_of_two());
        let log_samples = loop {
            let samples = g.evaluate(fft_len);
            match unwrapped_log(&samples) {
                Some(logs) => break logs,
                None => {
                    if fft_len >= GRID_CAP {
                        return Err(Error::GridUnderresolved {
                            context: "log of the winding-free part",
                            cap: GRID_CAP,
                        });
                    }
                    fft_len *= 2;
                }
            }
        };
        let mut buf = log_samples;
        let len = buf.len();
        FftPlanner::new().plan_fft_forward(len).process(&mut buf);
        let gamma = |m: i64| buf[m.rem_euclid(len as i64) as usize] / len as f64;

        let h_plus: Vec<Complex64> = (1..=degree as i64).map(gamma).collect();
        let h_minus: Vec<Complex64> = (1..=degree as i64).map(|m| gamma(-m)).collect();
        let plus_coeffs = exp_series(&h_plus, degree);
        let minus_coeffs = exp_series(&h_minus, degree);
        let scalar = gamma(0).exp();

        let f_plus = LaurentSymbol::from_coeffs(
            plus_coeffs.iter().enumerate().map(|(k, &c)| (k as i64, c)),
        );
        let f_minus = LaurentSymbol::from_coeffs(
            minus_coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| (-(k as i64), scalar * c)),
        );

        let residual = recomposition_residual(self, &f_minus, n, &f_plus);
        Ok(WienerHopfSplit { n, f_plus, f_minus, residual })
    }
}

/// Result of [`LaurentSymbol::wiener_hopf`]: `f = f_minus * z^n * f_plus`.
#[derive(Debug, Clone)]
pub struct WienerHopfSplit {
    /// Winding number of the original symbol.
    pub n: i64,
    /// Analytic factor, nonnegative offsets, constant term one.
    pub f_plus: LaurentSymbol,
    /// Co-analytic factor, nonpositive offsets; carries the scalar freedom.
    pub f_minus: LaurentSymbol,
    /// Relative recomposition residual on the verification grid.
    pub residual: f64,
}

impl WienerHopfSplit {
    /// The product `f_minus * z^n * f_plus` as a symbol.
    pub fn recompose(&self) -> LaurentSymbol {
        self.f_minus.mul(&self.f_plus).shift(self.n)
    }
}

/// Sum of wrapped phase steps around the sampled circle, or `None` when a
/// step reaches `pi/2` in magnitude.
fn phase_sum(samples: &[Complex64]) -> Option<f64> {
    let mut total = 0.0;
    for j in 0..samples.len() {
        let a = samples[j].arg();
        let b = samples[(j + 1) % samples.len()].arg();
        let step = wrap_phase(b - a);
        if step.abs() >= FRAC_PI_2 {
            return None;
        }
        total += step;
    }
    Some(total)
}

/// Wraps a phase difference into `(-pi, pi]`.
pub(crate) fn wrap_phase(d: f64) -> f64 {
    let mut d = d % TAU;
    if d > PI {
        d -= TAU;
    } else if d <= -PI {
        d += TAU;
    }
    d
}

/// Continuous logarithm along the sampled circle: `ln|s| + i * phase` with
/// the phase unwrapped sample to sample. `None` when a step reaches `pi/2`
/// or when the samples wind (the phase fails to close up).
fn unwrapped_log(samples: &[Complex64]) -> Option<Vec<Complex64>> {
    let mut phase = samples[0].arg();
    let mut out = Vec::with_capacity(samples.len());
    for j in 0..samples.len() {
        let s = samples[j];
        out.push(Complex64::new(s.norm().ln(), phase));
        let next = samples[(j + 1) % samples.len()];
        let step = wrap_phase(next.arg() - s.arg());
        if step.abs() >= FRAC_PI_2 {
            return None;
        }
        phase += step;
    }
    // Closing drift equal to a full turn means nonzero winding; the caller
    // removes the winding first, so treat it as under-resolution.
    if (phase - samples[0].arg()).abs() > PI {
        return None;
    }
    Some(out)
}

/// Coefficients of `exp(sum_{j>=1} h_j w^j)` up to degree `degree`, by the
/// derivative recurrence `k p_k = sum_j j h_j p_{k-j}`.
fn exp_series(h: &[Complex64], degree: usize) -> Vec<Complex64> {
    let mut p = vec![Complex64::ZERO; degree + 1];
    p[0] = Complex64::ONE;
    for k in 1..=degree {
        let mut acc = Complex64::ZERO;
        for j in 1..=k.min(h.len()) {
            acc += (j as f64) * h[j - 1] * p[k - j];
        }
        p[k] = acc / k as f64;
    }
    p
}

/// Relative max-modulus error of `f - f_minus * z^n * f_plus` on a circle
/// grid comfortably finer than all supports involved.
fn recomposition_residual(
    f: &LaurentSymbol,
    f_minus: &LaurentSymbol,
    n: i64,
    f_plus: &LaurentSymbol,
) -> f64 {
    let width = (f.bandwidth() + f_minus.bandwidth() + f_plus.bandwidth() + n.abs()) as usize;
    let grid = 512usize.max((4 * (width + 1)).next_power_of_two());
    let fs = f.evaluate(grid);
    let ms = f_minus.evaluate(grid);
    let ps = f_plus.evaluate(grid);
    let scale = fs.iter().map(|s| s.norm()).fold(0.0, f64::max).max(1e-300);
    let mut worst = 0.0f64;
    for j in 0..grid {
        let angle = TAU * ((j as i64 * n).rem_euclid(grid as i64) as f64) / grid as f64;
        let zn = Complex64::from_polar(1.0, angle);
        let err = (fs[j] - ms[j] * zn * ps[j]).norm();
        worst = worst.max(err);
    }
    worst / scale
}
