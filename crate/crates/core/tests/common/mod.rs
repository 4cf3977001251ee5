//! Shared generators and independent oracles for the integration tests.
//!
//! Symbols are generated from explicitly sampled zeros, so the expected
//! winding is known by construction; a Durand-Kerner root finder gives a
//! second, independent count from the coefficients alone.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use skelfact::window::sigma_max;
use skelfact::{LaurentSymbol, SparseFinite};

/// All roots of a monic polynomial given by low-first coefficients (constant
/// term first, leading 1 implied), via Durand-Kerner iteration. `None` when
/// the iteration fails to settle.
pub fn durand_kerner(low_first: &[Complex64]) -> Option<Vec<Complex64>> {
    let d = low_first.len();
    if d == 0 {
        return Some(Vec::new());
    }
    let eval = |z: Complex64| {
        let mut acc = Complex64::ONE;
        for &c in low_first.iter().rev() {
            acc = acc * z + c;
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..500 {
        let mut worst = 0.0f64;
        for i in 0..d {
            let mut denom = Complex64::ONE;
            for j in 0..d {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                return None;
            }
            let delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            worst = worst.max(delta.norm() / roots[i].norm().max(1.0));
        }
        if worst < 1e-13 {
            return Some(roots);
        }
    }
    None
}

/// Winding number of a symbol counted from polynomial roots: the lowest
/// offset plus the number of zeros strictly inside the circle. `None` when
/// root finding fails or a root sits too close to the circle to classify.
pub fn root_counted_winding(f: &LaurentSymbol) -> Option<i64> {
    if f.is_zero() {
        return None;
    }
    let lo = -f.d_minus();
    let hi = f.d_plus();
    let coeffs: Vec<Complex64> = (lo..=hi).map(|m| f.coeff(m)).collect();
    let lead = *coeffs.last().unwrap();
    if lead.norm() == 0.0 {
        return None;
    }
    let monic: Vec<Complex64> = coeffs[..coeffs.len() - 1].iter().map(|&c| c / lead).collect();
    let roots = durand_kerner(&monic)?;
    if roots.iter().any(|r| (0.9..=1.1).contains(&r.norm())) {
        return None;
    }
    Some(lo + roots.iter().filter(|r| r.norm() < 1.0).count() as i64)
}

/// A random symbol together with ground truth known by construction.
#[derive(Debug, Clone)]
pub struct GeneratedSymbol {
    pub f: LaurentSymbol,
    /// Winding number, from the sampled zero pattern.
    pub winding: i64,
    pub margin: f64,
}

/// Random symbol of bandwidth at most 6 whose zeros are sampled away from
/// the circle (inside radius at most 0.65, outside at least 1.55) and whose
/// margin is at least 0.1; rejected draws resample.
pub fn random_symbol(rng: &mut ChaCha8Rng) -> GeneratedSymbol {
    loop {
        let t = rng.random_range(1..=4usize);
        let m0 = -(rng.random_range(0..=t.min(2)) as i64);
        let mut f = LaurentSymbol::monomial(m0);
        let mut inside = 0i64;
        for _ in 0..t {
            let rho = if rng.random_bool(0.5) {
                inside += 1;
                Complex64::from_polar(
                    rng.random_range(0.15..0.65),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            } else {
                Complex64::from_polar(
                    rng.random_range(1.55..3.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            };
            f = f.mul(&LaurentSymbol::from_coeffs([(1, Complex64::ONE), (0, -rho)]));
        }
        let amp = Complex64::from_polar(
            rng.random_range(0.5..2.0),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let f = f.scale(amp);
        let margin = f.invertibility_margin();
        if margin >= 0.1 {
            return GeneratedSymbol { f, winding: m0 + inside, margin };
        }
    }
}

/// Random finite correction of rank at most `max_rank` supported in
/// `[-radius, radius]^2`, as a sum of sparse rank-one terms.
pub fn random_correction(rng: &mut ChaCha8Rng, max_rank: usize, radius: i64) -> SparseFinite {
    let rank = rng.random_range(1..=max_rank.max(1));
    let mut out = SparseFinite::new();
    for _ in 0..rank {
        let vec = |rng: &mut ChaCha8Rng| -> Vec<(i64, Complex64)> {
            let k = rng.random_range(1..=3usize);
            (0..k)
                .map(|_| {
                    (
                        rng.random_range(-radius..=radius),
                        Complex64::from_polar(
                            rng.random_range(0.3..1.0),
                            rng.random_range(0.0..std::f64::consts::TAU),
                        ),
                    )
                })
                .collect()
        };
        let u = vec(rng);
        let v = vec(rng);
        for &(i, a) in &u {
            for &(j, b) in &v {
                out.add_entry(i, j, a * b);
            }
        }
    }
    out
}

/// Correction scaled so its spectral norm is `target`; empty stays empty.
pub fn scaled_correction(
    rng: &mut ChaCha8Rng,
    max_rank: usize,
    radius: i64,
    target: f64,
) -> SparseFinite {
    let raw = random_correction(rng, max_rank, radius);
    if raw.is_empty() {
        return raw;
    }
    let s = sigma_max(&raw.compact_dense());
    if s == 0.0 {
        raw
    } else {
        raw.scale(Complex64::new(target / s, 0.0))
    }
}

/// Winding of a closed polyline around a point, by accumulated cross/dot
/// angles. Formulated independently of the library's phase-difference route.
pub fn polyline_winding_oracle(points: &[Complex64], lambda: Complex64) -> i64 {
    let mut total = 0.0;
    for j in 0..points.len() {
        let a = points[j] - lambda;
        let b = points[(j + 1) % points.len()] - lambda;
        let cross = a.re * b.im - a.im * b.re;
        let dot = a.re * b.re + a.im * b.im;
        total += cross.atan2(dot);
    }
    (total / std::f64::consts::TAU).round() as i64
}
