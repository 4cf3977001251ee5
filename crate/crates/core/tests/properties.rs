//! Randomized cross-module invariants: winding arithmetic, operator-algebra
//! closure, index stability, factorization round trips, and component maps.

mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::prelude::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skelfact::*;

fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Largest entrywise difference between two entry oracles on a square window.
fn max_diff<F, G>(f: F, g: G, lo: i64, hi: i64) -> f64
where
    F: Fn(i64, i64) -> Complex64,
    G: Fn(i64, i64) -> Complex64,
{
    let mut worst = 0.0f64;
    for i in lo..hi {
        for j in lo..hi {
            worst = worst.max((f(i, j) - g(i, j)).norm());
        }
    }
    worst
}

/// Largest coefficient magnitude of a symbol.
fn max_coeff(f: &LaurentSymbol) -> f64 {
    f.support().map(|(_, c)| c.norm()).fold(0.0, f64::max)
}

fn fail(e: Error) -> TestCaseError {
    TestCaseError::fail(format!("{e}"))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn winding_matches_construction_and_roots(seed in any::<u64>()) {
        let g = random_symbol(&mut rng_from(seed));
        let w = g.f.winding_number(&tol()).map_err(fail)?;
        prop_assert_eq!(w, g.winding);
        if let Some(rc) = root_counted_winding(&g.f) {
            prop_assert_eq!(rc, g.winding);
        }
    }

    #[test]
    fn winding_adds_under_products(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = random_symbol(&mut rng_from(s1));
        let b = random_symbol(&mut rng_from(s2));
        let w = a.f.mul(&b.f).winding_number(&tol()).map_err(fail)?;
        prop_assert_eq!(w, a.winding + b.winding);
    }

    #[test]
    fn winding_negates_under_reflection(seed in any::<u64>()) {
        let g = random_symbol(&mut rng_from(seed));
        let w = g.f.reflect().winding_number(&tol()).map_err(fail)?;
        prop_assert_eq!(w, -g.winding);
    }

    #[test]
    fn margin_scales_linearly(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 0.05);
        let g = random_symbol(&mut rng_from(seed));
        let scaled = g.f.scale(c).invertibility_margin();
        let expected = c.norm() * g.margin;
        prop_assert!((scaled - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn wiener_hopf_splits_cleanly(seed in any::<u64>()) {
        let g = random_symbol(&mut rng_from(seed));
        let split = g.f.wiener_hopf(&tol()).map_err(fail)?;
        prop_assert_eq!(split.n, g.winding);
        prop_assert!(split.f_plus.d_minus() == 0);
        prop_assert!(split.f_minus.d_plus() == 0);
        prop_assert_eq!(split.f_plus.coeff(0), Complex64::ONE);
        prop_assert!(split.residual <= 1e-8, "residual {}", split.residual);
        let err = max_coeff(&split.recompose().sub(&g.f));
        prop_assert!(err <= 1e-7 * max_coeff(&g.f).max(1.0), "recomposition off by {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn compose_matches_windowed_matrix_product(s1 in any::<u64>(), s2 in any::<u64>()) {
        let mut r1 = rng_from(s1);
        let mut r2 = rng_from(s2);
        let x = CorrectedLaurentOp::new(random_symbol(&mut r1).f, random_correction(&mut r1, 2, 4));
        let y = CorrectedLaurentOp::new(random_symbol(&mut r2).f, random_correction(&mut r2, 2, 4));
        let z = x.compose(&y);
        let reach = x.bandwidth().max(x.sparse_radius()) + y.bandwidth().max(y.sparse_radius()) + 12;
        let product = |i: i64, j: i64| {
            (-reach..=reach).map(|m| x.entry(i, m) * y.entry(m, j)).sum::<Complex64>()
        };
        let scale = 1.0 + max_diff(|i, j| z.entry(i, j), |_, _| Complex64::ZERO, -8, 8);
        let err = max_diff(product, |i, j| z.entry(i, j), -8, 8);
        prop_assert!(err <= 1e-11 * scale, "compose deviates by {err}");
    }

    #[test]
    fn adjoint_reverses_products(s1 in any::<u64>(), s2 in any::<u64>()) {
        let mut r1 = rng_from(s1);
        let mut r2 = rng_from(s2);
        let x = CorrectedLaurentOp::new(random_symbol(&mut r1).f, random_correction(&mut r1, 2, 4));
        let y = CorrectedLaurentOp::new(random_symbol(&mut r2).f, random_correction(&mut r2, 2, 4));
        let left = x.compose(&y).adjoint();
        let right = y.adjoint().compose(&x.adjoint());
        let err = max_diff(|i, j| left.entry(i, j), |i, j| right.entry(i, j), -10, 10);
        prop_assert!(err <= 1e-12, "adjoint law deviates by {err}");
    }

    #[test]
    fn block_decomposition_reassembles_exactly(seed in any::<u64>(), cut in -6i64..=6) {
        let mut rng = rng_from(seed);
        let x = CorrectedLaurentOp::new(random_symbol(&mut rng).f, random_correction(&mut rng, 3, 5));
        let blocks = x.block_decompose(&HardyProjection::new(cut));
        for i in -12..12 {
            for j in -12..12 {
                prop_assert_eq!(blocks.entry(i, j), x.entry(i, j), "mismatch at ({}, {})", i, j);
            }
        }
    }

    #[test]
    fn commutator_straddles_the_cut(seed in any::<u64>(), cut in -6i64..=6) {
        let mut rng = rng_from(seed);
        let f = random_symbol(&mut rng).f;
        let band = f.bandwidth();
        let x = CorrectedLaurentOp::laurent_op(f);
        let comm = x.commutator_with_p(&HardyProjection::new(cut));
        for (i, j, _) in comm.iter() {
            prop_assert!((i >= cut) != (j >= cut), "entry ({i}, {j}) does not straddle {cut}");
            prop_assert!((i - cut).abs() <= band && (j - cut).abs() <= band,
                "entry ({i}, {j}) further than the bandwidth {band} from the cut");
        }
    }

    #[test]
    fn split_along_preserves_entries(seed in any::<u64>(), cut in -6i64..=6) {
        let mut rng = rng_from(seed);
        let x = CorrectedLaurentOp::new(random_symbol(&mut rng).f, random_correction(&mut rng, 3, 5));
        let split = x.split_along(cut);
        let err = max_diff(|i, j| split.entry(i, j), |i, j| x.entry(i, j), -12, 12);
        prop_assert!(err <= 1e-12, "split deviates by {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn numeric_index_matches_analytic(seed in any::<u64>()) {
        let g = random_symbol(&mut rng_from(seed));
        let x = CorrectedLaurentOp::laurent_op(g.f.clone());
        let r = numeric_index(&x, &HardyProjection::default(), &tol()).map_err(fail)?;
        prop_assert_eq!(r.value, -g.winding);
    }

    #[test]
    fn numeric_index_survives_compact_perturbation(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let g = random_symbol(&mut rng);
        let x = CorrectedLaurentOp::new(
            g.f.clone(),
            scaled_correction(&mut rng, 3, 4, 0.3 * g.margin),
        );
        let r = numeric_index(&x, &HardyProjection::default(), &tol()).map_err(fail)?;
        prop_assert_eq!(r.value, -g.winding);
    }

    #[test]
    fn numeric_index_negates_under_adjoint(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let g = random_symbol(&mut rng);
        let x = CorrectedLaurentOp::new(
            g.f.clone(),
            scaled_correction(&mut rng, 2, 4, 0.3 * g.margin),
        );
        let p = HardyProjection::default();
        let fwd = numeric_index(&x, &p, &tol()).map_err(fail)?;
        let back = numeric_index(&x.adjoint(), &p, &tol()).map_err(fail)?;
        prop_assert_eq!(back.value, -fwd.value);
    }

    #[test]
    fn numeric_index_ignores_cut_translation(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let g = random_symbol(&mut rng);
        let x = CorrectedLaurentOp::new(
            g.f.clone(),
            scaled_correction(&mut rng, 2, 3, 0.3 * g.margin),
        );
        let t = tol();
        let base = numeric_index(&x, &HardyProjection::new(0), &t).map_err(fail)?;
        for cut in [-6i64, -1, 3, 5] {
            let shifted = numeric_index(&x, &HardyProjection::new(cut), &t).map_err(fail)?;
            prop_assert_eq!(shifted.value, base.value, "cut {} changed the index", cut);
        }
    }

    #[test]
    fn skeleton_roundtrip_verifies(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let g = random_symbol(&mut rng);
        let x = CorrectedLaurentOp::new(
            g.f.clone(),
            scaled_correction(&mut rng, 3, 4, 0.3 * g.margin),
        );
        let t = tol();
        let p = HardyProjection::default();
        let fact = skeleton_factor_scheduled(&x, &p, &[48, 96, 192], &t).map_err(fail)?;
        prop_assert_eq!(fact.n, -g.winding);
        let report = verify_factorization(&fact, &x, &t).map_err(fail)?;
        prop_assert!(report.passed(&t), "verification failed: {report:?}");

        let dump = emit_factor_dump(&fact);
        let back = parse_factor_dump(&dump).map_err(fail)?;
        prop_assert_eq!(emit_factor_dump(&back), dump);
        let report2 = verify_factorization(&back, &x, &t).map_err(fail)?;
        prop_assert!(report2.passed(&t), "re-parsed factorization failed: {report2:?}");
    }

    #[test]
    fn window_solve_satisfies_the_equation(seed in any::<u64>()) {
        let g = random_symbol(&mut rng_from(seed));
        // Finite sections converge only for winding zero; compensate with a
        // shift, as the factorization itself does.
        let f = g.f.shift(-g.winding);
        let x = CorrectedLaurentOp::laurent_op(f.clone());
        let t = tol();
        let rhs: Vec<SparseVec> = vec![
            vec![(3, Complex64::ONE)],
            vec![(-2, Complex64::new(0.5, -1.0))],
        ];
        let solve = invert_on_window(&x, TruncationWindow::new(32, 4), &rhs, &t).map_err(fail)?;
        let band = f.bandwidth();
        for (r, sol) in rhs.iter().zip(solve.solutions.iter()) {
            let amp = sol.iter().map(|v| v.norm()).fold(1.0, f64::max);
            for i in (-32 + band)..(32 - band) {
                let mut acc = Complex64::ZERO;
                for (off, v) in sol.iter().enumerate() {
                    acc += x.entry(i, solve.lo + off as i64) * v;
                }
                let want: Complex64 = r.iter().filter(|&&(j, _)| j == i).map(|&(_, v)| v).sum();
                prop_assert!((acc - want).norm() <= 1e-6 * amp,
                    "row {i} residual {}", (acc - want).norm());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    #[test]
    fn component_indices_agree_with_polyline_oracle(seed in any::<u64>()) {
        let g = random_symbol(&mut rng_from(seed));
        let t = tol();
        let curve = spectrum_curve(&g.f, 256, 0.05).map_err(fail)?;
        let grid = GridSpec::covering(&curve, 61, 61).map_err(fail)?;
        let map = winding_map(&g.f, &grid, &t).map_err(fail)?;
        for c in &map.components {
            prop_assert_eq!(c.curve_winding, -c.n);
            let oracle = polyline_winding_oracle(&map.curve.points, c.lambda);
            prop_assert_eq!(oracle, -c.n, "independent winding disagrees for component {}", c.id);
            if c.id == 0 {
                prop_assert_eq!(c.n, 0, "unbounded component must have index zero");
            }
            if c.n == 0 {
                prop_assert!(c.degenerate && c.cyclic == "Z");
            } else {
                prop_assert!(!c.degenerate);
                prop_assert_eq!(c.cyclic.clone(), format!("Z_{}", c.n.abs()));
            }
        }
    }

    #[test]
    fn cells_of_one_component_share_the_index(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let g = random_symbol(&mut rng);
        let t = tol();
        let curve = spectrum_curve(&g.f, 256, 0.05).map_err(fail)?;
        let grid = GridSpec::covering(&curve, 61, 61).map_err(fail)?;
        let map = winding_map(&g.f, &grid, &t).map_err(fail)?;
        for c in &map.components {
            let cells: Vec<usize> = map
                .labels
                .iter()
                .enumerate()
                .filter(|&(_, &l)| l == c.id)
                .map(|(cell, _)| cell)
                .collect();
            for _ in 0..4 {
                let &cell = cells.choose(&mut rng).unwrap();
                let lambda = grid.center(cell % grid.nx, cell / grid.nx);
                let shifted = g.f.sub(&LaurentSymbol::constant(lambda));
                if shifted.invertibility_margin() < 1e-4 {
                    continue;
                }
                let n = analytic_index(&shifted, &t).map_err(fail)?;
                prop_assert_eq!(n, c.n, "cell {} disagrees with component {}", cell, c.id);
            }
        }
    }
}
