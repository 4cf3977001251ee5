//! Stage timings for the main pipeline: winding count, symbol splitting,
//! kernel-counted index, operator factorization, and grid labeling.

use criterion::{criterion_group, criterion_main, Criterion};
use skelfact::{
    numeric_index, parse_operator, skeleton_factor, winding_map, GridSpec, HardyProjection,
    LaurentSymbol, Tolerances, TruncationWindow,
};
use std::hint::black_box;
use std::time::Duration;

/// Degree-six symbol with two roots inside and two outside the circle, net
/// winding zero after the monomial shift.
fn mixed_symbol() -> LaurentSymbol {
    let lin = |a: f64| LaurentSymbol::from_reals(0, &[-a, 1.0]);
    lin(2.0).mul(&lin(-1.7)).mul(&lin(0.4)).mul(&lin(-0.3)).shift(-2)
}

fn corrected_operator() -> skelfact::CorrectedLaurentOp {
    parse_operator(
        r#"{"symbol": {"coeffs": [{"m": 1, "re": 1.0, "im": 0.0}, {"m": 0, "re": -2.0, "im": 0.0}]},
            "correction": [{"i": 0, "j": 1, "re": 0.25, "im": 0.1}, {"i": 2, "j": 0, "re": -0.2, "im": 0.05}]}"#,
    )
    .unwrap()
}

fn pipeline(c: &mut Criterion) {
    let tol = Tolerances::default();
    let f = mixed_symbol();
    let x = corrected_operator();
    let p = HardyProjection::new(0);

    c.bench_function("winding_number_degree_6", |b| {
        b.iter(|| black_box(&f).winding_number(&tol).unwrap())
    });

    c.bench_function("wiener_hopf_degree_6", |b| {
        b.iter(|| black_box(&f).wiener_hopf(&tol).unwrap())
    });

    c.bench_function("numeric_index_corrected", |b| {
        b.iter(|| numeric_index(black_box(&x), &p, &tol).unwrap())
    });

    c.bench_function("skeleton_factor_window_64", |b| {
        b.iter(|| skeleton_factor(black_box(&x), &p, TruncationWindow::new(64, 8), &tol).unwrap())
    });

    let shift = LaurentSymbol::from_reals(1, &[1.0]);
    let grid = GridSpec::new(-2.0, 2.0, -2.0, 2.0, 41, 41).unwrap();
    c.bench_function("winding_map_41x41", |b| {
        b.iter(|| winding_map(black_box(&shift), &grid, &tol).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default()
        .sample_size(10)
        .measurement_time(Duration::from_secs(3))
        .warm_up_time(Duration::from_millis(500));
    targets = pipeline
}
criterion_main!(benches);
