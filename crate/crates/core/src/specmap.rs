//! Spectral picture of a Laurent symbol: the essential spectrum curve, the
//! components of its complement, and the index attached to each component.
//!
//! The essential spectrum of a multiplication operator is the symbol's range
//! over the circle; finite corrections change neither it nor any component
//! index, so this module works with the symbol alone. Components are realized
//! by flood fill on a rectangular grid with a one-cell-diagonal buffer around
//! the sampled curve: buffered cells stay unclassified rather than risk
//! leaking through the curve. Each component gets its index from the symbol
//! shifted by a representative cell center, cross-checked at further cells
//! and against an independent polyline winding count.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rand::prelude::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::analytic_index;
use crate::symbol::{wrap_phase, LaurentSymbol};
use crate::tol::{Tolerances, GRID_CAP};

/// Closed polyline sampling of the symbol's range over the unit circle.
/// Consecutive points (cyclically) are adjacent curve samples.
#[derive(Debug, Clone)]
pub struct SpectrumCurve {
    pub points: Vec<Complex64>,
}

impl SpectrumCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounding box `(re_lo, re_hi, im_lo, im_hi)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut re_lo = f64::INFINITY;
        let mut re_hi = f64::NEG_INFINITY;
        let mut im_lo = f64::INFINITY;
        let mut im_hi = f64::NEG_INFINITY;
        for p in &self.points {
            re_lo = re_lo.min(p.re);
            re_hi = re_hi.max(p.re);
            im_lo = im_lo.min(p.im);
            im_hi = im_hi.max(p.im);
        }
        (re_lo, re_hi, im_lo, im_hi)
    }
}

/// Samples the curve at `samples`-th roots of unity (at least 256), doubling
/// the sample count until every adjacent pair is closer than `max_step`.
pub fn spectrum_curve(
    f: &LaurentSymbol,
    samples: usize,
    max_step: f64,
) -> Result<SpectrumCurve> {
    // The NaN check keeps a NaN bound from slipping past the comparison.
    if max_step <= 0.0 || max_step.is_nan() {
        return Err(Error::InvalidInput(format!(
            "curve step bound must be positive, got {max_step}"
        )));
    }
    let mut grid = samples.max(256).next_power_of_two();
    loop {
        let points = f.evaluate(grid);
        let worst = (0..grid)
            .map(|j| (points[(j + 1) % grid] - points[j]).norm())
            .fold(0.0, f64::max);
        if worst < max_step {
            return Ok(SpectrumCurve { points });
        }
        if grid >= GRID_CAP {
            return Err(Error::GridUnderresolved {
                context: "spectrum curve step above the cell bound",
                cap: GRID_CAP,
            });
        }
        grid *= 2;
    }
}

/// Rectangular grid of cell centers over `[re_lo, re_hi] x [im_lo, im_hi]`,
/// `nx` by `ny` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(re_hi > re_lo && im_hi > im_lo) {
            return Err(Error::InvalidInput(format!(
                "degenerate grid bounds [{re_lo}, {re_hi}] x [{im_lo}, {im_hi}]"
            )));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidInput(format!(
                "grid resolution {nx} x {ny} too small (needs at least 3 x 3)"
            )));
        }
        Ok(GridSpec { re_lo, re_hi, im_lo, im_hi, nx, ny })
    }

    /// Bounds covering the curve with a 15% margin on the larger extent
    /// (degenerate directions widen to that margin).
    pub fn covering(curve: &SpectrumCurve, nx: usize, ny: usize) -> Result<Self> {
        if curve.is_empty() {
            return Err(Error::InvalidInput("cannot cover an empty curve".into()));
        }
        let (re_lo, re_hi, im_lo, im_hi) = curve.bounding_box();
        let extent = (re_hi - re_lo).max(im_hi - im_lo).max(1e-3);
        let margin = 0.15 * extent;
        Self::new(re_lo - margin, re_hi + margin, im_lo - margin, im_hi + margin, nx, ny)
    }

    pub fn cell_w(&self) -> f64 {
        (self.re_hi - self.re_lo) / self.nx as f64
    }

    pub fn cell_h(&self) -> f64 {
        (self.im_hi - self.im_lo) / self.ny as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.cell_w().hypot(self.cell_h())
    }

    /// Center of cell `(ix, iy)`.
    pub fn center(&self, ix: usize, iy: usize) -> Complex64 {
        Complex64::new(
            self.re_lo + (ix as f64 + 0.5) * self.cell_w(),
            self.im_lo + (iy as f64 + 0.5) * self.cell_h(),
        )
    }

    /// Row-major cell index, `iy` outer.
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_lo && z.re <= self.re_hi && z.im >= self.im_lo && z.im <= self.im_hi
    }
}

/// Label of cells within one cell diagonal of the curve.
pub const SPECTRUM_ADJACENT: i32 = -1;
const UNLABELED: i32 = i32::MIN;

/// Grid labels after flood fill: `SPECTRUM_ADJACENT` near the curve,
/// otherwise a component id with 0 the unbounded component.
#[derive(Debug, Clone)]
pub struct LabeledGrid {
    pub grid: GridSpec,
    pub labels: Vec<i32>,
    pub component_count: usize,
}

/// Marks the spectrum buffer and flood-fills the rest into 4-connected
/// components. The unbounded component is seeded from the grid border and
/// gets id 0; bounded components are numbered in row-major discovery order.
pub fn label_components(curve: &SpectrumCurve, grid: &GridSpec) -> Result<LabeledGrid> {
    if curve.is_empty() {
        return Err(Error::InvalidInput("empty spectrum curve".into()));
    }
    for p in &curve.points {
        if !grid.contains(*p) {
            return Err(Error::InvalidInput(format!(
                "grid does not contain the curve (point {p} outside bounds)"
            )));
        }
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let mut labels = vec![UNLABELED; grid.cells()];
    let diag = grid.cell_diagonal();
    let (cw, ch) = (grid.cell_w(), grid.cell_h());

    let n = curve.points.len();
    for j in 0..n {
        let a = curve.points[j];
        let b = curve.points[(j + 1) % n];
        let re_lo = a.re.min(b.re) - diag;
        let re_hi = a.re.max(b.re) + diag;
        let im_lo = a.im.min(b.im) - diag;
        let im_hi = a.im.max(b.im) + diag;
        let ix0 = (((re_lo - grid.re_lo) / cw).floor().max(0.0)) as usize;
        let ix1 = ((((re_hi - grid.re_lo) / cw).ceil()).max(0.0) as usize).min(nx - 1);
        let iy0 = (((im_lo - grid.im_lo) / ch).floor().max(0.0)) as usize;
        let iy1 = ((((im_hi - grid.im_lo) / ch).ceil()).max(0.0) as usize).min(ny - 1);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let cell = grid.idx(ix, iy);
                if labels[cell] != SPECTRUM_ADJACENT
                    && dist_to_segment(grid.center(ix, iy), a, b) <= diag
                {
                    labels[cell] = SPECTRUM_ADJACENT;
                }
            }
        }
    }

    // Unbounded component: everything reachable from the border.
    let mut queue = VecDeque::new();
    for ix in 0..nx {
        for iy in [0, ny - 1] {
            let cell = grid.idx(ix, iy);
            if labels[cell] == UNLABELED {
                labels[cell] = 0;
                queue.push_back((ix, iy));
            }
        }
    }
    for iy in 0..ny {
        for ix in [0, nx - 1] {
            let cell = grid.idx(ix, iy);
            if labels[cell] == UNLABELED {
                labels[cell] = 0;
                queue.push_back((ix, iy));
            }
        }
    }
    if queue.is_empty() {
        return Err(Error::InvalidInput(
            "no unbounded region on the grid border; enlarge the grid margin".into(),
        ));
    }
    flood(grid, &mut labels, &mut queue, 0);

    let mut next = 1i32;
    for iy in 0..ny {
        for ix in 0..nx {
            let cell = grid.idx(ix, iy);
            if labels[cell] == UNLABELED {
                labels[cell] = next;
                let mut q = VecDeque::from([(ix, iy)]);
                flood(grid, &mut labels, &mut q, next);
                next += 1;
            }
        }
    }
    Ok(LabeledGrid { grid: *grid, labels, component_count: next as usize })
}

fn flood(grid: &GridSpec, labels: &mut [i32], queue: &mut VecDeque<(usize, usize)>, id: i32) {
    while let Some((ix, iy)) = queue.pop_front() {
        let push = |jx: usize, jy: usize, labels: &mut [i32], queue: &mut VecDeque<(usize, usize)>| {
            let cell = grid.idx(jx, jy);
            if labels[cell] == UNLABELED {
                labels[cell] = id;
                queue.push_back((jx, jy));
            }
        };
        if ix > 0 {
            push(ix - 1, iy, labels, queue);
        }
        if ix + 1 < grid.nx {
            push(ix + 1, iy, labels, queue);
        }
        if iy > 0 {
            push(ix, iy - 1, labels, queue);
        }
        if iy + 1 < grid.ny {
            push(ix, iy + 1, labels, queue);
        }
    }
}

fn dist_to_segment(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * Complex64::new(t, 0.0))).norm()
}

/// One component of the complement of the curve.
#[derive(Debug, Clone)]
pub struct Component {
    pub id: i32,
    /// Representative point: center of the cell deepest inside the component.
    pub lambda: Complex64,
    /// Index of the compression of `f - lambda`.
    pub n: i64,
    /// Winding of the curve around `lambda`, counted independently;
    /// always `-n`.
    pub curve_winding: i64,
    /// Cyclic-quotient label `Z_{|n|}`.
    pub cyclic: String,
    /// Set for `n = 0`, where the quotient degenerates to the full group.
    pub degenerate: bool,
    pub cells: usize,
}

/// The full component map: labels, curve, and per-component records.
#[derive(Debug, Clone)]
pub struct ComponentMap {
    pub grid: GridSpec,
    pub labels: Vec<i32>,
    pub curve: SpectrumCurve,
    pub components: Vec<Component>,
}

impl ComponentMap {
    pub fn component(&self, id: i32) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    /// Index value attached to a cell for export: the component's `n`, or 0
    /// for spectrum-adjacent cells.
    pub fn cell_n(&self, cell: usize) -> i64 {
        let label = self.labels[cell];
        if label == SPECTRUM_ADJACENT {
            0
        } else {
            self.component(label).map_or(0, |c| c.n)
        }
    }
}

/// Computes the component map of `f` on `grid`: samples the curve finely
/// enough for the grid, labels components, and attaches each component's
/// index, checked at three interior cells and against the curve winding.
pub fn winding_map(f: &LaurentSymbol, grid: &GridSpec, tol: &Tolerances) -> Result<ComponentMap> {
    let max_step = 0.5 * grid.cell_w().min(grid.cell_h());
    let curve = spectrum_curve(f, 256, max_step)?;
    let labeled = label_components(&curve, grid)?;
    let depth = curve_depth(&labeled);

    let mut per_component: Vec<Vec<usize>> = vec![Vec::new(); labeled.component_count];
    for (cell, &label) in labeled.labels.iter().enumerate() {
        if label >= 0 {
            per_component[label as usize].push(cell);
        }
    }

    let mut components = Vec::with_capacity(labeled.component_count);
    for (id, cells) in per_component.iter().enumerate() {
        let id = id as i32;
        if cells.is_empty() {
            return Err(Error::InconsistentComponent {
                component: id as usize,
                context: "component has no cells".into(),
            });
        }
        // Deepest cell, earliest in row-major order on ties.
        let &deepest = cells
            .iter()
            .max_by_key(|&&cell| (depth[cell], std::cmp::Reverse(cell)))
            .unwrap();
        let lambda = cell_center(&labeled.grid, deepest);
        let n = index_at(f, lambda, tol, id)?;

        // Two more interior probes, deterministically seeded per component.
        let mut rng = ChaCha8Rng::seed_from_u64(0x7353_70c0 ^ id as u64);
        for _ in 0..2 {
            let &probe = cells.choose(&mut rng).unwrap();
            let mu = cell_center(&labeled.grid, probe);
            let np = index_at(f, mu, tol, id)?;
            if np != n {
                return Err(Error::InconsistentComponent {
                    component: id as usize,
                    context: format!(
                        "index {np} at probe {mu} disagrees with {n} at representative {lambda}"
                    ),
                });
            }
        }

        let curve_winding = polyline_winding(&curve.points, lambda).ok_or_else(|| {
            Error::InconsistentComponent {
                component: id as usize,
                context: format!("curve winding around {lambda} under-resolved"),
            }
        })?;
        if curve_winding != -n {
            return Err(Error::InconsistentComponent {
                component: id as usize,
                context: format!("curve winds {curve_winding} around {lambda} but index is {n}"),
            });
        }
        if id == 0 && n != 0 {
            return Err(Error::InconsistentComponent {
                component: 0,
                context: format!("unbounded component has index {n}, expected 0"),
            });
        }
        let (cyclic, degenerate) = cyclic_label(n);
        components.push(Component {
            id,
            lambda,
            n,
            curve_winding,
            cyclic,
            degenerate,
            cells: cells.len(),
        });
    }

    Ok(ComponentMap { grid: labeled.grid, labels: labeled.labels, curve, components })
}

fn cell_center(grid: &GridSpec, cell: usize) -> Complex64 {
    grid.center(cell % grid.nx, cell / grid.nx)
}

fn index_at(f: &LaurentSymbol, lambda: Complex64, tol: &Tolerances, id: i32) -> Result<i64> {
    let shifted = f.sub(&LaurentSymbol::constant(lambda));
    analytic_index(&shifted, tol).map_err(|e| match e {
        Error::NotInvertible { margin, .. } => Error::InconsistentComponent {
            component: id as usize,
            context: format!(
                "representative {lambda} sits within {margin:.3e} of the curve; resolution too coarse"
            ),
        },
        other => other,
    })
}

/// Hop distance of every cell from the spectrum buffer (multi-source BFS over
/// the 4-neighbor graph, crossing component boundaries freely).
fn curve_depth(labeled: &LabeledGrid) -> Vec<u32> {
    let grid = &labeled.grid;
    let mut depth = vec![u32::MAX; labeled.labels.len()];
    let mut queue = VecDeque::new();
    for (cell, &label) in labeled.labels.iter().enumerate() {
        if label == SPECTRUM_ADJACENT {
            depth[cell] = 0;
            queue.push_back(cell);
        }
    }
    while let Some(cell) = queue.pop_front() {
        let (ix, iy) = (cell % grid.nx, cell / grid.nx);
        let d = depth[cell] + 1;
        let push = |jx: usize, jy: usize, depth: &mut Vec<u32>, queue: &mut VecDeque<usize>| {
            let c = grid.idx(jx, jy);
            if depth[c] == u32::MAX {
                depth[c] = d;
                queue.push_back(c);
            }
        };
        if ix > 0 {
            push(ix - 1, iy, &mut depth, &mut queue);
        }
        if ix + 1 < grid.nx {
            push(ix + 1, iy, &mut depth, &mut queue);
        }
        if iy > 0 {
            push(ix, iy - 1, &mut depth, &mut queue);
        }
        if iy + 1 < grid.ny {
            push(ix, iy + 1, &mut depth, &mut queue);
        }
    }
    depth
}

/// Winding number of a closed polyline around `lambda` by summed phase steps,
/// or `None` when a step reaches `pi/2` (point too close to the polyline).
pub fn polyline_winding(points: &[Complex64], lambda: Complex64) -> Option<i64> {
    let mut total = 0.0;
    for j in 0..points.len() {
        let a = points[j] - lambda;
        let b = points[(j + 1) % points.len()] - lambda;
        if a.norm() < 1e-12 || b.norm() < 1e-12 {
            return None;
        }
        let step = wrap_phase(b.arg() - a.arg());
        if step.abs() >= FRAC_PI_2 {
            return None;
        }
        total += step;
    }
    Some((total / TAU).round() as i64)
}

/// Per-component cyclic-quotient record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicRecord {
    pub id: i32,
    pub n: i64,
    pub quotient: String,
    /// `n = 0` reads as the full group rather than a finite quotient.
    pub degenerate: bool,
}

/// The cyclic-quotient labels of every component; metadata only.
pub fn cyclic_metadata(map: &ComponentMap) -> Vec<CyclicRecord> {
    map.components
        .iter()
        .map(|c| CyclicRecord {
            id: c.id,
            n: c.n,
            quotient: c.cyclic.clone(),
            degenerate: c.degenerate,
        })
        .collect()
}

fn cyclic_label(n: i64) -> (String, bool) {
    if n == 0 {
        ("Z".to_string(), true)
    } else {
        (format!("Z_{}", n.abs()), false)
    }
}

/// Whether doubling the grid resolution preserves the component count and the
/// multiset of indices.
pub fn refinement_stable(f: &LaurentSymbol, grid: &GridSpec, tol: &Tolerances) -> Result<bool> {
    let coarse = winding_map(f, grid, tol)?;
    let doubled = GridSpec::new(grid.re_lo, grid.re_hi, grid.im_lo, grid.im_hi, 2 * grid.nx, 2 * grid.ny)?;
    let fine = winding_map(f, &doubled, tol)?;
    let mut a: Vec<i64> = coarse.components.iter().map(|c| c.n).collect();
    let mut b: Vec<i64> = fine.components.iter().map(|c| c.n).collect();
    a.sort_unstable();
    b.sort_unstable();
    Ok(a == b)
}
