//! Search-grid geometry and probability fields.
//!
//! The sea surface is tiled into square cells of side `G_s`, indexed
//! row-major: `N = col + cols * row`, with `col = floor(x / G_s)` and
//! `row = floor(y / G_s)` after shifting by the grid origin. Cell centers
//! sit at `(col + 1/2, row + 1/2) * G_s`. On top of the geometry this
//! module provides ring-uniform Poisson location priors (probability mass
//! at Manhattan distance d is `pmf(d; lambda)` shared equally by the
//! in-domain cells of that ring), the time-growth intensity law
//! `lambda = m_p + ln(t / t0)`, and the Bayesian negative-information
//! update applied after unsuccessful searches.

use std::io::Write;

use thiserror::Error;

use crate::geom::Vec3;
use crate::kinematics::Ensemble;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cell size must be positive and finite, got {0}")]
    BadCellSize(f64),
    #[error("domain extent must cover at least one cell, got {x_max} x {y_max} for cell size {cell}")]
    BadExtent { x_max: f64, y_max: f64, cell: f64 },
    #[error("point ({x}, {y}) outside grid domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("cell {0} out of range (grid has {1} cells)")]
    CellOutOfRange(usize, usize),
    #[error("intensity law needs t >= t0 > 0, got t = {t}, t0 = {t0}")]
    BadElapsed { t: f64, t0: f64 },
    #[error("Poisson intensity must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("prior mass underflowed to zero (lambda {lambda}, radius {radius:?})")]
    EmptyPrior { lambda: f64, radius: Option<usize> },
    #[error("probabilities must be nonnegative and finite")]
    BadProbability,
    #[error("field mass is zero")]
    ZeroMass,
    #[error("no probability mass remains after update")]
    NoMassRemaining,
    #[error("detection probability must be in (0, 1], got {0}")]
    BadDetectionProbability(f64),
    #[error("cannot build a field from an empty point set")]
    NoPoints,
}

/// Identifier of one grid cell; row-major linear index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub usize);

impl std::fmt::Display for CellId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Square-cell grid over a rectangular surface domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    cell_size_m: f64,
    cols: usize,
    rows: usize,
    origin_x_m: f64,
    origin_y_m: f64,
}

impl GridSpec {
    /// Grid covering `[origin, origin + extent)`; the usable domain is the
    /// whole cells, `floor(extent / cell)` per axis.
    pub fn new(cell_size_m: f64, x_max_m: f64, y_max_m: f64, origin: (f64, f64)) -> Result<Self, GridError> {
        if !(cell_size_m > 0.0 && cell_size_m.is_finite()) {
            return Err(GridError::BadCellSize(cell_size_m));
        }
        let cols = (x_max_m / cell_size_m).floor();
        let rows = (y_max_m / cell_size_m).floor();
        if !(cols >= 1.0 && rows >= 1.0 && cols.is_finite() && rows.is_finite()) {
            return Err(GridError::BadExtent { x_max: x_max_m, y_max: y_max_m, cell: cell_size_m });
        }
        Ok(GridSpec {
            cell_size_m,
            cols: cols as usize,
            rows: rows as usize,
            origin_x_m: origin.0,
            origin_y_m: origin.1,
        })
    }

    /// Grid with explicit cell counts.
    pub fn with_dims(cell_size_m: f64, cols: usize, rows: usize, origin: (f64, f64)) -> Result<Self, GridError> {
        if !(cell_size_m > 0.0 && cell_size_m.is_finite()) {
            return Err(GridError::BadCellSize(cell_size_m));
        }
        if cols == 0 || rows == 0 {
            return Err(GridError::BadExtent { x_max: cols as f64, y_max: rows as f64, cell: cell_size_m });
        }
        Ok(GridSpec { cell_size_m, cols, rows, origin_x_m: origin.0, origin_y_m: origin.1 })
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    /// Cells per row (the row stride of the linear index).
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cell_count(&self) -> usize {
        self.cols * self.rows
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x_m, self.origin_y_m)
    }

    pub fn contains(&self, cell: CellId) -> bool {
        cell.0 < self.cell_count()
    }

    pub fn row_col(&self, cell: CellId) -> (usize, usize) {
        debug_assert!(self.contains(cell));
        (cell.0 / self.cols, cell.0 % self.cols)
    }

    pub fn cell_at(&self, row: usize, col: usize) -> Option<CellId> {
        (row < self.rows && col < self.cols).then(|| CellId(row * self.cols + col))
    }

    /// Linear cell index of a point; errors outside `[0, cols*G_s) x
    /// [0, rows*G_s)` after the origin shift.
    pub fn cell_of_point(&self, x_m: f64, y_m: f64) -> Result<CellId, GridError> {
        let lx = x_m - self.origin_x_m;
        let ly = y_m - self.origin_y_m;
        let w = self.cols as f64 * self.cell_size_m;
        let h = self.rows as f64 * self.cell_size_m;
        if !(lx >= 0.0 && lx < w && ly >= 0.0 && ly < h) {
            return Err(GridError::OutOfDomain { x: x_m, y: y_m });
        }
        // min() guards the boundary case where lx/cell rounds up to cols.
        let col = ((lx / self.cell_size_m).floor() as usize).min(self.cols - 1);
        let row = ((ly / self.cell_size_m).floor() as usize).min(self.rows - 1);
        Ok(CellId(col + self.cols * row))
    }

    /// Nearest in-domain cell to a point; never fails. Out-of-domain points
    /// land in the closest boundary cell.
    pub fn clamp_point_to_cell(&self, x_m: f64, y_m: f64) -> CellId {
        let clamp_axis = |local: f64, count: usize| -> usize {
            if local < 0.0 {
                0
            } else {
                ((local / self.cell_size_m).floor() as usize).min(count - 1)
            }
        };
        let col = clamp_axis(x_m - self.origin_x_m, self.cols);
        let row = clamp_axis(y_m - self.origin_y_m, self.rows);
        CellId(col + self.cols * row)
    }

    /// World coordinates of a cell's center.
    pub fn cell_center(&self, cell: CellId) -> (f64, f64) {
        debug_assert!(self.contains(cell));
        let (row, col) = self.row_col(cell);
        (
            self.origin_x_m + (col as f64 + 0.5) * self.cell_size_m,
            self.origin_y_m + (row as f64 + 0.5) * self.cell_size_m,
        )
    }

    /// Manhattan distance between two cells in row/col steps.
    pub fn manhattan(&self, a: CellId, b: CellId) -> usize {
        let (ra, ca) = self.row_col(a);
        let (rb, cb) = self.row_col(b);
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }

    /// All in-domain cells at Manhattan distance exactly `d` from `center`,
    /// ascending by cell index. `d = 0` yields just the center.
    pub fn manhattan_ring_cells(&self, center: CellId, d: usize) -> Vec<CellId> {
        debug_assert!(self.contains(center));
        let (rc, cc) = self.row_col(center);
        let (rc, cc) = (rc as isize, cc as isize);
        let d = d as isize;
        let mut out = Vec::new();
        for dr in -d..=d {
            let rem = d - dr.abs();
            let row = rc + dr;
            if row < 0 || row >= self.rows as isize {
                continue;
            }
            let mut push = |col: isize| {
                if col >= 0 && col < self.cols as isize {
                    out.push(CellId(col as usize + self.cols * row as usize));
                }
            };
            push(cc - rem);
            if rem != 0 {
                push(cc + rem);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Cell side from sonar sweep geometry: `G_s = W_s * turns - (W_s * O) * (turns - 1)`
/// (each extra pass adds a swath minus its overlap with the previous one).
pub fn grid_size_from_sweep(swath_m: f64, overlap: f64, turns: usize) -> Result<f64, GridError> {
    if !(swath_m > 0.0 && swath_m.is_finite()) {
        return Err(GridError::BadCellSize(swath_m));
    }
    if !(0.0..1.0).contains(&overlap) || turns == 0 {
        return Err(GridError::BadCellSize(swath_m * overlap));
    }
    let t = turns as f64;
    Ok(swath_m * t - (swath_m * overlap) * (t - 1.0))
}

/// Companion relation: passes achievable at `speed` over `time` for cells of
/// side `gs`: `turns = v * t / G_s`.
pub fn turns_from_speed(speed_mps: f64, time_s: f64, gs_m: f64) -> f64 {
    speed_mps * time_s / gs_m
}

/// Location-uncertainty intensity at elapsed time `t` given preparation
/// time `t0` (same units): `lambda = m_p + ln(t / t0)`.
pub fn lambda_of_time(m_p: f64, t: f64, t0: f64) -> Result<f64, GridError> {
    if !(t0 > 0.0 && t >= t0 && t.is_finite()) {
        return Err(GridError::BadElapsed { t, t0 });
    }
    let lambda = m_p + (t / t0).ln();
    if !(lambda > 0.0) {
        return Err(GridError::NonPositiveLambda(lambda));
    }
    Ok(lambda)
}

/// Poisson probability mass `e^-lambda * lambda^k / k!`.
///
/// Multiplicative recurrence up to k = 170 (stable in f64), log space above
/// that so large k neither overflows nor loses the exponent.
pub fn poisson_pmf(k: usize, lambda: f64) -> f64 {
    debug_assert!(lambda > 0.0);
    if k <= 170 {
        let mut p = (-lambda).exp();
        for i in 1..=k {
            p *= lambda / i as f64;
        }
        p
    } else {
        let ln_k_factorial: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
        (k as f64 * lambda.ln() - lambda - ln_k_factorial).exp()
    }
}

/// Parameters of the ring-uniform Poisson prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonPriorParams {
    pub lambda: f64,
    pub center: CellId,
    /// Rings beyond this Manhattan radius get zero mass; `None` = no cap.
    pub max_radius_cells: Option<usize>,
}

impl PoissonPriorParams {
    pub fn with_lambda(lambda: f64, center: CellId, max_radius_cells: Option<usize>) -> Result<Self, GridError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(GridError::NonPositiveLambda(lambda));
        }
        Ok(PoissonPriorParams { lambda, center, max_radius_cells })
    }

    /// Intensity from the time-growth law: `lambda = m_p + ln(t / t0)`.
    pub fn from_elapsed(
        m_p: f64,
        t: f64,
        t0: f64,
        center: CellId,
        max_radius_cells: Option<usize>,
    ) -> Result<Self, GridError> {
        Self::with_lambda(lambda_of_time(m_p, t, t0)?, center, max_radius_cells)
    }
}

/// Discrete probability distribution over the cells of a grid.
/// Invariant: entries are nonnegative, finite, and sum to 1 (within fp).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    grid: GridSpec,
    probs: Vec<f64>,
}

impl ProbabilityField {
    /// Normalizes `weights` into a field; weights must be nonnegative and
    /// finite with positive total mass.
    pub fn from_weights(grid: GridSpec, weights: Vec<f64>) -> Result<Self, GridError> {
        if weights.len() != grid.cell_count() {
            return Err(GridError::CellOutOfRange(weights.len(), grid.cell_count()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(GridError::BadProbability);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(GridError::ZeroMass);
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(ProbabilityField { grid, probs })
    }

    pub fn uniform(grid: GridSpec) -> Self {
        let n = grid.cell_count();
        ProbabilityField { grid, probs: vec![1.0 / n as f64; n] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn prob(&self, cell: CellId) -> f64 {
        self.probs[cell.0]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Highest-probability cell; ties resolve to the lowest index.
    pub fn argmax(&self) -> CellId {
        let mut best = 0usize;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        CellId(best)
    }
}

/// Ring-uniform Poisson prior: a cell at Manhattan distance d from the
/// center carries `pmf(d; lambda) / N_d`, where `N_d` counts the in-domain
/// cells of that ring; the field is then renormalized over the included
/// rings.
pub fn build_poisson_prior(grid: &GridSpec, params: &PoissonPriorParams) -> Result<ProbabilityField, GridError> {
    if !grid.contains(params.center) {
        return Err(GridError::CellOutOfRange(params.center.0, grid.cell_count()));
    }
    let (rc, cc) = grid.row_col(params.center);
    let d_max_domain = rc.max(grid.rows - 1 - rc) + cc.max(grid.cols - 1 - cc);
    let d_cap = params.max_radius_cells.map_or(d_max_domain, |r| r.min(d_max_domain));

    // Ring sizes N_d, counted over in-domain cells only.
    let mut ring_count = vec![0usize; d_cap + 1];
    let mut dist = vec![usize::MAX; grid.cell_count()];
    for i in 0..grid.cell_count() {
        let d = grid.manhattan(CellId(i), params.center);
        if d <= d_cap {
            dist[i] = d;
            ring_count[d] += 1;
        }
    }
    let ring_mass: Vec<f64> = (0..=d_cap).map(|d| poisson_pmf(d, params.lambda)).collect();
    let weights: Vec<f64> = dist
        .iter()
        .map(|&d| if d == usize::MAX { 0.0 } else { ring_mass[d] / ring_count[d] as f64 })
        .collect();
    ProbabilityField::from_weights(*grid, weights)
        .map_err(|_| GridError::EmptyPrior { lambda: params.lambda, radius: params.max_radius_cells })
}

/// Landing histogram of final particle positions; out-of-domain landings
/// are counted in the nearest boundary cell.
pub fn field_from_points<'a>(
    grid: &GridSpec,
    points: impl IntoIterator<Item = &'a Vec3>,
) -> Result<ProbabilityField, GridError> {
    let mut counts = vec![0.0f64; grid.cell_count()];
    let mut n = 0usize;
    for p in points {
        counts[grid.clamp_point_to_cell(p.x, p.y).0] += 1.0;
        n += 1;
    }
    if n == 0 {
        return Err(GridError::NoPoints);
    }
    ProbabilityField::from_weights(*grid, counts)
}

/// Landing histogram of an ensemble's final positions.
pub fn field_from_particles(grid: &GridSpec, ensemble: &Ensemble) -> Result<ProbabilityField, GridError> {
    let finals: Vec<Vec3> = ensemble
        .trajectories
        .iter()
        .map(|t| t.states.last().expect("trajectory has at least the initial state").position)
        .collect();
    field_from_points(grid, finals.iter())
}

/// Negative-information Bayes update: after an unsuccessful search of
/// `searched` cells with per-cell detection probability `pd`, posterior
/// mass in those cells scales by `(1 - pd)` and the field renormalizes.
/// With pd = 1 searched cells drop to zero and the ratios among unsearched
/// cells are preserved exactly.
pub fn bayes_negative_update(
    field: &ProbabilityField,
    searched: &[CellId],
    pd: f64,
) -> Result<ProbabilityField, GridError> {
    if !(pd > 0.0 && pd <= 1.0) {
        return Err(GridError::BadDetectionProbability(pd));
    }
    let mut weights = field.probs.clone();
    for cell in searched {
        if !field.grid.contains(*cell) {
            return Err(GridError::CellOutOfRange(cell.0, field.grid.cell_count()));
        }
        weights[cell.0] = field.probs[cell.0] * (1.0 - pd); // idempotent across duplicates
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(GridError::NoMassRemaining);
    }
    ProbabilityField::from_weights(field.grid, weights)
}

/// Writes a field as CSV: `cell,row,col,x_center_m,y_center_m,prob`, one
/// row per cell in index order.
pub fn write_field_csv<W: Write>(w: &mut W, field: &ProbabilityField) -> std::io::Result<()> {
    writeln!(w, "cell,row,col,x_center_m,y_center_m,prob")?;
    let grid = field.grid();
    for i in 0..grid.cell_count() {
        let cell = CellId(i);
        let (row, col) = grid.row_col(cell);
        let (cx, cy) = grid.cell_center(cell);
        writeln!(w, "{i},{row},{col},{cx},{cy},{}", field.prob(cell))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_10x10() -> GridSpec {
        GridSpec::new(300.0, 3000.0, 3000.0, (0.0, 0.0)).unwrap()
    }

    #[test]
    fn worked_cell_index_example() {
        // 300 m cells, 10 per row: the point (750, 450) lies in column 2,
        // row 1 -> cell 12, whose center is exactly (750, 450).
        let g = grid_10x10();
        assert_eq!(g.cell_of_point(750.0, 450.0).unwrap(), CellId(12));
        assert_eq!(g.cell_center(CellId(12)), (750.0, 450.0));
    }

    #[test]
    fn rejects_out_of_domain() {
        let g = grid_10x10();
        assert!(matches!(g.cell_of_point(-1.0, 0.0), Err(GridError::OutOfDomain { .. })));
        assert!(matches!(g.cell_of_point(3000.0, 10.0), Err(GridError::OutOfDomain { .. })));
        assert!(g.cell_of_point(2999.999, 2999.999).is_ok());
    }

    #[test]
    fn origin_shift_applies() {
        let g = GridSpec::new(300.0, 3000.0, 3000.0, (1000.0, -500.0)).unwrap();
        assert_eq!(g.cell_of_point(1750.0, -50.0).unwrap(), CellId(12));
        assert_eq!(g.cell_center(CellId(12)), (1750.0, -50.0));
    }

    #[test]
    fn clamping_maps_outside_points_to_border_cells() {
        let g = grid_10x10();
        assert_eq!(g.clamp_point_to_cell(-100.0, -100.0), CellId(0));
        assert_eq!(g.clamp_point_to_cell(1e9, 1e9), CellId(99));
        assert_eq!(g.clamp_point_to_cell(750.0, 450.0), CellId(12));
    }

    #[test]
    fn sweep_geometry_example() {
        // 100 m swath, 10% overlap, 3 passes: 300 - 10*2 = 280 m.
        assert!((grid_size_from_sweep(100.0, 0.1, 3).unwrap() - 280.0).abs() < 1e-12);
        assert!((turns_from_speed(0.5, 1800.0, 300.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn interior_ring_sizes_are_4d() {
        let g = GridSpec::with_dims(300.0, 9, 9, (0.0, 0.0)).unwrap();
        let center = g.cell_at(4, 4).unwrap();
        assert_eq!(g.manhattan_ring_cells(center, 0), vec![center]);
        assert_eq!(g.manhattan_ring_cells(center, 1).len(), 4);
        assert_eq!(g.manhattan_ring_cells(center, 2).len(), 8);
        assert_eq!(g.manhattan_ring_cells(center, 4).len(), 16);
    }

    #[test]
    fn boundary_rings_are_clipped() {
        let g = GridSpec::with_dims(300.0, 9, 9, (0.0, 0.0)).unwrap();
        let corner = g.cell_at(0, 0).unwrap();
        // From a corner only the in-domain quadrant remains: d+1 cells while
        // the ring fits inside.
        assert_eq!(g.manhattan_ring_cells(corner, 1).len(), 2);
        assert_eq!(g.manhattan_ring_cells(corner, 4).len(), 5);
    }

    #[test]
    fn intensity_law_values() {
        assert!((lambda_of_time(0.2, 20.0, 20.0).unwrap() - 0.2).abs() < 1e-15);
        let lam = lambda_of_time(0.2, 60.0, 20.0).unwrap();
        assert!((lam - (0.2 + 3.0f64.ln())).abs() < 1e-15);
        assert!(matches!(lambda_of_time(0.2, 10.0, 20.0), Err(GridError::BadElapsed { .. })));
        assert!(matches!(lambda_of_time(0.2, 10.0, 0.0), Err(GridError::BadElapsed { .. })));
    }

    #[test]
    fn pmf_spot_values() {
        assert!((poisson_pmf(0, 0.2) - (-0.2f64).exp()).abs() < 1e-15);
        let want = (-0.2f64).exp() * 0.2f64.powi(4) / 24.0;
        assert!((poisson_pmf(4, 0.2) - want).abs() < 1e-18);
    }

    #[test]
    fn pmf_sums_to_one() {
        let total: f64 = (0..=200).map(|k| poisson_pmf(k, 5.0)).sum();
        assert!((total - 1.0).abs() < 1e-12, "sum {total}");
    }

    #[test]
    fn pmf_large_k_log_space() {
        // Stirling cross-check at k = 300, lambda = 250.
        let p = poisson_pmf(300, 250.0);
        assert!(p.is_finite() && p > 0.0);
        let ratio = poisson_pmf(301, 250.0) / p;
        assert!((ratio - 250.0 / 301.0).abs() < 1e-9);
    }

    /// Brute-force reference: evaluates the ring-uniform construction cell
    /// by cell without the ring bookkeeping of the production path.
    fn brute_force_prior(grid: &GridSpec, lambda: f64, center: CellId) -> Vec<f64> {
        let n = grid.cell_count();
        let mut nd = std::collections::HashMap::new();
        for i in 0..n {
            *nd.entry(grid.manhattan(CellId(i), center)).or_insert(0usize) += 1;
        }
        let w: Vec<f64> = (0..n)
            .map(|i| {
                let d = grid.manhattan(CellId(i), center);
                poisson_pmf(d, lambda) / nd[&d] as f64
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    #[test]
    fn prior_matches_brute_force() {
        let g = GridSpec::with_dims(300.0, 9, 9, (0.0, 0.0)).unwrap();
        let center = g.cell_at(4, 4).unwrap();
        for lambda in [0.2, 1.0, 3.0] {
            let params = PoissonPriorParams::with_lambda(lambda, center, None).unwrap();
            let field = build_poisson_prior(&g, &params).unwrap();
            let want = brute_force_prior(&g, lambda, center);
            for i in 0..g.cell_count() {
                assert!(
                    (field.prob(CellId(i)) - want[i]).abs() < 1e-12,
                    "lambda {lambda} cell {i}: {} vs {}",
                    field.prob(CellId(i)),
                    want[i]
                );
            }
        }
    }

    #[test]
    fn prior_rings_are_uniform_and_center_heavy_at_small_lambda() {
        let g = GridSpec::with_dims(300.0, 9, 9, (0.0, 0.0)).unwrap();
        let center = g.cell_at(4, 4).unwrap();
        let params = PoissonPriorParams::with_lambda(0.2, center, None).unwrap();
        let field = build_poisson_prior(&g, &params).unwrap();
        let ring1 = g.manhattan_ring_cells(center, 1);
        let p1 = field.prob(ring1[0]);
        for c in &ring1 {
            assert_eq!(field.prob(*c), p1, "ring cells share one probability");
        }
        assert!(field.prob(center) > p1, "small lambda concentrates at center");
        assert!((field.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn larger_lambda_spreads_mass_outward() {
        let g = GridSpec::with_dims(300.0, 21, 21, (0.0, 0.0)).unwrap();
        let center = g.cell_at(10, 10).unwrap();
        let mut prev_center_mass = f64::INFINITY;
        for lambda in [0.2, 1.0, 2.0, 4.0] {
            let f = build_poisson_prior(&g, &PoissonPriorParams::with_lambda(lambda, center, None).unwrap()).unwrap();
            let cm = f.prob(center);
            assert!(cm < prev_center_mass, "center mass should shrink as lambda grows");
            prev_center_mass = cm;
        }
    }

    #[test]
    fn prior_radius_cap_zeroes_far_rings() {
        let g = GridSpec::with_dims(300.0, 9, 9, (0.0, 0.0)).unwrap();
        let center = g.cell_at(4, 4).unwrap();
        let params = PoissonPriorParams::with_lambda(1.0, center, Some(2)).unwrap();
        let field = build_poisson_prior(&g, &params).unwrap();
        for c in g.manhattan_ring_cells(center, 3) {
            assert_eq!(field.prob(c), 0.0);
        }
        assert!((field.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_update_example() {
        // Two relevant cells at (0.5, 0.5); searching one with pd = 0.5
        // leaves posterior (1/3, 2/3).
        let g = GridSpec::with_dims(100.0, 2, 1, (0.0, 0.0)).unwrap();
        let f = ProbabilityField::from_weights(g, vec![0.5, 0.5]).unwrap();
        let post = bayes_negative_update(&f, &[CellId(0)], 0.5).unwrap();
        assert!((post.prob(CellId(0)) - 1.0 / 3.0).abs() < 1e-15);
        assert!((post.prob(CellId(1)) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_detection_zeroes_searched_cells() {
        let g = GridSpec::with_dims(100.0, 3, 1, (0.0, 0.0)).unwrap();
        let f = ProbabilityField::from_weights(g, vec![0.2, 0.3, 0.5]).unwrap();
        let post = bayes_negative_update(&f, &[CellId(1)], 1.0).unwrap();
        assert_eq!(post.prob(CellId(1)), 0.0);
        // Unsearched ratio 0.2 : 0.5 preserved.
        assert!((post.prob(CellId(0)) / post.prob(CellId(2)) - 0.4).abs() < 1e-12);
        assert!((post.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn searching_zero_probability_cell_is_noop() {
        let g = GridSpec::with_dims(100.0, 3, 1, (0.0, 0.0)).unwrap();
        let f = ProbabilityField::from_weights(g, vec![0.5, 0.0, 0.5]).unwrap();
        let post = bayes_negative_update(&f, &[CellId(1)], 1.0).unwrap();
        assert_eq!(post.probs(), f.probs());
    }

    #[test]
    fn update_errors_when_all_mass_searched() {
        let g = GridSpec::with_dims(100.0, 2, 1, (0.0, 0.0)).unwrap();
        let f = ProbabilityField::from_weights(g, vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            bayes_negative_update(&f, &[CellId(0)], 1.0),
            Err(GridError::NoMassRemaining)
        ));
    }

    #[test]
    fn update_rejects_bad_pd() {
        let g = GridSpec::with_dims(100.0, 2, 1, (0.0, 0.0)).unwrap();
        let f = ProbabilityField::uniform(g);
        assert!(bayes_negative_update(&f, &[CellId(0)], 0.0).is_err());
        assert!(bayes_negative_update(&f, &[CellId(0)], 1.1).is_err());
    }

    #[test]
    fn field_from_points_counts_and_clamps() {
        let g = grid_10x10();
        let pts = [
            Vec3::new(750.0, 450.0, -1.0),
            Vec3::new(751.0, 451.0, -1.0),
            Vec3::new(-500.0, -500.0, -1.0), // clamps to cell 0
            Vec3::new(10.0, 10.0, -1.0),
        ];
        let f = field_from_points(&g, pts.iter()).unwrap();
        assert!((f.prob(CellId(12)) - 0.5).abs() < 1e-15);
        assert!((f.prob(CellId(0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_writer_schema() {
        let g = GridSpec::with_dims(300.0, 2, 1, (0.0, 0.0)).unwrap();
        let f = ProbabilityField::from_weights(g, vec![0.25, 0.75]).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "cell,row,col,x_center_m,y_center_m,prob");
        assert_eq!(lines.next().unwrap(), "0,0,0,150,150,0.25");
        assert_eq!(lines.next().unwrap(), "1,0,1,450,150,0.75");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_center_to_cell(cols in 1usize..40, rows in 1usize..40, cell in 0usize..1600,
                                     gs in 1.0f64..2000.0, ox in -1e5f64..1e5, oy in -1e5f64..1e5) {
            let g = GridSpec::with_dims(gs, cols, rows, (ox, oy)).unwrap();
            let cell = CellId(cell % g.cell_count());
            let (cx, cy) = g.cell_center(cell);
            prop_assert_eq!(g.cell_of_point(cx, cy).unwrap(), cell);
        }

        #[test]
        fn update_preserves_unsearched_ratios(seed in 0u64..5000) {
            use rand::Rng;
            let mut rng = crate::rng::RandomStream::root(seed).rng();
            let cols = rng.gen_range(2usize..12);
            let rows = rng.gen_range(1usize..12);
            let g = GridSpec::with_dims(100.0, cols, rows, (0.0, 0.0)).unwrap();
            let weights: Vec<f64> = (0..g.cell_count()).map(|_| rng.gen_range(0.01..1.0)).collect();
            let f = ProbabilityField::from_weights(g, weights).unwrap();
            let n_search = rng.gen_range(1..g.cell_count().max(2));
            let searched: Vec<CellId> = (0..n_search).map(|_| CellId(rng.gen_range(0..g.cell_count()))).collect();
            let pd = rng.gen_range(0.1..=1.0);
            if let Ok(post) = bayes_negative_update(&f, &searched, pd) {
                prop_assert!((post.total_mass() - 1.0).abs() < 1e-9);
                // Any two unsearched cells keep their probability ratio.
                let unsearched: Vec<usize> = (0..g.cell_count())
                    .filter(|i| !searched.contains(&CellId(*i)))
                    .collect();
                if unsearched.len() >= 2 {
                    let (a, b) = (unsearched[0], unsearched[1]);
                    let before = f.prob(CellId(a)) / f.prob(CellId(b));
                    let after = post.prob(CellId(a)) / post.prob(CellId(b));
                    prop_assert!((before - after).abs() < 1e-9 * before.abs().max(1.0));
                }
            }
        }
    }
}
