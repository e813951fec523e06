//! Search scheduling, per-interval cell assignment, and mission simulation.
//!
//! Time is sliced into `n` equal intervals after a preparation delay
//! `t_0`; each sonar searches exactly one cell per interval. Two
//! assignment policies exist: `greedy` sends each sonar to the
//! highest-posterior cell within its travel radius
//! `r = floor(v * t_i / G_s)`, while `sweep` runs the classical
//! boustrophedon (lawnmower) pattern over per-sonar row bands. Missions
//! replay against a hidden truth cell — fixed, drawn from an ensemble's
//! landing distribution, or following a fresh moving trajectory per
//! replication — applying the negative-information Bayes update after
//! every miss, and aggregate replications into a cumulative
//! detection-probability curve.
//!
//! Replication `r` derives all its randomness from the substream
//! `root(seed) -> r`, so replications are order-independent and the whole
//! mission is reproducible bit for bit at any thread count.

use std::io::Write;

use thiserror::Error;

use crate::exec::map_indexed;
use crate::kinematics::{simulate_trajectory, Ensemble, KinematicsError, ScenarioParams, Trajectory};
use crate::probgrid::{bayes_negative_update, CellId, GridError, GridSpec, ProbabilityField};
use crate::rng::RandomStream;
use rand::Rng;

const TRUTH_LABEL: u64 = 0x7472_7574;
const DETECT_LABEL: u64 = 0x6465_7463;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("schedule needs t0 >= 0 and ti > 0 (finite), got t0 = {t0}, ti = {ti}")]
    BadSchedule { t0: f64, ti: f64 },
    #[error("schedule needs at least one interval")]
    NoIntervals,
    #[error("mission needs at least one sonar")]
    NoSonars,
    #[error("sonar {id}: needs speed > 0, cell time > 0, pd in (0, 1]; got v = {v}, t = {t}, pd = {pd}")]
    BadSonar { id: usize, v: f64, t: f64, pd: f64 },
    #[error("sonar {id} starts outside the grid")]
    SonarStartOutside { id: usize },
    #[error("duplicate sonar id {0}")]
    DuplicateSonarId(usize),
    #[error("mission needs at least one replication")]
    NoReplications,
    #[error("truth ensemble holds no particles")]
    EmptyTruth,
    #[error("truth field lives on a different grid than the prior")]
    TruthGridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// One search asset: a vessel towing sonar that clears one cell per
/// interval and can move at most `floor(speed * cell_time / G_s)` cells
/// (Manhattan) between assignments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonarAsset {
    pub id: usize,
    pub speed_mps: f64,
    /// Swath width of one pass (m); kept with the asset for grid sizing.
    pub swath_m: f64,
    /// Fraction of swath re-covered between adjacent passes.
    pub overlap: f64,
    pub start_cell: CellId,
    /// Time to clear one cell (s); also sets the travel radius.
    pub cell_time_s: f64,
    /// Probability that searching the target's cell actually finds it.
    pub pd: f64,
}

impl SonarAsset {
    fn validate(&self, grid: &GridSpec) -> Result<(), PlannerError> {
        if !(self.speed_mps > 0.0 && self.cell_time_s > 0.0 && self.pd > 0.0 && self.pd <= 1.0) {
            return Err(PlannerError::BadSonar {
                id: self.id,
                v: self.speed_mps,
                t: self.cell_time_s,
                pd: self.pd,
            });
        }
        if !grid.contains(self.start_cell) {
            return Err(PlannerError::SonarStartOutside { id: self.id });
        }
        Ok(())
    }

    fn travel_radius_cells(&self, grid: &GridSpec, teleport: bool) -> usize {
        if teleport {
            usize::MAX
        } else {
            (self.speed_mps * self.cell_time_s / grid.cell_size_m()).floor() as usize
        }
    }
}

/// Sonar parameters without placement; [`deploy_sonars`] stamps ids and
/// start cells from a deployment pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonarTemplate {
    pub speed_mps: f64,
    pub swath_m: f64,
    pub overlap: f64,
    pub cell_time_s: f64,
    pub pd: f64,
}

/// Places `count` sonars around `center_m`, alternating left/right at
/// whole multiples of `offset_m` along x (the first pair sits at
/// `center ± offset`), each clamped into the grid.
pub fn deploy_sonars(
    template: &SonarTemplate,
    count: usize,
    grid: &GridSpec,
    center_m: (f64, f64),
    offset_m: f64,
) -> Vec<SonarAsset> {
    (0..count)
        .map(|j| {
            let magnitude = (j / 2 + 1) as f64 * offset_m;
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            let x = center_m.0 + sign * magnitude;
            SonarAsset {
                id: j,
                speed_mps: template.speed_mps,
                swath_m: template.swath_m,
                overlap: template.overlap,
                start_cell: grid.clamp_point_to_cell(x, center_m.1),
                cell_time_s: template.cell_time_s,
                pd: template.pd,
            }
        })
        .collect()
}

/// Time slicing: `n` consecutive intervals of length `ti` starting at the
/// preparation time `t0`, tiling `[t0, t0 + n*ti]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSchedule {
    pub t0_s: f64,
    pub ti_s: f64,
    pub n: usize,
}

impl SearchSchedule {
    pub fn new(t0_s: f64, ti_s: f64, n: usize) -> Result<Self, PlannerError> {
        if !(t0_s >= 0.0 && t0_s.is_finite() && ti_s > 0.0 && ti_s.is_finite()) {
            return Err(PlannerError::BadSchedule { t0: t0_s, ti: ti_s });
        }
        if n == 0 {
            return Err(PlannerError::NoIntervals);
        }
        Ok(SearchSchedule { t0_s, ti_s, n })
    }

    /// Bounds of interval `k` (0-based): `[t0 + k*ti, t0 + (k+1)*ti]`.
    pub fn interval(&self, k: usize) -> (f64, f64) {
        interval_bounds(self.t0_s, self.ti_s, k)
    }

    pub fn end_time_s(&self) -> f64 {
        self.t0_s + self.n as f64 * self.ti_s
    }
}

/// The interval-window formula for an arbitrary index `k`:
/// `[t0 + k*ti, t0 + (k+1)*ti]`.
pub fn interval_bounds(t0_s: f64, ti_s: f64, k: usize) -> (f64, f64) {
    (t0_s + k as f64 * ti_s, t0_s + (k + 1) as f64 * ti_s)
}

/// Cell-assignment policy for each interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Highest-posterior reachable cell, ties by distance then index.
    Greedy,
    /// Boustrophedon coverage of per-sonar row bands.
    Sweep,
}

/// Hidden-target model a mission replays against.
#[derive(Debug, Clone, Copy)]
pub enum TruthModel<'a> {
    /// The target sits in one known cell (diagnostics).
    FixedCell(CellId),
    /// One truth cell drawn per replication from a probability field
    /// over the same grid as the prior.
    StaticFromField(&'a ProbabilityField),
    /// One landing cell drawn per replication from an ensemble's finals.
    StaticFromEnsemble(&'a Ensemble),
    /// A fresh trajectory per replication; the truth cell is the clamped
    /// position at each interval's end.
    Moving(&'a ScenarioParams),
}

/// One sonar-interval line of a mission: which cell was searched (`None`
/// = the sonar idled) and whether the target was found there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchEvent {
    pub replication: usize,
    pub interval: usize,
    pub sonar: usize,
    pub cell: Option<CellId>,
    pub detected: bool,
}

/// Success probability against allowed time, aggregated over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCurve {
    /// `n + 1` instants: `t0, t0 + ti, …, t0 + n*ti`.
    pub times_s: Vec<f64>,
    /// Fraction of replications detected by each instant; nondecreasing.
    pub cumulative: Vec<f64>,
    /// Fraction of replications detected inside interval `k` (length `n`).
    pub per_interval: Vec<f64>,
    pub replications: usize,
}

impl DetectionCurve {
    fn from_detections(schedule: &SearchSchedule, detections: &[Option<usize>]) -> Self {
        let m = detections.len();
        let mut per_interval = vec![0.0; schedule.n];
        for d in detections.iter().flatten() {
            per_interval[*d] += 1.0;
        }
        for p in &mut per_interval {
            *p /= m as f64;
        }
        let mut times_s = Vec::with_capacity(schedule.n + 1);
        let mut cumulative = Vec::with_capacity(schedule.n + 1);
        let mut acc = 0.0;
        times_s.push(schedule.t0_s);
        cumulative.push(0.0);
        for k in 0..schedule.n {
            acc += per_interval[k];
            times_s.push(schedule.interval(k).1);
            cumulative.push(acc);
        }
        DetectionCurve { times_s, cumulative, per_interval, replications: m }
    }

    /// Final cumulative success probability at the schedule horizon.
    pub fn final_success(&self) -> f64 {
        *self.cumulative.last().expect("curve has at least the start point")
    }
}

/// Everything a mission run needs. `sonars` are owned so sweeps can swap
/// them while sharing the rest.
#[derive(Debug, Clone)]
pub struct MissionSpec<'a> {
    pub prior: &'a ProbabilityField,
    pub sonars: Vec<SonarAsset>,
    pub schedule: SearchSchedule,
    pub policy: Policy,
    /// Drops the travel-radius constraint (upper-bound studies).
    pub teleport: bool,
    pub truth: TruthModel<'a>,
    pub replications: usize,
    pub seed: u64,
}

impl MissionSpec<'_> {
    fn validate(&self) -> Result<(), PlannerError> {
        if self.sonars.is_empty() {
            return Err(PlannerError::NoSonars);
        }
        let grid = self.prior.grid();
        let mut ids: Vec<usize> = Vec::with_capacity(self.sonars.len());
        for sonar in &self.sonars {
            sonar.validate(grid)?;
            if ids.contains(&sonar.id) {
                return Err(PlannerError::DuplicateSonarId(sonar.id));
            }
            ids.push(sonar.id);
        }
        if self.replications == 0 {
            return Err(PlannerError::NoReplications);
        }
        match self.truth {
            TruthModel::StaticFromEnsemble(e) if e.trajectories.is_empty() => {
                Err(PlannerError::EmptyTruth)
            }
            TruthModel::StaticFromField(f) if f.grid() != self.prior.grid() => {
                Err(PlannerError::TruthGridMismatch)
            }
            TruthModel::Moving(params) => {
                params.validate()?;
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A full mission's outputs: the aggregate curve, the per-sonar search
/// log of every replication, and replication 0's posterior after each
/// executed interval.
#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub curve: DetectionCurve,
    pub events: Vec<SearchEvent>,
    pub sample_posteriors: Vec<ProbabilityField>,
    /// Detection interval per replication; `None` = never found.
    pub detections: Vec<Option<usize>>,
}

fn priority_order(sonars: &[SonarAsset]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sonars.len()).collect();
    order.sort_by_key(|&i| sonars[i].id);
    order
}

/// Row band `[start, start + len)` owned by the sonar of rank `rank`
/// among `count` sonars; earlier ranks absorb the remainder rows.
fn row_band(rows: usize, count: usize, rank: usize) -> (usize, usize) {
    let base = rows / count;
    let rem = rows % count;
    let start = rank * base + rank.min(rem);
    let len = base + usize::from(rank < rem);
    (start, len)
}

fn serpentine_cell(grid: &GridSpec, band_start: usize, serp: usize) -> CellId {
    let cols = grid.cols();
    let q = serp / cols;
    let offset = serp % cols;
    let col = if q % 2 == 0 { offset } else { cols - 1 - offset };
    grid.cell_at(band_start + q, col).expect("serpentine index stays inside the band")
}

fn serpentine_index(grid: &GridSpec, band_start: usize, cell: CellId) -> usize {
    let cols = grid.cols();
    let (row, col) = grid.row_col(cell);
    let q = row - band_start;
    q * cols + if q % 2 == 0 { col } else { cols - 1 - col }
}

/// Assigns each sonar its next cell under `policy`. Returned assignments
/// are parallel to `sonars`; `None` means the sonar idles this interval.
/// `positions[i]` is the cell sonar `i` last searched, or `None` before
/// its first assignment (greedy then measures travel from `start_cell`).
/// Sonars are served in ascending id order; greedy excludes cells already
/// claimed by an earlier sonar in the same interval.
pub fn select_next_cells(
    field: &ProbabilityField,
    sonars: &[SonarAsset],
    positions: &[Option<CellId>],
    policy: Policy,
    teleport: bool,
) -> Vec<Option<CellId>> {
    debug_assert_eq!(sonars.len(), positions.len());
    let grid = field.grid();
    let mut assigned: Vec<Option<CellId>> = vec![None; sonars.len()];
    match policy {
        Policy::Greedy => {
            let mut claimed = vec![false; grid.cell_count()];
            for &si in &priority_order(sonars) {
                let at = positions[si].unwrap_or(sonars[si].start_cell);
                let radius = sonars[si].travel_radius_cells(grid, teleport);
                let here = grid.cell_center(at);
                let mut best: Option<(f64, f64, usize)> = None;
                for idx in 0..grid.cell_count() {
                    if claimed[idx] {
                        continue;
                    }
                    let cell = CellId(idx);
                    let p = field.prob(cell);
                    if p <= 0.0 || grid.manhattan(at, cell) > radius {
                        continue;
                    }
                    let center = grid.cell_center(cell);
                    let d2 = (center.0 - here.0).powi(2) + (center.1 - here.1).powi(2);
                    // Ascending index scan: strict inequalities keep the
                    // lowest index on full ties.
                    let better = match best {
                        None => true,
                        Some((bp, bd2, _)) => p > bp || (p == bp && d2 < bd2),
                    };
                    if better {
                        best = Some((p, d2, idx));
                    }
                }
                if let Some((_, _, idx)) = best {
                    claimed[idx] = true;
                    assigned[si] = Some(CellId(idx));
                }
            }
        }
        Policy::Sweep => {
            let order = priority_order(sonars);
            for (rank, &si) in order.iter().enumerate() {
                let (band_start, band_rows) = row_band(grid.rows(), sonars.len(), rank);
                if band_rows == 0 {
                    continue;
                }
                let band_cells = band_rows * grid.cols();
                let next = match positions[si] {
                    Some(last) => {
                        let (row, _) = grid.row_col(last);
                        if row >= band_start && row < band_start + band_rows {
                            serpentine_index(grid, band_start, last) + 1
                        } else {
                            0
                        }
                    }
                    None => 0,
                };
                if next < band_cells {
                    assigned[si] = Some(serpentine_cell(grid, band_start, next));
                }
            }
        }
    }
    assigned
}

enum TruthCells {
    Constant(CellId),
    PerInterval(Vec<CellId>),
}

impl TruthCells {
    fn at(&self, interval: usize) -> CellId {
        match self {
            TruthCells::Constant(c) => *c,
            TruthCells::PerInterval(v) => v[interval],
        }
    }
}

fn trajectory_position_at(traj: &Trajectory, t_s: f64, dt_s: f64) -> crate::geom::Vec3 {
    let idx = ((t_s / dt_s).round() as usize).min(traj.states.len() - 1);
    traj.states[idx].position
}

fn draw_truth(spec: &MissionSpec<'_>, grid: &GridSpec, rep_stream: &RandomStream) -> TruthCells {
    match spec.truth {
        TruthModel::FixedCell(c) => TruthCells::Constant(c),
        TruthModel::StaticFromField(field) => {
            let u: f64 = rep_stream.substream(TRUTH_LABEL).rng().gen();
            let mut cum = 0.0;
            let mut picked = CellId(field.grid().cell_count() - 1);
            for (idx, &p) in field.probs().iter().enumerate() {
                cum += p;
                if u < cum {
                    picked = CellId(idx);
                    break;
                }
            }
            TruthCells::Constant(picked)
        }
        TruthModel::StaticFromEnsemble(e) => {
            let mut rng = rep_stream.substream(TRUTH_LABEL).rng();
            let pick = rng.gen_range(0..e.trajectories.len());
            let pos = e.trajectories[pick].final_state().position;
            TruthCells::Constant(grid.clamp_point_to_cell(pos.x, pos.y))
        }
        TruthModel::Moving(params) => {
            let mut extended = params.clone();
            extended.horizon_s = extended.horizon_s.max(spec.schedule.end_time_s());
            let traj = simulate_trajectory(&extended, &rep_stream.substream(TRUTH_LABEL));
            let cells = (0..spec.schedule.n)
                .map(|k| {
                    let (_, t_end) = spec.schedule.interval(k);
                    let pos = trajectory_position_at(&traj, t_end, extended.dt_s);
                    grid.clamp_point_to_cell(pos.x, pos.y)
                })
                .collect();
            TruthCells::PerInterval(cells)
        }
    }
}

struct RepOutcome {
    detection: Option<usize>,
    events: Vec<SearchEvent>,
    posteriors: Option<Vec<ProbabilityField>>,
}

fn run_replication(spec: &MissionSpec<'_>, rep: usize, keep_posteriors: bool) -> RepOutcome {
    let grid = *spec.prior.grid();
    let rep_stream = RandomStream::root(spec.seed).substream(rep as u64);
    let truth = draw_truth(spec, &grid, &rep_stream);
    let mut detect_rng = rep_stream.substream(DETECT_LABEL).rng();

    let mut posterior = spec.prior.clone();
    let mut positions: Vec<Option<CellId>> = vec![None; spec.sonars.len()];
    let mut events = Vec::new();
    let mut posteriors = keep_posteriors.then(Vec::new);
    let mut detection = None;

    'intervals: for interval in 0..spec.schedule.n {
        let assigned =
            select_next_cells(&posterior, &spec.sonars, &positions, spec.policy, spec.teleport);
        let truth_cell = truth.at(interval);

        let mut misses: Vec<(CellId, f64)> = Vec::with_capacity(spec.sonars.len());
        for &si in &priority_order(&spec.sonars) {
            let sonar = &spec.sonars[si];
            let cell = assigned[si];
            let mut detected = false;
            if let Some(cell) = cell {
                positions[si] = Some(cell);
                if detection.is_none()
                    && cell == truth_cell
                    && (sonar.pd >= 1.0 || detect_rng.gen::<f64>() < sonar.pd)
                {
                    detected = true;
                    detection = Some(interval);
                } else {
                    misses.push((cell, sonar.pd));
                }
            }
            events.push(SearchEvent { replication: rep, interval, sonar: sonar.id, cell, detected });
        }

        if detection.is_some() {
            if let Some(ps) = posteriors.as_mut() {
                ps.push(posterior.clone());
            }
            break;
        }
        for (cell, pd) in misses {
            posterior = match bayes_negative_update(&posterior, &[cell], pd) {
                Ok(next) => next,
                // Searching emptied the whole field: nothing left to look
                // at, the mission stalls here.
                Err(GridError::NoMassRemaining) => break 'intervals,
                Err(e) => unreachable!("update on validated cells failed: {e}"),
            };
        }
        if let Some(ps) = posteriors.as_mut() {
            ps.push(posterior.clone());
        }
    }

    RepOutcome { detection, events, posteriors }
}

fn aggregate(schedule: &SearchSchedule, reps: Vec<RepOutcome>) -> MissionOutcome {
    let detections: Vec<Option<usize>> = reps.iter().map(|r| r.detection).collect();
    let curve = DetectionCurve::from_detections(schedule, &detections);
    let mut events = Vec::new();
    let mut sample_posteriors = Vec::new();
    for rep in reps {
        events.extend(rep.events);
        if let Some(ps) = rep.posteriors {
            sample_posteriors = ps;
        }
    }
    MissionOutcome { curve, events, sample_posteriors, detections }
}

/// Runs `spec.replications` independent missions and aggregates them.
/// Replications run in parallel when the `parallel` feature is on, with
/// bitwise-identical output either way.
pub fn simulate_mission(spec: &MissionSpec<'_>) -> Result<MissionOutcome, PlannerError> {
    spec.validate()?;
    let reps = map_indexed(spec.replications, |rep| run_replication(spec, rep, rep == 0));
    Ok(aggregate(&spec.schedule, reps))
}

/// [`simulate_mission`] pinned to one thread, for comparison runs.
pub fn simulate_mission_serial(spec: &MissionSpec<'_>) -> Result<MissionOutcome, PlannerError> {
    spec.validate()?;
    let reps =
        crate::exec::map_indexed_serial(spec.replications, |rep| run_replication(spec, rep, rep == 0));
    Ok(aggregate(&spec.schedule, reps))
}

/// Final success probability as a function of sonar count, all else held
/// fixed. Every count runs under the same seed, so replications share
/// their truth draws (common random numbers).
pub fn sonar_count_sweep(
    base: &MissionSpec<'_>,
    template: &SonarTemplate,
    center_m: (f64, f64),
    offset_m: f64,
    k_min: usize,
    k_max: usize,
) -> Result<Vec<(usize, f64)>, PlannerError> {
    debug_assert!(k_min >= 1 && k_min <= k_max);
    let grid = base.prior.grid();
    let mut table = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let spec = MissionSpec {
            sonars: deploy_sonars(template, k, grid, center_m, offset_m),
            ..base.clone()
        };
        let outcome = simulate_mission(&spec)?;
        table.push((k, outcome.curve.final_success()));
    }
    Ok(table)
}

/// Writes `t_s,cum_success_prob` rows, one per curve point.
pub fn write_curve_csv<W: Write>(w: &mut W, curve: &DetectionCurve) -> std::io::Result<()> {
    writeln!(w, "t_s,cum_success_prob")?;
    for (t, p) in curve.times_s.iter().zip(&curve.cumulative) {
        writeln!(w, "{t},{p}")?;
    }
    Ok(())
}

/// Writes `t_s,interval_detect_prob` rows: the fraction of replications
/// detected inside each interval, stamped at the interval's end.
pub fn write_instantaneous_csv<W: Write>(w: &mut W, curve: &DetectionCurve) -> std::io::Result<()> {
    writeln!(w, "t_s,interval_detect_prob")?;
    for (t, p) in curve.times_s.iter().skip(1).zip(&curve.per_interval) {
        writeln!(w, "{t},{p}")?;
    }
    Ok(())
}

/// Writes `replication,interval,sonar,cell,detected` rows; an idle sonar
/// logs cell `-1`.
pub fn write_mission_log_csv<W: Write>(w: &mut W, events: &[SearchEvent]) -> std::io::Result<()> {
    writeln!(w, "replication,interval,sonar,cell,detected")?;
    for e in events {
        let cell = e.cell.map_or(-1i64, |c| c.0 as i64);
        writeln!(w, "{},{},{},{},{}", e.replication, e.interval, e.sonar, cell, e.detected as u8)?;
    }
    Ok(())
}

/// Writes `sonars,success_prob` rows from a sonar-count sweep table.
pub fn write_sweep_csv<W: Write>(w: &mut W, table: &[(usize, f64)]) -> std::io::Result<()> {
    writeln!(w, "sonars,success_prob")?;
    for (k, p) in table {
        writeln!(w, "{k},{p}")?;
    }
    Ok(())
}
