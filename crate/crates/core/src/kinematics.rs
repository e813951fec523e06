//! Unpowered-vehicle motion in two regimes, plus Monte Carlo ensembles.
//!
//! Drift: the vehicle is neutrally buoyant and advects horizontally with
//! velocity `v0_h + current(position) + perturbation(t)`; depth stays
//! fixed. The initial horizontal velocity persists — over the horizons of
//! interest the water exerts no appreciable braking on a body much smaller
//! than the current's characteristic length.
//!
//! Sink: the vehicle descends under a constant net downward acceleration
//! `a_z`; its horizontal velocity is the initial horizontal velocity plus
//! the perturbation (currents barely change during the short descent).
//! Position advances by explicit Euler with the state's previous velocity,
//! then velocity updates. Reaching the seabed clamps depth, zeroes the
//! velocity, and sets the grounded flag; the crossing instant is also
//! estimated by linear interpolation inside the grounding step, which
//! keeps the grounding-time error O(dt) with a clean halving under dt/2.
//!
//! Ensembles assign particle `i` the substream `root(master_seed) -> i`,
//! so results are bitwise independent of execution order or thread count.

use std::io::Write;

use thiserror::Error;

use crate::environment::{CurrentField, EnvironmentError, PerturbationSpec};
use crate::exec::{map_indexed, map_indexed_serial};
use crate::geom::Vec3;
use crate::probgrid::{field_from_points, CellId, GridError, GridSpec};
use crate::rng::RandomStream;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("time step must be positive and finite, got {0}")]
    BadDt(f64),
    #[error("horizon must cover at least one step of {dt} s, got {horizon} s")]
    BadHorizon { horizon: f64, dt: f64 },
    #[error("seabed depth must be positive and finite, got {0}")]
    BadSeabed(f64),
    #[error("sink acceleration must be nonnegative and finite, got {0}")]
    BadAccel(f64),
    #[error("initial state must be finite, ungrounded, with z in [-{seabed}, 0]; got z = {z}")]
    BadInitialState { z: f64, seabed: f64 },
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("ensemble holds no particles")]
    EmptyEnsemble,
}

/// Motion regime of the disabled vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Neutral buoyancy: horizontal advection, depth fixed.
    Drift,
    /// Negative buoyancy: constant downward acceleration until grounding.
    Sink,
}

/// Instantaneous vehicle state. Invariant: `grounded` implies zero velocity
/// and `position.z` in `[-seabed_depth, 0]` throughout a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub t_s: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub grounded: bool,
}

impl VehicleState {
    pub fn new(position: Vec3, velocity: Vec3) -> Self {
        VehicleState { t_s: 0.0, position, velocity, grounded: false }
    }
}

/// Full description of one simulation scenario.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub regime: Regime,
    pub initial: VehicleState,
    /// Downward acceleration magnitude while sinking (m/s^2).
    pub sink_accel_mps2: f64,
    /// Positive depth of the seabed below the surface (m).
    pub seabed_depth_m: f64,
    pub dt_s: f64,
    pub horizon_s: f64,
    pub perturbation: PerturbationSpec,
    pub current: CurrentField,
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(KinematicsError::BadDt(self.dt_s));
        }
        if !(self.horizon_s >= self.dt_s && self.horizon_s.is_finite()) {
            return Err(KinematicsError::BadHorizon { horizon: self.horizon_s, dt: self.dt_s });
        }
        if !(self.seabed_depth_m > 0.0 && self.seabed_depth_m.is_finite()) {
            return Err(KinematicsError::BadSeabed(self.seabed_depth_m));
        }
        if !(self.sink_accel_mps2 >= 0.0 && self.sink_accel_mps2.is_finite()) {
            return Err(KinematicsError::BadAccel(self.sink_accel_mps2));
        }
        let z = self.initial.position.z;
        if self.initial.grounded
            || !self.initial.position.is_finite()
            || !self.initial.velocity.is_finite()
            || !(-self.seabed_depth_m..=0.0).contains(&z)
        {
            return Err(KinematicsError::BadInitialState { z, seabed: self.seabed_depth_m });
        }
        self.perturbation.validate()?;
        Ok(())
    }

    fn n_steps(&self) -> usize {
        ((self.horizon_s / self.dt_s) + 1e-9).floor() as usize
    }
}

/// One particle's state sequence at t = 0, dt, 2dt, …; stops at the first
/// grounded state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<VehicleState>,
    /// Seabed-crossing instant interpolated inside the grounding step;
    /// `None` when the particle never grounds.
    pub grounding_time_s: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &VehicleState {
        self.states.last().expect("a trajectory holds at least its initial state")
    }
}

/// A Monte Carlo batch of trajectories sharing one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    pub master_seed: u64,
}

/// Advances one state by `dt`. `perturb` is the disturbance velocity in
/// force over this step. Callers guarantee `state` is not grounded and
/// `params` validate.
pub fn step_state(state: &VehicleState, params: &ScenarioParams, perturb: Vec3) -> VehicleState {
    debug_assert!(!state.grounded);
    let dt = params.dt_s;
    let v0 = params.initial.velocity;
    match params.regime {
        Regime::Drift => {
            let cur = params.current.sample(state.position);
            let v = Vec3::new(v0.x + cur.x + perturb.x, v0.y + cur.y + perturb.y, 0.0);
            VehicleState {
                t_s: state.t_s + dt,
                position: state.position + v * dt,
                velocity: v,
                grounded: false,
            }
        }
        Regime::Sink => {
            // Horizontal velocity is prescribed, not integrated; only the
            // vertical component carries Euler state.
            let vh = Vec3::new(v0.x + perturb.x, v0.y + perturb.y, state.velocity.z);
            let mut pos = state.position + vh * dt;
            let mut vel = Vec3::new(vh.x, vh.y, state.velocity.z - params.sink_accel_mps2 * dt);
            let mut grounded = false;
            if pos.z <= -params.seabed_depth_m {
                pos.z = -params.seabed_depth_m;
                vel = Vec3::ZERO;
                grounded = true;
            } else if pos.z > 0.0 {
                // An upward initial velocity can reach the surface; cap
                // there and stop the ascent.
                pos.z = 0.0;
                vel.z = 0.0;
            }
            VehicleState { t_s: state.t_s + dt, position: pos, velocity: vel, grounded }
        }
    }
}

/// Simulates one particle. The perturbation is drawn from `stream` keyed by
/// absolute time, so the same stream always reproduces the same path.
pub fn simulate_trajectory(params: &ScenarioParams, stream: &RandomStream) -> Trajectory {
    let mut state = params.initial;
    state.t_s = 0.0;
    let mut states = Vec::with_capacity(params.n_steps() + 1);
    states.push(state);
    let mut grounding_time_s = None;
    for _ in 0..params.n_steps() {
        let perturb = params.perturbation.draw(stream, state.t_s);
        let next = step_state(&state, params, perturb);
        if next.grounded {
            let vz = state.velocity.z;
            grounding_time_s = Some(if vz < 0.0 {
                state.t_s + (-params.seabed_depth_m - state.position.z) / vz
            } else {
                state.t_s
            });
        }
        states.push(next);
        state = next;
        if state.grounded {
            break;
        }
    }
    Trajectory { states, grounding_time_s }
}

/// Runs `n` independent particles; particle `i` draws from the substream
/// `root(master_seed) -> i`. Parallel when the `parallel` feature is on,
/// with output identical to the serial path.
pub fn run_ensemble(params: &ScenarioParams, n: usize, master_seed: u64) -> Ensemble {
    debug_assert!(n >= 1);
    let root = RandomStream::root(master_seed);
    let trajectories = map_indexed(n, |i| simulate_trajectory(params, &root.substream(i as u64)));
    Ensemble { trajectories, master_seed }
}

/// Always-sequential twin of [`run_ensemble`], kept for benchmarking and
/// for asserting serial/parallel equivalence.
pub fn run_ensemble_serial(params: &ScenarioParams, n: usize, master_seed: u64) -> Ensemble {
    debug_assert!(n >= 1);
    let root = RandomStream::root(master_seed);
    let trajectories =
        map_indexed_serial(n, |i| simulate_trajectory(params, &root.substream(i as u64)));
    Ensemble { trajectories, master_seed }
}

/// Final-position statistics of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub mean_final_position: Vec3,
    /// Densest cell of the landing histogram on `grid`.
    pub modal_cell: CellId,
    pub modal_center_m: (f64, f64),
    /// Max over particles of horizontal |final - initial|.
    pub max_horizontal_offset_m: f64,
    pub final_positions: Vec<Vec3>,
}

pub fn ensemble_summary(e: &Ensemble, grid: &GridSpec) -> Result<EnsembleSummary, KinematicsError> {
    if e.trajectories.is_empty() {
        return Err(KinematicsError::EmptyEnsemble);
    }
    let finals: Vec<Vec3> = e.trajectories.iter().map(|t| t.final_state().position).collect();
    let n = finals.len() as f64;
    let mut mean = Vec3::ZERO;
    for p in &finals {
        mean += *p;
    }
    let mean = mean * (1.0 / n);
    let max_offset = e
        .trajectories
        .iter()
        .map(|t| t.final_state().position.horizontal_distance(&t.states[0].position))
        .fold(0.0f64, f64::max);
    let field = field_from_points(grid, finals.iter())?;
    let modal_cell = field.argmax();
    Ok(EnsembleSummary {
        mean_final_position: mean,
        modal_cell,
        modal_center_m: grid.cell_center(modal_cell),
        max_horizontal_offset_m: max_offset,
        final_positions: finals,
    })
}

fn write_state_row<W: Write>(w: &mut W, particle: usize, s: &VehicleState) -> std::io::Result<()> {
    writeln!(
        w,
        "{particle},{},{},{},{},{},{},{},{}",
        s.t_s,
        s.position.x,
        s.position.y,
        s.position.z,
        s.velocity.x,
        s.velocity.y,
        s.velocity.z,
        s.grounded as u8
    )
}

pub const TRAJECTORY_CSV_HEADER: &str = "particle,t_s,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps,grounded";

/// Writes full state sequences for the first `limit` particles (all when
/// `None`); header `particle,t_s,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps,grounded`.
pub fn write_trajectories_csv<W: Write>(
    w: &mut W,
    e: &Ensemble,
    limit: Option<usize>,
) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
    let take = limit.unwrap_or(e.trajectories.len());
    for (i, traj) in e.trajectories.iter().take(take).enumerate() {
        for s in &traj.states {
            write_state_row(w, i, s)?;
        }
    }
    Ok(())
}

/// Writes each particle's final state only, same schema as trajectories.
pub fn write_landings_csv<W: Write>(w: &mut W, e: &Ensemble) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
    for (i, traj) in e.trajectories.iter().enumerate() {
        write_state_row(w, i, traj.final_state())?;
    }
    Ok(())
}
