//! Bootstrap particle filter for a target that keeps moving while the
//! search runs.
//!
//! Particles carry positions only: in the drift regime the velocity is a
//! function of place and time (base velocity + current + perturbation),
//! and in the sink regime the vertical rate is the deterministic
//! `v_z(t) = v_z(0) - a*t`, so position plus absolute time fully
//! determines the next step. Prediction replays the same per-step Euler
//! kinematics as ensemble simulation; the measurement update multiplies
//! weights by `1 - pd` for particles inside a searched-but-missed cell
//! (by `pd` inside the detected cell, zero elsewhere, on a detection);
//! systematic resampling fires when the effective sample size falls
//! under a caller-chosen fraction of the particle count.
//!
//! Pass the *same* stream to successive [`pf_predict`] calls: particle
//! `j` always draws from substream `j`, and perturbation windows are
//! keyed by absolute time, so two half-length predictions compose into
//! exactly one full-length prediction.

use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::exec::map_indexed;
use crate::geom::Vec3;
use crate::kinematics::{step_state, KinematicsError, Regime, ScenarioParams, VehicleState};
use crate::probgrid::{CellId, GridError, GridSpec, ProbabilityField};
use crate::rng::RandomStream;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("filter needs at least 2 particles, got {0}")]
    TooFewParticles(usize),
    #[error("{particles} particles but {weights} weights")]
    WeightMismatch { particles: usize, weights: usize },
    #[error("weights must be finite and nonnegative, got {0}")]
    BadWeight(f64),
    #[error("weights sum to zero")]
    ZeroWeightSum,
    #[error("prediction span must be a whole positive number of kinematic steps, got span = {span_s} s at dt = {dt_s} s")]
    BadSpan { span_s: f64, dt_s: f64 },
    #[error("search probability must lie in (0, 1], got {0}")]
    BadSearchProbability(f64),
    #[error("detected cell {0} is not among the searched cells")]
    DetectionNotSearched(CellId),
    #[error("observation wiped out every particle: the target cannot be where the filter thought")]
    ZeroPosterior,
    #[error("resample threshold must lie in [0, 1], got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Weighted particle cloud at one instant. Weights always sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub particles: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub time_s: f64,
}

impl FilterState {
    /// Uniform weights over the given positions.
    pub fn from_positions(particles: Vec<Vec3>, time_s: f64) -> Result<Self, FilterError> {
        let w = vec![1.0 / particles.len().max(1) as f64; particles.len()];
        Self::from_weighted_positions(particles, w, time_s)
    }

    /// Validates and normalizes explicit weights.
    pub fn from_weighted_positions(
        particles: Vec<Vec3>,
        weights: Vec<f64>,
        time_s: f64,
    ) -> Result<Self, FilterError> {
        if particles.len() < 2 {
            return Err(FilterError::TooFewParticles(particles.len()));
        }
        if particles.len() != weights.len() {
            return Err(FilterError::WeightMismatch {
                particles: particles.len(),
                weights: weights.len(),
            });
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(FilterError::BadWeight(w));
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(FilterError::ZeroWeightSum);
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(FilterState { particles, weights, time_s })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / sum(w^2)`: the number of particles
    /// doing real work, `P` for uniform weights, 1 for a degenerate one.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn weighted_mean(&self) -> Vec3 {
        let mut m = Vec3::ZERO;
        for (p, w) in self.particles.iter().zip(&self.weights) {
            m += *p * *w;
        }
        m
    }
}

/// Velocity implied by a particle's position and the absolute time,
/// mirroring what the step kinematics will recompute.
fn implied_velocity(params: &ScenarioParams, t_s: f64) -> Vec3 {
    match params.regime {
        // Drift ignores the carried velocity entirely.
        Regime::Drift => Vec3::ZERO,
        Regime::Sink => Vec3::new(
            params.initial.velocity.x,
            params.initial.velocity.y,
            params.initial.velocity.z - params.sink_accel_mps2 * t_s,
        ),
    }
}

/// Advances every particle by `span_s` seconds of target motion, in
/// substeps of `params.dt_s`. Weights and their order are untouched.
pub fn pf_predict(
    state: &FilterState,
    params: &ScenarioParams,
    span_s: f64,
    stream: &RandomStream,
) -> Result<FilterState, FilterError> {
    params.validate()?;
    let dt = params.dt_s;
    let steps = (span_s / dt).round();
    if !(span_s > 0.0 && span_s.is_finite()) || steps < 1.0 || (steps * dt - span_s).abs() > 1e-6 * span_s.max(1.0)
    {
        return Err(FilterError::BadSpan { span_s, dt_s: dt });
    }
    let steps = steps as usize;
    let t0 = state.time_s;
    let particles = map_indexed(state.len(), |j| {
        let particle_stream = stream.substream(j as u64);
        let mut s = VehicleState {
            t_s: t0,
            position: state.particles[j],
            velocity: implied_velocity(params, t0),
            grounded: state.particles[j].z <= -params.seabed_depth_m,
        };
        for _ in 0..steps {
            if s.grounded {
                break;
            }
            let perturb = params.perturbation.draw(&particle_stream, s.t_s);
            s = step_state(&s, params, perturb);
        }
        s.position
    });
    Ok(FilterState { particles, weights: state.weights.clone(), time_s: t0 + span_s })
}

/// What one search interval reported: every cell searched (with its
/// detection probability) and, if the target was found, where.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub searched: Vec<(CellId, f64)>,
    pub detected: Option<CellId>,
}

/// Reweights particles against an interval's search outcome. A particle
/// counts as inside a cell only if its true (unclamped) position maps
/// there; particles outside the grid are unaffected by any search.
pub fn pf_update(
    state: &FilterState,
    grid: &GridSpec,
    obs: &Observation,
) -> Result<FilterState, FilterError> {
    for &(cell, pd) in &obs.searched {
        if !grid.contains(cell) {
            return Err(GridError::CellOutOfRange(cell.0, grid.cell_count()).into());
        }
        if !(pd > 0.0 && pd <= 1.0) {
            return Err(FilterError::BadSearchProbability(pd));
        }
    }
    let mut weights = state.weights.clone();
    match obs.detected {
        Some(found) => {
            let pd = obs
                .searched
                .iter()
                .find(|(c, _)| *c == found)
                .map(|(_, pd)| *pd)
                .ok_or(FilterError::DetectionNotSearched(found))?;
            for (w, p) in weights.iter_mut().zip(&state.particles) {
                *w *= if grid.cell_of_point(p.x, p.y).ok() == Some(found) { pd } else { 0.0 };
            }
        }
        None => {
            for (w, p) in weights.iter_mut().zip(&state.particles) {
                if let Ok(cell) = grid.cell_of_point(p.x, p.y) {
                    for &(searched, pd) in &obs.searched {
                        if cell == searched {
                            *w *= 1.0 - pd;
                        }
                    }
                }
            }
        }
    }
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(FilterError::ZeroPosterior);
    }
    for w in &mut weights {
        *w /= sum;
    }
    Ok(FilterState { particles: state.particles.clone(), weights, time_s: state.time_s })
}

/// Systematic resampling when the effective sample size drops below
/// `threshold * P`. Returns the (possibly untouched) state and whether a
/// resample fired. After a resample all weights are `1/P`.
pub fn pf_resample(
    state: &FilterState,
    threshold: f64,
    stream: &RandomStream,
) -> Result<(FilterState, bool), FilterError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(FilterError::BadThreshold(threshold));
    }
    let p = state.len();
    if state.ess() >= threshold * p as f64 {
        return Ok((state.clone(), false));
    }
    let u0: f64 = stream.rng().gen();
    let mut particles = Vec::with_capacity(p);
    let mut cursor = 0usize;
    let mut cum = state.weights[0];
    for m in 0..p {
        let u = (u0 + m as f64) / p as f64;
        while u > cum && cursor + 1 < p {
            cursor += 1;
            cum += state.weights[cursor];
        }
        particles.push(state.particles[cursor]);
    }
    let weights = vec![1.0 / p as f64; p];
    Ok((FilterState { particles, weights, time_s: state.time_s }, true))
}

/// Sums particle weights into grid cells (positions clamped to the
/// nearest cell) and returns the resulting probability field.
pub fn pf_field_estimate(
    state: &FilterState,
    grid: &GridSpec,
) -> Result<ProbabilityField, FilterError> {
    let mut mass = vec![0.0; grid.cell_count()];
    for (p, w) in state.particles.iter().zip(&state.weights) {
        mass[grid.clamp_point_to_cell(p.x, p.y).0] += *w;
    }
    Ok(ProbabilityField::from_weights(*grid, mass)?)
}

/// Writes `interval,cell,prob` rows for a sequence of per-interval field
/// estimates, keeping only cells with positive probability.
pub fn write_filter_estimates_csv<W: Write>(
    w: &mut W,
    estimates: &[(usize, ProbabilityField)],
) -> std::io::Result<()> {
    writeln!(w, "interval,cell,prob")?;
    for (interval, field) in estimates {
        for (idx, &p) in field.probs().iter().enumerate() {
            if p > 0.0 {
                writeln!(w, "{interval},{idx},{p}")?;
            }
        }
    }
    Ok(())
}
