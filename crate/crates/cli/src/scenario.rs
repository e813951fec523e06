//! Turns a [`ScenarioConfig`] into validated core types.
//!
//! Config keys carry km and minutes where those units read naturally on a
//! rescue chart; everything below this layer is meters and seconds.

use std::fs::File;

use subsearch_core::environment::{CurrentField, EnvironmentError, PerturbationSpec};
use subsearch_core::geom::Vec3;
use subsearch_core::kinematics::{
    run_ensemble, Ensemble, KinematicsError, Regime, ScenarioParams, VehicleState,
};
use subsearch_core::planner::{
    deploy_sonars, MissionSpec, PlannerError, Policy, SearchSchedule, SonarAsset, SonarTemplate,
    TruthModel,
};
use subsearch_core::probgrid::{
    build_poisson_prior, CellId, GridError, GridSpec, PoissonPriorParams, ProbabilityField,
};
use thiserror::Error;

use crate::config::ScenarioConfig;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("regime must be drift or sink, got {0:?}")]
    BadRegime(String),
    #[error("policy must be greedy or sweep, got {0:?}")]
    BadPolicy(String),
    #[error("truth must be ensemble, prior, fixed, or moving, got {0:?}")]
    BadTruth(String),
    #[error("truth_cell {cell} out of range (grid has {count} cells)")]
    BadTruthCell { cell: usize, count: usize },
    #[error("particles must be at least 1")]
    NoParticles,
    #[error("filter_particles must be at least 2")]
    TooFewFilterParticles,
    #[error("filter_ess_threshold must be in [0, 1], got {0}")]
    BadEssThreshold(f64),
    #[error("sonar_count must be at least 1")]
    NoSonars,
    #[error("sweep range needs 1 <= sweep_k_min <= sweep_k_max, got {min}..={max}")]
    BadSweepRange { min: usize, max: usize },
    #[error("truth = ensemble needs a drift/sink ensemble to draw from")]
    MissingEnsemble,
    #[error("cannot read current field {0}: {1}")]
    CurrentFile(String, std::io::Error),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// Where the mission's hidden target comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthKind {
    /// Final positions of a fresh kinematics ensemble.
    Ensemble,
    /// Drawn from the Poisson prior itself.
    Prior,
    /// Pinned to one cell.
    Fixed(CellId),
    /// Re-simulated trajectory per replication; the target keeps moving
    /// while the search runs.
    Moving,
}

/// A fully resolved scenario: every core object the subcommands need,
/// built once from the flat config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub params: ScenarioParams,
    pub grid: GridSpec,
    pub prior_params: PoissonPriorParams,
    pub schedule: SearchSchedule,
    pub template: SonarTemplate,
    /// Deployment datum: center of the cell holding the last known
    /// position.
    pub center_m: (f64, f64),
    pub policy: Policy,
    pub truth: TruthKind,
}

const KM: f64 = 1000.0;
const MIN: f64 = 60.0;

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self, BuildError> {
        let regime = match config.regime.as_str() {
            "drift" => Regime::Drift,
            "sink" => Regime::Sink,
            other => return Err(BuildError::BadRegime(other.to_string())),
        };
        let policy = match config.policy.as_str() {
            "greedy" => Policy::Greedy,
            "sweep" => Policy::Sweep,
            other => return Err(BuildError::BadPolicy(other.to_string())),
        };

        let current = if !config.current_csv.is_empty() {
            let file = File::open(&config.current_csv)
                .map_err(|e| BuildError::CurrentFile(config.current_csv.clone(), e))?;
            CurrentField::load_csv(file)?
        } else {
            let u = Vec3::new(config.current_ux_mps, config.current_uy_mps, config.current_uz_mps);
            if u == Vec3::ZERO {
                CurrentField::still()
            } else {
                CurrentField::uniform(u)
            }
        };

        let params = ScenarioParams {
            regime,
            initial: VehicleState::new(
                Vec3::new(config.initial_x_km * KM, config.initial_y_km * KM, config.initial_z_km * KM),
                Vec3::new(config.initial_vx_mps, config.initial_vy_mps, config.initial_vz_mps),
            ),
            sink_accel_mps2: config.sink_accel_mps2,
            seabed_depth_m: config.seabed_depth_km * KM,
            dt_s: config.dt_s,
            horizon_s: config.horizon_s,
            perturbation: PerturbationSpec::new(
                config.perturb_speed_min_mps,
                config.perturb_speed_max_mps,
                config.perturb_persistence_s,
                config.perturb_seed,
            )?,
            current,
        };
        params.validate()?;

        let grid = GridSpec::new(
            config.gs_m,
            config.x_max_km * KM,
            config.y_max_km * KM,
            (config.origin_x_km * KM, config.origin_y_km * KM),
        )?;

        let center_cell =
            grid.clamp_point_to_cell(config.initial_x_km * KM, config.initial_y_km * KM);
        let radius = match config.prior_max_radius_cells {
            0 => None,
            r => Some(r),
        };
        let prior_params = PoissonPriorParams::from_elapsed(
            config.mp,
            config.prior_elapsed_min,
            config.t0_min,
            center_cell,
            radius,
        )?;

        let schedule =
            SearchSchedule::new(config.t0_min * MIN, config.ti_min * MIN, config.n_intervals)?;
        let template = SonarTemplate {
            speed_mps: config.sonar_speed_mps,
            swath_m: config.sonar_swath_m,
            overlap: config.sonar_overlap,
            cell_time_s: config.ti_min * MIN,
            pd: config.sonar_pd,
        };

        let truth = match config.truth.as_str() {
            "ensemble" => TruthKind::Ensemble,
            "prior" => TruthKind::Prior,
            "moving" => TruthKind::Moving,
            "fixed" => {
                if config.truth_cell >= grid.cell_count() {
                    return Err(BuildError::BadTruthCell {
                        cell: config.truth_cell,
                        count: grid.cell_count(),
                    });
                }
                TruthKind::Fixed(CellId(config.truth_cell))
            }
            other => return Err(BuildError::BadTruth(other.to_string())),
        };

        if config.particles == 0 {
            return Err(BuildError::NoParticles);
        }
        if config.filter_particles < 2 {
            return Err(BuildError::TooFewFilterParticles);
        }
        if !(0.0..=1.0).contains(&config.filter_ess_threshold) {
            return Err(BuildError::BadEssThreshold(config.filter_ess_threshold));
        }
        if config.sonar_count == 0 {
            return Err(BuildError::NoSonars);
        }
        if config.sweep_k_min == 0 || config.sweep_k_min > config.sweep_k_max {
            return Err(BuildError::BadSweepRange {
                min: config.sweep_k_min,
                max: config.sweep_k_max,
            });
        }

        let center_m = grid.cell_center(center_cell);
        Ok(Scenario {
            config,
            params,
            grid,
            prior_params,
            schedule,
            template,
            center_m,
            policy,
            truth,
        })
    }

    /// Poisson location prior on this scenario's grid.
    pub fn prior_field(&self) -> Result<ProbabilityField, GridError> {
        build_poisson_prior(&self.grid, &self.prior_params)
    }

    /// Monte Carlo trajectory ensemble under the master seed.
    pub fn run_ensemble(&self) -> Ensemble {
        run_ensemble(&self.params, self.config.particles, self.config.master_seed)
    }

    /// Sonar fleet of `count` assets around the deployment datum.
    pub fn sonar_assets(&self, count: usize) -> Vec<SonarAsset> {
        deploy_sonars(
            &self.template,
            count,
            &self.grid,
            self.center_m,
            self.config.sonar_offset_km * KM,
        )
    }

    /// The truth model for mission simulation. `ensemble` is only
    /// consulted when the config asks for ensemble truth.
    pub fn truth_model<'a>(
        &'a self,
        prior: &'a ProbabilityField,
        ensemble: Option<&'a Ensemble>,
    ) -> Result<TruthModel<'a>, BuildError> {
        match self.truth {
            TruthKind::Ensemble => ensemble
                .map(TruthModel::StaticFromEnsemble)
                .ok_or(BuildError::MissingEnsemble),
            TruthKind::Prior => Ok(TruthModel::StaticFromField(prior)),
            TruthKind::Fixed(cell) => Ok(TruthModel::FixedCell(cell)),
            TruthKind::Moving => Ok(TruthModel::Moving(&self.params)),
        }
    }

    /// Assembles the full mission spec with `count` sonars.
    pub fn mission_spec<'a>(
        &'a self,
        prior: &'a ProbabilityField,
        ensemble: Option<&'a Ensemble>,
        count: usize,
    ) -> Result<MissionSpec<'a>, BuildError> {
        Ok(MissionSpec {
            prior,
            sonars: self.sonar_assets(count),
            schedule: self.schedule,
            policy: self.policy,
            teleport: self.config.teleport,
            truth: self.truth_model(prior, ensemble)?,
            replications: self.config.replications,
            seed: self.config.master_seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_builds() {
        let s = Scenario::build(ScenarioConfig::default()).unwrap();
        assert_eq!(s.grid.cols(), 26, "8 km / 300 m, whole cells only");
        assert_eq!(s.grid.rows(), 20);
        assert_eq!(s.params.seabed_depth_m, 4000.0);
        assert_eq!(s.params.initial.position, Vec3::new(4000.0, 3000.0, -1000.0));
        assert_eq!(s.schedule.t0_s, 1200.0);
        assert_eq!(s.schedule.ti_s, 1800.0);
        assert_eq!(s.template.cell_time_s, 1800.0);
        assert_eq!(s.policy, Policy::Greedy);
        assert_eq!(s.truth, TruthKind::Ensemble);
        // lambda = 0.2 + ln(60/20)
        assert!((s.prior_params.lambda - (0.2 + 3.0f64.ln())).abs() < 1e-12);
        // Datum is the center of the cell holding (4000, 3000).
        let cell = s.grid.clamp_point_to_cell(4000.0, 3000.0);
        assert_eq!(s.center_m, s.grid.cell_center(cell));
    }

    #[test]
    fn rejects_bad_enums_and_counts() {
        let mut cfg = ScenarioConfig::default();
        cfg.regime = "hover".into();
        assert!(matches!(Scenario::build(cfg), Err(BuildError::BadRegime(_))));

        let mut cfg = ScenarioConfig::default();
        cfg.policy = "random".into();
        assert!(matches!(Scenario::build(cfg), Err(BuildError::BadPolicy(_))));

        let mut cfg = ScenarioConfig::default();
        cfg.truth = "oracle".into();
        assert!(matches!(Scenario::build(cfg), Err(BuildError::BadTruth(_))));

        let mut cfg = ScenarioConfig::default();
        cfg.truth = "fixed".into();
        cfg.truth_cell = 10_000;
        assert!(matches!(Scenario::build(cfg), Err(BuildError::BadTruthCell { .. })));

        let mut cfg = ScenarioConfig::default();
        cfg.sweep_k_min = 3;
        cfg.sweep_k_max = 2;
        assert!(matches!(Scenario::build(cfg), Err(BuildError::BadSweepRange { .. })));

        let mut cfg = ScenarioConfig::default();
        cfg.dt_s = 0.0;
        assert!(matches!(Scenario::build(cfg), Err(BuildError::Kinematics(_))));

        let mut cfg = ScenarioConfig::default();
        cfg.filter_ess_threshold = 1.5;
        assert!(matches!(Scenario::build(cfg), Err(BuildError::BadEssThreshold(_))));
    }

    #[test]
    fn uniform_current_comes_from_config_components() {
        let mut cfg = ScenarioConfig::default();
        cfg.current_ux_mps = 0.3;
        cfg.current_uy_mps = -0.1;
        let s = Scenario::build(cfg).unwrap();
        let v = s.params.current.sample(Vec3::new(123.0, 456.0, -789.0));
        assert_eq!(v, Vec3::new(0.3, -0.1, 0.0));
    }

    #[test]
    fn fleet_and_mission_assemble() {
        let mut cfg = ScenarioConfig::default();
        cfg.truth = "prior".into();
        cfg.replications = 3;
        let s = Scenario::build(cfg).unwrap();
        let sonars = s.sonar_assets(3);
        assert_eq!(sonars.len(), 3);
        assert!(sonars.iter().all(|a| s.grid.contains(a.start_cell)));
        let prior = s.prior_field().unwrap();
        let spec = s.mission_spec(&prior, None, 2).unwrap();
        let outcome = subsearch_core::planner::simulate_mission(&spec).unwrap();
        assert_eq!(outcome.curve.cumulative.len(), s.config.n_intervals + 1);
    }

    #[test]
    fn ensemble_truth_requires_ensemble() {
        let s = Scenario::build(ScenarioConfig::default()).unwrap();
        let prior = s.prior_field().unwrap();
        assert!(matches!(
            s.truth_model(&prior, None),
            Err(BuildError::MissingEnsemble)
        ));
    }
}
