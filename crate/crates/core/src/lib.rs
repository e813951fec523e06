//! Search planning toolkit for a disabled deep-sea submersible.
//!
//! The library covers the full rescue-planning chain:
//!
//! * [`environment`] — ocean current fields and stochastic current
//!   perturbation.
//! * [`kinematics`] — Monte Carlo drift/sink trajectory ensembles.
//! * [`probgrid`] — search-grid geometry, Poisson location priors, and
//!   Bayesian negative updates.
//! * [`planner`] — search schedules, cell-assignment policies, and mission
//!   simulation (detection curves, sonar-count studies).
//! * [`bayesfilter`] — bootstrap particle filter for moving-target tracking.
//! * [`curvefit`] — Boltzmann sigmoid fitting of success curves.
//! * [`econ`] — entropy-weight cost-benefit scoring of rescue equipment.
//!
//! Every stochastic routine draws from a [`rng::RandomStream`] derived from a
//! single master seed, so results are bitwise reproducible regardless of
//! thread count. The `parallel` feature (default) runs ensembles and mission
//! replications on rayon; disabling it yields a dependency-light sequential
//! build with identical output.

pub mod bayesfilter;
pub mod curvefit;
pub mod econ;
pub mod environment;
pub mod exec;
pub mod geom;
pub mod kinematics;
pub mod planner;
pub mod probgrid;
pub mod rng;
