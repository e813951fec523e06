//! CLI error taxonomy and process exit codes.
//!
//! Exit 2: configuration and input-parsing problems (bad keys, malformed
//! CSV input, invalid values). Exit 3: numeric failures during computation
//! (prior mass underflow, posterior exhaustion, non-convergence under
//! `--strict`). Exit 4: filesystem I/O failures.

use std::fmt;

use subsearch_core::bayesfilter::FilterError;
use subsearch_core::curvefit::FitError;
use subsearch_core::econ::EconError;
use subsearch_core::environment::EnvironmentError;
use subsearch_core::kinematics::KinematicsError;
use subsearch_core::planner::PlannerError;
use subsearch_core::probgrid::GridError;

use crate::config::{ConfigError, LoadError};
use crate::scenario::BuildError;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or unparseable/invalid input data.
    Config(String),
    /// The computation itself broke down.
    Numeric(String),
    /// Reading or writing a file failed.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Config(c) => c.into(),
            LoadError::Io(..) => CliError::Io(e.to_string()),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::EmptyPrior { .. }
            | GridError::ZeroMass
            | GridError::NoMassRemaining
            | GridError::NonPositiveLambda(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<KinematicsError> for CliError {
    fn from(e: KinematicsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EnvironmentError> for CliError {
    fn from(e: EnvironmentError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::CurrentFile(..) => CliError::Io(e.to_string()),
            BuildError::Grid(g) => g.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PlannerError> for CliError {
    fn from(e: PlannerError) -> Self {
        match e {
            PlannerError::Grid(g) => g.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::ZeroPosterior => CliError::Numeric(e.to_string()),
            FilterError::Grid(g) => g.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EconError> for CliError {
    fn from(e: EconError) -> Self {
        match e {
            EconError::Io(_) => CliError::Io(e.to_string()),
            EconError::NoContrast => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
