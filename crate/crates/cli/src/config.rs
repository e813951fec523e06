//! Flat key/value scenario configuration.
//!
//! The format is one `key = value` pair per line; `#` starts a comment
//! (whole-line or trailing) and blank lines are skipped. Every key has a
//! built-in default, unknown keys and duplicate keys are errors, and
//! units live in the key names. [`ScenarioConfig::echo`] prints the
//! resolved configuration with keys sorted, so two runs with the same
//! effective settings produce identical output.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("key {key:?}: cannot parse {value:?} as {wanted}")]
    BadValue { key: String, value: String, wanted: &'static str },
    #[error("no built-in scenario named {0:?} (have: paper_default, table1_sweep)")]
    UnknownScenario(String),
}

/// Values a config key can hold.
trait ConfigValue: Sized {
    const KIND: &'static str;
    fn parse(raw: &str) -> Option<Self>;
    fn print(&self) -> String;
}

impl ConfigValue for f64 {
    const KIND: &'static str = "a number";
    fn parse(raw: &str) -> Option<Self> {
        raw.parse().ok().filter(|v: &f64| v.is_finite())
    }
    fn print(&self) -> String {
        format!("{self}")
    }
}

impl ConfigValue for usize {
    const KIND: &'static str = "a nonnegative integer";
    fn parse(raw: &str) -> Option<Self> {
        raw.parse().ok()
    }
    fn print(&self) -> String {
        format!("{self}")
    }
}

impl ConfigValue for u64 {
    const KIND: &'static str = "a nonnegative integer";
    fn parse(raw: &str) -> Option<Self> {
        raw.parse().ok()
    }
    fn print(&self) -> String {
        format!("{self}")
    }
}

impl ConfigValue for bool {
    const KIND: &'static str = "true or false";
    fn parse(raw: &str) -> Option<Self> {
        match raw {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        }
    }
    fn print(&self) -> String {
        format!("{self}")
    }
}

impl ConfigValue for String {
    const KIND: &'static str = "a string";
    fn parse(raw: &str) -> Option<Self> {
        Some(raw.to_string())
    }
    fn print(&self) -> String {
        self.clone()
    }
}

macro_rules! scenario_config {
    ($( $key:ident : $ty:ty = $default:expr ),+ $(,)?) => {
        /// Every scenario setting, resolved. Field names are the config
        /// keys.
        #[derive(Debug, Clone, PartialEq)]
        pub struct ScenarioConfig {
            $( pub $key: $ty, )+
        }

        impl Default for ScenarioConfig {
            fn default() -> Self {
                ScenarioConfig { $( $key: $default.into(), )+ }
            }
        }

        impl ScenarioConfig {
            /// Sets one key from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
                match key {
                    $( stringify!($key) => {
                        self.$key = <$ty as ConfigValue>::parse(value).ok_or_else(|| {
                            ConfigError::BadValue {
                                key: key.to_string(),
                                value: value.to_string(),
                                wanted: <$ty as ConfigValue>::KIND,
                            }
                        })?;
                        Ok(())
                    } )+
                    _ => Err(ConfigError::UnknownKey { line: 0, key: key.to_string() }),
                }
            }

            fn is_key(key: &str) -> bool {
                matches!(key, $( stringify!($key) )|+)
            }

            /// The resolved configuration, one sorted `key = value` line
            /// per setting.
            pub fn echo(&self) -> String {
                let mut lines = vec![
                    $( format!("{} = {}", stringify!($key), ConfigValue::print(&self.$key)), )+
                ];
                lines.sort();
                let mut out = String::new();
                for line in lines {
                    let _ = writeln!(out, "{line}");
                }
                out
            }
        }
    };
}

scenario_config! {
    regime: String = "drift",
    initial_x_km: f64 = 4.0,
    initial_y_km: f64 = 3.0,
    initial_z_km: f64 = -1.0,
    initial_vx_mps: f64 = 0.0,
    initial_vy_mps: f64 = 0.0,
    initial_vz_mps: f64 = 0.0,
    sink_accel_mps2: f64 = 0.2,
    seabed_depth_km: f64 = 4.0,
    dt_s: f64 = 1.0,
    horizon_s: f64 = 1800.0,
    perturb_speed_min_mps: f64 = 0.05,
    perturb_speed_max_mps: f64 = 0.30,
    perturb_persistence_s: f64 = 600.0,
    perturb_seed: u64 = 0u64,
    current_ux_mps: f64 = 0.0,
    current_uy_mps: f64 = 0.0,
    current_uz_mps: f64 = 0.0,
    current_csv: String = "",
    gs_m: f64 = 300.0,
    x_max_km: f64 = 8.0,
    y_max_km: f64 = 6.0,
    origin_x_km: f64 = 0.0,
    origin_y_km: f64 = 0.0,
    mp: f64 = 0.2,
    t0_min: f64 = 20.0,
    prior_elapsed_min: f64 = 60.0,
    prior_max_radius_cells: usize = 0usize,
    ti_min: f64 = 30.0,
    n_intervals: usize = 10usize,
    particles: usize = 1000usize,
    trajectory_sample: usize = 10usize,
    sonar_count: usize = 2usize,
    sonar_offset_km: f64 = 0.2,
    sonar_speed_mps: f64 = 1.0,
    sonar_swath_m: f64 = 100.0,
    sonar_overlap: f64 = 0.1,
    sonar_pd: f64 = 1.0,
    policy: String = "greedy",
    teleport: bool = false,
    truth: String = "ensemble",
    truth_cell: usize = 0usize,
    replications: usize = 100usize,
    filter_particles: usize = 500usize,
    filter_ess_threshold: f64 = 0.5,
    sweep_k_min: usize = 1usize,
    sweep_k_max: usize = 5usize,
    fit_thin: usize = 0usize,
    master_seed: u64 = 42u64,
}

pub const PAPER_DEFAULT: &str = include_str!("../configs/paper_default.cfg");
pub const TABLE1_SWEEP: &str = include_str!("../configs/table1_sweep.cfg");

impl ScenarioConfig {
    /// Parses a whole config file on top of the defaults. Each key may
    /// appear at most once.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = ScenarioConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: line_no,
                text: raw_line.trim().to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !Self::is_key(key) {
                return Err(ConfigError::UnknownKey { line: line_no, key: key.to_string() });
            }
            if seen.iter().any(|s| s == key) {
                return Err(ConfigError::DuplicateKey { line: line_no, key: key.to_string() });
            }
            seen.push(key.to_string());
            config.set(key, value)?;
        }
        Ok(config)
    }

    /// Resolves `--scenario`: a built-in name first, otherwise a file
    /// path. The `Err` distinguishes config problems from I/O problems.
    pub fn load(scenario: &str) -> Result<Self, LoadError> {
        match scenario {
            "paper_default" => Ok(Self::parse(PAPER_DEFAULT)?),
            "table1_sweep" => Ok(Self::parse(TABLE1_SWEEP)?),
            path => {
                if path.contains('/') || path.contains('\\') || path.ends_with(".cfg") {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| LoadError::Io(path.to_string(), e))?;
                    Ok(Self::parse(&text)?)
                } else {
                    Err(LoadError::Config(ConfigError::UnknownScenario(path.to_string())))
                }
            }
        }
    }

    /// Applies repeated `--set key=value` overrides.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<(), ConfigError> {
        for s in sets {
            let (key, value) = s.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: 0,
                text: s.clone(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read scenario file {0}: {1}")]
    Io(String, std::io::Error),
}
