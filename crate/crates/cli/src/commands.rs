//! Subcommand bodies, shared by the binary and the test suite.
//!
//! Every command writes its CSV outputs atomically (full bytes to a
//! `.tmp` sibling, then rename) so a crash never leaves a half-written
//! file, and returns the written paths plus short summary notes for the
//! caller to print. Nothing here reads the clock or the environment, so
//! identical inputs give identical outputs.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rand::Rng;
use subsearch_core::bayesfilter::{
    pf_field_estimate, pf_predict, pf_resample, pf_update, write_filter_estimates_csv,
    FilterState, Observation,
};
use subsearch_core::curvefit::{fit_boltzmann, thin_points, write_fit_csv};
use subsearch_core::econ::{read_equipment_csv, score_by_role, write_report_csv};
use subsearch_core::geom::Vec3;
use subsearch_core::kinematics::{write_landings_csv, write_trajectories_csv};
use subsearch_core::planner::{
    select_next_cells, simulate_mission, sonar_count_sweep, write_curve_csv,
    write_instantaneous_csv, write_mission_log_csv, write_sweep_csv,
};
use subsearch_core::probgrid::{
    field_from_particles, write_field_csv, CellId, ProbabilityField,
};
use subsearch_core::rng::RandomStream;

use crate::error::CliError;
use crate::scenario::{Scenario, TruthKind};

/// What a command produced: files written (in order) and summary lines.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

/// Writes `bytes` to `dir/name` via a temp file and rename, creating the
/// directory if needed.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!("{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

fn render(
    f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Runs the trajectory ensemble and writes per-step states for the first
/// `trajectory_sample` particles plus every particle's final state.
pub fn cmd_simulate(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let ensemble = s.run_ensemble();
    let grounded = ensemble
        .trajectories
        .iter()
        .filter(|t| t.grounding_time_s.is_some())
        .count();

    let limit = Some(s.config.trajectory_sample);
    let traj = render(|w| write_trajectories_csv(w, &ensemble, limit))?;
    let land = render(|w| write_landings_csv(w, &ensemble))?;
    Ok(Outcome {
        files: vec![
            write_atomic(out, "trajectories.csv", &traj)?,
            write_atomic(out, "landings.csv", &land)?,
        ],
        notes: vec![format!(
            "simulated {} particles over {} s ({} grounded)",
            ensemble.trajectories.len(),
            s.params.horizon_s,
            grounded
        )],
    })
}

/// Builds the Poisson location prior; `histogram` adds the Monte Carlo
/// landing histogram on the same grid.
pub fn cmd_prior(s: &Scenario, out: &Path, histogram: bool) -> Result<Outcome, CliError> {
    let prior = s.prior_field()?;
    let bytes = render(|w| write_field_csv(w, &prior))?;
    let mut files = vec![write_atomic(out, "prior.csv", &bytes)?];
    if histogram {
        let ensemble = s.run_ensemble();
        let hist = field_from_particles(&s.grid, &ensemble)?;
        let bytes = render(|w| write_field_csv(w, &hist))?;
        files.push(write_atomic(out, "prior_histogram.csv", &bytes)?);
    }
    Ok(Outcome {
        files,
        notes: vec![format!(
            "prior intensity {} centered on cell {}",
            s.prior_params.lambda, s.prior_params.center.0
        )],
    })
}

/// Simulates the search mission and writes its detection curve, interval
/// gains, full event log, and replication 0's final posterior.
pub fn cmd_plan(s: &Scenario, out: &Path, sonars: Option<usize>) -> Result<Outcome, CliError> {
    let count = sonars.unwrap_or(s.config.sonar_count);
    if count == 0 {
        return Err(CliError::Config("sonar count must be at least 1".into()));
    }
    let prior = s.prior_field()?;
    let ensemble = match s.truth {
        TruthKind::Ensemble => Some(s.run_ensemble()),
        _ => None,
    };
    let spec = s.mission_spec(&prior, ensemble.as_ref(), count)?;
    let outcome = simulate_mission(&spec)?;

    let curve = render(|w| write_curve_csv(w, &outcome.curve))?;
    let inst = render(|w| write_instantaneous_csv(w, &outcome.curve))?;
    let log = render(|w| write_mission_log_csv(w, &outcome.events))?;
    let posterior = outcome.sample_posteriors.last().unwrap_or(&prior);
    let post = render(|w| write_field_csv(w, posterior))?;

    Ok(Outcome {
        files: vec![
            write_atomic(out, "curve.csv", &curve)?,
            write_atomic(out, "curve_instantaneous.csv", &inst)?,
            write_atomic(out, "mission_log.csv", &log)?,
            write_atomic(out, "posterior.csv", &post)?,
        ],
        notes: vec![format!(
            "{} sonars, {} replications: success {} by t = {} s",
            count,
            s.config.replications,
            outcome.curve.final_success(),
            s.schedule.end_time_s()
        )],
    })
}

/// Final success probability versus fleet size under common random
/// numbers.
pub fn cmd_sweep_sonars(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let prior = s.prior_field()?;
    let ensemble = match s.truth {
        TruthKind::Ensemble => Some(s.run_ensemble()),
        _ => None,
    };
    let base = s.mission_spec(&prior, ensemble.as_ref(), s.config.sonar_count)?;
    let table = sonar_count_sweep(
        &base,
        &s.template,
        s.center_m,
        s.config.sonar_offset_km * 1000.0,
        s.config.sweep_k_min,
        s.config.sweep_k_max,
    )?;
    let bytes = render(|w| write_sweep_csv(w, &table))?;
    let notes = table
        .iter()
        .map(|(k, p)| format!("{k} sonars: success {p}"))
        .collect();
    Ok(Outcome {
        files: vec![write_atomic(out, "sweep.csv", &bytes)?],
        notes,
    })
}

const FILTER_INIT_LABEL: u64 = 0x7066_696e; // "pfin"
const FILTER_PREDICT_LABEL: u64 = 0x7066_7064; // "pfpd"
const FILTER_RESAMPLE_LABEL: u64 = 0x7066_7273; // "pfrs"

/// Draws one particle cloud from a probability field: cell by inverse
/// CDF, position jittered uniformly inside the cell, depth fixed.
fn seed_particles(
    field: &ProbabilityField,
    n: usize,
    depth_z: f64,
    stream: &RandomStream,
) -> Vec<Vec3> {
    let grid = field.grid();
    let half = grid.cell_size_m() / 2.0;
    let mut rng = stream.rng();
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut cell = CellId(grid.cell_count() - 1);
            for (i, &p) in field.probs().iter().enumerate() {
                acc += p;
                if u <= acc {
                    cell = CellId(i);
                    break;
                }
            }
            let (cx, cy) = grid.cell_center(cell);
            let dx: f64 = rng.gen_range(-half..half);
            let dy: f64 = rng.gen_range(-half..half);
            Vec3::new(cx + dx, cy + dy, depth_z)
        })
        .collect()
}

/// Closed-loop tracking demo: a particle cloud seeded from the prior is
/// advanced through each search interval, the fleet searches the cloud's
/// own best cells, misses are folded in, and the cloud is resampled when
/// its effective size degenerates. Writes the per-interval cell estimates.
pub fn cmd_filter(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let prior = s.prior_field()?;
    let root = RandomStream::root(s.config.master_seed);

    let particles = seed_particles(
        &prior,
        s.config.filter_particles,
        s.params.initial.position.z,
        &root.substream(FILTER_INIT_LABEL),
    );
    let mut state = FilterState::from_positions(particles, 0.0)?;

    let predict_stream = root.substream(FILTER_PREDICT_LABEL);
    let resample_root = root.substream(FILTER_RESAMPLE_LABEL);
    let sonars = s.sonar_assets(s.config.sonar_count);
    let mut positions: Vec<Option<CellId>> = vec![None; sonars.len()];
    let mut estimates: Vec<(usize, ProbabilityField)> = Vec::new();
    let mut resamples = 0usize;

    if s.schedule.t0_s > 0.0 {
        state = pf_predict(&state, &s.params, s.schedule.t0_s, &predict_stream)?;
    }
    for k in 0..s.config.n_intervals {
        state = pf_predict(&state, &s.params, s.schedule.ti_s, &predict_stream)?;

        let belief = pf_field_estimate(&state, &s.grid)?;
        let picks = select_next_cells(&belief, &sonars, &positions, s.policy, s.config.teleport);
        let mut searched: Vec<(CellId, f64)> = Vec::new();
        for (i, pick) in picks.iter().enumerate() {
            if let Some(cell) = *pick {
                positions[i] = Some(cell);
                searched.push((cell, sonars[i].pd));
            }
        }
        if !searched.is_empty() {
            state = pf_update(&state, &s.grid, &Observation { searched, detected: None })?;
        }
        let (next, resampled) = pf_resample(
            &state,
            s.config.filter_ess_threshold,
            &resample_root.substream(k as u64),
        )?;
        state = next;
        if resampled {
            resamples += 1;
        }
        estimates.push((k, pf_field_estimate(&state, &s.grid)?));
    }

    let bytes = render(|w| write_filter_estimates_csv(w, &estimates))?;
    Ok(Outcome {
        files: vec![write_atomic(out, "filter_estimates.csv", &bytes)?],
        notes: vec![format!(
            "{} particles through {} intervals ({} resamples, final ess {})",
            s.config.filter_particles,
            s.config.n_intervals,
            resamples,
            state.ess()
        )],
    })
}

/// Reads a detection curve CSV (`t_s,cum_success_prob`).
fn read_curve_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["t_s", "cum_success_prob"] {
        return Err(CliError::Config(format!(
            "{}: expected header t_s,cum_success_prob, got {:?}",
            path.display(),
            cols.join(",")
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parse = |j: usize| -> Result<f64, CliError> {
            record
                .get(j)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "{} row {}: cannot parse field {} as a number",
                        path.display(),
                        i + 2,
                        j + 1
                    ))
                })
        };
        xs.push(parse(0)?);
        ys.push(parse(1)?);
    }
    Ok((xs, ys))
}

/// Fits the sigmoid to a detection curve file; `strict` turns a
/// non-converged fit into a numeric failure after the report is written.
pub fn cmd_fit(s: &Scenario, out: &Path, input: &Path, strict: bool) -> Result<Outcome, CliError> {
    let (xs, ys) = read_curve_csv(input)?;
    let (xs, ys) = if s.config.fit_thin > 0 && s.config.fit_thin < xs.len() {
        let keep = thin_points(&xs, &ys, s.config.fit_thin)?;
        (
            keep.iter().map(|&i| xs[i]).collect(),
            keep.iter().map(|&i| ys[i]).collect(),
        )
    } else {
        (xs, ys)
    };
    let report = fit_boltzmann(&xs, &ys)?;
    let bytes = render(|w| write_fit_csv(w, &report))?;
    let file = write_atomic(out, "fit.csv", &bytes)?;
    if strict && !report.converged {
        return Err(CliError::Numeric(format!(
            "fit did not converge after {} iterations (sse {})",
            report.iterations, report.sse
        )));
    }
    Ok(Outcome {
        files: vec![file],
        notes: vec![format!(
            "fit {} points: a1 {}, a2 {}, x0 {}, dx {}, sse {}, converged {}, identifiable {}",
            xs.len(),
            report.params.a1,
            report.params.a2,
            report.params.x0,
            report.params.dx,
            report.sse,
            report.converged,
            report.identifiable
        )],
    })
}

/// Scores an equipment table and writes the ranked report.
pub fn cmd_econ(out: &Path, equipment: &Path) -> Result<Outcome, CliError> {
    let file = File::open(equipment)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", equipment.display())))?;
    let records = read_equipment_csv(file)?;
    let reports = score_by_role(&records)?;
    let bytes = render(|w| write_report_csv(w, &reports))?;
    let notes = reports
        .iter()
        .map(|r| {
            let best = r.best();
            format!("best {}: {} (cer {})", r.role, best.name, best.cer)
        })
        .collect();
    Ok(Outcome {
        files: vec![write_atomic(out, "econ.csv", &bytes)?],
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        // Shrink everything so command tests stay fast.
        cfg.particles = 20;
        cfg.trajectory_sample = 2;
        cfg.replications = 5;
        cfg.n_intervals = 3;
        cfg.filter_particles = 50;
        cfg.horizon_s = 600.0;
        cfg.dt_s = 10.0;
        cfg
    }

    fn scenario(cfg: ScenarioConfig) -> Scenario {
        Scenario::build(cfg).unwrap()
    }

    #[test]
    fn simulate_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_simulate(&scenario(small()), dir.path()).unwrap();
        assert_eq!(out.files.len(), 2);
        let traj = fs::read_to_string(&out.files[0]).unwrap();
        assert!(traj.starts_with("particle,t_s,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps,grounded"));
        // limit = 2 particles
        let ids: std::collections::HashSet<&str> =
            traj.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(ids.len(), 2);
        let land = fs::read_to_string(&out.files[1]).unwrap();
        assert_eq!(land.lines().count(), 21, "header + one row per particle");
        assert!(!dir.path().join("trajectories.csv.tmp").exists(), "temp file renamed away");
    }

    #[test]
    fn prior_histogram_is_optional() {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario(small());
        let out = cmd_prior(&s, dir.path(), false).unwrap();
        assert_eq!(out.files.len(), 1);
        let out = cmd_prior(&s, dir.path(), true).unwrap();
        assert_eq!(out.files.len(), 2);
        let hist = fs::read_to_string(&out.files[1]).unwrap();
        assert!(hist.starts_with("cell,row,col,x_center_m,y_center_m,prob"));
        let mass: f64 = hist
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn plan_writes_curve_log_and_posterior() {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario(small());
        let out = cmd_plan(&s, dir.path(), Some(2)).unwrap();
        assert_eq!(out.files.len(), 4);
        let curve = fs::read_to_string(&out.files[0]).unwrap();
        assert!(curve.starts_with("t_s,cum_success_prob"));
        assert_eq!(curve.lines().count(), 1 + 3 + 1, "header + n+1 points");
        let log = fs::read_to_string(&out.files[2]).unwrap();
        assert!(log.starts_with("replication,interval,sonar,cell,detected"));
        let posterior = fs::read_to_string(&out.files[3]).unwrap();
        let mass: f64 = posterior
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((mass - 1.0).abs() < 1e-9, "posterior renormalized, got {mass}");
    }

    #[test]
    fn plan_is_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let s = scenario(small());
        cmd_plan(&s, dir_a.path(), None).unwrap();
        cmd_plan(&s, dir_b.path(), None).unwrap();
        for name in ["curve.csv", "curve_instantaneous.csv", "mission_log.csv", "posterior.csv"] {
            let a = fs::read(dir_a.path().join(name)).unwrap();
            let b = fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn sweep_covers_requested_range() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.sweep_k_min = 1;
        cfg.sweep_k_max = 3;
        let out = cmd_sweep_sonars(&scenario(cfg), dir.path()).unwrap();
        let text = fs::read_to_string(&out.files[0]).unwrap();
        assert!(text.starts_with("sonars,success_prob"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(out.notes.len(), 3);
    }

    #[test]
    fn filter_writes_estimates_for_every_interval() {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario(small());
        let out = cmd_filter(&s, dir.path()).unwrap();
        let text = fs::read_to_string(&out.files[0]).unwrap();
        assert!(text.starts_with("interval,cell,prob"));
        let intervals: std::collections::HashSet<&str> =
            text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(intervals.len(), 3, "one estimate block per interval");
        // Each interval's estimate is a distribution.
        for k in 0..3 {
            let mass: f64 = text
                .lines()
                .skip(1)
                .filter(|l| l.starts_with(&format!("{k},")))
                .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
                .sum();
            assert!((mass - 1.0).abs() < 1e-9, "interval {k} mass {mass}");
        }
    }

    #[test]
    fn filter_is_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let s = scenario(small());
        cmd_filter(&s, dir_a.path()).unwrap();
        cmd_filter(&s, dir_b.path()).unwrap();
        let a = fs::read(dir_a.path().join("filter_estimates.csv")).unwrap();
        let b = fs::read(dir_b.path().join("filter_estimates.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_roundtrips_plan_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.n_intervals = 8;
        cfg.replications = 40;
        let s = scenario(cfg);
        let planned = cmd_plan(&s, dir.path(), Some(3)).unwrap();
        let out = cmd_fit(&s, dir.path(), &planned.files[0], false).unwrap();
        let text = fs::read_to_string(&out.files[0]).unwrap();
        assert!(text.starts_with("a1,a2,x0,dx,sse,iterations,converged,identifiable"));
    }

    #[test]
    fn fit_rejects_wrong_header_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario(small());
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "time,prob\n1,0.5\n2,0.6\n3,0.7\n4,0.8\n").unwrap();
        let err = cmd_fit(&s, dir.path(), &bad, false).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
        let err = cmd_fit(&s, dir.path(), Path::new("/nonexistent/curve.csv"), false).unwrap_err();
        assert_eq!(err.exit_code(), 4, "{err}");
    }

    #[test]
    fn econ_ranks_and_reports_winners() {
        let dir = tempfile::tempdir().unwrap();
        let table = dir.path().join("equipment.csv");
        fs::write(
            &table,
            "name,role,purchase_cost,maintenance_cost,detection_range_m,stability,feasibility\n\
             alpha,detection,7000,1100,200,0.8,0.8\n\
             beta,detection,6000,1600,150,0.8,0.8\n\
             gamma,rescue,500000,19200,1000,0.8,0.8\n\
             delta,rescue,6000,1600,150,0.7,0.6\n",
        )
        .unwrap();
        let out = cmd_econ(dir.path(), &table).unwrap();
        assert_eq!(out.notes.len(), 2);
        assert!(out.notes[0].starts_with("best detection: alpha"), "{}", out.notes[0]);
        let text = fs::read_to_string(&out.files[0]).unwrap();
        assert!(text.starts_with("name,role,benefit,cost_share,cer,rank"));
    }

    #[test]
    fn atomic_write_replaces_existing_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_atomic(dir.path(), "x.csv", b"old").unwrap();
        write_atomic(dir.path(), "x.csv", b"new").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"new");
    }
}
