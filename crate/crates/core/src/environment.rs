//! Ocean environment: deterministic current field + stochastic perturbation.
//!
//! The current field is a regular rectilinear lattice of velocity nodes,
//! trilinearly interpolated inside its hull and snapped to the nearest node
//! outside it. The perturbation models short-term current variability as a
//! horizontal vector that is redrawn once per persistence window: speed
//! uniform in [min, max], heading uniform in [0, 2*pi), zero vertical
//! component, and constant within each window.
//!
//! Units: positions m, velocities m/s, times s.

use std::f64::consts::TAU;
use std::io::Read;

use rand::Rng;
use thiserror::Error;

use crate::geom::Vec3;
use crate::rng::RandomStream;

#[derive(Debug, Error)]
pub enum EnvironmentError {
    #[error("current field CSV: {0}")]
    Csv(String),
    #[error("current field row {row}: {msg}")]
    BadRow { row: usize, msg: String },
    #[error("duplicate node at ({x}, {y}, {z})")]
    DuplicateNode { x: f64, y: f64, z: f64 },
    #[error("node set is not a full rectilinear lattice: expected {expected} nodes, found {found}")]
    MissingNodes { expected: usize, found: usize },
    #[error("non-uniform node spacing on {axis} axis")]
    NonRectilinear { axis: char },
    #[error("current field has no nodes")]
    Empty,
    #[error("perturbation speed range invalid: min {min}, max {max}")]
    BadSpeedRange { min: f64, max: f64 },
    #[error("perturbation persistence must be positive, got {0}")]
    BadPersistence(f64),
}

/// Velocity lattice on a regular grid. Node (ix, iy, iz) sits at
/// `origin + (ix*sx, iy*sy, iz*sz)`; vectors are stored in x-fastest order.
#[derive(Debug, Clone)]
pub struct CurrentField {
    origin: Vec3,
    spacing: Vec3,
    dims: (usize, usize, usize),
    nodes: Vec<Vec3>,
}

/// Expected CSV header for [`CurrentField::load_csv`].
pub const CURRENT_CSV_HEADER: [&str; 6] = ["x_m", "y_m", "z_m", "u_mps", "v_mps", "w_mps"];

impl CurrentField {
    /// Single-node field: the same vector everywhere (still water when zero).
    pub fn uniform(velocity: Vec3) -> Self {
        CurrentField {
            origin: Vec3::ZERO,
            spacing: Vec3::new(1.0, 1.0, 1.0),
            dims: (1, 1, 1),
            nodes: vec![velocity],
        }
    }

    pub fn still() -> Self {
        Self::uniform(Vec3::ZERO)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Loads a lattice from CSV with header `x_m,y_m,z_m,u_mps,v_mps,w_mps`,
    /// one row per node in any order. Rejects duplicate nodes, holes, and
    /// non-uniform spacing.
    pub fn load_csv<R: Read>(reader: R) -> Result<Self, EnvironmentError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        {
            let headers = rdr.headers().map_err(|e| EnvironmentError::Csv(e.to_string()))?;
            let got: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
            if got != CURRENT_CSV_HEADER {
                return Err(EnvironmentError::Csv(format!(
                    "expected header {:?}, got {:?}",
                    CURRENT_CSV_HEADER.join(","),
                    got.join(",")
                )));
            }
        }
        let mut rows: Vec<(Vec3, Vec3)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| EnvironmentError::Csv(e.to_string()))?;
            let mut vals = [0.0f64; 6];
            if rec.len() != 6 {
                return Err(EnvironmentError::BadRow { row: i + 2, msg: format!("expected 6 fields, got {}", rec.len()) });
            }
            for (j, field) in rec.iter().enumerate() {
                vals[j] = field.trim().parse::<f64>().map_err(|e| EnvironmentError::BadRow {
                    row: i + 2,
                    msg: format!("field {}: {e}", CURRENT_CSV_HEADER[j]),
                })?;
                if !vals[j].is_finite() {
                    return Err(EnvironmentError::BadRow { row: i + 2, msg: format!("field {} not finite", CURRENT_CSV_HEADER[j]) });
                }
            }
            rows.push((Vec3::new(vals[0], vals[1], vals[2]), Vec3::new(vals[3], vals[4], vals[5])));
        }
        Self::from_nodes(&rows)
    }

    /// Builds a lattice from (position, velocity) pairs; same validation as
    /// the CSV loader.
    pub fn from_nodes(rows: &[(Vec3, Vec3)]) -> Result<Self, EnvironmentError> {
        if rows.is_empty() {
            return Err(EnvironmentError::Empty);
        }
        let xs = distinct_sorted(rows.iter().map(|r| r.0.x));
        let ys = distinct_sorted(rows.iter().map(|r| r.0.y));
        let zs = distinct_sorted(rows.iter().map(|r| r.0.z));
        let (nx, ny, nz) = (xs.len(), ys.len(), zs.len());
        let expected = nx * ny * nz;
        if rows.len() > expected {
            // More rows than lattice slots: at least one node repeats.
            for (i, a) in rows.iter().enumerate() {
                if rows[..i].iter().any(|b| b.0 == a.0) {
                    return Err(EnvironmentError::DuplicateNode { x: a.0.x, y: a.0.y, z: a.0.z });
                }
            }
        }
        let sx = uniform_spacing(&xs, 'x')?;
        let sy = uniform_spacing(&ys, 'y')?;
        let sz = uniform_spacing(&zs, 'z')?;
        let mut nodes = vec![None::<Vec3>; expected];
        for (pos, vel) in rows {
            let ix = index_of(&xs, pos.x);
            let iy = index_of(&ys, pos.y);
            let iz = index_of(&zs, pos.z);
            let slot = &mut nodes[ix + nx * (iy + ny * iz)];
            if slot.is_some() {
                return Err(EnvironmentError::DuplicateNode { x: pos.x, y: pos.y, z: pos.z });
            }
            *slot = Some(*vel);
        }
        let found = nodes.iter().filter(|n| n.is_some()).count();
        if found != expected {
            return Err(EnvironmentError::MissingNodes { expected, found });
        }
        Ok(CurrentField {
            origin: Vec3::new(xs[0], ys[0], zs[0]),
            spacing: Vec3::new(sx, sy, sz),
            dims: (nx, ny, nz),
            nodes: nodes.into_iter().map(|n| n.unwrap()).collect(),
        })
    }

    fn node(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        let (nx, ny, _) = self.dims;
        self.nodes[ix + nx * (iy + ny * iz)]
    }

    /// Current vector at `pos`: trilinear interpolation inside the node
    /// hull, nearest-node value outside it. Axes with a single node plane
    /// are treated as uniform along that axis.
    pub fn sample(&self, pos: Vec3) -> Vec3 {
        let c = [
            (pos.x - self.origin.x) / self.spacing.x,
            (pos.y - self.origin.y) / self.spacing.y,
            (pos.z - self.origin.z) / self.spacing.z,
        ];
        let n = [self.dims.0, self.dims.1, self.dims.2];
        let inside = (0..3).all(|k| n[k] == 1 || (0.0 <= c[k] && c[k] <= (n[k] - 1) as f64));
        if !inside {
            // Nearest node, separable per axis because the lattice is regular.
            let near = |k: usize| (c[k].round().max(0.0) as usize).min(n[k] - 1);
            return self.node(near(0), near(1), near(2));
        }
        // Base index clamped so base+1 stays valid; fraction carries the rest.
        let mut i0 = [0usize; 3];
        let mut i1 = [0usize; 3];
        let mut f = [0.0f64; 3];
        for k in 0..3 {
            if n[k] == 1 {
                continue;
            }
            let b = (c[k].floor() as usize).min(n[k] - 2);
            i0[k] = b;
            i1[k] = b + 1;
            f[k] = c[k] - b as f64;
        }
        let mut acc = Vec3::ZERO;
        for (dx, wx) in [(i0[0], 1.0 - f[0]), (i1[0], f[0])] {
            for (dy, wy) in [(i0[1], 1.0 - f[1]), (i1[1], f[1])] {
                for (dz, wz) in [(i0[2], 1.0 - f[2]), (i1[2], f[2])] {
                    let w = wx * wy * wz;
                    if w != 0.0 {
                        acc += self.node(dx, dy, dz) * w;
                    }
                }
            }
        }
        acc
    }
}

fn distinct_sorted(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = vals.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

fn index_of(sorted: &[f64], v: f64) -> usize {
    sorted.partition_point(|&x| x < v)
}

fn uniform_spacing(coords: &[f64], axis: char) -> Result<f64, EnvironmentError> {
    if coords.len() < 2 {
        return Ok(1.0); // degenerate axis; spacing only matters relative to itself
    }
    let step = coords[1] - coords[0];
    if step <= 0.0 {
        return Err(EnvironmentError::NonRectilinear { axis });
    }
    let tol = 1e-9 * step.abs().max(1.0);
    for w in coords.windows(2) {
        if ((w[1] - w[0]) - step).abs() > tol {
            return Err(EnvironmentError::NonRectilinear { axis });
        }
    }
    Ok(step)
}

/// Stochastic current perturbation: horizontal only, redrawn per
/// persistence window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub persistence_s: f64,
    /// Folded into the stream derivation so distinct perturbation processes
    /// sharing one agent stream stay decorrelated.
    pub seed: u64,
}

const PERTURB_LABEL: u64 = 0x7065_7274; // "pert"

impl PerturbationSpec {
    pub fn new(speed_min_mps: f64, speed_max_mps: f64, persistence_s: f64, seed: u64) -> Result<Self, EnvironmentError> {
        let spec = PerturbationSpec { speed_min_mps, speed_max_mps, persistence_s, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// No perturbation at all; `draw` always returns zero.
    pub fn none() -> Self {
        PerturbationSpec { speed_min_mps: 0.0, speed_max_mps: 0.0, persistence_s: 600.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), EnvironmentError> {
        if !(self.speed_min_mps >= 0.0 && self.speed_max_mps >= self.speed_min_mps && self.speed_max_mps.is_finite()) {
            return Err(EnvironmentError::BadSpeedRange { min: self.speed_min_mps, max: self.speed_max_mps });
        }
        if !(self.persistence_s > 0.0 && self.persistence_s.is_finite()) {
            return Err(EnvironmentError::BadPersistence(self.persistence_s));
        }
        Ok(())
    }

    /// Perturbation velocity at time `t_s >= 0` for the agent owning
    /// `stream`. Constant within each persistence window; one speed and one
    /// heading are drawn per window, so the same spec, stream, and time
    /// always reproduce the same vector.
    pub fn draw(&self, stream: &RandomStream, t_s: f64) -> Vec3 {
        debug_assert!(t_s >= 0.0, "perturbation time must be nonnegative");
        if self.speed_max_mps == 0.0 {
            return Vec3::ZERO;
        }
        let window = (t_s / self.persistence_s).floor() as u64;
        let mut rng = stream.substream(PERTURB_LABEL ^ self.seed).substream(window).rng();
        let speed = if self.speed_max_mps > self.speed_min_mps {
            rng.gen_range(self.speed_min_mps..=self.speed_max_mps)
        } else {
            self.speed_min_mps
        };
        let heading = rng.gen_range(0.0..TAU);
        Vec3::new(speed * heading.cos(), speed * heading.sin(), 0.0)
    }
}
