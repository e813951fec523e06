//! Boltzmann-sigmoid fitting for detection-probability curves.
//!
//! The model is `y = A2 + (A1 - A2) / (1 + exp((x - x0) / dx))`: `A1` is
//! the early plateau, `A2` the late one, `x0` the half-transition point
//! and `dx` the transition width. Fitting minimizes the sum of squared
//! residuals with a damped Gauss-Newton iteration (Levenberg damping on
//! the normal equations' diagonal), solving the 4x4 step system by
//! Gaussian elimination with partial pivoting. The parameterization is
//! sign-degenerate — swapping the plateaus and negating `dx` gives the
//! same curve — so results are canonicalized to `dx > 0`.
//!
//! [`thin_points`] reduces a densely sampled curve to a small subset
//! that still pins the plateaus and the transition, by spending the
//! point budget proportionally to local curvature.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("x and y lengths differ: {0} vs {1}")]
    MismatchedLengths(usize, usize),
    #[error("need at least 4 points to fit 4 parameters, got {0}")]
    TooFewPoints(usize),
    #[error("data contains a non-finite value")]
    NonFiniteData,
    #[error("all x values coincide; the transition location is meaningless")]
    DegenerateX,
}

/// Sigmoid parameters, canonicalized so `dx > 0` (then `A1` is the level
/// as `x -> -inf` and `A2` the level as `x -> +inf`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoltzmannParams {
    pub a1: f64,
    pub a2: f64,
    pub x0: f64,
    pub dx: f64,
}

/// Evaluates the sigmoid, safe against `exp` overflow at extreme `x`.
pub fn boltzmann_eval(p: &BoltzmannParams, x: f64) -> f64 {
    let t = (x - p.x0) / p.dx;
    let s = logistic_complement(t);
    p.a2 + (p.a1 - p.a2) * s
}

/// `1 / (1 + e^t)` without overflow for large `|t|`.
fn logistic_complement(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// Model gradient with respect to `(a1, a2, x0, dx)` at one `x`; exposed
/// so optimizer diagnostics can cross-check against finite differences.
pub fn jacobian_row(p: &BoltzmannParams, x: f64) -> [f64; 4] {
    let t = (x - p.x0) / p.dx;
    let s = logistic_complement(t);
    let bump = s * (1.0 - s);
    let amp = p.a1 - p.a2;
    [s, 1.0 - s, amp * bump / p.dx, amp * bump * t / p.dx]
}

/// Solves `a x = b` in place by partial-pivot elimination; `None` when a
/// pivot vanishes (singular system).
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for col in (0..4).rev() {
        let mut acc = b[col];
        for k in col + 1..4 {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

fn sse(p: &BoltzmannParams, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - boltzmann_eval(p, x)).powi(2)).sum()
}

/// Fit outcome: parameters, fit quality, and whether the iteration both
/// settled and had a genuine transition to find.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub params: BoltzmannParams,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `false` when the data cannot pin a transition (flat response).
    pub identifiable: bool,
}

const MAX_ITERATIONS: usize = 200;
const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e12;

fn validate(xs: &[f64], ys: &[f64]) -> Result<(), FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::MismatchedLengths(xs.len(), ys.len()));
    }
    if xs.len() < 4 {
        return Err(FitError::TooFewPoints(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteData);
    }
    Ok(())
}

/// Fits the sigmoid to `(xs, ys)` by damped Gauss-Newton. Points may
/// arrive in any order. Flat data (all `y` equal) returns immediately
/// with `identifiable: false`.
pub fn fit_boltzmann(xs: &[f64], ys: &[f64]) -> Result<FitReport, FitError> {
    fit_traced(xs, ys, &mut |_| {})
}

/// Same fit, reporting each accepted SSE value (tests assert the
/// sequence never increases).
fn fit_traced(
    xs: &[f64],
    ys: &[f64],
    on_accept: &mut dyn FnMut(f64),
) -> Result<FitReport, FitError> {
    validate(xs, ys)?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let xs: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| ys[i]).collect();

    let span = xs[xs.len() - 1] - xs[0];
    if span <= 0.0 {
        return Err(FitError::DegenerateX);
    }
    let x0 = xs[xs.len() / 2];
    let dx = span / 10.0;
    if ys.iter().all(|&y| y == ys[0]) {
        return Ok(FitReport {
            params: BoltzmannParams { a1: ys[0], a2: ys[0], x0, dx },
            sse: 0.0,
            iterations: 0,
            converged: true,
            identifiable: false,
        });
    }

    let mut p = BoltzmannParams { a1: ys[0], a2: ys[ys.len() - 1], x0, dx };
    let mut current_sse = sse(&p, &xs, &ys);
    on_accept(current_sse);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    'outer: for _ in 0..MAX_ITERATIONS {
        // Normal equations J^T J h = J^T r for residuals r = y - f.
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&x, &y) in xs.iter().zip(&ys) {
            let row = jacobian_row(&p, x);
            let r = y - boltzmann_eval(&p, x);
            for i in 0..4 {
                jtr[i] += row[i] * r;
                for j in 0..4 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        // Inner loop: raise damping until a step actually helps.
        loop {
            let mut damped = jtj;
            for i in 0..4 {
                // Scale-aware damping; plain +lambda when a diagonal
                // entry has collapsed to zero.
                let d = if jtj[i][i] > 0.0 { jtj[i][i] } else { 1.0 };
                damped[i][i] += lambda * d;
            }
            let step = solve4(damped, jtr);
            let candidate = step.map(|h| BoltzmannParams {
                a1: p.a1 + h[0],
                a2: p.a2 + h[1],
                x0: p.x0 + h[2],
                dx: p.dx + h[3],
            });
            let candidate_sse = candidate.as_ref().map(|c| sse(c, &xs, &ys));
            match (candidate, candidate_sse) {
                (Some(c), Some(new_sse)) if new_sse.is_finite() && new_sse < current_sse => {
                    let improvement = (current_sse - new_sse) / current_sse.max(1e-300);
                    p = c;
                    current_sse = new_sse;
                    on_accept(current_sse);
                    iterations += 1;
                    lambda = (lambda / 10.0).max(LAMBDA_MIN);
                    if improvement < 1e-10 || current_sse < 1e-30 {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        // No direction helps anymore: a flat-gradient
                        // stationary point. Call it settled.
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    if p.dx < 0.0 {
        p = BoltzmannParams { a1: p.a2, a2: p.a1, x0: p.x0, dx: -p.dx };
    }
    Ok(FitReport { params: p, sse: current_sse, iterations, converged, identifiable: true })
}

/// Picks at most `budget` points (never fewer than 4), always keeping
/// both endpoints and spending the rest proportionally to local
/// curvature `|y[i-1] - 2 y[i] + y[i+1]|`, so the transition keeps its
/// sampling density while plateaus thin out. Input must be sorted by x;
/// returns index positions into the input.
pub fn thin_points(xs: &[f64], ys: &[f64], budget: usize) -> Result<Vec<usize>, FitError> {
    validate(xs, ys)?;
    let n = xs.len();
    let budget = budget.max(4);
    if budget >= n {
        return Ok((0..n).collect());
    }
    // Curvature score per interior point, floored so flat stretches
    // still receive a share of the budget.
    let mut score = vec![0.0; n];
    for i in 1..n - 1 {
        score[i] = (ys[i - 1] - 2.0 * ys[i] + ys[i + 1]).abs();
    }
    let mean = score.iter().sum::<f64>() / (n - 2) as f64;
    let floor = if mean > 0.0 { 0.1 * mean } else { 1.0 };
    for s in score.iter_mut().take(n - 1).skip(1) {
        *s = s.max(floor);
    }
    let total: f64 = score.iter().sum();

    let mut picked = vec![false; n];
    picked[0] = true;
    picked[n - 1] = true;
    let interior = budget - 2;
    // Walk the cumulative score and take one point per equal share.
    let mut cum = 0.0;
    let mut next_quota = 1;
    for i in 1..n - 1 {
        cum += score[i];
        if cum * interior as f64 >= next_quota as f64 * total {
            picked[i] = true;
            while cum * interior as f64 >= next_quota as f64 * total {
                next_quota += 1;
            }
        }
    }
    // Quantile collisions can leave the budget unfilled; add evenly
    // spaced leftovers until it is.
    let mut count = picked.iter().filter(|&&b| b).count();
    let mut stride = 1;
    while count < budget {
        let mut added = false;
        for i in (1..n - 1).step_by(stride) {
            if count == budget {
                break;
            }
            if !picked[i] {
                picked[i] = true;
                count += 1;
                added = true;
            }
        }
        if !added {
            break;
        }
        stride = 1;
    }
    Ok((0..n).filter(|&i| picked[i]).collect())
}

/// Writes a one-row fit report: `a1,a2,x0,dx,sse,iterations,converged,identifiable`.
pub fn write_fit_csv<W: std::io::Write>(w: &mut W, report: &FitReport) -> std::io::Result<()> {
    writeln!(w, "a1,a2,x0,dx,sse,iterations,converged,identifiable")?;
    let p = &report.params;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{}",
        p.a1,
        p.a2,
        p.x0,
        p.dx,
        report.sse,
        report.iterations,
        report.converged as u8,
        report.identifiable as u8
    )
}
