//! Discrete-time Skorokhod problem on the nonnegative orthant.
//!
//! Given an input path x with x(0) >= 0 and the reflection matrix R, find the
//! regulator eta (componentwise nondecreasing, eta(0) = 0) and the reflected
//! path y = x + R*eta >= 0 with eta growing only where y touches zero. On a
//! grid this is the fixed point of the componentwise reflection recursion
//!
//!   eta_i(t) = sup_{s <= t} ( -x_i(s) + (U eta(s))_i )^+ ,  U = I - R.
//!
//! `solve_skorokhod` iterates that map from eta = 0 until stagnation below a
//! tolerance. `solve_skorokhod_stepwise` computes the same fixed point by a
//! single forward sweep in time (the running sup turns the global recursion
//! into a small per-step fixed point), which is what the simulation engine
//! uses in its inner loop.

use crate::error::{Error, Result};
use crate::model::ReflectionMatrix;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 50_000;

/// A time grid plus one n-vector of values per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    times: Vec<f64>,
    values: Vec<f64>, // row-major, len = times.len() * dim
    dim: usize,
}

impl DiscretePath {
    /// Build from a flat row-major value buffer.
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("path must have at least one time point"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("times must start at 0"));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("times must be strictly increasing"));
        }
        if dim == 0 {
            return Err(Error::invalid("path dimension must be at least 1"));
        }
        if values.len() != times.len() * dim {
            return Err(Error::invalid(format!(
                "expected {} values ({} times x dim {}), got {}",
                times.len() * dim,
                times.len(),
                dim,
                values.len()
            )));
        }
        Ok(DiscretePath { times, values, dim })
    }

    pub fn from_rows(times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != times.len() {
            return Err(Error::invalid("row count must equal times length"));
        }
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("all rows must have equal length"));
        }
        let values = rows.into_iter().flatten().collect();
        DiscretePath::new(times, values, dim)
    }

    /// One-dimensional path from scalar samples.
    pub fn scalar(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        DiscretePath::new(times, values, 1)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    pub fn value(&self, step: usize, comp: usize) -> f64 {
        self.values[step * self.dim + comp]
    }

    pub fn row(&self, step: usize) -> &[f64] {
        &self.values[step * self.dim..(step + 1) * self.dim]
    }

    pub fn values_flat(&self) -> &[f64] {
        &self.values
    }
}

/// Regulator/reflected-path pair with iteration diagnostics.
#[derive(Debug, Clone)]
pub struct SkorokhodSolution {
    pub eta: DiscretePath,
    pub y: DiscretePath,
    pub iterations: usize,
    /// Sup-norm distance between the last two eta iterates.
    pub residual: f64,
    /// Residual after each pass, for convergence diagnostics.
    pub residuals: Vec<f64>,
}

impl SkorokhodSolution {
    /// Discrete complementarity residual sum_t y_i(t) * delta eta_i(t), per component.
    pub fn complementarity_residuals(&self) -> Vec<f64> {
        let n = self.eta.dim();
        let steps = self.eta.len();
        let mut out = vec![0.0; n];
        for k in 1..steps {
            for i in 0..n {
                let d_eta = self.eta.value(k, i) - self.eta.value(k - 1, i);
                out[i] += self.y.value(k, i) * d_eta;
            }
        }
        out
    }
}

fn check_input(x: &DiscretePath, rm: &ReflectionMatrix) -> Result<()> {
    if x.dim() != rm.r.dim() {
        return Err(Error::invalid(format!(
            "path dimension {} does not match reflection matrix dimension {}",
            x.dim(),
            rm.r.dim()
        )));
    }
    if x.row(0).iter().any(|&v| v < 0.0) {
        return Err(Error::invalid(
            "x(0) must be componentwise nonnegative (x must lie in C_0)",
        ));
    }
    Ok(())
}

fn reflected_path(x: &DiscretePath, eta: &[f64], rm: &ReflectionMatrix) -> DiscretePath {
    let n = x.dim();
    let steps = x.len();
    let mut y = vec![0.0; steps * n];
    for k in 0..steps {
        for i in 0..n {
            let mut s = x.value(k, i);
            for j in 0..n {
                let rij = rm.r.get(i, j);
                if rij != 0.0 {
                    s += rij * eta[k * n + j];
                }
            }
            y[k * n + i] = s;
        }
    }
    DiscretePath::new(x.times().to_vec(), y, n).expect("grid already validated")
}

/// Picard iteration on the sup-recursion, starting from eta = 0.
///
/// Stops when successive eta iterates differ by less than `tol` in sup norm;
/// fails with the last residual if `max_iter` passes are not enough.
pub fn solve_skorokhod(
    x: &DiscretePath,
    rm: &ReflectionMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<SkorokhodSolution> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::invalid("tol must be positive"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be positive"));
    }
    check_input(x, rm)?;
    let n = x.dim();
    let steps = x.len();

    // Stopping at residual r leaves the iterate within about ||W|| r of the
    // fixed point, and the reflected path within ||R|| ||W|| r of nonnegative.
    // Tighten the internal threshold so that eta and y honor `tol` themselves.
    let amp = row_sum_norm(&rm.r) * row_sum_norm(&rm.w);
    let tol_eff = tol / amp.max(1.0);

    let mut eta = vec![0.0; steps * n];
    let mut next = vec![0.0; steps * n];
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut resid: f64 = 0.0;
        for k in 0..steps {
            for i in 0..n {
                let mut drive = -x.value(k, i);
                for j in 0..n {
                    let uij = rm.u.get(i, j);
                    if uij != 0.0 {
                        drive += uij * eta[k * n + j];
                    }
                }
                let cand = drive.max(0.0);
                let running = if k == 0 {
                    cand
                } else {
                    cand.max(next[(k - 1) * n + i])
                };
                next[k * n + i] = running;
                resid = resid.max((running - eta[k * n + i]).abs());
            }
        }
        std::mem::swap(&mut eta, &mut next);
        residuals.push(resid);
        if resid < tol_eff {
            converged = true;
            break;
        }
    }

    let residual = *residuals.last().unwrap_or(&0.0);
    if !converged {
        return Err(Error::SkorokhodDiverged {
            iterations,
            residual,
        });
    }

    let y = reflected_path(x, &eta, rm);
    let eta_path = DiscretePath::new(x.times().to_vec(), eta, n).expect("grid already validated");
    Ok(SkorokhodSolution {
        eta: eta_path,
        y,
        iterations,
        residual,
        residuals,
    })
}

/// Tridiagonal coefficients of U for the forward sweep: (U e)_i =
/// left[i] * e[i-1] + right[i] * e[i+1].
pub(crate) struct UBands {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl UBands {
    pub fn from_reflection(rm: &ReflectionMatrix) -> Self {
        let n = rm.u.dim();
        let mut left = vec![0.0; n];
        let mut right = vec![0.0; n];
        for i in 0..n {
            if i > 0 {
                left[i] = rm.u.get(i, i - 1);
            }
            if i + 1 < n {
                right[i] = rm.u.get(i, i + 1);
            }
        }
        UBands { left, right }
    }
}

/// One forward sweep over the grid: at each step, solve the n-dimensional
/// fixed point e_i = max(eta_prev_i, (-x_i + (U e)_i)^+) by Gauss-Seidel.
/// Starting from eta_prev the iterates increase monotonically to the fixed
/// point and stagnate exactly in finite arithmetic.
///
/// `x` is row-major with `steps` rows; eta is written into `eta_out` (same
/// layout). Computes the same fixed point as [`solve_skorokhod`].
pub(crate) fn forward_sweep(x: &[f64], steps: usize, n: usize, bands: &UBands, eta_out: &mut [f64]) {
    debug_assert_eq!(x.len(), steps * n);
    debug_assert_eq!(eta_out.len(), steps * n);
    let mut e = vec![0.0; n];
    for k in 0..steps {
        // e carries eta(t_{k-1}); for k = 0 the previous level is 0
        let prev_start = if k == 0 { 0 } else { (k - 1) * n };
        let row = &x[k * n..(k + 1) * n];
        loop {
            let mut changed = false;
            for i in 0..n {
                let mut drive = -row[i];
                if i > 0 {
                    drive += bands.left[i] * e[i - 1];
                }
                if i + 1 < n {
                    drive += bands.right[i] * e[i + 1];
                }
                let floor = if k == 0 { 0.0 } else { eta_out[prev_start + i] };
                let cand = drive.max(0.0).max(floor);
                if cand > e[i] {
                    e[i] = cand;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        eta_out[k * n..(k + 1) * n].copy_from_slice(&e);
    }
}

/// Forward-in-time evaluation of the same fixed point as [`solve_skorokhod`].
pub fn solve_skorokhod_stepwise(
    x: &DiscretePath,
    rm: &ReflectionMatrix,
) -> Result<(DiscretePath, DiscretePath)> {
    check_input(x, rm)?;
    let n = x.dim();
    let steps = x.len();
    let bands = UBands::from_reflection(rm);
    let mut eta = vec![0.0; steps * n];
    forward_sweep(x.values_flat(), steps, n, &bands, &mut eta);
    let y = reflected_path(x, &eta, rm);
    let eta_path = DiscretePath::new(x.times().to_vec(), eta, n)?;
    Ok((eta_path, y))
}

/// Diagnostic lower bound for the Lipschitz constant of the Skorokhod map:
/// (||eta1 - eta2||_T + ||y1 - y2||_T) / ||x1 - x2||_T, sup norms in time of
/// the Euclidean norm across components.
pub fn skorokhod_lipschitz_probe(
    x1: &DiscretePath,
    x2: &DiscretePath,
    rm: &ReflectionMatrix,
) -> Result<f64> {
    if x1.times() != x2.times() || x1.dim() != x2.dim() {
        return Err(Error::invalid("x1 and x2 must share the same grid"));
    }
    let denom = sup_euclid_dist(x1, x2);
    if denom == 0.0 {
        return Err(Error::invalid(
            "identical inputs give a zero denominator in the Lipschitz probe",
        ));
    }
    let s1 = solve_skorokhod(x1, rm, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let s2 = solve_skorokhod(x2, rm, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let num = sup_euclid_dist(&s1.eta, &s2.eta) + sup_euclid_dist(&s1.y, &s2.y);
    Ok(num / denom)
}

fn row_sum_norm(m: &crate::linalg::Mat) -> f64 {
    let n = m.dim();
    (0..n)
        .map(|i| m.row(i).iter().map(|e| e.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn sup_euclid_dist(a: &DiscretePath, b: &DiscretePath) -> f64 {
    let n = a.dim();
    let mut worst: f64 = 0.0;
    for k in 0..a.len() {
        let mut s = 0.0;
        for i in 0..n {
            let d = a.value(k, i) - b.value(k, i);
            s += d * d;
        }
        worst = worst.max(s);
    }
    worst.sqrt()
}
