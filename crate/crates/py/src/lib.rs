//! Python bindings for the core types and operations: model matrices, the
//! Skorokhod solver, the gap-process and unranked simulators, the stationary
//! law, and the KS statistic.

use inert_atlas::analysis::{self, TargetLaw};
use inert_atlas::dynamics::{
    rank_positions, simulate_gap_process, simulate_unranked, SimGrid,
};
use inert_atlas::model::{build_drift_matrix, build_reflection_matrix, ModelParams};
use inert_atlas::skorokhod::{
    solve_skorokhod, DiscretePath, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use inert_atlas::stationary;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: inert_atlas::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mat_to_rows(m: &inert_atlas::linalg::Mat) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| m.row(i).to_vec()).collect()
}

/// Reflection matrix family (R, W = R^-1, U = I - R) as nested lists.
#[pyfunction]
fn reflection_matrix(py: Python<'_>, n: usize) -> PyResult<Bound<'_, PyDict>> {
    let m = build_reflection_matrix(n).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("r", mat_to_rows(&m.r))?;
    d.set_item("w", mat_to_rows(&m.w))?;
    d.set_item("u", mat_to_rows(&m.u))?;
    Ok(d)
}

/// Drift matrix A and its inverse as nested lists.
#[pyfunction]
fn drift_matrix(py: Python<'_>, n: usize) -> PyResult<Bound<'_, PyDict>> {
    let m = build_drift_matrix(n).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("a", mat_to_rows(&m.a))?;
    d.set_item("a_inv", mat_to_rows(&m.a_inv))?;
    Ok(d)
}

/// Solve the discrete Skorokhod problem for the path rows `values` on `times`.
#[pyfunction]
#[pyo3(signature = (times, values, tol = DEFAULT_TOL, max_iter = DEFAULT_MAX_ITER))]
fn skorokhod<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let n = values.first().map(|r| r.len()).unwrap_or(0);
    let rm = build_reflection_matrix(n).map_err(err)?;
    let x = DiscretePath::from_rows(times, values).map_err(err)?;
    let sol = solve_skorokhod(&x, &rm, tol, max_iter).map_err(err)?;
    let rows = |p: &DiscretePath| -> Vec<Vec<f64>> {
        (0..p.len()).map(|k| p.row(k).to_vec()).collect()
    };
    let d = PyDict::new(py);
    d.set_item("eta", rows(&sol.eta))?;
    d.set_item("y", rows(&sol.y))?;
    d.set_item("iterations", sol.iterations)?;
    d.set_item("residual", sol.residual)?;
    Ok(d)
}

/// Simulate the coupled velocity/gap/local-time process.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    n: usize,
    g: f64,
    v0: f64,
    z0: Vec<f64>,
    dt: f64,
    t_end: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = ModelParams::new(n, g, v0, z0).map_err(err)?;
    let grid = SimGrid::new(dt, t_end).map_err(err)?;
    let traj = simulate_gap_process(&params, grid, seed).map_err(err)?;
    let times: Vec<f64> = (0..=grid.steps).map(|k| grid.time(k)).collect();
    let z: Vec<Vec<f64>> = (0..=grid.steps).map(|k| traj.z_row(k).to_vec()).collect();
    let l: Vec<Vec<f64>> = (0..=grid.steps).map(|k| traj.l_row(k).to_vec()).collect();
    let d = PyDict::new(py);
    d.set_item("t", times)?;
    d.set_item("v", traj.v)?;
    d.set_item("x0", traj.x0)?;
    d.set_item("z", z)?;
    d.set_item("l", l)?;
    Ok(d)
}

/// Simulate the unranked (n+1)-particle system from sorted initial positions.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn simulate_unranked_system<'py>(
    py: Python<'py>,
    n: usize,
    g: f64,
    v0: f64,
    x_init: Vec<f64>,
    dt: f64,
    t_end: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = ModelParams::new(n, g, v0, vec![0.0; n]).map_err(err)?;
    let grid = SimGrid::new(dt, t_end).map_err(err)?;
    let traj = simulate_unranked(&params, grid, seed, &x_init).map_err(err)?;
    let times: Vec<f64> = (0..=grid.steps).map(|k| grid.time(k)).collect();
    let x: Vec<Vec<f64>> = (0..=grid.steps).map(|k| traj.x_row(k).to_vec()).collect();
    let ell: Vec<Vec<f64>> = (0..=grid.steps).map(|k| traj.ell_row(k).to_vec()).collect();
    let d = PyDict::new(py);
    d.set_item("t", times)?;
    d.set_item("v", traj.v)?;
    d.set_item("x", x)?;
    d.set_item("ell", ell)?;
    Ok(d)
}

/// Stable ascending sort: (permutation, sorted values).
#[pyfunction]
fn rank(x: Vec<f64>) -> (Vec<usize>, Vec<f64>) {
    rank_positions(&x)
}

/// The product-form stationary law for (n, g).
#[pyfunction]
fn law<'py>(py: Python<'py>, n: usize, g: f64) -> PyResult<Bound<'py, PyDict>> {
    let params = ModelParams::new(n, g, 0.0, vec![0.0; n]).map_err(err)?;
    let l = stationary::stationary_law(&params);
    let d = PyDict::new(py);
    d.set_item("mean_v", l.mean_v)?;
    d.set_item("var_v", l.var_v)?;
    d.set_item("rates", l.rates)?;
    d.set_item("c_pi", l.c_pi)?;
    Ok(d)
}

/// Stationary density at (v, z).
#[pyfunction]
fn density(n: usize, g: f64, v: f64, z: Vec<f64>) -> PyResult<f64> {
    let params = ModelParams::new(n, g, 0.0, vec![0.0; n]).map_err(err)?;
    let l = stationary::stationary_law(&params);
    stationary::stationary_density(&l, v, &z).map_err(err)
}

/// One seeded draw (v, z) from the stationary law.
#[pyfunction]
fn sample(n: usize, g: f64, seed: u64) -> PyResult<(f64, Vec<f64>)> {
    let params = ModelParams::new(n, g, 0.0, vec![0.0; n]).map_err(err)?;
    let l = stationary::stationary_law(&params);
    Ok(stationary::stationary_sample(&l, seed))
}

/// Residuals of the stationarity identities at the given probe points.
#[pyfunction]
fn bar_residuals<'py>(
    py: Python<'py>,
    n: usize,
    g: f64,
    probes: Vec<(f64, Vec<f64>)>,
) -> PyResult<Bound<'py, PyDict>> {
    let params = ModelParams::new(n, g, 0.0, vec![0.0; n]).map_err(err)?;
    let res = stationary::verify_bar_identities(&params, &probes).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("interior", res.interior)?;
    d.set_item("boundary", res.boundary)?;
    d.set_item("identity", res.identity)?;
    Ok(d)
}

/// One-sample KS statistic against Normal(mean, var).
#[pyfunction]
fn ks_normal(samples: Vec<f64>, mean: f64, var: f64) -> PyResult<f64> {
    analysis::ks_distance(&samples, &TargetLaw::Normal { mean, var })
        .map(|r| r.statistic)
        .map_err(err)
}

/// One-sample KS statistic against Exponential(rate).
#[pyfunction]
fn ks_exponential(samples: Vec<f64>, rate: f64) -> PyResult<f64> {
    analysis::ks_distance(&samples, &TargetLaw::Exponential { rate })
        .map(|r| r.statistic)
        .map_err(err)
}

#[pymodule]
fn inert_atlas_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(reflection_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(drift_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(skorokhod, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_unranked_system, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(law, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(bar_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(ks_normal, m)?)?;
    m.add_function(wrap_pyfunction!(ks_exponential, m)?)?;
    Ok(())
}
