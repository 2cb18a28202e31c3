//! Python bindings: meshes, radial grids, ground states, level sweeps and
//! verification suites. Structured results come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use treegs::analysis::level::{level_sweep as sweep, SweepSetup};
use treegs::analysis::verify::{run_suite, Suite, VerifyConfig};
use treegs::shooting::{shooting_verify, ShootingOptions};
use treegs::solver::{minimize_on, GroundStateResult, SolverOptions};
use treegs::spectral::{lambda1_reference as reference, ReferenceBudget};
use treegs::{build_mesh, build_radial_grid, Discretization, FemModel, Field, LeafBc, TreeKind, TreeSpec};

fn err(e: treegs::Error) -> PyErr {
    match e {
        treegs::Error::Numeric { .. } | treegs::Error::Accuracy(_) => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = treegs::io::to_json(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn kind_of(kind: &str) -> PyResult<TreeKind> {
    match kind.to_ascii_lowercase().as_str() {
        "rooted" => Ok(TreeKind::Rooted),
        "unrooted" => Ok(TreeKind::Unrooted),
        _ => Err(PyValueError::new_err(format!("unknown tree kind {kind:?}"))),
    }
}

fn bc_of(bc: &str) -> PyResult<LeafBc> {
    match bc.to_ascii_lowercase().as_str() {
        "dirichlet" => Ok(LeafBc::Dirichlet),
        "neumann" => Ok(LeafBc::Neumann),
        _ => Err(PyValueError::new_err(format!("unknown boundary condition {bc:?}"))),
    }
}

fn solver(p: f64, mu: f64, max_iters: usize, grad_tol: f64) -> SolverOptions {
    SolverOptions {
        max_iters,
        grad_tol,
        ..SolverOptions::new(p, mu)
    }
}

fn energy_dict<'py>(py: Python<'py>, domain: &impl Discretization, values: Vec<f64>, p: f64) -> PyResult<Bound<'py, PyAny>> {
    let u = Field::new(domain, values).map_err(err)?;
    let report = FemModel::new(domain).energy(&u, p).map_err(err)?;
    to_py(py, &report)
}

/// Minimizer of the NLS energy at fixed mass.
#[pyclass(frozen)]
struct GroundState {
    inner: GroundStateResult,
}

#[pymethods]
impl GroundState {
    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }

    /// Lagrange multiplier `(‖u'‖² − ‖u‖_p^p)/μ`.
    #[getter]
    fn multiplier(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn sup_norm(&self) -> f64 {
        self.inner.report.sup_norm
    }

    /// Coefficients per degree of freedom.
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.u.values().to_vec()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "GroundState(mass={}, energy={}, converged={})",
            self.inner.mass, self.inner.energy, self.inner.converged
        )
    }
}

/// Finite-element mesh of a truncated tree.
#[pyclass(frozen)]
struct Mesh {
    inner: treegs::Mesh,
}

#[pymethods]
impl Mesh {
    #[new]
    #[pyo3(signature = (kind="rooted", branching=2, edge_length=1.0, depth=6, nodes_per_edge=8, bc="dirichlet"))]
    fn new(kind: &str, branching: u32, edge_length: f64, depth: u32, nodes_per_edge: usize, bc: &str) -> PyResult<Self> {
        let spec = TreeSpec::new(kind_of(kind)?, branching, edge_length, depth).map_err(err)?;
        let inner = build_mesh(&spec, nodes_per_edge, bc_of(bc)?).map_err(err)?;
        Ok(Mesh { inner })
    }

    #[getter]
    fn dof_count(&self) -> usize {
        self.inner.dof_count()
    }

    /// Bottom of the spectrum of the truncated tree.
    #[pyo3(signature = (tol=1e-10))]
    fn lambda1(&self, py: Python<'_>, tol: f64) -> PyResult<f64> {
        let mesh = &self.inner;
        py.detach(|| treegs::lambda1_full(mesh, tol)).map(|e| e.lambda1).map_err(err)
    }

    /// Energy report of a field given per degree of freedom.
    fn energy<'py>(&self, py: Python<'py>, values: Vec<f64>, p: f64) -> PyResult<Bound<'py, PyAny>> {
        energy_dict(py, &self.inner, values, p)
    }

    #[pyo3(signature = (p, mu, max_iters=5000, grad_tol=1e-9))]
    fn minimize(&self, py: Python<'_>, p: f64, mu: f64, max_iters: usize, grad_tol: f64) -> PyResult<GroundState> {
        let mesh = &self.inner;
        let opts = solver(p, mu, max_iters, grad_tol);
        let inner = py.detach(|| minimize_on(mesh, &opts)).map_err(err)?;
        Ok(GroundState { inner })
    }

    fn __repr__(&self) -> String {
        format!("Mesh({:?})", self.inner.summary())
    }
}

/// Radial reduction of a tree to a weighted half-line.
#[pyclass(frozen)]
struct RadialGrid {
    inner: treegs::RadialGrid,
}

#[pymethods]
impl RadialGrid {
    #[new]
    #[pyo3(signature = (kind="rooted", branching=2, edge_length=1.0, depth=40, nodes_per_edge=16))]
    fn new(kind: &str, branching: u32, edge_length: f64, depth: u32, nodes_per_edge: usize) -> PyResult<Self> {
        let spec = TreeSpec::new(kind_of(kind)?, branching, edge_length, depth).map_err(err)?;
        let inner = build_radial_grid(&spec, depth, nodes_per_edge).map_err(err)?;
        Ok(RadialGrid { inner })
    }

    #[getter]
    fn dof_count(&self) -> usize {
        self.inner.dof_count()
    }

    /// Radial coordinate of every node.
    fn coordinates(&self) -> Vec<f64> {
        (0..self.inner.node_count()).map(|i| self.inner.coordinate(i)).collect()
    }

    #[pyo3(signature = (tol=1e-10))]
    fn lambda1(&self, py: Python<'_>, tol: f64) -> PyResult<f64> {
        let grid = &self.inner;
        py.detach(|| treegs::lambda1_radial(grid, tol)).map(|e| e.lambda1).map_err(err)
    }

    fn energy<'py>(&self, py: Python<'py>, values: Vec<f64>, p: f64) -> PyResult<Bound<'py, PyAny>> {
        energy_dict(py, &self.inner, values, p)
    }

    #[pyo3(signature = (p, mu, max_iters=5000, grad_tol=1e-9))]
    fn minimize(&self, py: Python<'_>, p: f64, mu: f64, max_iters: usize, grad_tol: f64) -> PyResult<GroundState> {
        let grid = &self.inner;
        let opts = solver(p, mu, max_iters, grad_tol);
        let inner = py.detach(|| minimize_on(grid, &opts)).map_err(err)?;
        Ok(GroundState { inner })
    }

    /// Compares a converged radial ground state with direct integration of
    /// the radial equation.
    fn shooting<'py>(&self, py: Python<'py>, state: &GroundState) -> PyResult<Bound<'py, PyAny>> {
        let report = shooting_verify(&state.inner, &self.inner, &ShootingOptions::default()).map_err(err)?;
        to_py(py, &report)
    }
}

/// Infinite-tree `λ₁` from deep radial grids extrapolated in depth and mesh size.
#[pyfunction]
#[pyo3(signature = (branching=2, edge_length=1.0))]
fn lambda1_reference(py: Python<'_>, branching: u32, edge_length: f64) -> PyResult<f64> {
    let spec = TreeSpec::new(TreeKind::Rooted, branching, edge_length, 1).map_err(err)?;
    py.detach(|| reference(&spec, &ReferenceBudget::default()))
        .map(|r| r.lambda1)
        .map_err(err)
}

/// Level function `μ ↦ ℰ(μ)` on the given masses.
#[pyfunction]
#[pyo3(signature = (p, masses, kind="rooted", depth=8, nodes_per_edge=8, radial=false, branching=2, edge_length=1.0))]
#[allow(clippy::too_many_arguments)]
fn level_sweep<'py>(
    py: Python<'py>,
    p: f64,
    masses: Vec<f64>,
    kind: &str,
    depth: u32,
    nodes_per_edge: usize,
    radial: bool,
    branching: u32,
    edge_length: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = TreeSpec::new(kind_of(kind)?, branching, edge_length, depth).map_err(err)?;
    let curve = py
        .detach(|| -> treegs::Result<_> {
            let lambda1 = reference(&spec, &ReferenceBudget::default())?.lambda1;
            let setup = SweepSetup::new(spec, nodes_per_edge, p, lambda1);
            sweep(&if radial { setup.radial() } else { setup }, &masses)
        })
        .map_err(err)?;
    to_py(py, &curve)
}

/// Runs one verification suite and returns its report.
#[pyfunction]
#[pyo3(signature = (suite, samples=1000, seed=1))]
fn verify<'py>(py: Python<'py>, suite: &str, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let suite: Suite = suite.parse().map_err(err)?;
    let config = VerifyConfig {
        samples,
        seed,
        ..VerifyConfig::default()
    };
    let report = py.detach(|| run_suite(suite, &config)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn pytreegs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mesh>()?;
    m.add_class::<RadialGrid>()?;
    m.add_class::<GroundState>()?;
    m.add_function(wrap_pyfunction!(lambda1_reference, m)?)?;
    m.add_function(wrap_pyfunction!(level_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
