//! Python bindings for the slip-field energy library: kernels, line-tension
//! densities and tables, the convex envelope, grid/polyhedral fields, the
//! energy routes, and the scaling sweeps.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pnfield::energy::{self, EnergyMethod, MinimizeOptions};
use pnfield::envelope;
use pnfield::error::Error;
use pnfield::fields::{self, DomainSpec};
use pnfield::kernel::AnisotropyKernel;
use pnfield::linetension::{self, LineTensionQuery, RelaxationOptions};
use pnfield::recovery::{self, DimsPolicy, RecoveryGeometry, RecoveryParams, SweepBuilder};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Json(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn domain(kind: &str, side: (f64, f64)) -> PyResult<DomainSpec> {
    match kind {
        "torus" => DomainSpec::torus(side.0, side.1).map_err(err),
        "box" => DomainSpec::rect(side.0, side.1).map_err(err),
        other => Err(PyValueError::new_err(format!("unknown domain kind '{other}'"))),
    }
}

/// Elastic interaction kernel (closed-form cubic or tabulated angular data).
#[pyclass(name = "Kernel", skip_from_py_object)]
#[derive(Clone)]
struct PyKernel {
    inner: AnisotropyKernel,
}

#[pymethods]
impl PyKernel {
    /// Isotropic-cubic kernel with shear modulus mu and Poisson ratio nu.
    #[staticmethod]
    fn cubic(mu: f64, nu: f64) -> PyResult<Self> {
        Ok(PyKernel { inner: AnisotropyKernel::cubic(mu, nu).map_err(err)? })
    }

    /// Load a tabulated kernel ("N K" header plus upper-triangular rows).
    #[staticmethod]
    fn from_table_file(path: &str) -> PyResult<Self> {
        Ok(PyKernel { inner: AnisotropyKernel::from_table_file(path).map_err(err)? })
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.inner.n_components()
    }

    /// Cached ellipticity bounds (lambda_min, lambda_max).
    fn ellipticity(&self) -> (f64, f64) {
        (self.inner.lambda_min(), self.inner.lambda_max())
    }

    /// Angular part at angle theta, as nested rows.
    fn gamma_hat(&self, theta: f64) -> Vec<Vec<f64>> {
        let m = self.inner.gamma_hat(theta);
        let n = m.dim();
        (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect()
    }

    /// Full kernel at a nonzero point z.
    fn gamma(&self, z: (f64, f64)) -> PyResult<Vec<Vec<f64>>> {
        let m = self.inner.gamma([z.0, z.1]).map_err(err)?;
        let n = m.dim();
        Ok((0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Kernel({})", self.inner.id())
    }
}

/// Line-tension density by the hyperplane quadrature.
#[pyfunction]
#[pyo3(signature = (kernel, b, n, quad_nodes = 8192))]
fn psi_line(kernel: &PyKernel, b: Vec<i64>, n: (f64, f64), quad_nodes: usize) -> PyResult<f64> {
    let q = LineTensionQuery::with_nodes(b, [n.0, n.1], quad_nodes).map_err(err)?;
    linetension::psi_line(&kernel.inner, &q).map_err(err)
}

/// Line-tension density by the circle quadrature.
#[pyfunction]
#[pyo3(signature = (kernel, b, n, quad_nodes = 8192))]
fn psi_circle(kernel: &PyKernel, b: Vec<i64>, n: (f64, f64), quad_nodes: usize) -> PyResult<f64> {
    let q = LineTensionQuery::with_nodes(b, [n.0, n.1], quad_nodes).map_err(err)?;
    linetension::psi_circle(&kernel.inner, &q).map_err(err)
}

/// Table of psi and its relaxation upper bound over slips x directions.
#[pyclass(name = "LineTensionTable", skip_from_py_object)]
#[derive(Clone)]
struct PyTable {
    inner: linetension::LineTensionTable,
}

#[pymethods]
impl PyTable {
    #[staticmethod]
    #[pyo3(signature = (kernel, b_max, k_directions, relax_b_max = None))]
    fn build(
        kernel: &PyKernel,
        b_max: i64,
        k_directions: usize,
        relax_b_max: Option<i64>,
    ) -> PyResult<Self> {
        let opts = RelaxationOptions {
            b_max: relax_b_max.unwrap_or(b_max),
            n_directions: k_directions,
            ..Default::default()
        };
        let b_set = linetension::slip_cube(kernel.inner.n_components(), b_max);
        let inner =
            linetension::build_linetension_table(&kernel.inner, &b_set, k_directions, &opts)
                .map_err(err)?;
        Ok(PyTable { inner })
    }

    #[getter]
    fn k_directions(&self) -> usize {
        self.inner.k_directions
    }

    #[getter]
    fn lambda_star(&self) -> f64 {
        self.inner.lambda_star
    }

    fn psi(&self, b: Vec<i64>, n_index: usize) -> Option<f64> {
        self.inner.psi(&b, n_index)
    }

    fn psi_rel_upper(&self, b: Vec<i64>, n_index: usize) -> Option<f64> {
        self.inner.psi_rel(&b, n_index)
    }

    /// All rows as (b, n_index, psi, psi_rel_upper).
    fn rows(&self) -> Vec<(Vec<i64>, usize, f64, f64)> {
        self.inner
            .rows()
            .iter()
            .map(|r| (r.b.clone(), r.n_index, r.psi, r.psi_rel_upper))
            .collect()
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        self.inner.save_csv(path).map_err(err)
    }

    #[staticmethod]
    fn load_csv(path: &str) -> PyResult<Self> {
        Ok(PyTable { inner: linetension::LineTensionTable::load_csv(path).map_err(err)? })
    }
}

/// Rank-one atom set and the convex density program over it.
#[pyclass(name = "AtomSet", skip_from_py_object)]
#[derive(Clone)]
struct PyAtomSet {
    inner: envelope::AtomSet,
}

#[pymethods]
impl PyAtomSet {
    #[staticmethod]
    fn build(table: &PyTable, b_max: i64, k_directions: usize) -> PyResult<Self> {
        Ok(PyAtomSet {
            inner: envelope::build_atoms(&table.inner, b_max, k_directions).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Convex density at a row-major N x 2 matrix; returns (value, support)
    /// with support entries (lambda, b, theta).
    fn g(&self, matrix: Vec<f64>) -> PyResult<(f64, Vec<(f64, Vec<i64>, f64)>)> {
        let eval = envelope::g_eval(&self.inner, &matrix).map_err(err)?;
        let support = eval
            .support
            .iter()
            .map(|&(idx, lambda)| {
                let at = &self.inner.atoms()[idx];
                let theta = 2.0 * std::f64::consts::PI * at.n_index as f64
                    / self.inner.k_directions as f64;
                (lambda, at.b.clone(), theta)
            })
            .collect();
        Ok((eval.value, support))
    }

    /// Certified norm-equivalence constants (lower, upper).
    fn bounds(&self) -> (f64, f64) {
        envelope::certified_bounds(&self.inner)
    }
}

/// Slip field sampled on a regular grid.
#[pyclass(name = "GridField", skip_from_py_object)]
#[derive(Clone)]
struct PyGridField {
    inner: fields::GridField,
}

#[pymethods]
impl PyGridField {
    /// Build from flat values, row-major and component-fastest.
    #[staticmethod]
    #[pyo3(signature = (kind, side, dims, n_components, values))]
    fn from_values(
        kind: &str,
        side: (f64, f64),
        dims: (usize, usize),
        n_components: usize,
        values: Vec<f64>,
    ) -> PyResult<Self> {
        let d = domain(kind, side)?;
        let mut gf =
            fields::GridField::zeros(d, [dims.0, dims.1], n_components).map_err(err)?;
        if values.len() != gf.values().len() {
            return Err(PyValueError::new_err(format!(
                "expected {} values, got {}",
                gf.values().len(),
                values.len()
            )));
        }
        gf.values_mut().copy_from_slice(&values);
        Ok(PyGridField { inner: gf })
    }

    #[staticmethod]
    fn constant(
        kind: &str,
        side: (f64, f64),
        dims: (usize, usize),
        value: Vec<f64>,
    ) -> PyResult<Self> {
        let d = domain(kind, side)?;
        Ok(PyGridField {
            inner: fields::GridField::constant(d, [dims.0, dims.1], &value).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyGridField { inner: fields::GridField::load(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn dims(&self) -> (usize, usize) {
        let d = self.inner.dims();
        (d[0], d[1])
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.inner.n_components()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn h12_seminorm_sq(&self) -> f64 {
        fields::h12_seminorm_sq(&self.inner)
    }

    fn mollify(&self, scale: f64) -> PyResult<Self> {
        let m = fields::Mollifier::new(scale).map_err(err)?;
        Ok(PyGridField { inner: fields::mollify(&self.inner, &m).map_err(err)? })
    }

    /// Energy breakdown as a dict (keys: eps, w_term, nonlocal_term, total,
    /// per_log, per_log2).
    #[pyo3(signature = (kernel, eps, method = "convolution"))]
    fn energy(
        &self,
        py: Python<'_>,
        kernel: &PyKernel,
        eps: f64,
        method: &str,
    ) -> PyResult<Py<PyDict>> {
        let m = match method {
            "direct" => EnergyMethod::Direct,
            "convolution" => EnergyMethod::Convolution,
            other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
        };
        let b = energy::energy_eps(&self.inner, &kernel.inner, eps, m).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("eps", b.eps)?;
        d.set_item("w_term", b.w_term)?;
        d.set_item("nonlocal_term", b.nonlocal_term)?;
        d.set_item("total", b.total())?;
        d.set_item("per_log", b.per_log())?;
        d.set_item("per_log2", b.per_log2())?;
        Ok(d.into())
    }

    /// Gradient-descent minimization; returns (field, trace rows).
    #[pyo3(signature = (kernel, eps, max_iterations = 500, grad_tol = 1e-8))]
    fn minimize(
        &self,
        kernel: &PyKernel,
        eps: f64,
        max_iterations: usize,
        grad_tol: f64,
    ) -> PyResult<(PyGridField, Vec<(usize, f64, f64, f64)>)> {
        let opts = MinimizeOptions { max_iterations, grad_tol, ..Default::default() };
        let (out, trace) =
            energy::minimize(&self.inner, &kernel.inner, eps, &opts).map_err(err)?;
        let rows = trace
            .iter()
            .map(|t| (t.iteration, t.energy, t.grad_norm, t.step))
            .collect();
        Ok((PyGridField { inner: out }, rows))
    }
}

/// Piecewise-constant field on a polygonal partition.
#[pyclass(name = "PolyhedralField", skip_from_py_object)]
#[derive(Clone)]
struct PyPolyField {
    inner: fields::PolyhedralField,
}

#[pymethods]
impl PyPolyField {
    /// Three-band strip geometry (the canonical two-jump torus field).
    #[staticmethod]
    fn horizontal_strip(
        kind: &str,
        side: (f64, f64),
        sigma: f64,
        y_lo: f64,
        y_hi: f64,
        value: Vec<i64>,
    ) -> PyResult<Self> {
        let d = domain(kind, side)?;
        Ok(PyPolyField {
            inner: fields::PolyhedralField::horizontal_strip(d, sigma, y_lo, y_hi, value)
                .map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyPolyField { inner: fields::PolyhedralField::load(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma()
    }

    fn bv_measure(&self) -> f64 {
        self.inner.bv_measure().total
    }

    fn segment_count(&self) -> usize {
        self.inner.segments().len()
    }

    fn rasterize(&self, dims: (usize, usize)) -> PyResult<PyGridField> {
        Ok(PyGridField { inner: self.inner.rasterize([dims.0, dims.1]).map_err(err)? })
    }

    /// Rasterize-and-mollify construction at scale eps.
    fn mollified_jump(&self, eps: f64, dims: (usize, usize)) -> PyResult<PyGridField> {
        Ok(PyGridField {
            inner: recovery::mollified_jump(&self.inner, eps, [dims.0, dims.1])
                .map_err(err)?,
        })
    }

    /// Replicated-shift recovery field at scale eps.
    #[pyo3(signature = (eps, rho, alpha, zeta, dims, margin = 0.0))]
    fn build_recovery(
        &self,
        eps: f64,
        rho: f64,
        alpha: f64,
        zeta: (f64, f64),
        dims: (usize, usize),
        margin: f64,
    ) -> PyResult<PyGridField> {
        let params = RecoveryParams {
            eps,
            geometry: RecoveryGeometry { rho, alpha, zeta: [zeta.0, zeta.1], margin },
        };
        Ok(PyGridField {
            inner: recovery::build_recovery(&self.inner, &params, [dims.0, dims.1])
                .map_err(err)?,
        })
    }
}

/// Epsilon sweep of the mollified-jump construction; returns rows
/// (eps, w_term, nonlocal, total, ratio) and the fitted limit.
#[pyfunction]
#[pyo3(signature = (pf, kernel, p_min, p_max, target, dims_factor = 4.0, max_dims = None))]
fn sweep_line_tension(
    pf: &PyPolyField,
    kernel: &PyKernel,
    p_min: i32,
    p_max: i32,
    target: f64,
    dims_factor: f64,
    max_dims: Option<usize>,
) -> PyResult<(Vec<(f64, f64, f64, f64, f64)>, Option<(f64, f64, f64)>)> {
    let eps: Vec<f64> = (p_min..=p_max).map(|p| (2.0f64).powi(-p)).collect();
    let sweep = recovery::scaling_sweep(
        &pf.inner,
        SweepBuilder::MollifiedJump,
        &eps,
        &kernel.inner,
        DimsPolicy { factor: dims_factor, max_dims },
        target,
    )
    .map_err(err)?;
    let rows = sweep
        .records
        .iter()
        .map(|r| {
            (
                r.eps,
                r.breakdown.w_term,
                r.breakdown.nonlocal_term,
                r.breakdown.total(),
                r.ratio(recovery::RatioKind::NonlocalPerLog),
            )
        })
        .collect();
    Ok((rows, sweep.fit.map(|f| (f.a, f.b, f.residual))))
}

#[pymodule]
fn pnfield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyAtomSet>()?;
    m.add_class::<PyGridField>()?;
    m.add_class::<PyPolyField>()?;
    m.add_function(wrap_pyfunction!(psi_line, m)?)?;
    m.add_function(wrap_pyfunction!(psi_circle, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_line_tension, m)?)?;
    Ok(())
}
