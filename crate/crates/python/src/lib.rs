//! Python bindings: the `hklab` extension module.
//!
//! Graphs are `hklab.Graph` objects; the analysis routines are module-level
//! functions taking a graph. Configurations and reports cross the boundary
//! as plain dicts with the same keys as their JSON forms.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hklab::checkers::{fit_exponent as fit, CheckConfig, CheckContext, CheckKind, Grid, GridSpec};
use hklab::generators::DEFAULT_VERTEX_CAP;
use hklab::walk::{
    heat_profile, mc_exit_time as mc, scale_function as scale, ExitField, HeatMode, McConfig,
};
use hklab::{potential, GeneratorSpec, VertexSet, WeightedGraph};

create_exception!(hklab, LabError, PyException, "Error raised by the hklab core.");
create_exception!(
    hklab,
    TruncationError,
    LabError,
    "A query reached past the safe radius of a truncated graph."
);

fn lab_err(e: hklab::LabError) -> PyErr {
    match e {
        hklab::LabError::Truncation { .. } => TruncationError::new_err(e.to_string()),
        hklab::LabError::UnknownVertex(_) => PyKeyError::new_err(e.to_string()),
        _ => LabError::new_err(e.to_string()),
    }
}

fn dumps(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn from_dict<T: serde::de::DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    match obj {
        None => Ok(T::default()),
        Some(obj) => serde_json::from_str(&dumps(obj)?).map_err(|e| PyValueError::new_err(e.to_string())),
    }
}

/// A weighted graph with its labels.
#[pyclass(frozen, module = "hklab")]
pub struct Graph {
    inner: WeightedGraph,
}

impl Graph {
    fn set(&self, members: Vec<usize>) -> PyResult<VertexSet> {
        for &v in &members {
            self.inner.check_vertex(v).map_err(lab_err)?;
        }
        Ok(VertexSet::from_members(&self.inner, members))
    }
}

#[pymethods]
impl Graph {
    /// Builds a generator family, e.g. `Graph.generate("gasket", level=3)`.
    #[staticmethod]
    #[pyo3(signature = (family, cap = DEFAULT_VERTEX_CAP, **params))]
    fn generate(family: &str, cap: usize, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut spec = match params {
            Some(p) => serde_json::from_str::<serde_json::Value>(&dumps(p.as_any())?)
                .map_err(|e| PyValueError::new_err(e.to_string()))?,
            None => serde_json::json!({}),
        };
        spec["family"] = family.replace('-', "_").into();
        let spec: GeneratorSpec =
            serde_json::from_value(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: spec.build_with_cap(cap).map_err(lab_err)?,
        })
    }

    /// Parses hkgraph v1 text.
    #[staticmethod]
    fn from_hkgraph(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: hklab::graph::parse_hkgraph(text).map_err(lab_err)?,
        })
    }

    /// Graph on `0..vertex_count` from `(x, y, weight)` triples.
    #[staticmethod]
    #[pyo3(signature = (vertex_count, edges, labels = None))]
    fn from_edges(
        vertex_count: usize,
        edges: Vec<(usize, usize, f64)>,
        labels: Option<Vec<(usize, String)>>,
    ) -> PyResult<Self> {
        let mut g = WeightedGraph::from_edges(vertex_count, edges).map_err(lab_err)?;
        if let Some(labels) = labels {
            g = g.with_labels(labels).map_err(lab_err)?;
        }
        Ok(Self { inner: g })
    }

    fn to_hkgraph(&self) -> String {
        self.inner.to_hkgraph()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges().to_vec()
    }

    fn labels(&self) -> Vec<(usize, String)> {
        self.inner.labels().to_vec()
    }

    /// First vertex carrying `name`.
    fn vertex(&self, name: &str) -> PyResult<usize> {
        self.inner
            .vertex_by_label(name)
            .ok_or_else(|| PyKeyError::new_err(format!("no vertex labelled {name}")))
    }

    fn frontier(&self) -> Vec<usize> {
        self.inner.frontier()
    }

    fn neighbors(&self, x: usize) -> PyResult<Vec<(usize, f64)>> {
        self.inner.check_vertex(x).map_err(lab_err)?;
        Ok(self.inner.neighbors(x).collect())
    }

    fn measure(&self, x: usize) -> PyResult<f64> {
        self.inner.check_vertex(x).map_err(lab_err)?;
        Ok(self.inner.measure(x))
    }

    /// `P(x, y) = mu_xy / mu(x)`.
    fn transition(&self, x: usize, y: usize) -> PyResult<f64> {
        self.inner.check_vertex(x).map_err(lab_err)?;
        self.inner.check_vertex(y).map_err(lab_err)?;
        Ok(self.inner.transition(x, y))
    }

    fn distance(&self, x: usize, y: usize) -> PyResult<usize> {
        self.inner.distance(x, y).map_err(lab_err)
    }

    fn safe_radius(&self, x: usize) -> PyResult<usize> {
        self.inner.safe_radius(x).map_err(lab_err)
    }

    /// Members of the open ball `{y : d(x, y) < R}`.
    fn ball(&self, x: usize, radius: usize) -> PyResult<Vec<usize>> {
        Ok(self.inner.ball(x, radius).map_err(lab_err)?.members().to_vec())
    }

    /// `V(x, R) = mu(B(x, R))`.
    fn volume(&self, x: usize, radius: usize) -> PyResult<f64> {
        self.inner.volume(x, radius).map_err(lab_err)
    }

    fn p0(&self) -> f64 {
        self.inner.p0_constant()
    }

    /// The same graph with every weight multiplied by `factor`.
    fn scaled(&self, factor: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.scaled(factor).map_err(lab_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.vertex_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph({} vertices, {} edges)",
            self.inner.vertex_count(),
            self.inner.edge_count()
        )
    }
}

/// Mean exit time `E(x, R)` from the ball `B(x, R)`.
#[pyfunction]
fn exit_time(g: &Graph, x: usize, radius: usize) -> PyResult<f64> {
    Ok(exit_field(g, x, radius)?.at(x))
}

fn exit_field(g: &Graph, x: usize, radius: usize) -> PyResult<ExitField> {
    ExitField::solve(&g.inner, x, radius, Default::default()).map_err(lab_err)
}

/// `{z: E_z(tau_B)}` over the ball `B(x, R)`.
#[pyfunction]
fn exit_times(g: &Graph, x: usize, radius: usize) -> PyResult<BTreeMap<usize, f64>> {
    let field = exit_field(g, x, radius)?;
    Ok(field.members().iter().copied().zip(field.values().iter().copied()).collect())
}

/// Rows `p_n(x, .)` of the heat kernel for `n = 0..=horizon`, optionally
/// for the walk killed on leaving `killed_in`.
#[pyfunction]
#[pyo3(signature = (g, x, horizon, killed_in = None))]
fn heat_kernel(g: &Graph, x: usize, horizon: usize, killed_in: Option<Vec<usize>>) -> PyResult<Vec<Vec<f64>>> {
    let mode = match killed_in {
        Some(members) => HeatMode::Killed(g.set(members)?),
        None => HeatMode::Free,
    };
    let profile = heat_profile(&g.inner, x, horizon, mode).map_err(lab_err)?;
    let n = g.inner.vertex_count();
    Ok((0..=horizon)
        .map(|k| (0..n).map(|y| profile.kernel(k, y)).collect())
        .collect())
}

/// Monte Carlo estimate of `E(x, R)` from `walks` independent walks.
#[pyfunction]
#[pyo3(signature = (g, x, radius, walks, seed = 0))]
fn mc_exit_time<'py>(
    py: Python<'py>,
    g: &Graph,
    x: usize,
    radius: usize,
    walks: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let est = mc(&g.inner, x, radius, &McConfig::new(walks, seed)).map_err(lab_err)?;
    let out = PyDict::new(py);
    out.set_item("mean", est.mean)?;
    out.set_item("standard_error", est.standard_error)?;
    out.set_item("walks", est.walks)?;
    out.set_item("censored", est.censored)?;
    Ok(out)
}

/// `F(R)` for `R = 1..=r_max`, the maximum of `E(x, R)` over `centers`.
#[pyfunction]
fn scale_function(g: &Graph, centers: Vec<usize>, r_max: usize) -> PyResult<Vec<f64>> {
    Ok(scale(&g.inner, &centers, r_max).map_err(lab_err)?.values().to_vec())
}

/// Effective resistance between disjoint vertex sets.
#[pyfunction]
fn effective_resistance(g: &Graph, a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    let (a, b) = (g.set(a)?, g.set(b)?);
    Ok(potential::effective_resistance(&g.inner, &a, &b).map_err(lab_err)?.value)
}

/// Resistance between `B(x, inner)` and the complement of `B(x, outer)`.
#[pyfunction]
fn annulus_resistance(g: &Graph, x: usize, inner: usize, outer: usize) -> PyResult<f64> {
    potential::annulus_resistance(&g.inner, x, inner, outer).map_err(lab_err)
}

/// Smallest Dirichlet eigenvalue of the Laplacian on a vertex set.
#[pyfunction]
fn smallest_eigenvalue(g: &Graph, members: Vec<usize>) -> PyResult<f64> {
    potential::smallest_eigenvalue(&g.inner, g.set(members)?).map_err(lab_err)
}

/// Green function `g_B(y, z)` of the walk killed on leaving `members`.
#[pyfunction]
fn green(g: &Graph, members: Vec<usize>, y: usize, z: usize) -> PyResult<f64> {
    let op = potential::green_operator(&g.inner, g.set(members)?).map_err(lab_err)?;
    op.green(y, z).map_err(lab_err)
}

/// `E(f, f)` for a function given on every vertex.
#[pyfunction]
fn dirichlet_energy(g: &Graph, f: Vec<f64>) -> PyResult<f64> {
    potential::dirichlet_energy(&g.inner, &f).map_err(lab_err)
}

/// Runs one checker and returns its report as a dict. Truncation becomes a
/// failing report with a flagged cell.
#[pyfunction]
#[pyo3(signature = (g, condition, grid = None, config = None))]
fn check<'py>(
    py: Python<'py>,
    g: &Graph,
    condition: &str,
    grid: Option<&Bound<'py, PyAny>>,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let kind = CheckKind::parse(condition)
        .ok_or_else(|| PyValueError::new_err(format!("unknown condition {condition}")))?;
    let spec: GridSpec = from_dict(grid)?;
    let config: CheckConfig = from_dict(config)?;
    let grid = Grid::resolve_partial(&g.inner, &spec).map_err(lab_err)?;
    let ctx = CheckContext::with_config(&g.inner, grid, config);
    let report = ctx.run_flagged(kind).map_err(lab_err)?;
    loads(py, &report.to_json().map_err(lab_err)?)
}

/// Least-squares slope of `log y` against `log x`, with its `r^2`.
#[pyfunction]
fn fit_exponent(series: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    fit(&series).map_err(lab_err)
}

#[pymodule(name = "hklab")]
fn hklab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<Graph>()?;
    m.add("LabError", py.get_type::<LabError>())?;
    m.add("TruncationError", py.get_type::<TruncationError>())?;
    m.add(
        "CONDITIONS",
        CheckKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>(),
    )?;
    m.add_function(wrap_pyfunction!(exit_time, m)?)?;
    m.add_function(wrap_pyfunction!(exit_times, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(mc_exit_time, m)?)?;
    m.add_function(wrap_pyfunction!(scale_function, m)?)?;
    m.add_function(wrap_pyfunction!(effective_resistance, m)?)?;
    m.add_function(wrap_pyfunction!(annulus_resistance, m)?)?;
    m.add_function(wrap_pyfunction!(smallest_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(green, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_energy, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponent, m)?)?;
    Ok(())
}
