//! Python bindings. Structured results are returned as plain Python
//! dicts and lists, built from the same JSON the CLI writes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use freight_routing::model::{audit_solution, build_smifr, Layout, ModelParams};
use freight_routing::network::{enumerate_paths, validate_network, PathSets, DEFAULT_FILTER_FACTOR};
use freight_routing::report::{extract_routes, render, Format};
use freight_routing::saa::{run_saa, SaaConfig};
use freight_routing::scenario;
use freight_routing::solver::{solve_milp, SolveOptions};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn params(penalty: Option<f64>) -> ModelParams {
    let mut p = ModelParams::default();
    if let Some(v) = penalty {
        p.penalty = v;
    }
    p
}

/// A road-rail network with its commodities and demands.
#[pyclass(frozen)]
struct Network {
    inner: freight_routing::network::Network,
}

#[pymethods]
impl Network {
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let inner = freight_routing::network::Network::load(path).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = freight_routing::network::Network::from_json(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// `{"errors": [...], "warnings": [...]}`.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &validate_network(&self.inner))
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.nodes().iter().map(|n| n.id.clone()).collect()
    }

    #[getter]
    fn num_links(&self) -> usize {
        self.inner.links().len()
    }

    #[getter]
    fn num_demands(&self) -> usize {
        self.inner.demands().len()
    }

    /// Filtered simple paths between two nodes in enumeration order, as
    /// `(node ids, miles)` pairs.
    #[pyo3(signature = (origin, destination, factor = DEFAULT_FILTER_FACTOR))]
    fn paths(&self, origin: &str, destination: &str, factor: f64) -> PyResult<Vec<(Vec<String>, f64)>> {
        let net = &self.inner;
        let set = enumerate_paths(net, origin, destination, factor).map_err(value_err)?;
        Ok(set
            .paths
            .iter()
            .map(|p| (p.node_ids(net).into_iter().map(String::from).collect(), p.total_length))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Network({} nodes, {} links, {} demands)",
            self.inner.nodes().len(),
            self.inner.links().len(),
            self.inner.demands().len()
        )
    }
}

/// Disruption settings: kind, element count and severity.
#[pyclass(frozen)]
struct DisruptionSpec {
    inner: scenario::DisruptionSpec,
}

#[pymethods]
impl DisruptionSpec {
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::DisruptionSpec::load(path).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: scenario::DisruptionSpec = serde_json::from_str(text).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("spec serializes")
    }
}

/// One realized scenario: capacities and times of every element.
#[pyclass(frozen)]
struct Scenario {
    inner: scenario::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::Scenario::from_json(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn impacted_elements(&self) -> Vec<String> {
        self.inner.impacted_elements.clone()
    }
}

#[pyfunction]
#[pyo3(signature = (network, spec, n = 1, seed = 0))]
fn sample_scenarios(network: &Network, spec: &DisruptionSpec, n: usize, seed: u64) -> PyResult<Vec<Scenario>> {
    let all = scenario::sample_scenarios(&network.inner, &spec.inner, n, seed).map_err(value_err)?;
    Ok(all.into_iter().map(|inner| Scenario { inner }).collect())
}

/// Solve the single-scenario routing problem. Returns a dict with
/// `status`, `objective`, `best_bound`, `unmet`, `violations` and `routes`.
#[pyfunction]
#[pyo3(signature = (network, scenario, penalty = None))]
fn solve<'py>(
    py: Python<'py>,
    network: &Network,
    scenario: &Scenario,
    penalty: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let params = params(penalty);
    let net = &network.inner;
    let sc = &scenario.inner;
    let doc = py.detach(|| -> Result<serde_json::Value, String> {
        let paths = PathSets::for_demands(net, DEFAULT_FILTER_FACTOR).map_err(|e| e.to_string())?;
        let (model, map) = build_smifr(net, &paths, std::slice::from_ref(sc), &params).map_err(|e| e.to_string())?;
        let sol = solve_milp(&model, &SolveOptions::default()).map_err(|e| e.to_string())?;
        if !sol.has_incumbent() {
            return Err(format!("no solution: {:?}", sol.status));
        }
        let blocks = map.scenario_values(&sol.values, 0);
        let violations = audit_solution(net, &paths, sc, &params, &blocks).map_err(|e| e.to_string())?;
        let routes = extract_routes(net, &Layout::new(net), &blocks);
        Ok(serde_json::json!({
            "status": sol.status,
            "objective": sol.objective,
            "best_bound": sol.best_bound,
            "unmet": blocks.iter().map(|b| b.shortfall).sum::<f64>() + 0.0,
            "violations": violations.len(),
            "routes": routes,
        }))
    });
    to_py(py, &doc.map_err(PyRuntimeError::new_err)?)
}

/// Outcome of a sample average approximation run.
#[pyclass(frozen)]
struct SaaResult {
    inner: freight_routing::saa::SaaResult,
}

#[pymethods]
impl SaaResult {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: freight_routing::saa::SaaResult::from_json(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn f_bar(&self) -> f64 {
        self.inner.stats.f_bar
    }

    #[getter]
    fn f_tilde(&self) -> f64 {
        self.inner.stats.f_tilde
    }

    #[getter]
    fn gap(&self) -> f64 {
        self.inner.stats.gap
    }

    #[getter]
    fn sigma_gap(&self) -> f64 {
        self.inner.stats.sigma_gap
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Summary statistics as a dict.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.stats)
    }

    /// Routes of the selected solution as a dict.
    fn routes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.routes)
    }

    /// Render as `"text"`, `"csv"` or `"json"`.
    #[pyo3(signature = (format = "text"))]
    fn report(&self, format: &str) -> PyResult<String> {
        let f: Format = format.parse().map_err(value_err)?;
        Ok(render(&self.inner, None, f))
    }
}

#[pyfunction]
#[pyo3(signature = (network, spec, m = 100, n = 1, n_prime = 1000, seed = 0, penalty = None))]
#[allow(clippy::too_many_arguments)]
fn run_saa_py(
    py: Python<'_>,
    network: &Network,
    spec: &DisruptionSpec,
    m: usize,
    n: usize,
    n_prime: usize,
    seed: u64,
    penalty: Option<f64>,
) -> PyResult<SaaResult> {
    let mut config = SaaConfig::new(spec.inner.clone(), seed).with_sizes(m, n, n_prime);
    config.params = params(penalty);
    let net = &network.inner;
    let run = py.detach(|| run_saa(net, &config)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(SaaResult { inner: run.result })
}

#[pymodule]
fn freight_routing_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<DisruptionSpec>()?;
    m.add_class::<Scenario>()?;
    m.add_class::<SaaResult>()?;
    m.add_function(wrap_pyfunction!(sample_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    let saa = wrap_pyfunction!(run_saa_py, m)?;
    m.add("run_saa", saa)?;
    Ok(())
}
