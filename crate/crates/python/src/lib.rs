//! Python bindings: graphs, utilities, mechanisms, bounds, audits and the
//! experiment pipeline.

use std::io::BufReader;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use privrec::audit::{self, Mechanism};
use privrec::bounds::{self, AsymptoticMode, BoundInputs, EpsilonBound};
use privrec::experiment::{self, ExperimentConfig, MechanismKind};
use privrec::mechanisms::{self, PrivacyParams, RecommendationDistribution};
use privrec::utility::{self, UtilityConfig, UtilityVector};
use privrec::{Error, NodeId};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(msg) => PyIOError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn utility_config(utility: &str, gamma: f64, max_path_len: usize) -> PyResult<UtilityConfig> {
    match utility {
        "common-neighbors" => Ok(UtilityConfig::CommonNeighbors),
        "weighted-paths" => UtilityConfig::weighted_paths(gamma, max_path_len).map_err(to_py),
        other => Err(PyValueError::new_err(format!(
            "unknown utility {other:?}; expected common-neighbors or weighted-paths"
        ))),
    }
}

fn mechanism_kind(name: &str) -> PyResult<MechanismKind> {
    match name {
        "exponential" => Ok(MechanismKind::Exponential),
        "laplace" => Ok(MechanismKind::Laplace),
        "smoothing" => Ok(MechanismKind::Smoothing),
        other => Err(PyValueError::new_err(format!("unknown mechanism {other:?}"))),
    }
}

/// An unweighted graph with dense node ids `0..n`; `labels` keeps the
/// original ids of a loaded edge list.
#[pyclass(name = "Graph", module = "privrec", frozen)]
struct PyGraph {
    inner: privrec::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n, edges, directed = false))]
    fn new(n: usize, edges: Vec<(NodeId, NodeId)>, directed: bool) -> PyResult<Self> {
        Ok(PyGraph {
            inner: privrec::Graph::from_edges(n, directed, &edges).map_err(to_py)?,
        })
    }

    /// Reads a SNAP-style edge list.
    #[staticmethod]
    #[pyo3(signature = (path, directed = false))]
    fn load(path: PathBuf, directed: bool) -> PyResult<Self> {
        let file = std::fs::File::open(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        let loaded = privrec::load_edge_list(BufReader::new(file), directed).map_err(to_py)?;
        Ok(PyGraph { inner: loaded.graph })
    }

    /// Seeded preferential-attachment graph.
    #[staticmethod]
    #[pyo3(signature = (nodes, edges_per_node, seed = 0))]
    fn synthetic(nodes: usize, edges_per_node: usize, seed: u64) -> PyResult<Self> {
        Ok(PyGraph {
            inner: experiment::generate_synthetic(nodes, edges_per_node, seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn directed(&self) -> bool {
        self.inner.is_directed()
    }

    #[getter]
    fn labels(&self) -> Vec<u64> {
        self.inner.labels().to_vec()
    }

    fn degree(&self, v: NodeId) -> PyResult<usize> {
        self.check(v)?;
        Ok(self.inner.degree(v))
    }

    fn neighbors(&self, v: NodeId) -> PyResult<Vec<NodeId>> {
        self.check(v)?;
        Ok(self.inner.out_neighbors(v).to_vec())
    }

    fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.inner.has_edge(u, v)
    }

    fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.inner.edges().collect()
    }

    /// Graph after toggling the edge `u`-`v`.
    fn toggled(&self, u: NodeId, v: NodeId) -> PyResult<Self> {
        self.check(u)?;
        self.check(v)?;
        let edit = self.inner.toggle(u, v);
        Ok(PyGraph {
            inner: self.inner.apply_edit(edit).map_err(to_py)?,
        })
    }

    /// Edge list text in the same format `load` reads.
    fn to_edge_list(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        privrec::write_edge_list(&self.inner, &mut buf).map_err(|e| PyIOError::new_err(e.to_string()))?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(nodes={}, edges={}, directed={})",
            self.inner.node_count(),
            self.inner.edge_count(),
            self.inner.is_directed()
        )
    }
}

impl PyGraph {
    fn check(&self, v: NodeId) -> PyResult<()> {
        if v < self.inner.node_count() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("node {v} out of range")))
        }
    }
}

/// `(candidate, utility)` pairs for `target`, ascending by candidate.
#[pyfunction]
#[pyo3(signature = (graph, target, utility = "common-neighbors", gamma = 0.05, max_path_len = 3))]
fn utility_vector(graph: &PyGraph, target: NodeId, utility: &str, gamma: f64, max_path_len: usize) -> PyResult<Vec<(NodeId, f64)>> {
    let cfg = utility_config(utility, gamma, max_path_len)?;
    let u = utility::utility_vector(&graph.inner, target, cfg).map_err(to_py)?;
    Ok(u.iter().collect())
}

/// Global sensitivity used to scale the mechanisms' noise at `target`.
#[pyfunction]
#[pyo3(signature = (graph, target, utility = "common-neighbors", gamma = 0.05, max_path_len = 3))]
fn sensitivity(graph: &PyGraph, target: NodeId, utility: &str, gamma: f64, max_path_len: usize) -> PyResult<f64> {
    let cfg = utility_config(utility, gamma, max_path_len)?;
    Ok(utility::sensitivity_bound(cfg, &graph.inner, target).map_err(to_py)?.delta_f)
}

fn values(utilities: Vec<f64>) -> PyResult<UtilityVector> {
    UtilityVector::from_values(&utilities).map_err(to_py)
}

/// Exponential mechanism probabilities for a plain list of utilities.
#[pyfunction]
#[pyo3(signature = (utilities, epsilon, delta_f = 1.0))]
fn exponential_distribution(utilities: Vec<f64>, epsilon: f64, delta_f: f64) -> PyResult<Vec<f64>> {
    let p = PrivacyParams::new(epsilon, delta_f, 0).map_err(to_py)?;
    let d = mechanisms::exponential_distribution(&values(utilities)?, &p).map_err(to_py)?;
    Ok(d.probs().to_vec())
}

/// Laplace noisy-argmax probabilities, integrated to `tol`.
#[pyfunction]
#[pyo3(signature = (utilities, epsilon, delta_f = 1.0, tol = 1e-9))]
fn laplace_distribution(utilities: Vec<f64>, epsilon: f64, delta_f: f64, tol: f64) -> PyResult<Vec<f64>> {
    let p = PrivacyParams::new(epsilon, delta_f, 0).map_err(to_py)?;
    let d = mechanisms::laplace_distribution(&values(utilities)?, &p, tol).map_err(to_py)?;
    Ok(d.probs().to_vec())
}

/// Draws `count` Laplace recommendations (indices into `utilities`).
#[pyfunction]
#[pyo3(signature = (utilities, epsilon, delta_f = 1.0, seed = 0, count = 1))]
fn laplace_samples(utilities: Vec<f64>, epsilon: f64, delta_f: f64, seed: u64, count: usize) -> PyResult<Vec<NodeId>> {
    let u = values(utilities)?;
    let p = PrivacyParams::new(epsilon, delta_f, seed).map_err(to_py)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| mechanisms::laplace_sample(&u, &p, &mut rng).map_err(to_py))
        .collect()
}

/// Monte Carlo accuracy of the Laplace mechanism.
#[pyfunction]
#[pyo3(signature = (utilities, epsilon, delta_f = 1.0, trials = 1000, seed = 0))]
fn laplace_accuracy(utilities: Vec<f64>, epsilon: f64, delta_f: f64, trials: usize, seed: u64) -> PyResult<f64> {
    let p = PrivacyParams::new(epsilon, delta_f, seed).map_err(to_py)?;
    mechanisms::monte_carlo_accuracy(&values(utilities)?, &p, trials).map_err(to_py)
}

/// Closed-form probability that the higher of two candidates wins under
/// Laplace noise, for utility gap `du`.
#[pyfunction]
fn laplace_two_node_probability(du: f64, epsilon: f64) -> PyResult<f64> {
    mechanisms::laplace_two_node_probability(du, epsilon).map_err(to_py)
}

/// Expected utility of `probs` over `utilities`, divided by the maximum.
#[pyfunction]
fn expected_accuracy(probs: Vec<f64>, utilities: Vec<f64>) -> PyResult<f64> {
    let u = values(utilities)?;
    let d = RecommendationDistribution::new(u.nodes().to_vec(), probs).map_err(to_py)?;
    mechanisms::expected_accuracy(&d, &u).map_err(to_py)
}

/// Mixes `probs` with the uniform distribution at weight `x`.
#[pyfunction]
fn smoothing_distribution(probs: Vec<f64>, x: f64) -> PyResult<Vec<f64>> {
    let nodes = (0..probs.len()).collect();
    let base = RecommendationDistribution::new(nodes, probs).map_err(to_py)?;
    Ok(mechanisms::smoothing_distribution(&base, x).map_err(to_py)?.probs().to_vec())
}

#[pyfunction]
fn smoothing_epsilon(x: f64, n: usize) -> PyResult<f64> {
    mechanisms::smoothing_epsilon(x, n).map_err(to_py)
}

#[pyfunction]
fn smoothing_x(epsilon: f64, n: usize) -> PyResult<f64> {
    mechanisms::smoothing_x(epsilon, n).map_err(to_py)
}

/// Best accuracy achievable at `epsilon` by any private monotone recommender.
#[pyfunction]
fn accuracy_upper_bound(n: u64, k: u64, c: f64, t: u64, epsilon: f64) -> PyResult<f64> {
    let b = BoundInputs::new(n, k, c, t).map_err(to_py)?;
    bounds::accuracy_upper_bound(&b, epsilon).map_err(to_py)
}

fn epsilon_value(b: EpsilonBound) -> Option<f64> {
    match b {
        EpsilonBound::AtLeast(v) => Some(v),
        EpsilonBound::NoConstraint => None,
    }
}

/// Smallest ε compatible with accuracy `1 - delta`; `None` when no
/// constraint results.
#[pyfunction]
fn epsilon_lower_bound(n: u64, k: u64, c: f64, t: u64, delta: f64) -> PyResult<Option<f64>> {
    let b = BoundInputs::new(n, k, c, t).map_err(to_py)?;
    Ok(epsilon_value(bounds::epsilon_lower_bound(&b, delta).map_err(to_py)?))
}

/// Edit count for the accuracy bound given a target's top utility and degree.
#[pyfunction]
#[pyo3(signature = (u_max, degree, utility = "common-neighbors"))]
fn t_formula(u_max: f64, degree: usize, utility: &str) -> PyResult<u64> {
    let kind = utility_config(utility, 0.05, 3)?.kind();
    bounds::t_formula(kind, u_max, degree).map_err(to_py)
}

/// Asymptotic lower bound on ε; `mode` is lemma2, theorem1, theorem2 or
/// theorem3.
#[pyfunction]
#[pyo3(signature = (mode, n, beta, d, s = 0.0))]
fn asymptotic_epsilon(mode: &str, n: u64, beta: u64, d: u64, s: f64) -> PyResult<Option<f64>> {
    let mode = match mode {
        "lemma2" => AsymptoticMode::Lemma2,
        "theorem1" => AsymptoticMode::Theorem1,
        "theorem2" => AsymptoticMode::Theorem2,
        "theorem3" => AsymptoticMode::Theorem3,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    Ok(epsilon_value(bounds::asymptotic_epsilon(mode, n, beta, d, s).map_err(to_py)?))
}

/// Exact privacy audit of one target. Returns a dict with the claimed and
/// measured levels and whether the audit passed.
#[pyfunction]
#[pyo3(signature = (graph, target, mechanism = "exponential", epsilon = 1.0, utility = "common-neighbors",
                    gamma = 0.05, max_path_len = 3, x = None, tol = 1e-7))]
#[allow(clippy::too_many_arguments)]
fn audit_mechanism<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    target: NodeId,
    mechanism: &str,
    epsilon: f64,
    utility: &str,
    gamma: f64,
    max_path_len: usize,
    x: Option<f64>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = utility_config(utility, gamma, max_path_len)?;
    let g = &graph.inner;
    let delta_f = utility::sensitivity_bound(cfg, g, target).map_err(to_py)?.delta_f;
    let p = PrivacyParams::new(epsilon, delta_f, 0).map_err(to_py)?;
    let mech = match mechanism_kind(mechanism)? {
        MechanismKind::Exponential => Mechanism::Exponential,
        MechanismKind::Laplace => Mechanism::Laplace,
        MechanismKind::Smoothing => {
            let x = match x {
                Some(x) => x,
                None => {
                    let n = utility::utility_vector(g, target, cfg).map_err(to_py)?.len();
                    mechanisms::smoothing_x(epsilon, n).map_err(to_py)?
                }
            };
            Mechanism::Smoothing { x }
        }
    };
    let report = audit::audit_mechanism(g, target, mech, cfg, &p, tol).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("target", report.target)?;
    out.set_item("epsilon_claimed", report.epsilon_claimed)?;
    out.set_item("max_log_ratio", report.max_log_ratio)?;
    out.set_item("pairs_checked", report.pairs_checked)?;
    out.set_item("passed", report.passed())?;
    out.set_item("witness", report.witness.map(|(e, v)| (e.to_string(), v)))?;
    Ok(out)
}

/// Minimum number of edits (not touching `target`) after which `candidate`
/// is the unique top; `None` when more than `max_depth` are needed.
#[pyfunction]
#[pyo3(signature = (graph, target, candidate, utility = "common-neighbors", gamma = 0.05, max_path_len = 3, max_depth = 5))]
#[allow(clippy::too_many_arguments)]
fn brute_force_t(
    graph: &PyGraph,
    target: NodeId,
    candidate: NodeId,
    utility: &str,
    gamma: f64,
    max_path_len: usize,
    max_depth: usize,
) -> PyResult<Option<usize>> {
    let cfg = utility_config(utility, gamma, max_path_len)?;
    audit::brute_force_t(&graph.inner, target, candidate, cfg, max_depth).map_err(to_py)
}

/// Uniform sample of `ceil(fraction * n)` nodes, ascending.
#[pyfunction]
#[pyo3(signature = (graph, fraction, seed = 0))]
fn sample_targets(graph: &PyGraph, fraction: f64, seed: u64) -> PyResult<Vec<NodeId>> {
    experiment::sample_targets(&graph.inner, fraction, seed).map_err(to_py)
}

/// Runs the accuracy experiment on an in-memory graph and returns one dict
/// per (target, ε), in the same order as the CSV output.
#[pyfunction]
#[pyo3(signature = (graph, epsilons, utility = "common-neighbors", gamma = 0.05, max_path_len = 3,
                    sample_fraction = 0.1, trials = 1000, seed = 0,
                    mechanisms = vec!["exponential".to_string(), "laplace".to_string()], smoothing_x = None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    epsilons: Vec<f64>,
    utility: &str,
    gamma: f64,
    max_path_len: usize,
    sample_fraction: f64,
    trials: usize,
    seed: u64,
    mechanisms: Vec<String>,
    smoothing_x: Option<f64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig {
        graph_path: PathBuf::new(),
        directed: graph.inner.is_directed(),
        utility: utility_config(utility, gamma, max_path_len)?,
        epsilons: epsilons.clone(),
        sample_fraction,
        trials,
        seed,
        mechanisms: mechanisms.iter().map(|m| mechanism_kind(m)).collect::<PyResult<_>>()?,
        smoothing_x,
        output_path: None,
    };
    let records = py
        .detach(|| experiment::run_on_graph(&graph.inner, &cfg))
        .map_err(to_py)?;
    let mut rows = Vec::new();
    for rec in &records {
        for &eps in &epsilons {
            let row = PyDict::new(py);
            row.set_item("target", rec.target)?;
            row.set_item("degree", rec.degree)?;
            row.set_item("u_max", rec.u_max)?;
            row.set_item("t", rec.t)?;
            row.set_item("epsilon", eps)?;
            let o = rec.outcome(eps);
            row.set_item("exp_acc", o.and_then(|o| o.exp_accuracy))?;
            row.set_item("laplace_acc", o.and_then(|o| o.laplace_accuracy))?;
            row.set_item("smoothing_acc", o.and_then(|o| o.smoothing_accuracy))?;
            row.set_item("bound_acc", o.map(|o| o.bound_accuracy))?;
            row.set_item("skipped", rec.skipped())?;
            row.set_item("reason", rec.skip_reason.clone())?;
            rows.push(row);
        }
    }
    Ok(rows)
}

#[pymodule(name = "privrec")]
fn privrec_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(utility_vector, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(exponential_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_samples, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_two_node_probability, m)?)?;
    m.add_function(wrap_pyfunction!(expected_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(smoothing_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(smoothing_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(smoothing_x, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(t_formula, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(audit_mechanism, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_t, m)?)?;
    m.add_function(wrap_pyfunction!(sample_targets, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
