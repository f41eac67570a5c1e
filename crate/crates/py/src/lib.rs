//! Python bindings. Graphs cross the boundary as `(n, [(head, tail, weight)])`.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use eulerian_sparsify::apps::{self, SolveConfig};
use eulerian_sparsify::sketch::{self, SketchConfig};
use eulerian_sparsify::sparsify::{fast_sparsify, SparsifyConfig};
use eulerian_sparsify::{build_graph, dense, graph, DirectedGraph, Error};

create_exception!(eulerian_sparsify_py, EulerianSparsifyError, PyValueError);

type Edge = (usize, usize, f64);

fn err(e: Error) -> PyErr {
    EulerianSparsifyError::new_err(format!("{}: {e}", e.kind()))
}

fn graph_of(n: usize, edges: Vec<Edge>) -> PyResult<DirectedGraph> {
    build_graph(n, &edges).map_err(err)
}

fn edges_of(g: &DirectedGraph) -> Vec<Edge> {
    g.edge_list()
}

/// Eulerian sparsifier. Returns a dict with `edges`, `nnz`, `rounds` and
/// `weight_growth`.
#[pyfunction]
#[pyo3(signature = (n, edges, eps=0.25, delta=0.1, seed=0, paper=false))]
fn sparsify<'py>(
    py: Python<'py>,
    n: usize,
    edges: Vec<Edge>,
    eps: f64,
    delta: f64,
    seed: u64,
    paper: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let g = graph_of(n, edges)?;
    let cfg = if paper {
        SparsifyConfig::paper(eps, delta, seed)
    } else {
        SparsifyConfig::practical(eps, delta, seed)
    };
    let out = py.detach(|| fast_sparsify(&g, &cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("edges", edges_of(&out.graph))?;
    d.set_item("nnz", out.nnz())?;
    d.set_item("rounds", out.rounds.len())?;
    d.set_item("weight_growth", out.weight_growth)?;
    Ok(d)
}

/// Eulerian graphical sketch (practical profile).
#[pyfunction]
#[pyo3(signature = (n, edges, eps=0.5, delta=0.1, seed=0))]
fn spectral_sketch<'py>(
    py: Python<'py>,
    n: usize,
    edges: Vec<Edge>,
    eps: f64,
    delta: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let g = graph_of(n, edges)?;
    let cfg = SketchConfig::practical(eps, delta, seed);
    let out = py.detach(|| sketch::spectral_sketch(&g, &cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("edges", edges_of(&out.graph))?;
    d.set_item("nnz", out.nnz())?;
    d.set_item("beta", out.beta)?;
    Ok(d)
}

/// `||L^{+/2} (vL_ref - vL_test) L^{+/2}||` via the dense oracle.
#[pyfunction]
fn sparsifier_error(n: usize, reference: Vec<Edge>, test: Vec<Edge>) -> PyResult<f64> {
    let (a, b) = (graph_of(n, reference)?, graph_of(n, test)?);
    dense::sparsifier_error(&a, &b).map_err(err)
}

/// Solves `vL x = b` on an Eulerian graph.
#[pyfunction]
#[pyo3(signature = (n, edges, b, eps=1e-6, delta=0.1, seed=0))]
fn eulerian_solve<'py>(
    py: Python<'py>,
    n: usize,
    edges: Vec<Edge>,
    b: Vec<f64>,
    eps: f64,
    delta: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let g = graph_of(n, edges)?;
    let cfg = SolveConfig::new(seed);
    let out = py.detach(|| apps::eulerian_solve(&g, &b, eps, delta, &cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("x", out.x)?;
    d.set_item("iterations", out.iterations)?;
    d.set_item("certified_error", out.certified_error)?;
    d.set_item("achieved_error", out.achieved_error)?;
    Ok(d)
}

/// Stationary distribution of a chain given as `(u, v, P_uv)` triples.
#[pyfunction]
#[pyo3(signature = (n, transitions, eps=1e-8))]
fn stationary_distribution(py: Python<'_>, n: usize, transitions: Vec<Edge>, eps: f64) -> PyResult<Vec<f64>> {
    let chain = graph_of(n, transitions)?;
    py.detach(|| apps::stationary_distribution(&chain, eps)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, m, u_max=8, seed=0))]
fn random_eulerian(n: usize, m: usize, u_max: u64, seed: u64) -> PyResult<Vec<Edge>> {
    graph::random_eulerian(n, m, u_max, seed).map(|g| edges_of(&g)).map_err(err)
}

#[pymodule]
fn eulerian_sparsify_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EulerianSparsifyError", m.py().get_type::<EulerianSparsifyError>())?;
    m.add_function(wrap_pyfunction!(sparsify, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_sketch, m)?)?;
    m.add_function(wrap_pyfunction!(sparsifier_error, m)?)?;
    m.add_function(wrap_pyfunction!(eulerian_solve, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(random_eulerian, m)?)?;
    Ok(())
}
