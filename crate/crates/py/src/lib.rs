//! Python bindings: graphs, substructure extraction and sampling, canonical
//! encodings, the transformer model, training, and capacity analysis.
//!
//! Structured reports are returned as plain dicts and lists.

use deepgraph::canonical::canonicalize;
use deepgraph::capacity::linalg::spectral_norm as spectral;
use deepgraph::capacity::{self, PatternBasis, ShapeSpec};
use deepgraph::experiments::{self, capacity_curve, extract_dataset, ReproConfig, Variant};
use deepgraph::graph::Target;
use deepgraph::model::{
    load_checkpoint, model_forward, save_checkpoint, ModelConfig, ModelParams, Prediction, Task,
};
use deepgraph::rng::stream_rng;
use deepgraph::sampler::{sample_substructures, SamplerParams};
use deepgraph::substructure::{
    enumerate_cycles, enumerate_paths, enumerate_stars, extract_all, InducedAdjacency,
};
use deepgraph::train::{self, TrainConfig};
use deepgraph::{ErrorClass, Kind, Substructure, VocabConfig};
use ndarray::Array2;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: deepgraph::Error) -> PyErr {
    match (&e, e.class()) {
        (deepgraph::Error::Io(_), _) => PyOSError::new_err(e.to_string()),
        (_, ErrorClass::Numeric) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn kinds_vocab(kinds: &[String]) -> PyResult<VocabConfig> {
    let parsed = kinds
        .iter()
        .map(|k| k.parse::<Kind>().map_err(PyValueError::new_err))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(VocabConfig::from_kinds(&parsed))
}

fn default_kinds() -> Vec<String> {
    vec!["cycle".into(), "star".into(), "path".into()]
}

/// Rows of equal length as a dense matrix.
fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows differ in length"));
    }
    Array2::from_shape_vec((r, c), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Undirected graph with categorical node and edge features.
#[pyclass(module = "deepgraph_py", from_py_object)]
#[derive(Clone)]
pub struct Graph {
    inner: deepgraph::Graph,
}

#[pymethods]
impl Graph {
    /// `target` is a float (graph regression) or a list of node labels.
    #[new]
    #[pyo3(signature = (num_nodes, edges, node_feat=None, edge_feat=None, target=None))]
    fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        node_feat: Option<Vec<usize>>,
        edge_feat: Option<Vec<usize>>,
        target: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let mut g = deepgraph::Graph::from_edges(num_nodes, edges);
        if let Some(f) = node_feat {
            g.node_feat = f;
        }
        if let Some(f) = edge_feat {
            g.edge_feat = f;
        }
        g.target = match target {
            None => None,
            Some(t) => match t.extract::<f64>() {
                Ok(v) => Some(Target::Scalar(v)),
                Err(_) => Some(Target::NodeLabels(t.extract::<Vec<usize>>()?)),
            },
        };
        Ok(Graph {
            inner: g.validated().map_err(py_err)?,
        })
    }

    /// Reads one graph per line of a JSON Lines file.
    #[staticmethod]
    fn load_jsonl(path: &str) -> PyResult<Vec<Graph>> {
        let graphs = deepgraph::graph::load_jsonl(path).map_err(py_err)?;
        Ok(graphs.into_iter().map(|inner| Graph { inner }).collect())
    }

    #[staticmethod]
    fn save_jsonl(path: &str, graphs: Vec<Graph>) -> PyResult<()> {
        let inner: Vec<_> = graphs.into_iter().map(|g| g.inner).collect();
        deepgraph::graph::save_jsonl(path, &inner).map_err(py_err)
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges.clone()
    }

    #[getter]
    fn node_feat(&self) -> Vec<usize> {
        self.inner.node_feat.clone()
    }

    #[getter]
    fn target<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.target)
    }

    /// Hop distance matrix; unreachable pairs are None.
    fn distances(&self) -> Vec<Vec<Option<usize>>> {
        let d = deepgraph::all_pairs_distances(&self.inner);
        let n = self.inner.num_nodes;
        (0..n)
            .map(|i| (0..n).map(|j| d.hops(i, j)).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(num_nodes={}, edges={})",
            self.inner.num_nodes,
            self.inner.edges.len()
        )
    }
}

fn node_lists(items: Vec<Substructure>) -> Vec<Vec<usize>> {
    items.into_iter().map(|s| s.nodes).collect()
}

/// Node sets of the induced cycles with `k_min..=k_max` nodes.
#[pyfunction]
fn cycles(g: &Graph, k_min: usize, k_max: usize) -> PyResult<Vec<Vec<usize>>> {
    if k_min < 3 || k_min > k_max {
        return Err(PyValueError::new_err(
            "cycle sizes need 3 <= k_min <= k_max",
        ));
    }
    Ok(node_lists(enumerate_cycles(&g.inner, k_min, k_max)))
}

#[pyfunction]
fn paths(g: &Graph, k_min: usize, k_max: usize) -> PyResult<Vec<Vec<usize>>> {
    if k_min < 2 || k_min > k_max {
        return Err(PyValueError::new_err("path sizes need 2 <= k_min <= k_max"));
    }
    Ok(node_lists(enumerate_paths(&g.inner, k_min, k_max)))
}

/// `(nodes, center)` of the induced stars with `leaves_min..=leaves_max` leaves.
#[pyfunction]
fn stars(g: &Graph, leaves_min: usize, leaves_max: usize) -> PyResult<Vec<(Vec<usize>, usize)>> {
    if leaves_min < 2 || leaves_min > leaves_max {
        return Err(PyValueError::new_err(
            "stars need 2 <= leaves_min <= leaves_max",
        ));
    }
    Ok(enumerate_stars(&g.inner, leaves_min, leaves_max)
        .into_iter()
        .map(|s| {
            let c = s.center.unwrap_or_default();
            (s.nodes, c)
        })
        .collect())
}

/// Every substructure of the requested kinds as `(kind, nodes)` pairs.
#[pyfunction]
#[pyo3(signature = (g, kinds=default_kinds(), seed=0))]
fn extract(g: &Graph, kinds: Vec<String>, seed: u64) -> PyResult<Vec<(String, Vec<usize>)>> {
    let set = extract_all(&g.inner, 0, &kinds_vocab(&kinds)?, &mut stream_rng(seed, 0));
    Ok(set
        .items()
        .iter()
        .map(|s| (s.kind.to_string(), s.nodes.clone()))
        .collect())
}

/// Coverage-balanced sample; returns `(kind, nodes)` in draw order.
#[pyfunction]
#[pyo3(signature = (g, kinds=default_kinds(), thre=1, seed=0))]
fn sample(
    g: &Graph,
    kinds: Vec<String>,
    thre: usize,
    seed: u64,
) -> PyResult<Vec<(String, Vec<usize>)>> {
    let mut rng = stream_rng(seed, 0);
    let set = extract_all(&g.inner, 0, &kinds_vocab(&kinds)?, &mut rng);
    let picks = sample_substructures(
        &set,
        &SamplerParams::for_graph(g.inner.num_nodes, thre),
        &mut rng,
    );
    Ok(picks
        .into_iter()
        .map(|i| {
            let s = set.get(i);
            (s.kind.to_string(), s.nodes.clone())
        })
        .collect())
}

/// One DFS encoding of a small graph: `(order, flat_adj)`.
#[pyfunction]
#[pyo3(signature = (num_nodes, edges, seed=0, s_max=10))]
fn canonical_form(
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    seed: u64,
    s_max: usize,
) -> PyResult<(Vec<usize>, Vec<u8>)> {
    if let Some(&(u, v)) = edges
        .iter()
        .find(|&&(u, v)| u >= num_nodes || v >= num_nodes || u == v)
    {
        return Err(PyValueError::new_err(format!("invalid edge ({u}, {v})")));
    }
    let s = Substructure {
        adj: InducedAdjacency::from_edges(num_nodes, &edges),
        nodes: (0..num_nodes).collect(),
        kind: Kind::Path,
        center: None,
    };
    let f = canonicalize(&s, &mut stream_rng(seed, 0), s_max).map_err(py_err)?;
    Ok((f.perm, f.flat_adj))
}

/// Graphs labeled with their standardized induced-cycle counts.
#[pyfunction]
#[pyo3(signature = (n, min_nodes=8, max_nodes=16, edge_prob=0.25, seed=0))]
fn gen_cycles(
    n: usize,
    min_nodes: usize,
    max_nodes: usize,
    edge_prob: f64,
    seed: u64,
) -> PyResult<Vec<Graph>> {
    let graphs = train::gen_cycle_regression(
        n,
        (min_nodes, max_nodes),
        edge_prob,
        &mut stream_rng(seed, 0),
    )
    .map_err(py_err)?;
    Ok(graphs.into_iter().map(|inner| Graph { inner }).collect())
}

/// Two-block graphs with node labels.
#[pyfunction]
#[pyo3(signature = (n, nodes_per_block=10, p_in=0.3, p_out=0.05, seed=0))]
fn gen_communities(
    n: usize,
    nodes_per_block: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> PyResult<Vec<Graph>> {
    let graphs =
        train::gen_community_nodes(n, nodes_per_block, p_in, p_out, &mut stream_rng(seed, 0))
            .map_err(py_err)?;
    Ok(graphs.into_iter().map(|inner| Graph { inner }).collect())
}

fn inner_graphs(graphs: &[Graph]) -> Vec<deepgraph::Graph> {
    graphs.iter().map(|g| g.inner.clone()).collect()
}

/// Transformer parameters and configuration.
#[pyclass(module = "deepgraph_py")]
pub struct Model {
    params: ModelParams,
    kinds: Vec<String>,
}

#[pymethods]
impl Model {
    /// `classes=None` builds a graph regressor, otherwise a node classifier.
    #[new]
    #[pyo3(signature = (layers=4, heads=4, d_hidden=32, classes=None, variant="full", num_node_feats=16, seed=0, kinds=default_kinds()))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        layers: usize,
        heads: usize,
        d_hidden: usize,
        classes: Option<usize>,
        variant: &str,
        num_node_feats: usize,
        seed: u64,
        kinds: Vec<String>,
    ) -> PyResult<Self> {
        kinds_vocab(&kinds)?;
        let task = match classes {
            None => Task::GraphRegression,
            Some(c) => Task::NodeClassification { classes: c },
        };
        let variant: Variant = variant.parse().map_err(py_err)?;
        let mut cfg = variant.apply(ModelConfig::new(layers, heads, d_hidden, task));
        cfg.num_node_feats = num_node_feats;
        let params = ModelParams::init(cfg, &mut stream_rng(seed, u64::MAX - 1)).map_err(py_err)?;
        Ok(Model { params, kinds })
    }

    #[staticmethod]
    #[pyo3(signature = (path, kinds=default_kinds()))]
    fn load(path: &str, kinds: Vec<String>) -> PyResult<Self> {
        Ok(Model {
            params: load_checkpoint(path).map_err(py_err)?,
            kinds,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_checkpoint(&self.params, path).map_err(py_err)
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.params.config)
    }

    /// Graph-level float, or per-node class logits.
    #[pyo3(signature = (g, seed=0, thre=1))]
    fn predict<'py>(
        &self,
        py: Python<'py>,
        g: &Graph,
        seed: u64,
        thre: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mut rng = stream_rng(seed, 0);
        let set = extract_all(&g.inner, 0, &kinds_vocab(&self.kinds)?, &mut rng);
        let picks = sample_substructures(
            &set,
            &SamplerParams::for_graph(g.inner.num_nodes, thre),
            &mut rng,
        );
        let chosen: Vec<&Substructure> = picks.iter().map(|&i| set.get(i)).collect();
        let (pred, _) = model_forward(&g.inner, &chosen, &self.params, &mut rng).map_err(py_err)?;
        match pred {
            Prediction::Scalar(v) => Ok(v.into_pyobject(py)?.into_any()),
            Prediction::Logits(l) => {
                let rows: Vec<Vec<f64>> = l.rows().into_iter().map(|r| r.to_vec()).collect();
                Ok(rows.into_pyobject(py)?.into_any())
            }
        }
    }

    /// Adam training; returns one dict per epoch.
    #[pyo3(signature = (graphs, epochs=10, batch_size=16, lr=1e-3, seed=0, thre=1, eval_graphs=None))]
    #[allow(clippy::too_many_arguments)]
    fn fit<'py>(
        &mut self,
        py: Python<'py>,
        graphs: Vec<Graph>,
        epochs: usize,
        batch_size: usize,
        lr: f64,
        seed: u64,
        thre: usize,
        eval_graphs: Option<Vec<Graph>>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let vocab = kinds_vocab(&self.kinds)?;
        let train_g = inner_graphs(&graphs);
        let train_s = extract_dataset(&train_g, &vocab, seed);
        let eval = eval_graphs.map(|e| {
            let g = inner_graphs(&e);
            let s = extract_dataset(&g, &vocab, seed);
            (g, s)
        });
        let mut tc = TrainConfig::for_dataset(
            epochs,
            batch_size,
            lr,
            train_g.len(),
            seed,
            self.params.config.task,
        );
        tc.thre = thre;
        let eval_ref = eval.as_ref().map(|(g, s)| (g.as_slice(), s.as_slice()));
        let logs = py
            .detach(|| {
                train::train(
                    &mut self.params,
                    (&train_g, &train_s),
                    eval_ref,
                    &tc,
                    |_| {},
                )
            })
            .map_err(py_err)?;
        logs.iter()
            .map(|l| {
                let d = PyDict::new(py);
                d.set_item("epoch", l.epoch)?;
                d.set_item("train_loss", l.train_loss)?;
                d.set_item("eval_metric", l.eval_metric)?;
                d.set_item("lr", l.lr)?;
                Ok(d)
            })
            .collect()
    }

    /// MAE (regression) or node accuracy (classification).
    #[pyo3(signature = (graphs, seed=0, thre=1))]
    fn evaluate(&self, graphs: Vec<Graph>, seed: u64, thre: usize) -> PyResult<f64> {
        let g = inner_graphs(&graphs);
        let s = extract_dataset(&g, &kinds_vocab(&self.kinds)?, seed);
        train::evaluate(&self.params, &g, &s, seed, thre).map_err(py_err)
    }

    /// Per-layer mean capacity, normalized capacity and token capacity.
    #[pyo3(signature = (graphs, seed=0, thre=1))]
    fn capacity<'py>(
        &self,
        py: Python<'py>,
        graphs: Vec<Graph>,
        seed: u64,
        thre: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let g = inner_graphs(&graphs);
        let s = extract_dataset(&g, &kinds_vocab(&self.kinds)?, seed);
        let curve = capacity_curve(&self.params, &g, &s, seed, thre).map_err(py_err)?;
        json_to_py(py, &curve)
    }
}

/// Largest singular value.
#[pyfunction]
fn spectral_norm(a: Vec<Vec<f64>>) -> PyResult<f64> {
    spectral(&matrix(a)?.view()).map_err(py_err)
}

/// Capacity of hidden states `h` (n x d) under value-output map `w` (d x d')
/// for the patterns given as node sets.
#[pyfunction]
fn attention_capacity(
    h: Vec<Vec<f64>>,
    node_sets: Vec<Vec<usize>>,
    w: Vec<Vec<f64>>,
) -> PyResult<f64> {
    let h = matrix(h)?;
    let e = PatternBasis::from_node_sets(h.nrows(), &node_sets).map_err(py_err)?;
    capacity::attention_capacity(&h.view(), &e, &matrix(w)?.view()).map_err(py_err)
}

/// Monte Carlo bound check. Theorems 1 and 2 draw random stacks up to
/// `depth`, `n`, `m`; theorem 3 uses exactly `n` nodes and `m` substructures.
#[pyfunction]
#[pyo3(signature = (theorem, trials=1000, seed=0, depth=8, n=16, m=5, r_max=None, d=None))]
#[allow(clippy::too_many_arguments)]
fn verify_bounds<'py>(
    py: Python<'py>,
    theorem: u8,
    trials: usize,
    seed: u64,
    depth: usize,
    n: usize,
    m: usize,
    r_max: Option<usize>,
    d: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = ShapeSpec::Random {
        max_depth: depth,
        max_n: n,
        max_m: m,
    };
    match theorem {
        1 | 2 => {
            let mut r = py
                .detach(|| {
                    if theorem == 1 {
                        capacity::verify_theorem1(spec, trials, seed)
                    } else {
                        capacity::verify_theorem2(spec, trials, seed)
                    }
                })
                .map_err(py_err)?;
            r.records.clear();
            json_to_py(py, &r)
        }
        3 => {
            let r = py
                .detach(|| {
                    capacity::verify_theorem3(
                        n,
                        m,
                        r_max.unwrap_or(n / 2),
                        d.unwrap_or(n),
                        trials,
                        seed,
                    )
                })
                .map_err(py_err)?;
            json_to_py(py, &r)
        }
        _ => Err(PyValueError::new_err("theorem must be 1, 2 or 3")),
    }
}

/// Random-weight capacity curves of masked and unmasked models.
#[pyfunction]
#[pyo3(signature = (layers=24, seeds=20, graphs=10, seed=0))]
fn repro_capacity<'py>(
    py: Python<'py>,
    layers: usize,
    seeds: usize,
    graphs: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ReproConfig {
        layers,
        seeds,
        graphs,
        ..ReproConfig::default()
    };
    let r = py
        .detach(|| experiments::repro_capacity(&cfg, seed))
        .map_err(py_err)?;
    json_to_py(py, &r)
}

#[pymodule]
pub fn deepgraph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(cycles, m)?)?;
    m.add_function(wrap_pyfunction!(paths, m)?)?;
    m.add_function(wrap_pyfunction!(stars, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_form, m)?)?;
    m.add_function(wrap_pyfunction!(gen_cycles, m)?)?;
    m.add_function(wrap_pyfunction!(gen_communities, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_norm, m)?)?;
    m.add_function(wrap_pyfunction!(attention_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(verify_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(repro_capacity, m)?)?;
    Ok(())
}
