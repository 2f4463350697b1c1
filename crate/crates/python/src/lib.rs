use std::fs;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ::tfagen::drg::{build_drg, linearize, to_levi, DirClass};
use ::tfagen::encoders::{EncoderKind, NeighborhoodKind};
use ::tfagen::eval::{self, VoiceVerdict};
use ::tfagen::pipeline::{augment, convert_corpus, Augmentation, GraphRecord};
use ::tfagen::sbn::{load_corpus, parse_sbn};
use ::tfagen::seq2seq::{self, Graph2Seq, ModelConfig, TrainConfig};
use ::tfagen::tfa::{detect_voice, Voice};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn voice_name(v: Voice) -> &'static str {
    match v {
        Voice::Active => "active",
        Voice::Passive => "passive",
        Voice::NotTransitive => "not_transitive",
    }
}

/// A Levi graph with its reference sentence and voice annotation.
#[pyclass(name = "Graph", module = "tfagen", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: GraphRecord,
}

#[pymethods]
impl PyGraph {
    /// Parses SBN text and converts it to a Levi graph.
    #[new]
    #[pyo3(signature = (sbn, reference = String::new(), source_id = "doc".to_string()))]
    fn new(sbn: &str, reference: String, source_id: String) -> PyResult<Self> {
        let doc = parse_sbn(sbn, &source_id).map_err(value_err)?;
        let drg = build_drg(&doc);
        let voice = detect_voice(&drg).ok();
        Ok(PyGraph {
            inner: GraphRecord {
                source_id,
                graph: to_levi(&drg),
                reference,
                voice,
                tfa: None,
                tag: None,
            },
        })
    }

    #[getter]
    fn source_id(&self) -> &str {
        &self.inner.source_id
    }

    #[getter]
    fn reference(&self) -> &str {
        &self.inner.reference
    }

    /// "active", "passive", "not_transitive", or None when ambiguous.
    #[getter]
    fn voice(&self) -> Option<&'static str> {
        self.inner.voice.map(|v| voice_name(v.voice))
    }

    /// Subject role of the passive counterpart, e.g. "Patient".
    #[getter]
    fn pair(&self) -> Option<&'static str> {
        self.inner.voice.and_then(|v| v.pair).map(|p| p.role())
    }

    /// Voice requested by the TFA marker, else the detected voice.
    #[getter]
    fn expected_voice(&self) -> &'static str {
        voice_name(self.inner.expected_voice().voice)
    }

    #[getter]
    fn tag(&self) -> Option<&str> {
        self.inner.tag.as_deref()
    }

    #[getter]
    fn strategy(&self) -> Option<&'static str> {
        self.inner.tfa.map(|s| s.strategy.name())
    }

    #[getter]
    fn topic_node(&self) -> Option<usize> {
        self.inner.tfa.map(|s| s.topic_node)
    }

    /// Node tokens in node order.
    fn tokens(&self) -> Vec<String> {
        linearize(&self.inner.graph)
    }

    /// `(src, dst)` pairs of the Default edges.
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.graph.default_edges().collect()
    }

    fn edge_counts(&self) -> (usize, usize, usize) {
        let g = &self.inner.graph;
        (
            g.count_dir(DirClass::Default),
            g.count_dir(DirClass::Reverse),
            g.count_dir(DirClass::SelfLoop),
        )
    }

    /// Target tokens of the reference.
    fn target(&self) -> Vec<String> {
        self.inner.to_example().target
    }

    /// Copy with a TFA marker: strategy is none, ctc, btc or rtr.
    #[pyo3(signature = (strategy, flip = false))]
    fn augment(&self, strategy: &str, flip: bool) -> PyResult<PyGraph> {
        let aug: Augmentation = strategy.parse().map_err(PyValueError::new_err)?;
        Ok(PyGraph {
            inner: augment(&self.inner, aug, flip),
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<PyGraph> {
        Ok(PyGraph {
            inner: serde_json::from_str(json).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.graph.node_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(source_id={:?}, nodes={}, voice={:?})",
            self.inner.source_id,
            self.inner.graph.node_count(),
            self.voice()
        )
    }
}

/// Graph-to-sequence model.
#[pyclass(name = "Model", module = "tfagen", frozen)]
struct PyModel {
    inner: Graph2Seq,
}

#[pymethods]
impl PyModel {
    /// Trains on `graphs` (their references are the targets).
    #[staticmethod]
    #[pyo3(signature = (
        graphs, dev = Vec::new(), encoder = "ggnn", neighborhood = "local", hidden = 64,
        epochs = 30, batch_size = 32, dropout = 0.5, copy = true, seed = 1
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        graphs: Vec<PyRef<'_, PyGraph>>,
        dev: Vec<PyRef<'_, PyGraph>>,
        encoder: &str,
        neighborhood: &str,
        hidden: usize,
        epochs: usize,
        batch_size: usize,
        dropout: f64,
        copy: bool,
        seed: u64,
    ) -> PyResult<PyModel> {
        let kind: EncoderKind = encoder.parse().map_err(value_err)?;
        let nb: NeighborhoodKind = neighborhood.parse().map_err(value_err)?;
        let mut cfg = ModelConfig::new(kind, nb, hidden, hidden);
        cfg.dropout = dropout;
        cfg.copy = copy;
        let train_cfg = TrainConfig {
            epochs,
            batch_size,
            ..Default::default()
        };
        let train_set: Vec<_> = graphs.iter().map(|g| g.inner.to_example()).collect();
        let dev_set: Vec<_> = dev.iter().map(|g| g.inner.to_example()).collect();
        let outcome = py
            .detach(|| seq2seq::train(&train_set, &dev_set, &cfg, &train_cfg, seed))
            .map_err(value_err)?;
        Ok(PyModel { inner: outcome.model })
    }

    #[pyo3(signature = (graph, max_len = None))]
    fn generate(&self, graph: PyRef<'_, PyGraph>, max_len: Option<usize>) -> PyResult<Vec<String>> {
        let max_len = max_len.unwrap_or(self.inner.config.max_len);
        self.inner.generate(&graph.inner.graph, max_len).map_err(value_err)
    }

    /// Mean per-token cross-entropy of the graph's reference.
    fn loss(&self, graph: PyRef<'_, PyGraph>) -> PyResult<f64> {
        let ex = graph.inner.to_example();
        let (total, n) = self.inner.evaluate_loss(&ex.graph, &ex.target).map_err(value_err)?;
        Ok(total / n.max(1) as f64)
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.store.iter().map(|p| p.tensor.values.len()).sum()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<PyModel> {
        Ok(PyModel {
            inner: Graph2Seq::from_json(json).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        fs::write(path, self.inner.to_json()).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<PyModel> {
        let json = fs::read_to_string(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Self::from_json(&json)
    }
}

/// Loads an SBN manifest; returns the graphs and conversion statistics as JSON.
#[pyfunction]
fn read_manifest(path: &str) -> PyResult<(Vec<PyGraph>, String)> {
    let corpus = load_corpus(std::path::Path::new(path)).map_err(value_err)?;
    let (records, stats) = convert_corpus(&corpus);
    let graphs = records.into_iter().map(|inner| PyGraph { inner }).collect();
    Ok((graphs, serde_json::to_string(&stats).map_err(value_err)?))
}

/// Template corpus of `(id, sbn, reference)` triples.
#[pyfunction]
#[pyo3(signature = (n, seed = 1))]
fn synth_corpus(n: usize, seed: u64) -> Vec<(String, String, String)> {
    ::tfagen::synth::generate_corpus(n, seed)
        .into_iter()
        .map(|p| (p.id, p.sbn, p.reference))
        .collect()
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    ::tfagen::text::tokenize(text)
}

#[pyfunction]
fn bleu(hypotheses: Vec<Vec<String>>, references: Vec<Vec<String>>) -> PyResult<f64> {
    eval::bleu(&hypotheses, &references).map_err(value_err)
}

#[pyfunction]
fn meteor_lite(hypotheses: Vec<Vec<String>>, references: Vec<Vec<String>>) -> PyResult<f64> {
    eval::meteor_lite(&hypotheses, &references).map_err(value_err)
}

/// "active", "passive" or "unknown".
#[pyfunction]
fn voice_heuristic(tokens: Vec<String>) -> &'static str {
    match eval::voice_heuristic(&tokens) {
        VoiceVerdict::Active => "active",
        VoiceVerdict::Passive => "passive",
        VoiceVerdict::Unknown => "unknown",
    }
}

#[pymodule]
#[pyo3(name = "tfagen")]
fn tfagen_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(read_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(meteor_lite, m)?)?;
    m.add_function(wrap_pyfunction!(voice_heuristic, m)?)?;
    Ok(())
}
