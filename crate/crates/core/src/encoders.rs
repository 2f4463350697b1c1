//! Graph encoders over Levi graphs: GCN, GAT and GGNN layers driven by a
//! local or deep-traversal neighborhood.

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drg::{DirClass, LeviGraph};
use crate::nn::{bias, matrix, GruCell, NnError, ParamId, ParamStore, Segments, SparseMatrix, Tape, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Per node, the `(j, dir)` pairs it aggregates from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub lists: Vec<Vec<(usize, DirClass)>>,
}

impl Neighborhood {
    pub fn node_count(&self) -> usize {
        self.lists.len()
    }

    pub fn entry_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// Entries of `node` with class `dir`.
    pub fn of(&self, node: usize, dir: DirClass) -> impl Iterator<Item = usize> + '_ {
        self.lists[node]
            .iter()
            .filter(move |(_, d)| *d == dir)
            .map(|(j, _)| *j)
    }

    /// Mean-aggregation matrix over row-stacked `[Default; Reverse; SelfLoop]`
    /// transforms: entry `(i, dir·n + j)` is `1 / |nb(i)|`.
    fn mean_matrix(&self) -> SparseMatrix {
        let n = self.node_count();
        let rows = self
            .lists
            .iter()
            .map(|list| {
                let w = 1.0 / list.len() as f64;
                list.iter().map(|&(j, d)| (d.index() * n + j, w)).collect()
            })
            .collect();
        SparseMatrix::new(3 * n, rows)
    }

    /// Flattened entries: target node, stacked source row, segment lengths.
    fn flat(&self) -> (Vec<usize>, Vec<usize>, Segments) {
        let n = self.node_count();
        let mut targets = Vec::with_capacity(self.entry_count());
        let mut sources = Vec::with_capacity(self.entry_count());
        for (i, list) in self.lists.iter().enumerate() {
            for &(j, d) in list {
                targets.push(i);
                sources.push(d.index() * n + j);
            }
        }
        (targets, sources, Segments::from_lengths(self.lists.iter().map(Vec::len)))
    }
}

fn adjacency(g: &LeviGraph) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let n = g.node_count();
    let mut out = vec![Vec::new(); n];
    let mut inc = vec![Vec::new(); n];
    for (s, d) in g.default_edges() {
        out[s].push(d);
        inc[d].push(s);
    }
    (out, inc)
}

fn push_unique(list: &mut Vec<(usize, DirClass)>, entry: (usize, DirClass)) {
    if !list.contains(&entry) {
        list.push(entry);
    }
}

/// Immediate neighbors: out-neighbors as Default, in-neighbors as Reverse,
/// then the node itself as SelfLoop.
pub fn local_neighborhood(g: &LeviGraph) -> Neighborhood {
    let (out, inc) = adjacency(g);
    let lists = (0..g.node_count())
        .map(|i| {
            let mut list = Vec::new();
            for &j in out[i].iter().filter(|&&j| j != i) {
                push_unique(&mut list, (j, DirClass::Default));
            }
            for &j in inc[i].iter().filter(|&&j| j != i) {
                push_unique(&mut list, (j, DirClass::Reverse));
            }
            list.push((i, DirClass::SelfLoop));
            list
        })
        .collect();
    Neighborhood { lists }
}

/// Nodes reachable from `start` (excluding it), in DFS preorder.
fn dfs(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut order = Vec::new();
    let mut stack: Vec<usize> = adj[start].iter().rev().copied().collect();
    while let Some(v) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        order.push(v);
        stack.extend(adj[v].iter().rev().filter(|&&w| !seen[w]));
    }
    order
}

/// Deep traversal: everything reachable along Default edges as Default,
/// everything that reaches the node as Reverse, then SelfLoop.
pub fn deep_neighborhood(g: &LeviGraph) -> Neighborhood {
    let (out, inc) = adjacency(g);
    let lists = (0..g.node_count())
        .map(|i| {
            let mut list: Vec<(usize, DirClass)> =
                dfs(&out, i).into_iter().map(|j| (j, DirClass::Default)).collect();
            list.extend(dfs(&inc, i).into_iter().map(|j| (j, DirClass::Reverse)));
            list.push((i, DirClass::SelfLoop));
            list
        })
        .collect();
    Neighborhood { lists }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gcn,
    Gat,
    Ggnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodKind {
    Local,
    #[serde(alias = "deep")]
    DeepTraversal,
}

impl std::str::FromStr for EncoderKind {
    type Err = EncoderError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(EncoderKind::Gcn),
            "gat" => Ok(EncoderKind::Gat),
            "ggnn" => Ok(EncoderKind::Ggnn),
            other => Err(EncoderError::ConfigInvalid(format!(
                "unknown encoder `{other}` (expected gcn, gat or ggnn)"
            ))),
        }
    }
}

impl std::str::FromStr for NeighborhoodKind {
    type Err = EncoderError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "local" => Ok(NeighborhoodKind::Local),
            "deep" | "deep_traversal" => Ok(NeighborhoodKind::DeepTraversal),
            other => Err(EncoderError::ConfigInvalid(format!(
                "unknown neighborhood `{other}` (expected local or deep)"
            ))),
        }
    }
}

pub fn neighborhood(g: &LeviGraph, kind: NeighborhoodKind) -> Neighborhood {
    match kind {
        NeighborhoodKind::Local => local_neighborhood(g),
        NeighborhoodKind::DeepTraversal => deep_neighborhood(g),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub neighborhood: NeighborhoodKind,
    pub layers: usize,
    pub hidden: usize,
    pub highway: bool,
    pub attention_heads: usize,
}

impl EncoderConfig {
    /// One layer for deep traversal; two layers with a highway locally.
    pub fn new(kind: EncoderKind, neighborhood: NeighborhoodKind, hidden: usize) -> Self {
        let local = neighborhood == NeighborhoodKind::Local;
        EncoderConfig {
            kind,
            neighborhood,
            layers: if local { 2 } else { 1 },
            hidden,
            highway: local,
            attention_heads: 1,
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.layers == 0 {
            return Err(EncoderError::ConfigInvalid("layers must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(EncoderError::ConfigInvalid("hidden size must be positive".into()));
        }
        if self.kind == EncoderKind::Gat && self.attention_heads == 0 {
            return Err(EncoderError::ConfigInvalid("GAT needs at least one attention head".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Highway {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone)]
struct GatHead {
    w: [ParamId; 3],
    a_query: ParamId,
    a_key: ParamId,
}

#[derive(Debug, Clone)]
enum LayerParams {
    Ggnn { w: [ParamId; 3], gru: GruCell },
    Gcn { w: [ParamId; 3], b: ParamId },
    Gat { heads: Vec<GatHead>, b: ParamId },
}

#[derive(Debug, Clone)]
struct Layer {
    params: LayerParams,
    highway: Option<Highway>,
}

/// Output of one layer: node states, plus attention weights (one column per
/// head, entries in neighborhood order) for GAT.
#[derive(Debug, Clone)]
pub struct LayerOutput {
    pub states: Var,
    pub attention: Vec<Var>,
}

#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// `n × hidden`, rows in node order.
    pub nodes: Var,
    /// `1 × hidden` mean over nodes.
    pub pooled: Var,
}

#[derive(Debug, Clone)]
pub struct GraphEncoder {
    pub config: EncoderConfig,
    layers: Vec<Layer>,
}

const DIR_NAMES: [&str; 3] = ["default", "reverse", "self"];

fn dir_matrices<R: Rng>(
    store: &mut ParamStore,
    prefix: &str,
    d: usize,
    rng: &mut R,
) -> Result<[ParamId; 3], NnError> {
    Ok([
        matrix(store, &format!("{prefix}.w_{}", DIR_NAMES[0]), d, d, rng)?,
        matrix(store, &format!("{prefix}.w_{}", DIR_NAMES[1]), d, d, rng)?,
        matrix(store, &format!("{prefix}.w_{}", DIR_NAMES[2]), d, d, rng)?,
    ])
}

impl GraphEncoder {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        config: EncoderConfig,
        rng: &mut R,
    ) -> Result<Self, EncoderError> {
        config.validate()?;
        let d = config.hidden;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let p = format!("{prefix}.layer{l}");
            let params = match config.kind {
                EncoderKind::Ggnn => LayerParams::Ggnn {
                    w: dir_matrices(store, &p, d, rng)?,
                    gru: GruCell::new(store, &format!("{p}.gru"), d, d, rng)?,
                },
                EncoderKind::Gcn => LayerParams::Gcn {
                    w: dir_matrices(store, &p, d, rng)?,
                    b: bias(store, &format!("{p}.b"), d)?,
                },
                EncoderKind::Gat => {
                    let mut heads = Vec::with_capacity(config.attention_heads);
                    for h in 0..config.attention_heads {
                        let hp = format!("{p}.head{h}");
                        heads.push(GatHead {
                            w: dir_matrices(store, &hp, d, rng)?,
                            a_query: matrix(store, &format!("{hp}.a_query"), d, 1, rng)?,
                            a_key: matrix(store, &format!("{hp}.a_key"), d, 1, rng)?,
                        });
                    }
                    LayerParams::Gat {
                        heads,
                        b: bias(store, &format!("{p}.b"), d)?,
                    }
                }
            };
            let highway = if config.highway {
                Some(Highway {
                    w: matrix(store, &format!("{p}.highway.w"), d, d, rng)?,
                    b: bias(store, &format!("{p}.highway.b"), d)?,
                })
            } else {
                None
            };
            layers.push(Layer { params, highway });
        }
        Ok(GraphEncoder { config, layers })
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Row-stacks `h · W_dir` for the three direction classes.
    fn stacked(tape: &mut Tape, store: &ParamStore, h: Var, w: &[ParamId; 3]) -> Var {
        let parts: Vec<Var> = w
            .iter()
            .map(|&id| {
                let m = tape.param(store, id);
                tape.matmul(h, m)
            })
            .collect();
        tape.concat_rows(&parts)
    }

    pub fn layer(
        &self,
        index: usize,
        tape: &mut Tape,
        store: &ParamStore,
        h: Var,
        nb: &Neighborhood,
    ) -> Result<LayerOutput, EncoderError> {
        let (n, d) = tape.dims(h);
        if n != nb.node_count() || d != self.config.hidden {
            return Err(NnError::ShapeMismatch {
                expected: vec![nb.node_count(), self.config.hidden],
                got: vec![n, d],
            }
            .into());
        }
        let layer = &self.layers[index];
        let mut attention = Vec::new();
        let out = match &layer.params {
            LayerParams::Ggnn { w, gru } => {
                let stacked = Self::stacked(tape, store, h, w);
                let m = tape.sparse_mul(Rc::new(nb.mean_matrix()), stacked);
                gru.step(tape, store, m, h)?
            }
            LayerParams::Gcn { w, b } => {
                let stacked = Self::stacked(tape, store, h, w);
                let m = tape.sparse_mul(Rc::new(nb.mean_matrix()), stacked);
                let b = tape.param(store, *b);
                let pre = tape.add(m, b);
                tape.relu(pre)
            }
            LayerParams::Gat { heads, b } => {
                let (targets, sources, segs) = nb.flat();
                let (targets, sources, segs) = (Rc::new(targets), Rc::new(sources), Rc::new(segs));
                let mut sum = None;
                for head in heads {
                    let stacked = Self::stacked(tape, store, h, &head.w);
                    let aq = tape.param(store, head.a_query);
                    let ak = tape.param(store, head.a_key);
                    let q = tape.matmul(h, aq);
                    let k = tape.matmul(stacked, ak);
                    let qe = tape.gather_rows(q, targets.clone());
                    let ke = tape.gather_rows(k, sources.clone());
                    let logits = tape.add(qe, ke);
                    let logits = tape.leaky_relu(logits, 0.2);
                    let alpha = tape.segment_softmax(logits, segs.clone());
                    attention.push(alpha);
                    let values = tape.gather_rows(stacked, sources.clone());
                    let agg = tape.segment_weighted_sum(alpha, values, segs.clone());
                    sum = Some(match sum {
                        None => agg,
                        Some(s) => tape.add(s, agg),
                    });
                }
                let mut agg = sum.expect("at least one head");
                if heads.len() > 1 {
                    agg = tape.scale(agg, 1.0 / heads.len() as f64);
                }
                let b = tape.param(store, *b);
                let pre = tape.add(agg, b);
                tape.relu(pre)
            }
        };
        let states = match &layer.highway {
            Some(hw) => {
                let w = tape.param(store, hw.w);
                let b = tape.param(store, hw.b);
                let gate = tape.matmul(h, w);
                let gate = tape.add(gate, b);
                let gate = tape.sigmoid(gate);
                let carried = tape.mul(gate, out);
                let rest = tape.one_minus(gate);
                let kept = tape.mul(rest, h);
                tape.add(carried, kept)
            }
            None => out,
        };
        Ok(LayerOutput { states, attention })
    }

    /// Runs every layer from initial node states `h0` and mean-pools.
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        h0: Var,
        nb: &Neighborhood,
    ) -> Result<Encoded, EncoderError> {
        let mut h = h0;
        for l in 0..self.layers.len() {
            h = self.layer(l, tape, store, h, nb)?.states;
        }
        let pooled = tape.mean_rows(h);
        Ok(Encoded { nodes: h, pooled })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drg::LeviNodeKind;
    use crate::nn::{grad_check, Tensor};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(n: usize, edges: &[(usize, usize)]) -> LeviGraph {
        let mut g = LeviGraph {
            nodes: Vec::new(),
            edges: Vec::new(),
            alignment: Vec::new(),
        };
        for i in 0..n {
            g.push_node(format!("n{i}"), LeviNodeKind::Concept);
        }
        for &(s, d) in edges {
            g.push_default_edge(s, d);
        }
        for i in 0..n {
            g.push_self_loop(i);
        }
        g
    }

    fn sorted(nb: &Neighborhood, i: usize) -> Vec<(usize, DirClass)> {
        let mut v = nb.lists[i].clone();
        v.sort();
        v
    }

    #[test]
    fn path_local_neighborhood() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let nb = local_neighborhood(&g);
        assert_eq!(
            sorted(&nb, 1),
            vec![(0, DirClass::Reverse), (1, DirClass::SelfLoop), (2, DirClass::Default)]
        );
    }

    #[test]
    fn isolated_node_has_only_self() {
        let g = graph(2, &[]);
        assert_eq!(local_neighborhood(&g).lists[0], vec![(0, DirClass::SelfLoop)]);
        assert_eq!(deep_neighborhood(&g).lists[1], vec![(1, DirClass::SelfLoop)]);
    }

    #[test]
    fn deep_path_reaches_everything_downstream() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let nb = deep_neighborhood(&g);
        let fwd: Vec<usize> = nb.of(0, DirClass::Default).collect();
        assert_eq!(fwd, vec![1, 2, 3]);
        let rev: Vec<usize> = nb.of(3, DirClass::Reverse).collect();
        assert_eq!(rev, vec![2, 1, 0]);
    }

    #[test]
    fn deep_cycle_terminates() {
        // wolf -> TOPIC -> wolf
        let g = graph(2, &[(0, 1), (1, 0)]);
        let nb = deep_neighborhood(&g);
        assert_eq!(
            sorted(&nb, 0),
            vec![(0, DirClass::SelfLoop), (1, DirClass::Default), (1, DirClass::Reverse)]
        );
    }

    fn random_graph(n: usize, edges: Vec<(usize, usize)>) -> LeviGraph {
        let edges: Vec<(usize, usize)> = edges.into_iter().map(|(a, b)| (a % n, b % n)).collect();
        graph(n, &edges)
    }

    proptest! {
        #[test]
        fn local_matches_adjacency_scan(n in 1usize..20, edges in prop::collection::vec((0usize..20, 0usize..20), 0..40)) {
            let g = random_graph(n, edges);
            let nb = local_neighborhood(&g);
            for i in 0..n {
                let mut expected = Vec::new();
                for j in 0..n {
                    if j == i { continue; }
                    if g.edges.iter().any(|e| e.dir == DirClass::Default && e.src == i && e.dst == j) {
                        expected.push((j, DirClass::Default));
                    }
                    if g.edges.iter().any(|e| e.dir == DirClass::Default && e.src == j && e.dst == i) {
                        expected.push((j, DirClass::Reverse));
                    }
                }
                expected.push((i, DirClass::SelfLoop));
                expected.sort();
                prop_assert_eq!(sorted(&nb, i), expected);
            }
        }

        #[test]
        fn deep_matches_floyd_warshall(n in 1usize..30, edges in prop::collection::vec((0usize..30, 0usize..30), 0..60)) {
            let g = random_graph(n, edges);
            let mut reach = vec![vec![false; n]; n];
            for (s, d) in g.default_edges() {
                reach[s][d] = true;
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        if reach[i][k] && reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
            let nb = deep_neighborhood(&g);
            for i in 0..n {
                let mut expected = Vec::new();
                for j in 0..n {
                    if j != i && reach[i][j] { expected.push((j, DirClass::Default)); }
                    if j != i && reach[j][i] { expected.push((j, DirClass::Reverse)); }
                }
                expected.push((i, DirClass::SelfLoop));
                expected.sort();
                prop_assert_eq!(sorted(&nb, i), expected);
            }
        }
    }

    fn encoder(kind: EncoderKind, nbk: NeighborhoodKind, d: usize, seed: u64) -> (GraphEncoder, ParamStore) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut cfg = EncoderConfig::new(kind, nbk, d);
        if kind == EncoderKind::Gat {
            cfg.attention_heads = 2;
        }
        let enc = GraphEncoder::new(&mut store, "enc", cfg, &mut rng).unwrap();
        (enc, store)
    }

    fn run(enc: &GraphEncoder, store: &ParamStore, g: &LeviGraph, h0: &[f64]) -> Vec<f64> {
        let nb = neighborhood(g, enc.config.neighborhood);
        let mut t = Tape::new();
        let h = t.constant(g.node_count(), enc.config.hidden, h0.to_vec());
        let out = enc.encode(&mut t, store, h, &nb).unwrap();
        t.value(out.nodes).to_vec()
    }

    fn zero(store: &mut ParamStore, needle: &str) {
        for p in store.iter_mut().filter(|p| p.name.contains(needle)) {
            p.tensor.values.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[test]
    fn ggnn_zero_messages_reduce_to_gru_of_zero() {
        let (enc, mut store) = encoder(EncoderKind::Ggnn, NeighborhoodKind::DeepTraversal, 3, 1);
        zero(&mut store, ".w_");
        let g = graph(3, &[(0, 1), (1, 2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h0: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = run(&enc, &store, &g, &h0);
        let LayerParams::Ggnn { gru, .. } = &enc.layers[0].params else { unreachable!() };
        let mut t = Tape::new();
        let h = t.constant(3, 3, h0.clone());
        let m = t.zeros(3, 3);
        let expected = gru.step(&mut t, &store, m, h).unwrap();
        assert_eq!(t.value(expected), out.as_slice());
    }

    fn set_scalar(store: &mut ParamStore, name: &str, v: f64) {
        let id = store.id(name).unwrap_or_else(|| panic!("no parameter {name}"));
        store.get_mut(id).tensor.values = vec![v];
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn ggnn_two_node_scalar_oracle() {
        let (enc, mut store) = encoder(EncoderKind::Ggnn, NeighborhoodKind::DeepTraversal, 1, 3);
        let (wd, wr, ws) = (0.7, -0.4, 0.3);
        set_scalar(&mut store, "enc.layer0.w_default", wd);
        set_scalar(&mut store, "enc.layer0.w_reverse", wr);
        set_scalar(&mut store, "enc.layer0.w_self", ws);
        let gru = [
            ("update", (0.2, -0.5, 0.1)),
            ("reset", (0.6, 0.3, -0.2)),
            ("candidate", (-0.8, 0.9, 0.05)),
        ];
        for (gate, (w, u, b)) in gru {
            set_scalar(&mut store, &format!("enc.layer0.gru.{gate}.w"), w);
            set_scalar(&mut store, &format!("enc.layer0.gru.{gate}.u"), u);
            set_scalar(&mut store, &format!("enc.layer0.gru.{gate}.b"), b);
        }
        let (ha, hb) = (0.5, -1.2);
        // a -> b: a sees b forward, b sees a in reverse.
        let ma = (wd * hb + ws * ha) / 2.0;
        let mb = (wr * ha + ws * hb) / 2.0;
        let gru_ref = |m: f64, h: f64| {
            let (zw, zu, zb) = gru[0].1;
            let (rw, ru, rb) = gru[1].1;
            let (nw, nu, nbias) = gru[2].1;
            let z = sig(zw * m + zu * h + zb);
            let r = sig(rw * m + ru * h + rb);
            let cand = (nw * m + nu * (r * h) + nbias).tanh();
            z * h + (1.0 - z) * cand
        };
        let out = run(&enc, &store, &graph(2, &[(0, 1)]), &[ha, hb]);
        assert!((out[0] - gru_ref(ma, ha)).abs() < 1e-14);
        assert!((out[1] - gru_ref(mb, hb)).abs() < 1e-14);
    }

    #[test]
    fn gcn_zero_weights_and_scalar_oracle() {
        let (enc, mut store) = encoder(EncoderKind::Gcn, NeighborhoodKind::Local, 1, 4);
        let g = graph(2, &[(0, 1)]);
        set_scalar(&mut store, "enc.layer0.highway.w", 0.0);
        set_scalar(&mut store, "enc.layer0.highway.b", 0.0);
        zero(&mut store, "enc.layer1");
        zero(&mut store, "enc.layer0.w_");
        let out = run(&enc, &store, &g, &[0.8, -0.6]);
        // layer0 output relu(0) = 0 mixed half with input; layer1 zero weights
        // and zero highway again halve.
        assert!((out[0] - 0.2).abs() < 1e-15);
        assert!((out[1] + 0.15).abs() < 1e-15);

        let (wd, wr, ws, b) = (1.5, -0.5, 0.25, 0.1);
        let (enc, mut store) = encoder(EncoderKind::Gcn, NeighborhoodKind::DeepTraversal, 1, 4);
        set_scalar(&mut store, "enc.layer0.w_default", wd);
        set_scalar(&mut store, "enc.layer0.w_reverse", wr);
        set_scalar(&mut store, "enc.layer0.w_self", ws);
        set_scalar(&mut store, "enc.layer0.b", b);
        let (ha, hb) = (0.4, 0.9);
        let out = run(&enc, &store, &g, &[ha, hb]);
        assert!((out[0] - ((wd * hb + ws * ha) / 2.0 + b).max(0.0)).abs() < 1e-15);
        assert!((out[1] - ((wr * ha + ws * hb) / 2.0 + b).max(0.0)).abs() < 1e-15);
    }

    #[test]
    fn gat_uniform_logits_give_mean_aggregation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let mut cfg = EncoderConfig::new(EncoderKind::Gat, NeighborhoodKind::DeepTraversal, 3);
        cfg.highway = false;
        let gat = GraphEncoder::new(&mut store, "gat", cfg.clone(), &mut rng).unwrap();
        zero(&mut store, ".a_");
        let mut gcn_store = ParamStore::new();
        cfg.kind = EncoderKind::Gcn;
        let gcn = GraphEncoder::new(&mut gcn_store, "gat", cfg, &mut rng).unwrap();
        for name in ["w_default", "w_reverse", "w_self", "b"] {
            let full = format!("gat.layer0.{name}");
            let src = store.id(&format!("gat.layer0.head0.{name}")).or_else(|| store.id(&full)).unwrap();
            let dst = gcn_store.id(&full).unwrap();
            gcn_store.get_mut(dst).tensor.values = store.get(src).tensor.values.clone();
        }
        let g = graph(4, &[(0, 1), (1, 2), (3, 1)]);
        let h0: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = run(&gat, &store, &g, &h0);
        let b = run(&gcn, &gcn_store, &g, &h0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gat_attention_sums_to_one_per_node() {
        let (enc, store) = encoder(EncoderKind::Gat, NeighborhoodKind::Local, 4, 6);
        let g = graph(5, &[(0, 1), (1, 2), (2, 0), (3, 4)]);
        let nb = local_neighborhood(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = Tape::new();
        let h = t.constant(5, 4, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let out = enc.layer(0, &mut t, &store, h, &nb).unwrap();
        assert_eq!(out.attention.len(), 2);
        for alpha in out.attention {
            let values = t.value(alpha);
            let mut offset = 0;
            for list in &nb.lists {
                let s: f64 = values[offset..offset + list.len()].iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                offset += list.len();
            }
        }
    }

    fn permute(g: &LeviGraph, perm: &[usize]) -> LeviGraph {
        let n = g.node_count();
        let edges: Vec<(usize, usize)> = g.default_edges().map(|(s, d)| (perm[s], perm[d])).collect();
        graph(n, &edges)
    }

    #[test]
    fn every_layer_is_permutation_equivariant() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 1), (4, 5), (0, 4)]);
        let perm = [3, 5, 0, 1, 4, 2];
        let gp = permute(&g, &perm);
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h0: Vec<f64> = (0..6 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut hp = vec![0.0; 6 * d];
        for i in 0..6 {
            hp[perm[i] * d..(perm[i] + 1) * d].copy_from_slice(&h0[i * d..(i + 1) * d]);
        }
        for kind in [EncoderKind::Gcn, EncoderKind::Gat, EncoderKind::Ggnn] {
            for nbk in [NeighborhoodKind::Local, NeighborhoodKind::DeepTraversal] {
                let (enc, store) = encoder(kind, nbk, d, 9);
                let a = run(&enc, &store, &g, &h0);
                let b = run(&enc, &store, &gp, &hp);
                for i in 0..6 {
                    for k in 0..d {
                        assert!((a[i * d + k] - b[perm[i] * d + k]).abs() < 1e-12, "{kind:?} {nbk:?}");
                    }
                }
            }
        }
    }

    fn depends_on(enc: &GraphEncoder, store: &ParamStore, g: &LeviGraph, node: usize, source: usize) -> bool {
        let d = enc.config.hidden;
        let n = g.node_count();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h0: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut h1 = h0.clone();
        h1[source * d..(source + 1) * d].iter_mut().for_each(|v| *v += 0.5);
        let a = run(enc, store, g, &h0);
        let b = run(enc, store, g, &h1);
        (0..d).any(|k| (a[node * d + k] - b[node * d + k]).abs() > 1e-12)
    }

    #[test]
    fn receptive_fields() {
        let path3 = graph(3, &[(0, 1), (1, 2)]);
        let path4 = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let (local2, s) = encoder(EncoderKind::Ggnn, NeighborhoodKind::Local, 3, 10);
        assert!(depends_on(&local2, &s, &path3, 0, 2));
        assert!(!depends_on(&local2, &s, &path4, 0, 3));

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut store = ParamStore::new();
        let mut cfg = EncoderConfig::new(EncoderKind::Ggnn, NeighborhoodKind::Local, 3);
        cfg.layers = 1;
        let local1 = GraphEncoder::new(&mut store, "enc", cfg, &mut rng).unwrap();
        assert!(!depends_on(&local1, &store, &path3, 0, 2));

        for kind in [EncoderKind::Gcn, EncoderKind::Gat, EncoderKind::Ggnn] {
            let (deep, s) = encoder(kind, NeighborhoodKind::DeepTraversal, 8, 11);
            assert_eq!(deep.layer_count(), 1);
            assert!(depends_on(&deep, &s, &path4, 0, 3), "{kind:?}");
            assert!(depends_on(&deep, &s, &path4, 3, 0), "{kind:?}");
        }
    }

    #[test]
    fn deep_output_ignores_visit_order() {
        let g = graph(7, &[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (4, 1), (5, 6), (6, 0)]);
        let (enc, store) = encoder(EncoderKind::Ggnn, NeighborhoodKind::DeepTraversal, 4, 12);
        let nb = deep_neighborhood(&g);
        let mut shuffled = nb.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for list in &mut shuffled.lists {
            list.shuffle(&mut rng);
        }
        let h0: Vec<f64> = (0..28).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eval = |nb: &Neighborhood| {
            let mut t = Tape::new();
            let h = t.constant(7, 4, h0.clone());
            let out = enc.encode(&mut t, &store, h, nb).unwrap();
            t.value(out.nodes).to_vec()
        };
        for (a, b) in eval(&nb).iter().zip(eval(&shuffled)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_node_pool_is_its_state() {
        let (enc, store) = encoder(EncoderKind::Gcn, NeighborhoodKind::Local, 3, 14);
        let g = graph(1, &[]);
        let nb = local_neighborhood(&g);
        let mut t = Tape::new();
        let h = t.constant(1, 3, vec![0.1, -0.2, 0.3]);
        let out = enc.encode(&mut t, &store, h, &nb).unwrap();
        assert_eq!(t.value(out.nodes), t.value(out.pooled));
    }

    #[test]
    fn config_validation() {
        let mut cfg = EncoderConfig::new(EncoderKind::Gat, NeighborhoodKind::Local, 8);
        assert!(cfg.validate().is_ok());
        cfg.attention_heads = 0;
        assert!(matches!(cfg.validate(), Err(EncoderError::ConfigInvalid(_))));
        cfg.attention_heads = 1;
        cfg.layers = 0;
        assert!(cfg.validate().is_err());
        assert_eq!("deep".parse::<NeighborhoodKind>().unwrap(), NeighborhoodKind::DeepTraversal);
        assert!("transformer".parse::<EncoderKind>().is_err());
    }

    #[test]
    fn wrong_state_shape_rejected() {
        let (enc, store) = encoder(EncoderKind::Ggnn, NeighborhoodKind::Local, 3, 15);
        let g = graph(2, &[(0, 1)]);
        let nb = local_neighborhood(&g);
        let mut t = Tape::new();
        let h = t.constant(3, 3, vec![0.0; 9]);
        assert!(matches!(
            enc.encode(&mut t, &store, h, &nb),
            Err(EncoderError::Nn(NnError::ShapeMismatch { .. }))
        ));
    }

    /// Gradient check for a full encoder plus mean pool on a six-node cyclic
    /// graph, with the input states as trainable leaves.
    pub(crate) fn encoder_grad_error(kind: EncoderKind, nbk: NeighborhoodKind) -> f64 {
        let g = graph(6, &[(0, 1), (1, 2), (2, 0), (2, 3), (4, 3), (5, 4)]);
        let nb = neighborhood(&g, nbk);
        let (enc, mut store) = encoder(kind, nbk, 3, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h0 = store.add("h0", Tensor::glorot(6, 3, &mut rng)).unwrap();
        grad_check(
            |t, s| {
                let h = t.param(s, h0);
                let out = enc.encode(t, s, h, &nb).unwrap();
                let sq = t.mul(out.nodes, out.nodes);
                let a = t.sum(sq);
                let b = t.sum(out.pooled);
                t.add(a, b)
            },
            &mut store,
            1e-5,
        )
    }

    #[test]
    fn layers_pass_gradient_check() {
        for kind in [EncoderKind::Gcn, EncoderKind::Gat, EncoderKind::Ggnn] {
            for nbk in [NeighborhoodKind::Local, NeighborhoodKind::DeepTraversal] {
                let err = encoder_grad_error(kind, nbk);
                assert!(err < 1e-4, "{kind:?} {nbk:?}: {err}");
            }
        }
    }
}
