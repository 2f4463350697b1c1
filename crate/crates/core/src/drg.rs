//! Discourse representation graphs and their extended Levi form.

use std::collections::HashMap;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::sbn::{NodeAtom, SbnDocument, SlotTarget, Synset};

/// Label used for box membership edges.
pub const MEMBER_LABEL: &str = "member";
/// Token carried by box nodes.
pub const BOX_TOKEN: &str = "Box";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrgNode {
    Concept(Synset),
    Constant(String),
    Box(usize),
}

impl DrgNode {
    pub fn token(&self) -> String {
        match self {
            DrgNode::Concept(s) => s.to_string(),
            DrgNode::Constant(c) => c.clone(),
            DrgNode::Box(_) => BOX_TOKEN.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrgEdge {
    pub src: usize,
    pub label: String,
    pub dst: usize,
    /// Signed SBN offset of the slot that produced this edge, if any.
    pub offset: Option<i32>,
}

/// Directed labeled graph built from one SBN document.
///
/// Node order: line heads in line order, then one box node per box, then
/// constants introduced by slots. Edge order: slot edges in line order,
/// then membership edges, then box-to-box relation edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Drg {
    pub nodes: Vec<DrgNode>,
    pub edges: Vec<DrgEdge>,
    /// SBN line index → head node (None for relation lines).
    pub line_nodes: Vec<Option<usize>>,
    /// Box id → box node.
    pub box_nodes: Vec<usize>,
}

impl Drg {
    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = &DrgEdge> {
        self.edges.iter().filter(move |e| e.src == node)
    }
}

pub fn build_drg(doc: &SbnDocument) -> Drg {
    let mut nodes = Vec::new();
    let mut line_nodes = Vec::with_capacity(doc.lines.len());
    for line in &doc.lines {
        let node = match &line.head {
            NodeAtom::Synset(s) => Some(DrgNode::Concept(s.clone())),
            NodeAtom::Constant(c) => Some(DrgNode::Constant(c.text.clone())),
            NodeAtom::Relation(_) => None,
        };
        line_nodes.push(node.map(|n| {
            nodes.push(n);
            nodes.len() - 1
        }));
    }
    let box_nodes: Vec<usize> = (0..doc.box_count())
        .map(|b| {
            nodes.push(DrgNode::Box(b));
            nodes.len() - 1
        })
        .collect();

    let mut edges = Vec::new();
    for (i, line) in doc.lines.iter().enumerate() {
        let Some(owner) = line_nodes[i] else { continue };
        for slot in &line.slots {
            match &slot.target {
                SlotTarget::RelativeIndex(k) => {
                    let target = doc
                        .resolve(i, *k)
                        .and_then(|t| line_nodes[t])
                        .expect("parser guarantees resolvable references");
                    edges.push(DrgEdge {
                        src: owner,
                        label: slot.label.clone(),
                        dst: target,
                        offset: Some(*k),
                    });
                }
                SlotTarget::Constant(c) => {
                    nodes.push(DrgNode::Constant(c.text.clone()));
                    edges.push(DrgEdge {
                        src: owner,
                        label: slot.label.clone(),
                        dst: nodes.len() - 1,
                        offset: None,
                    });
                }
            }
        }
    }
    for (i, line) in doc.lines.iter().enumerate() {
        if let Some(head) = line_nodes[i] {
            edges.push(DrgEdge {
                src: box_nodes[line.box_id],
                label: MEMBER_LABEL.to_string(),
                dst: head,
                offset: None,
            });
        }
    }
    for line in &doc.lines {
        if let NodeAtom::Relation(name) = &line.head {
            let back = line.box_ref.unwrap_or(1);
            edges.push(DrgEdge {
                src: box_nodes[line.box_id - back],
                label: name.clone(),
                dst: box_nodes[line.box_id],
                offset: None,
            });
        }
    }
    Drg {
        nodes,
        edges,
        line_nodes,
        box_nodes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeviNodeKind {
    Concept,
    Constant,
    Box,
    /// A former edge label.
    Label,
}

impl LeviNodeKind {
    pub fn is_original(self) -> bool {
        self != LeviNodeKind::Label
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeviNode {
    pub token: String,
    pub kind: LeviNodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirClass {
    Default,
    Reverse,
    #[serde(rename = "self")]
    SelfLoop,
}

impl DirClass {
    pub const ALL: [DirClass; 3] = [DirClass::Default, DirClass::Reverse, DirClass::SelfLoop];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeviEdge {
    pub src: usize,
    pub dst: usize,
    pub dir: DirClass,
}

/// Unlabeled directed graph where every labeled edge became a label node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeviGraph {
    pub nodes: Vec<LeviNode>,
    pub edges: Vec<LeviEdge>,
    /// Drg node index → Levi node index.
    pub alignment: Vec<usize>,
}

impl LeviGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn push_node(&mut self, token: impl Into<String>, kind: LeviNodeKind) -> usize {
        self.nodes.push(LeviNode {
            token: token.into(),
            kind,
        });
        self.nodes.len() - 1
    }

    /// Adds a Default edge together with its Reverse mirror.
    pub fn push_default_edge(&mut self, src: usize, dst: usize) {
        self.edges.push(LeviEdge {
            src,
            dst,
            dir: DirClass::Default,
        });
        self.edges.push(LeviEdge {
            src: dst,
            dst: src,
            dir: DirClass::Reverse,
        });
    }

    pub fn push_self_loop(&mut self, node: usize) {
        self.edges.push(LeviEdge {
            src: node,
            dst: node,
            dir: DirClass::SelfLoop,
        });
    }

    pub fn default_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .iter()
            .filter(|e| e.dir == DirClass::Default)
            .map(|e| (e.src, e.dst))
    }

    pub fn count_dir(&self, dir: DirClass) -> usize {
        self.edges.iter().filter(|e| e.dir == dir).count()
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.default_edges()
            .filter(move |&(s, _)| s == node)
            .map(|(_, d)| d)
    }

    pub fn predecessors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.default_edges()
            .filter(move |&(_, d)| d == node)
            .map(|(s, _)| s)
    }

    /// Checks mirror and self-loop completeness.
    pub fn is_well_formed(&self) -> bool {
        let n = self.nodes.len();
        if self.edges.iter().any(|e| e.src >= n || e.dst >= n) {
            return false;
        }
        let mut self_loops = vec![0usize; n];
        let mut reverse: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.edges {
            match e.dir {
                DirClass::SelfLoop => {
                    if e.src != e.dst {
                        return false;
                    }
                    self_loops[e.src] += 1;
                }
                DirClass::Reverse => *reverse.entry((e.src, e.dst)).or_default() += 1,
                DirClass::Default => {}
            }
        }
        let mut defaults: HashMap<(usize, usize), usize> = HashMap::new();
        for (s, d) in self.default_edges() {
            *defaults.entry((d, s)).or_default() += 1;
        }
        self_loops.iter().all(|&c| c == 1) && defaults == reverse
    }
}

fn split_constant(text: &str) -> Vec<&str> {
    let parts: Vec<&str> = text
        .split(|c: char| c == '~' || c == '_' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .collect();
    if parts.is_empty() {
        vec![text]
    } else {
        parts
    }
}

/// Extended Levi transform. Every labeled edge gets its own label node;
/// multiword constants become token chains linked by plain Default edges.
pub fn to_levi(g: &Drg) -> LeviGraph {
    let mut levi = LeviGraph {
        nodes: Vec::new(),
        edges: Vec::new(),
        alignment: Vec::with_capacity(g.nodes.len()),
    };
    let mut chains = Vec::new();
    for node in &g.nodes {
        match node {
            DrgNode::Concept(s) => {
                let id = levi.push_node(s.to_string(), LeviNodeKind::Concept);
                levi.alignment.push(id);
            }
            DrgNode::Box(_) => {
                let id = levi.push_node(BOX_TOKEN, LeviNodeKind::Box);
                levi.alignment.push(id);
            }
            DrgNode::Constant(c) => {
                let parts = split_constant(c);
                let first = levi.push_node(parts[0], LeviNodeKind::Constant);
                levi.alignment.push(first);
                let mut prev = first;
                for part in &parts[1..] {
                    let next = levi.push_node(*part, LeviNodeKind::Constant);
                    chains.push((prev, next));
                    prev = next;
                }
            }
        }
    }
    let mut defaults = Vec::with_capacity(2 * g.edges.len() + chains.len());
    for e in &g.edges {
        let label = levi.push_node(e.label.clone(), LeviNodeKind::Label);
        defaults.push((levi.alignment[e.src], label));
        defaults.push((label, levi.alignment[e.dst]));
    }
    defaults.extend(chains);
    for (s, d) in defaults {
        levi.push_default_edge(s, d);
    }
    for i in 0..levi.nodes.len() {
        levi.push_self_loop(i);
    }
    levi
}

/// Node tokens in graph order: original nodes in introduction order, then
/// label nodes in edge-creation order.
pub fn linearize(g: &LeviGraph) -> Vec<String> {
    g.nodes.iter().map(|n| n.token.clone()).collect()
}

#[derive(Serialize, Deserialize)]
struct JsonNode {
    id: usize,
    token: String,
    kind: LeviNodeKind,
}

struct Alignment<'a>(&'a [usize]);

impl Serialize for Alignment<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (drg, levi) in self.0.iter().enumerate() {
            map.serialize_entry(&drg.to_string(), levi)?;
        }
        map.end()
    }
}

impl Serialize for LeviGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            nodes: Vec<JsonNode>,
            edges: &'a [LeviEdge],
            alignment: Alignment<'a>,
        }
        Repr {
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| JsonNode {
                    id,
                    token: n.token.clone(),
                    kind: n.kind,
                })
                .collect(),
            edges: &self.edges,
            alignment: Alignment(&self.alignment),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LeviGraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            nodes: Vec<JsonNode>,
            edges: Vec<LeviEdge>,
            alignment: HashMap<String, usize>,
        }
        let repr = Repr::deserialize(deserializer)?;
        for (i, n) in repr.nodes.iter().enumerate() {
            if n.id != i {
                return Err(D::Error::custom(format!("node ids must be 0..n, got {} at {i}", n.id)));
            }
        }
        let mut alignment = vec![usize::MAX; repr.alignment.len()];
        for (k, v) in repr.alignment {
            let k: usize = k
                .parse()
                .map_err(|_| D::Error::custom(format!("bad alignment key `{k}`")))?;
            if k >= alignment.len() {
                return Err(D::Error::custom("alignment keys must be dense"));
            }
            alignment[k] = v;
        }
        let n = repr.nodes.len();
        if alignment.iter().any(|&v| v >= n) || repr.edges.iter().any(|e| e.src >= n || e.dst >= n) {
            return Err(D::Error::custom("graph references a node out of range"));
        }
        Ok(LeviGraph {
            nodes: repr
                .nodes
                .into_iter()
                .map(|n| LeviNode {
                    token: n.token,
                    kind: n.kind,
                })
                .collect(),
            edges: repr.edges,
            alignment,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbn::parse_sbn;

    fn drg(text: &str) -> Drg {
        build_drg(&parse_sbn(text, "t").unwrap())
    }

    #[test]
    fn wolf_sheep_edges() {
        let g = drg("wolf.n.01\nkill.v.01 Agent -1 Patient +1\nsheep.n.01");
        let triples: Vec<_> = g
            .edges
            .iter()
            .map(|e| (g.nodes[e.src].token(), e.label.as_str(), g.nodes[e.dst].token(), e.offset))
            .collect();
        assert_eq!(
            triples,
            vec![
                ("kill.v.01".into(), "Agent", "wolf.n.01".into(), Some(-1)),
                ("kill.v.01".into(), "Patient", "sheep.n.01".into(), Some(1)),
                ("Box".into(), "member", "wolf.n.01".into(), None),
                ("Box".into(), "member", "kill.v.01".into(), None),
                ("Box".into(), "member", "sheep.n.01".into(), None),
            ]
        );
    }

    #[test]
    fn single_constant_line() {
        let g = drg("tom");
        assert_eq!(g.nodes, vec![DrgNode::Constant("tom".into()), DrgNode::Box(0)]);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].label, MEMBER_LABEL);
    }

    #[test]
    fn relation_edges_link_boxes() {
        let g = drg("sheep.n.01\nNEGATION <1\nkill.v.01 Patient -2 Agent +1\nwolf.n.01");
        let rel: Vec<_> = g.edges.iter().filter(|e| e.label == "NEGATION").collect();
        assert_eq!(rel.len(), 1);
        assert_eq!(g.nodes[rel[0].src], DrgNode::Box(0));
        assert_eq!(g.nodes[rel[0].dst], DrgNode::Box(1));
        // no node for the relation line itself
        assert_eq!(g.line_nodes[1], None);
        assert!(g.edges.iter().all(|e| e.src != e.dst));
    }

    #[test]
    fn levi_of_single_edge() {
        let g = Drg {
            nodes: vec![
                DrgNode::Concept(Synset::parse("wolf.n.01").unwrap()),
                DrgNode::Concept(Synset::parse("kill.v.01").unwrap()),
            ],
            edges: vec![DrgEdge {
                src: 0,
                label: "Agent".into(),
                dst: 1,
                offset: None,
            }],
            line_nodes: vec![Some(0), Some(1)],
            box_nodes: vec![],
        };
        let levi = to_levi(&g);
        assert_eq!(linearize(&levi), vec!["wolf.n.01", "kill.v.01", "Agent"]);
        let defaults: Vec<_> = levi.default_edges().collect();
        assert_eq!(defaults, vec![(0, 2), (2, 1)]);
        assert!(levi.is_well_formed());
    }

    #[test]
    fn isolated_node_has_only_self_loop() {
        let g = Drg {
            nodes: vec![DrgNode::Constant("tom".into())],
            edges: vec![],
            line_nodes: vec![Some(0)],
            box_nodes: vec![],
        };
        let levi = to_levi(&g);
        assert_eq!(levi.nodes.len(), 1);
        assert_eq!(
            levi.edges,
            vec![LeviEdge {
                src: 0,
                dst: 0,
                dir: DirClass::SelfLoop
            }]
        );
        assert_eq!(linearize(&levi), vec!["tom"]);
    }

    #[test]
    fn multiword_constant_becomes_chain() {
        let g = drg("person.n.01 Name \"Taro~Akagawa\"");
        let levi = to_levi(&g);
        let tokens = linearize(&levi);
        let taro = tokens.iter().position(|t| t == "Taro").unwrap();
        let akagawa = tokens.iter().position(|t| t == "Akagawa").unwrap();
        assert!(levi.default_edges().any(|e| e == (taro, akagawa)));
        assert!(levi.is_well_formed());
        // the Name label points at the first token only
        let name = tokens.iter().position(|t| t == "Name").unwrap();
        assert_eq!(levi.successors(name).collect::<Vec<_>>(), vec![taro]);
    }

    #[test]
    fn wolf_sheep_linearization() {
        let levi = to_levi(&drg("wolf.n.01\nkill.v.01 Agent -1 Patient +1\nsheep.n.01"));
        assert_eq!(
            linearize(&levi),
            vec![
                "wolf.n.01", "kill.v.01", "sheep.n.01", "Box", "Agent", "Patient", "member",
                "member", "member"
            ]
        );
    }

    #[test]
    fn json_round_trip() {
        let levi = to_levi(&drg(
            "person.n.01 Name \"Taro~Akagawa\"\nwrite.v.01 Agent -1 Result +1\nentity.n.01",
        ));
        let json = serde_json::to_string(&levi).unwrap();
        assert!(json.starts_with("{\"nodes\":[{\"id\":0,\"token\":\"person.n.01\",\"kind\":\"concept\"}"));
        let back: LeviGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, levi);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }
}
