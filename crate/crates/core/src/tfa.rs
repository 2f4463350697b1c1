//! Topic-focus articulation: voice detection and TOPIC augmentation.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drg::{Drg, DrgNode, LeviGraph, LeviNodeKind, MEMBER_LABEL};
use crate::sbn::Synset;

pub const TOPIC_TOKEN: &str = "TOPIC";
pub const AGENT_ROLE: &str = "Agent";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TfaError {
    #[error("verb `{verb}` has both arguments on the same side (offsets {agent:+} and {other:+})")]
    AmbiguousVoice { verb: String, agent: i32, other: i32 },
    #[error("topic node {0} not found or of the wrong kind")]
    TopicNotFound(usize),
    #[error("strategy not applicable: {0}")]
    StrategyInapplicable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Voice {
    Active,
    Passive,
    NotTransitive,
}

impl Voice {
    pub fn opposite(self) -> Voice {
        match self {
            Voice::Active => Voice::Passive,
            Voice::Passive => Voice::Active,
            Voice::NotTransitive => Voice::NotTransitive,
        }
    }
}

/// The non-Agent half of a transitive role pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RolePair {
    Patient,
    Theme,
    Experiencer,
    Result,
    Source,
}

impl RolePair {
    pub const ALL: [RolePair; 5] = [
        RolePair::Patient,
        RolePair::Theme,
        RolePair::Experiencer,
        RolePair::Result,
        RolePair::Source,
    ];

    pub fn role(self) -> &'static str {
        match self {
            RolePair::Patient => "Patient",
            RolePair::Theme => "Theme",
            RolePair::Experiencer => "Experiencer",
            RolePair::Result => "Result",
            RolePair::Source => "Source",
        }
    }

    pub fn from_role(label: &str) -> Option<RolePair> {
        RolePair::ALL.into_iter().find(|p| p.role() == label)
    }
}

impl fmt::Display for RolePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> Agent", self.role())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoiceType {
    pub voice: Voice,
    pub pair: Option<RolePair>,
}

impl VoiceType {
    pub const NOT_TRANSITIVE: VoiceType = VoiceType {
        voice: Voice::NotTransitive,
        pair: None,
    };

    pub fn is_transitive(&self) -> bool {
        self.voice != Voice::NotTransitive
    }
}

fn is_verb_token(token: &str) -> bool {
    Synset::parse(token).map(|s| s.is_verb()).unwrap_or(false)
}

/// Voice from slot-offset signs of the main verb (first verb with an Agent).
pub fn detect_voice(g: &Drg) -> Result<VoiceType, TfaError> {
    let main_verb = g.nodes.iter().enumerate().find(|(i, n)| {
        matches!(n, DrgNode::Concept(s) if s.is_verb())
            && g.out_edges(*i).any(|e| e.label == AGENT_ROLE)
    });
    let Some((verb, verb_node)) = main_verb else {
        return Ok(VoiceType::NOT_TRANSITIVE);
    };
    let agent = g
        .out_edges(verb)
        .find(|e| e.label == AGENT_ROLE)
        .expect("main verb has an Agent edge");
    let others: Vec<_> = g
        .out_edges(verb)
        .filter_map(|e| RolePair::from_role(&e.label).map(|p| (p, e)))
        .collect();
    let [(pair, other)] = others.as_slice() else {
        return Ok(VoiceType::NOT_TRANSITIVE);
    };
    let (Some(a), Some(o)) = (agent.offset, other.offset) else {
        return Ok(VoiceType::NOT_TRANSITIVE);
    };
    let voice = match (a < 0, o < 0) {
        (true, false) => Voice::Active,
        (false, true) => Voice::Passive,
        _ => {
            return Err(TfaError::AmbiguousVoice {
                verb: verb_node.token(),
                agent: a,
                other: o,
            })
        }
    };
    Ok(VoiceType {
        voice,
        pair: Some(*pair),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Concept → TOPIC → Concept.
    Ctc,
    /// Box → TOPIC → Concept.
    Btc,
    /// Role → Role.
    Rtr,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Ctc, Strategy::Btc, Strategy::Rtr];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ctc => "ctc",
            Strategy::Btc => "btc",
            Strategy::Rtr => "rtr",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ctc" => Ok(Strategy::Ctc),
            "btc" => Ok(Strategy::Btc),
            "rtr" => Ok(Strategy::Rtr),
            other => Err(format!("unknown TFA strategy `{other}` (expected ctc, btc or rtr)")),
        }
    }
}

/// Which augmentation is applied and where.
///
/// `topic_node` is the topic concept for CTC/BTC and the subject role's
/// label node for RTR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TfaSpec {
    pub strategy: Strategy,
    pub topic_node: usize,
}

/// Roles of the main verb in Levi space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct VerbFrame {
    agent_label: usize,
    agent_arg: usize,
    other_label: usize,
    other_arg: usize,
}

fn single<I: Iterator<Item = usize>>(mut it: I) -> Option<usize> {
    let first = it.next()?;
    it.next().is_none().then_some(first)
}

fn frame_of(g: &LeviGraph, verb: usize) -> Option<VerbFrame> {
    let labels: Vec<usize> = g
        .successors(verb)
        .filter(|&l| g.nodes[l].kind == LeviNodeKind::Label)
        .collect();
    let agent_label = single(labels.iter().copied().filter(|&l| g.nodes[l].token == AGENT_ROLE))?;
    let other_label = single(
        labels
            .iter()
            .copied()
            .filter(|&l| RolePair::from_role(&g.nodes[l].token).is_some()),
    )?;
    let argument = |label: usize| {
        single(
            g.successors(label)
                .filter(|&n| g.nodes[n].kind != LeviNodeKind::Label),
        )
    };
    Some(VerbFrame {
        agent_label,
        agent_arg: argument(agent_label)?,
        other_label,
        other_arg: argument(other_label)?,
    })
}

/// Main verb of a Levi graph: first verb concept with an Agent label.
pub fn main_verb(g: &LeviGraph) -> Option<usize> {
    (0..g.nodes.len()).find(|&i| {
        g.nodes[i].kind == LeviNodeKind::Concept
            && is_verb_token(&g.nodes[i].token)
            && g.successors(i)
                .any(|l| g.nodes[l].kind == LeviNodeKind::Label && g.nodes[l].token == AGENT_ROLE)
    })
}

fn main_frame(g: &LeviGraph) -> Result<VerbFrame, TfaError> {
    main_verb(g)
        .and_then(|v| frame_of(g, v))
        .ok_or_else(|| TfaError::StrategyInapplicable("graph has no transitive main verb".into()))
}

impl TfaSpec {
    /// Marks the grammatical subject of `voice` as topic.
    pub fn for_voice(g: &LeviGraph, voice: &VoiceType, strategy: Strategy) -> Result<TfaSpec, TfaError> {
        let subject_is_agent = match voice.voice {
            Voice::Active => true,
            Voice::Passive => false,
            Voice::NotTransitive => {
                return Err(TfaError::StrategyInapplicable("graph is not transitive".into()))
            }
        };
        let frame = main_frame(g)?;
        let topic_node = match (strategy, subject_is_agent) {
            (Strategy::Rtr, true) => frame.agent_label,
            (Strategy::Rtr, false) => frame.other_label,
            (_, true) => frame.agent_arg,
            (_, false) => frame.other_arg,
        };
        Ok(TfaSpec {
            strategy,
            topic_node,
        })
    }

    /// Voice this spec asks for on `g`.
    pub fn requested_voice(&self, g: &LeviGraph) -> Result<Voice, TfaError> {
        let frame = main_frame(g)?;
        let node = self.topic_node;
        let (agent, other) = match self.strategy {
            Strategy::Rtr => (frame.agent_label, frame.other_label),
            _ => (frame.agent_arg, frame.other_arg),
        };
        if node == agent {
            Ok(Voice::Active)
        } else if node == other {
            Ok(Voice::Passive)
        } else {
            Err(TfaError::TopicNotFound(node))
        }
    }
}

fn rtr_partner(g: &LeviGraph, role_label: usize) -> Result<usize, TfaError> {
    let node = g.nodes.get(role_label).ok_or(TfaError::TopicNotFound(role_label))?;
    let is_role = node.kind == LeviNodeKind::Label
        && (node.token == AGENT_ROLE || RolePair::from_role(&node.token).is_some());
    if !is_role {
        return Err(TfaError::TopicNotFound(role_label));
    }
    let verb = single(g.predecessors(role_label)).ok_or(TfaError::TopicNotFound(role_label))?;
    let frame = frame_of(g, verb).ok_or_else(|| {
        TfaError::StrategyInapplicable(format!("verb `{}` is not transitive", g.nodes[verb].token))
    })?;
    if role_label == frame.agent_label {
        Ok(frame.other_label)
    } else if role_label == frame.other_label {
        Ok(frame.agent_label)
    } else {
        Err(TfaError::TopicNotFound(role_label))
    }
}

fn membership_box(g: &LeviGraph, concept: usize) -> Option<usize> {
    g.predecessors(concept)
        .filter(|&l| g.nodes[l].kind == LeviNodeKind::Label && g.nodes[l].token == MEMBER_LABEL)
        .flat_map(|l| g.predecessors(l))
        .find(|&b| g.nodes[b].kind == LeviNodeKind::Box)
}

/// Adds the TOPIC marker described by `spec`. The input is left untouched.
pub fn apply_tfa(g: &LeviGraph, spec: &TfaSpec) -> Result<LeviGraph, TfaError> {
    let topic = spec.topic_node;
    let mut out = g.clone();
    match spec.strategy {
        Strategy::Ctc | Strategy::Btc => {
            let is_concept = g
                .nodes
                .get(topic)
                .is_some_and(|n| n.kind == LeviNodeKind::Concept);
            if !is_concept {
                return Err(TfaError::TopicNotFound(topic));
            }
            let source = if spec.strategy == Strategy::Ctc {
                topic
            } else {
                membership_box(g, topic).ok_or_else(|| {
                    TfaError::StrategyInapplicable(format!("concept {topic} belongs to no box"))
                })?
            };
            let marker = out.push_node(TOPIC_TOKEN, LeviNodeKind::Label);
            out.push_default_edge(source, marker);
            out.push_default_edge(marker, topic);
            out.push_self_loop(marker);
        }
        Strategy::Rtr => {
            let partner = rtr_partner(g, topic)?;
            out.push_default_edge(topic, partner);
        }
    }
    Ok(out)
}

/// Removes the augmentation `spec` added, restoring the plain graph.
pub fn strip_tfa(g: &LeviGraph, spec: &TfaSpec) -> Result<LeviGraph, TfaError> {
    let mut out = g.clone();
    match spec.strategy {
        Strategy::Ctc | Strategy::Btc => {
            let marker = g.nodes.len().checked_sub(1);
            let carries = marker.is_some_and(|m| {
                g.nodes[m].kind == LeviNodeKind::Label
                    && g.nodes[m].token == TOPIC_TOKEN
                    && g.successors(m).any(|c| c == spec.topic_node)
            });
            if !carries {
                return Err(TfaError::StrategyInapplicable(
                    "graph does not carry this TOPIC marker".into(),
                ));
            }
            let marker = marker.unwrap();
            out.nodes.pop();
            out.edges.retain(|e| e.src != marker && e.dst != marker);
        }
        Strategy::Rtr => {
            let partner = rtr_partner(g, spec.topic_node)?;
            let n = out.edges.len();
            let tail = out.edges.get(n.saturating_sub(2)..).unwrap_or_default();
            let carries = n >= 2
                && tail[0].src == spec.topic_node
                && tail[0].dst == partner
                && tail[1].src == partner
                && tail[1].dst == spec.topic_node;
            if !carries {
                return Err(TfaError::StrategyInapplicable(
                    "graph does not carry this role-role edge".into(),
                ));
            }
            out.edges.truncate(n - 2);
        }
    }
    Ok(out)
}

/// Spec asking for the opposite voice on the same plain graph.
pub fn flipped_spec(plain: &LeviGraph, spec: &TfaSpec) -> Result<TfaSpec, TfaError> {
    let topic_node = match spec.strategy {
        Strategy::Rtr => rtr_partner(plain, spec.topic_node)?,
        Strategy::Ctc | Strategy::Btc => {
            let frame = main_frame(plain)?;
            if spec.topic_node == frame.agent_arg {
                frame.other_arg
            } else if spec.topic_node == frame.other_arg {
                frame.agent_arg
            } else {
                return Err(TfaError::TopicNotFound(spec.topic_node));
            }
        }
    };
    Ok(TfaSpec {
        strategy: spec.strategy,
        topic_node,
    })
}

/// Moves the TOPIC to the other argument (or reverses the role-role edge).
pub fn flip_voice(g: &LeviGraph, spec: &TfaSpec) -> Result<(LeviGraph, TfaSpec), TfaError> {
    let plain = strip_tfa(g, spec)?;
    let flipped = flipped_spec(&plain, spec)?;
    Ok((apply_tfa(&plain, &flipped)?, flipped))
}

/// Candidate for the active/passive challenge set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeItem {
    pub source_id: String,
    pub graph: LeviGraph,
    pub reference: String,
    pub voice: VoiceType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeConfig {
    pub seed: u64,
    /// Draw actives per role-pair type to mirror the passive distribution.
    pub stratified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChallengeWarning {
    NoPassive,
    /// Not enough actives of this type; the deficit was drawn unstratified.
    InsufficientActive { pair: RolePair, deficit: usize },
    /// Fewer actives than passives overall.
    ActiveShortfall { missing: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChallengeSet {
    pub items: Vec<ChallengeItem>,
    pub warnings: Vec<ChallengeWarning>,
}

pub fn is_interrogative(reference: &str) -> bool {
    reference.trim_end().ends_with('?')
}

/// All passive items plus an equal-size seeded draw of active items.
pub fn build_challenge_set(corpus: &[ChallengeItem], cfg: ChallengeConfig) -> ChallengeSet {
    let eligible = || corpus.iter().filter(|c| !is_interrogative(&c.reference));
    let passives: Vec<&ChallengeItem> = eligible().filter(|c| c.voice.voice == Voice::Passive).collect();
    let mut out = ChallengeSet::default();
    if passives.is_empty() {
        log::warn!("challenge set: corpus has no passive instances");
        out.warnings.push(ChallengeWarning::NoPassive);
        return out;
    }
    let actives: Vec<usize> = corpus
        .iter()
        .enumerate()
        .filter(|(_, c)| !is_interrogative(&c.reference) && c.voice.voice == Voice::Active)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(passives.len());
    let mut deficit = 0usize;
    if cfg.stratified {
        let mut wanted: BTreeMap<RolePair, usize> = BTreeMap::new();
        for p in &passives {
            if let Some(pair) = p.voice.pair {
                *wanted.entry(pair).or_default() += 1;
            }
        }
        for (pair, want) in wanted {
            let mut pool: Vec<usize> = actives
                .iter()
                .copied()
                .filter(|&i| corpus[i].voice.pair == Some(pair))
                .collect();
            pool.shuffle(&mut rng);
            let take = want.min(pool.len());
            chosen.extend_from_slice(&pool[..take]);
            if take < want {
                let d = want - take;
                log::warn!("challenge set: only {take} active {pair} instances, {d} drawn unstratified");
                out.warnings.push(ChallengeWarning::InsufficientActive { pair, deficit: d });
                deficit += d;
            }
        }
    } else {
        deficit = passives.len();
    }
    if deficit > 0 {
        let mut rest: Vec<usize> = actives.iter().copied().filter(|i| !chosen.contains(i)).collect();
        rest.shuffle(&mut rng);
        let take = deficit.min(rest.len());
        chosen.extend_from_slice(&rest[..take]);
        if take < deficit {
            out.warnings.push(ChallengeWarning::ActiveShortfall {
                missing: deficit - take,
            });
        }
    }
    out.items.extend(passives.into_iter().cloned());
    out.items.extend(chosen.into_iter().map(|i| corpus[i].clone()));
    out
}
