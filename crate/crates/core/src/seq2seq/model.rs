use std::rc::Rc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, BOS, EOS, UNK};
use super::Seq2SeqError;
use crate::drg::{LeviGraph, LeviNode, LeviNodeKind};
use crate::encoders::{
    neighborhood, EncoderConfig, EncoderKind, GraphEncoder, Neighborhood, NeighborhoodKind,
};
use crate::nn::{bias, dropout, matrix, LstmCell, ParamId, ParamStore, Tape, Var};
use crate::sbn::Synset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Target embedding size. Node embeddings and all hidden states use
    /// `encoder.hidden`.
    pub embedding: usize,
    pub dropout: f64,
    pub copy: bool,
    pub max_len: usize,
}

impl ModelConfig {
    pub fn new(kind: EncoderKind, neighborhood: NeighborhoodKind, hidden: usize, embedding: usize) -> Self {
        ModelConfig {
            encoder: EncoderConfig::new(kind, neighborhood, hidden),
            embedding,
            dropout: 0.5,
            copy: true,
            max_len: 60,
        }
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        self.encoder.validate()?;
        if self.embedding == 0 {
            return Err(Seq2SeqError::Config("embedding size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Seq2SeqError::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.max_len == 0 {
            return Err(Seq2SeqError::Config("max_len must be positive".into()));
        }
        Ok(())
    }
}

/// Word a node contributes when copied: the lowercased lemma for synsets,
/// the lowercased token otherwise.
pub fn copy_surface(node: &LeviNode) -> String {
    match node.kind {
        LeviNodeKind::Concept => Synset::parse(&node.token)
            .map(|s| s.lemma.to_lowercase())
            .unwrap_or_else(|_| node.token.to_lowercase()),
        _ => node.token.to_lowercase(),
    }
}

/// A graph prepared for one model: vocabulary ids, neighborhood and the
/// per-example extended vocabulary for copying.
#[derive(Debug, Clone)]
pub struct Source {
    pub node_ids: Rc<Vec<usize>>,
    pub neighborhood: Neighborhood,
    pub surfaces: Vec<String>,
    /// Extended-vocabulary id per node.
    pub node_ext: Vec<usize>,
    /// Surfaces absent from the target vocabulary, ids `|V|..`.
    pub oov: Vec<String>,
    vocab_len: usize,
}

impl Source {
    pub fn node_count(&self) -> usize {
        self.surfaces.len()
    }

    pub fn extended_len(&self) -> usize {
        self.vocab_len + self.oov.len()
    }

    /// Id in the extended vocabulary, if the token is generable at all.
    pub fn extended_id(&self, vocab: &Vocabulary, token: &str) -> Option<usize> {
        vocab
            .get(token)
            .or_else(|| self.oov.iter().position(|t| t == token).map(|i| self.vocab_len + i))
    }

    pub fn extended_token<'a>(&'a self, vocab: &'a Vocabulary, id: usize) -> &'a str {
        if id < self.vocab_len {
            vocab.token(id)
        } else {
            &self.oov[id - self.vocab_len]
        }
    }
}

#[derive(Debug, Clone)]
struct DecoderParams {
    src_embed: ParamId,
    tgt_embed: ParamId,
    att_keys: ParamId,
    att_query: ParamId,
    att_v: ParamId,
    out_w: ParamId,
    gen_w: ParamId,
    gen_b: ParamId,
    copy_w: ParamId,
    copy_b: ParamId,
}

/// Encoder memory as tape values.
#[derive(Debug, Clone, Copy)]
struct Memory {
    nodes: Var,
    keys: Var,
    pooled: Var,
}

#[derive(Debug, Clone, Copy)]
struct StepVars {
    h: Var,
    c: Var,
    attention: Var,
    p_vocab: Var,
    p_gen: Var,
}

/// Decoder state between greedy steps, with the encoder memory as plain
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub prev_token: usize,
    pub memory: Vec<f64>,
    pub keys: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Distribution over the extended vocabulary.
    pub distribution: Vec<f64>,
    pub attention: Vec<f64>,
    pub p_gen: f64,
    pub state: DecoderState,
}

/// Graph encoder plus attention LSTM decoder with a copy gate.
#[derive(Debug, Clone)]
pub struct Graph2Seq {
    pub config: ModelConfig,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    pub store: ParamStore,
    encoder: GraphEncoder,
    lstm: LstmCell,
    params: DecoderParams,
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    config: ModelConfig,
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    params: serde_json::Value,
}

/// Mixes `p_gen · P_vocab` with `(1 − p_gen) ·` copy mass, where node `i`
/// sends its attention weight to extended id `node_ext[i]`.
pub fn mix_distribution(p_vocab: &[f64], attention: &[f64], p_gen: f64, node_ext: &[usize], extended_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; extended_len];
    for (o, p) in out.iter_mut().zip(p_vocab) {
        *o = p_gen * p;
    }
    for (a, &e) in attention.iter().zip(node_ext) {
        out[e] += (1.0 - p_gen) * a;
    }
    out
}

impl Graph2Seq {
    pub fn new(
        config: ModelConfig,
        source_vocab: Vocabulary,
        target_vocab: Vocabulary,
        seed: u64,
    ) -> Result<Self, Seq2SeqError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let h = config.hidden();
        let e = config.embedding;
        let v = target_vocab.len();
        let src_embed = matrix(&mut store, "embed.source", source_vocab.len(), h, &mut rng)?;
        let encoder = GraphEncoder::new(&mut store, "encoder", config.encoder.clone(), &mut rng)?;
        let tgt_embed = matrix(&mut store, "embed.target", v, e, &mut rng)?;
        let lstm = LstmCell::new(&mut store, "decoder.lstm", e + h, h, &mut rng)?;
        let params = DecoderParams {
            src_embed,
            tgt_embed,
            att_keys: matrix(&mut store, "decoder.attention.keys", h, h, &mut rng)?,
            att_query: matrix(&mut store, "decoder.attention.query", h, h, &mut rng)?,
            att_v: matrix(&mut store, "decoder.attention.v", h, 1, &mut rng)?,
            out_w: matrix(&mut store, "decoder.output.w", 2 * h, h, &mut rng)?,
            gen_w: matrix(&mut store, "decoder.generator.w", h, v, &mut rng)?,
            gen_b: bias(&mut store, "decoder.generator.b", v)?,
            copy_w: matrix(&mut store, "decoder.copy.w", 2 * h + e, 1, &mut rng)?,
            copy_b: bias(&mut store, "decoder.copy.b", 1)?,
        };
        Ok(Graph2Seq {
            config,
            source_vocab,
            target_vocab,
            store,
            encoder,
            lstm,
            params,
        })
    }

    pub fn prepare(&self, g: &LeviGraph) -> Source {
        let surfaces: Vec<String> = g.nodes.iter().map(copy_surface).collect();
        let mut oov: Vec<String> = Vec::new();
        let vocab_len = self.target_vocab.len();
        let node_ext = surfaces
            .iter()
            .map(|s| match self.target_vocab.get(s) {
                Some(id) => id,
                None => {
                    let pos = oov.iter().position(|t| t == s).unwrap_or_else(|| {
                        oov.push(s.clone());
                        oov.len() - 1
                    });
                    vocab_len + pos
                }
            })
            .collect();
        Source {
            node_ids: Rc::new(g.nodes.iter().map(|n| self.source_vocab.id(&n.token)).collect()),
            neighborhood: neighborhood(g, self.config.encoder.neighborhood),
            surfaces,
            node_ext,
            oov,
            vocab_len,
        }
    }

    fn encode(&self, tape: &mut Tape, store: &ParamStore, src: &Source) -> Result<Memory, Seq2SeqError> {
        let table = tape.param(store, self.params.src_embed);
        let h0 = tape.gather_rows(table, src.node_ids.clone());
        let enc = self.encoder.encode(tape, store, h0, &src.neighborhood)?;
        let wk = tape.param(store, self.params.att_keys);
        let keys = tape.matmul(enc.nodes, wk);
        Ok(Memory {
            nodes: enc.nodes,
            keys,
            pooled: enc.pooled,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn step<R: Rng>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        mem: Memory,
        prev: usize,
        h: Var,
        c: Var,
        rng: Option<&mut R>,
    ) -> Result<StepVars, Seq2SeqError> {
        let p = &self.params;
        let wq = tape.param(store, p.att_query);
        let q = tape.matmul(h, wq);
        let s = tape.add(mem.keys, q);
        let s = tape.tanh(s);
        let v = tape.param(store, p.att_v);
        let scores = tape.matmul(s, v);
        let scores = tape.transpose(scores);
        let attention = tape.softmax_rows(scores);
        let ctx = tape.matmul(attention, mem.nodes);

        let table = tape.param(store, p.tgt_embed);
        let emb = tape.gather_rows(table, Rc::new(vec![prev]));
        let rate = self.config.dropout;
        let (emb, rng) = match rng {
            Some(r) => (dropout(tape, emb, rate, Some(&mut *r)), Some(r)),
            None => (emb, None),
        };
        let x = tape.concat_cols(&[emb, ctx]);
        let (h2, c2) = self.lstm.step(tape, store, x, h, c)?;

        let hc = tape.concat_cols(&[h2, ctx]);
        let wo = tape.param(store, p.out_w);
        let o = tape.matmul(hc, wo);
        let o = tape.tanh(o);
        let o = dropout(tape, o, rate, rng);
        let wg = tape.param(store, p.gen_w);
        let bg = tape.param(store, p.gen_b);
        let logits = tape.matmul(o, wg);
        let logits = tape.add(logits, bg);
        let p_vocab = tape.softmax_rows(logits);

        let gate_in = tape.concat_cols(&[h2, ctx, emb]);
        let wc = tape.param(store, p.copy_w);
        let bc = tape.param(store, p.copy_b);
        let gate = tape.matmul(gate_in, wc);
        let gate = tape.add(gate, bc);
        let p_gen = tape.sigmoid(gate);
        Ok(StepVars {
            h: h2,
            c: c2,
            attention,
            p_vocab,
            p_gen,
        })
    }

    /// Probability of extended id `gold` after one step, on the tape.
    fn gold_probability(&self, tape: &mut Tape, src: &Source, step: &StepVars, gold: usize) -> Var {
        let vocab_len = self.target_vocab.len();
        if !self.config.copy {
            return tape.pick(step.p_vocab, if gold < vocab_len { gold } else { UNK });
        }
        let generated = if gold < vocab_len {
            let pv = tape.pick(step.p_vocab, gold);
            Some(tape.mul(step.p_gen, pv))
        } else {
            None
        };
        let mask: Vec<f64> = src.node_ext.iter().map(|&e| (e == gold) as u8 as f64).collect();
        let copied = if mask.iter().any(|&m| m > 0.0) {
            let n = mask.len();
            let mask = tape.constant(n, 1, mask);
            let mass = tape.matmul(step.attention, mask);
            let rest = tape.one_minus(step.p_gen);
            Some(tape.mul(rest, mass))
        } else {
            None
        };
        match (generated, copied) {
            (Some(a), Some(b)) => tape.add(a, b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => unreachable!("gold id is either in the vocabulary or copyable"),
        }
    }

    /// Extended id the loss targets for `token`.
    fn gold_id(&self, src: &Source, token: &str) -> usize {
        match src.extended_id(&self.target_vocab, token) {
            Some(id) if self.config.copy || id < self.target_vocab.len() => id,
            _ => UNK,
        }
    }

    /// Teacher-forced negative log-likelihood of `target` followed by EOS.
    /// Returns the summed loss and the number of predicted tokens.
    pub fn loss_on_tape<R: Rng>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        src: &Source,
        target: &[String],
        mut rng: Option<&mut R>,
    ) -> Result<(Var, usize), Seq2SeqError> {
        let mem = self.encode(tape, store, src)?;
        let mut h = mem.pooled;
        let mut c = tape.zeros(1, self.config.hidden());
        let mut prev = BOS;
        let mut probs = Vec::with_capacity(target.len() + 1);
        let golds: Vec<usize> = target
            .iter()
            .map(|t| self.gold_id(src, t))
            .chain(std::iter::once(EOS))
            .collect();
        for &gold in &golds {
            let step = self.step(tape, store, mem, prev, h, c, rng.as_deref_mut())?;
            probs.push(self.gold_probability(tape, src, &step, gold));
            h = step.h;
            c = step.c;
            prev = if gold < self.target_vocab.len() { gold } else { UNK };
        }
        let all = tape.concat_cols(&probs);
        let logp = tape.log(all);
        let total = tape.sum(logp);
        Ok((tape.scale(total, -1.0), golds.len()))
    }

    /// Summed teacher-forced loss without dropout, and the token count.
    pub fn evaluate_loss(&self, g: &LeviGraph, target: &[String]) -> Result<(f64, usize), Seq2SeqError> {
        let src = self.prepare(g);
        let mut tape = Tape::new();
        let (loss, n) = self.loss_on_tape::<ChaCha8Rng>(&mut tape, &self.store, &src, target, None)?;
        Ok((tape.scalar(loss), n))
    }

    pub fn start(&self, src: &Source) -> Result<DecoderState, Seq2SeqError> {
        let mut tape = Tape::new();
        let mem = self.encode(&mut tape, &self.store, src)?;
        Ok(DecoderState {
            h: tape.value(mem.pooled).to_vec(),
            c: vec![0.0; self.config.hidden()],
            prev_token: BOS,
            memory: tape.value(mem.nodes).to_vec(),
            keys: tape.value(mem.keys).to_vec(),
        })
    }

    /// One greedy-decoding step from `state`.
    pub fn decode_step(&self, state: &DecoderState, src: &Source) -> Result<StepOutput, Seq2SeqError> {
        let d = self.config.hidden();
        let n = src.node_count();
        let mut tape = Tape::new();
        let mem = Memory {
            nodes: tape.constant(n, d, state.memory.clone()),
            keys: tape.constant(n, d, state.keys.clone()),
            pooled: tape.zeros(1, d),
        };
        let h = tape.constant(1, d, state.h.clone());
        let c = tape.constant(1, d, state.c.clone());
        let step = self.step::<ChaCha8Rng>(&mut tape, &self.store, mem, state.prev_token, h, c, None)?;
        let p_vocab = tape.value(step.p_vocab);
        let attention = tape.value(step.attention).to_vec();
        let p_gen = if self.config.copy { tape.scalar(step.p_gen) } else { 1.0 };
        let distribution = mix_distribution(p_vocab, &attention, p_gen, &src.node_ext, src.extended_len());
        Ok(StepOutput {
            distribution,
            attention,
            p_gen,
            state: DecoderState {
                h: tape.value(step.h).to_vec(),
                c: tape.value(step.c).to_vec(),
                prev_token: state.prev_token,
                memory: state.memory.clone(),
                keys: state.keys.clone(),
            },
        })
    }

    /// Greedy decoding until EOS or `max_len` tokens.
    pub fn generate(&self, g: &LeviGraph, max_len: usize) -> Result<Vec<String>, Seq2SeqError> {
        let src = self.prepare(g);
        let mut state = self.start(&src)?;
        let mut out = Vec::new();
        while out.len() < max_len {
            let step = self.decode_step(&state, &src)?;
            let best = argmax(&step.distribution);
            if best == EOS {
                break;
            }
            out.push(src.extended_token(&self.target_vocab, best).to_string());
            state = step.state;
            state.prev_token = if best < self.target_vocab.len() { best } else { UNK };
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let params: serde_json::Value =
            serde_json::from_str(&self.store.to_checkpoint_json()).expect("checkpoint is JSON");
        serde_json::to_string(&ModelFile {
            version: MODEL_VERSION,
            config: self.config.clone(),
            source_vocab: self.source_vocab.clone(),
            target_vocab: self.target_vocab.clone(),
            params,
        })
        .expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, Seq2SeqError> {
        let file: ModelFile = serde_json::from_str(json).map_err(|e| Seq2SeqError::Model(e.to_string()))?;
        if file.version != MODEL_VERSION {
            return Err(Seq2SeqError::Model(format!("unsupported model version {}", file.version)));
        }
        let mut model = Graph2Seq::new(file.config, file.source_vocab, file.target_vocab, 0)?;
        model.store.load_checkpoint_json(&file.params.to_string())?;
        Ok(model)
    }
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
