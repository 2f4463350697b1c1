use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Graph2Seq, ModelConfig};
use super::vocab::Vocabulary;
use super::Seq2SeqError;
use crate::drg::LeviGraph;
use crate::eval::{bleu, meteor_lite};
use crate::nn::{clip_grad_norm, sgd_update, DecayPolicy, NnError, OptimizerState, Tape};
use crate::tfa::{TfaSpec, VoiceType};

/// One training or evaluation pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub source_id: String,
    pub graph: LeviGraph,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_policy: DecayPolicy,
    pub clip_norm: f64,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub min_frequency: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1.0,
            decay_factor: 0.8,
            decay_policy: DecayPolicy::OnPlateau,
            clip_norm: 5.0,
            patience: 5,
            min_frequency: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        if self.batch_size == 0 {
            return Err(Seq2SeqError::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Seq2SeqError::Config("learning_rate must be positive".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Seq2SeqError::Config("decay_factor must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-token training loss (with dropout).
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_perplexity: f64,
    pub learning_rate: f64,
    pub improved: bool,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,dev_loss,dev_perplexity,learning_rate,improved";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.train_loss, self.dev_loss, self.dev_perplexity, self.learning_rate, self.improved
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev perplexity.
    pub model: Graph2Seq,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
}

pub fn build_vocabularies(train: &[Example], min_frequency: usize) -> (Vocabulary, Vocabulary) {
    let node_tokens: Vec<Vec<String>> = train
        .iter()
        .map(|e| e.graph.nodes.iter().map(|n| n.token.clone()).collect())
        .collect();
    let source = Vocabulary::build(node_tokens.iter(), min_frequency);
    let target = Vocabulary::build(train.iter().map(|e| &e.target), min_frequency);
    (source, target)
}

/// Mean per-token loss without dropout.
pub fn corpus_loss(model: &Graph2Seq, data: &[Example]) -> Result<f64, Seq2SeqError> {
    let (mut total, mut tokens) = (0.0, 0usize);
    for ex in data {
        let (l, n) = model.evaluate_loss(&ex.graph, &ex.target)?;
        total += l;
        tokens += n;
    }
    Ok(if tokens == 0 { 0.0 } else { total / tokens as f64 })
}

pub fn train(
    train_set: &[Example],
    dev_set: &[Example],
    model_config: &ModelConfig,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, Seq2SeqError> {
    train_with(train_set, dev_set, model_config, config, seed, |_, _| Ok(ControlFlow::Continue(())))
}

/// Trains with teacher forcing and SGD, calling `on_epoch` after every
/// epoch with the current (not best) model; `Break` ends training. Without a
/// dev set the training loss drives decay and early stopping.
pub fn train_with<F>(
    train_set: &[Example],
    dev_set: &[Example],
    model_config: &ModelConfig,
    config: &TrainConfig,
    seed: u64,
    mut on_epoch: F,
) -> Result<TrainOutcome, Seq2SeqError>
where
    F: FnMut(&EpochMetrics, &Graph2Seq) -> Result<ControlFlow<()>, Seq2SeqError>,
{
    config.validate()?;
    if train_set.is_empty() {
        return Err(Seq2SeqError::EmptyCorpus);
    }
    let (source_vocab, target_vocab) = build_vocabularies(train_set, config.min_frequency);
    let mut model = Graph2Seq::new(model_config.clone(), source_vocab, target_vocab, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let sources: Vec<_> = train_set.iter().map(|e| model.prepare(&e.graph)).collect();
    let mut optimizer = OptimizerState {
        learning_rate: config.learning_rate,
        decay_factor: config.decay_factor,
        decay_policy: config.decay_policy,
        best_dev: None,
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best = model.store.clone();
    let mut best_epoch = 0;
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_tokens) = (0.0, 0usize);
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            model.store.zero_grad();
            let mut batch_tokens = 0usize;
            for &i in batch {
                let mut tape = Tape::new();
                let (loss, n) =
                    model.loss_on_tape(&mut tape, &model.store, &sources[i], &train_set[i].target, Some(&mut rng))?;
                let value = tape.scalar(loss);
                if !value.is_finite() {
                    return Err(Seq2SeqError::NonFiniteLoss { epoch, step });
                }
                tape.backward(loss, &mut model.store);
                epoch_loss += value;
                batch_tokens += n;
            }
            epoch_tokens += batch_tokens;
            model.store.scale_grads(1.0 / batch_tokens as f64);
            clip_grad_norm(&mut model.store, config.clip_norm);
            sgd_update(&mut model.store, optimizer.learning_rate).map_err(|e| match e {
                NnError::NonFiniteGradient(p) => Seq2SeqError::NonFiniteGradient { epoch, step, parameter: p },
                other => other.into(),
            })?;
        }
        let train_loss = epoch_loss / epoch_tokens as f64;
        let dev_loss = if dev_set.is_empty() {
            corpus_loss(&model, train_set)?
        } else {
            corpus_loss(&model, dev_set)?
        };
        let dev_perplexity = dev_loss.exp();
        let learning_rate = optimizer.learning_rate;
        let improved = optimizer.observe_dev(dev_perplexity);
        if improved {
            best = model.store.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        let metrics = EpochMetrics {
            epoch,
            train_loss,
            dev_loss,
            dev_perplexity,
            learning_rate,
            improved,
        };
        log::info!(
            "epoch {epoch}: train loss {train_loss:.4}, dev ppl {dev_perplexity:.3}, lr {learning_rate:.4}"
        );
        let flow = on_epoch(&metrics, &model)?;
        history.push(metrics);
        if flow.is_break() {
            break;
        }
        if stale >= config.patience {
            log::info!("early stop after {epoch} epochs (best epoch {best_epoch})");
            break;
        }
    }
    model.store = best;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

/// Output of one generation, with what the input asked for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub source_id: String,
    pub hypothesis: Vec<String>,
    pub reference: Vec<String>,
    pub voice_expected: VoiceType,
    pub strategy: Option<TfaSpec>,
}

/// Greedy generations in input order, computed in parallel over examples.
pub fn generate_all(model: &Graph2Seq, data: &[Example], max_len: usize) -> Result<Vec<Vec<String>>, Seq2SeqError> {
    data.par_iter().map(|e| model.generate(&e.graph, max_len)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_dev_perplexity: f64,
    pub bleu: f64,
    pub meteor_lite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedReport {
    pub runs: Vec<SeedResult>,
    pub mean_bleu: f64,
    pub mean_meteor_lite: f64,
    pub bleu_variance: f64,
}

/// Trains once per seed and scores greedy generations on `test`.
pub fn run_multi_seed(
    train_set: &[Example],
    dev_set: &[Example],
    test_set: &[Example],
    model_config: &ModelConfig,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<MultiSeedReport, Seq2SeqError> {
    let references: Vec<Vec<String>> = test_set.iter().map(|e| e.target.clone()).collect();
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let outcome = train(train_set, dev_set, model_config, config, seed)?;
        let hyps = generate_all(&outcome.model, test_set, model_config.max_len)?;
        let best_dev_perplexity = outcome
            .history
            .iter()
            .find(|m| m.epoch == outcome.best_epoch)
            .map_or(f64::NAN, |m| m.dev_perplexity);
        runs.push(SeedResult {
            seed,
            best_epoch: outcome.best_epoch,
            best_dev_perplexity,
            bleu: bleu(&hyps, &references)?,
            meteor_lite: meteor_lite(&hyps, &references)?,
        });
    }
    Ok(summarize(runs))
}

pub fn summarize(runs: Vec<SeedResult>) -> MultiSeedReport {
    let n = runs.len().max(1) as f64;
    let mean_bleu = runs.iter().map(|r| r.bleu).sum::<f64>() / n;
    let mean_meteor_lite = runs.iter().map(|r| r.meteor_lite).sum::<f64>() / n;
    let bleu_variance = runs.iter().map(|r| (r.bleu - mean_bleu).powi(2)).sum::<f64>() / n;
    MultiSeedReport {
        runs,
        mean_bleu,
        mean_meteor_lite,
        bleu_variance,
    }
}
