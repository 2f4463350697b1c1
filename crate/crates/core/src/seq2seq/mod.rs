//! Attention LSTM decoder with a copy gate, training and greedy generation.

mod model;
mod train;
mod vocab;

use thiserror::Error;

use crate::encoders::EncoderError;
use crate::eval::EvalError;
use crate::nn::NnError;

pub use model::{argmax, copy_surface, mix_distribution, DecoderState, Graph2Seq, ModelConfig, Source, StepOutput};
pub use train::{
    build_vocabularies, corpus_loss, generate_all, run_multi_seed, summarize, train, train_with, EpochMetrics,
    Example, GenerationRecord, MultiSeedReport, SeedResult, TrainConfig, TrainOutcome,
};
pub use vocab::{Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Seq2SeqError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("non-finite loss at epoch {epoch}, batch {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("non-finite gradient in `{parameter}` at epoch {epoch}, batch {step}")]
    NonFiniteGradient { epoch: usize, step: usize, parameter: String },
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
