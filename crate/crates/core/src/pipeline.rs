//! Corpus-level steps: SBN manifest → Levi graphs → TFA augmentation →
//! training examples.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::drg::{build_drg, to_levi, LeviGraph};
use crate::sbn::LoadedCorpus;
use crate::seq2seq::{generate_all, Example, GenerationRecord, Graph2Seq, Seq2SeqError};
use crate::text::tokenize;
use crate::tfa::{apply_tfa, detect_voice, flip_voice, Strategy, TfaSpec, Voice, VoiceType};

/// TFA strategy, or none for the untagged baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Augmentation {
    None,
    Ctc,
    Btc,
    Rtr,
}

impl Augmentation {
    pub const ALL: [Augmentation; 4] = [Augmentation::None, Augmentation::Ctc, Augmentation::Btc, Augmentation::Rtr];

    pub fn strategy(self) -> Option<Strategy> {
        match self {
            Augmentation::None => None,
            Augmentation::Ctc => Some(Strategy::Ctc),
            Augmentation::Btc => Some(Strategy::Btc),
            Augmentation::Rtr => Some(Strategy::Rtr),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Augmentation::None => "none",
            Augmentation::Ctc => "ctc",
            Augmentation::Btc => "btc",
            Augmentation::Rtr => "rtr",
        }
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Augmentation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Augmentation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy `{s}` (expected none, ctc, btc or rtr)"))
    }
}

/// One graph line of the JSONL files exchanged between commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub source_id: String,
    pub graph: LeviGraph,
    pub reference: String,
    /// `None` when the voice could not be determined.
    pub voice: Option<VoiceType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tfa: Option<TfaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl GraphRecord {
    /// Voice the output should have: the one the TFA marker asks for, else
    /// the voice of the source sentence.
    pub fn expected_voice(&self) -> VoiceType {
        let base = self.voice.unwrap_or(VoiceType::NOT_TRANSITIVE);
        match self.tfa.as_ref().map(|s| s.requested_voice(&self.graph)) {
            Some(Ok(voice)) => VoiceType { voice, pair: base.pair },
            _ => base,
        }
    }

    pub fn to_example(&self) -> Example {
        Example {
            source_id: self.source_id.clone(),
            graph: self.graph.clone(),
            target: tokenize(&self.reference),
        }
    }
}

/// Active/passive counts of one voice type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoiceCounts {
    pub active: usize,
    pub passive: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionStats {
    pub rows: usize,
    pub converted: usize,
    pub parse_failures: usize,
    pub ambiguous_voice: usize,
    pub not_transitive: usize,
    /// Keyed `"Patient"` … `"Source"`, in role order.
    pub voice_types: BTreeMap<String, VoiceCounts>,
}

/// Graphs for every loaded entry plus conversion statistics. Entries whose
/// voice is ambiguous are kept with `voice: None`.
pub fn convert_corpus(corpus: &LoadedCorpus) -> (Vec<GraphRecord>, ConversionStats) {
    let mut stats = ConversionStats {
        rows: corpus.entries.len() + corpus.errors.len(),
        parse_failures: corpus.errors.len(),
        ..Default::default()
    };
    for pair in crate::tfa::RolePair::ALL {
        stats.voice_types.insert(pair.role().to_string(), VoiceCounts::default());
    }
    let converted: Vec<_> = corpus
        .entries
        .par_iter()
        .map(|entry| {
            let drg = build_drg(&entry.document);
            (detect_voice(&drg), to_levi(&drg))
        })
        .collect();
    let mut records = Vec::with_capacity(corpus.entries.len());
    for (entry, (detected, graph)) in corpus.entries.iter().zip(converted) {
        let voice = match detected {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("{}: {e}", entry.document.source_id);
                stats.ambiguous_voice += 1;
                None
            }
        };
        match voice {
            Some(VoiceType { voice, pair: Some(pair) }) => {
                let counts = stats.voice_types.get_mut(pair.role()).expect("all pairs present");
                match voice {
                    Voice::Active => counts.active += 1,
                    Voice::Passive => counts.passive += 1,
                    Voice::NotTransitive => {}
                }
            }
            Some(_) => stats.not_transitive += 1,
            None => {}
        }
        records.push(GraphRecord {
            source_id: entry.document.source_id.clone(),
            graph,
            reference: entry.reference.clone(),
            voice,
            tfa: None,
            tag: None,
        });
    }
    stats.converted = records.len();
    (records, stats)
}

pub const TAG_NOT_TRANSITIVE: &str = "skipped: not transitive";

/// Marks the subject of each record's detected voice (or the opposite
/// argument with `flip`). Records the strategy cannot apply to pass through
/// unchanged with a tag.
pub fn augment(record: &GraphRecord, augmentation: Augmentation, flip: bool) -> GraphRecord {
    let mut out = record.clone();
    let Some(strategy) = augmentation.strategy() else {
        return out;
    };
    let voice = match record.voice {
        Some(v) if v.is_transitive() => v,
        _ => {
            out.tag = Some(TAG_NOT_TRANSITIVE.into());
            return out;
        }
    };
    let result = TfaSpec::for_voice(&record.graph, &voice, strategy).and_then(|spec| {
        let g = apply_tfa(&record.graph, &spec)?;
        if flip {
            flip_voice(&g, &spec)
        } else {
            Ok((g, spec))
        }
    });
    match result {
        Ok((graph, spec)) => {
            out.graph = graph;
            out.tfa = Some(spec);
        }
        Err(e) => out.tag = Some(format!("skipped: {e}")),
    }
    out
}

pub fn augment_all(records: &[GraphRecord], augmentation: Augmentation, flip: bool) -> Vec<GraphRecord> {
    records.iter().map(|r| augment(r, augmentation, flip)).collect()
}

/// Greedy generations for `records`, paired with what each input asked for.
pub fn generate_records(
    model: &Graph2Seq,
    records: &[GraphRecord],
    max_len: usize,
) -> Result<Vec<GenerationRecord>, Seq2SeqError> {
    let examples: Vec<Example> = records.iter().map(GraphRecord::to_example).collect();
    let hypotheses = generate_all(model, &examples, max_len)?;
    Ok(records
        .iter()
        .zip(examples)
        .zip(hypotheses)
        .map(|((r, ex), hypothesis)| GenerationRecord {
            source_id: r.source_id.clone(),
            hypothesis,
            reference: ex.target,
            voice_expected: r.expected_voice(),
            strategy: r.tfa.clone(),
        })
        .collect())
}

/// Rows of a JSONL file; unparseable lines are returned as `(line, message)`
/// instead of aborting.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> io::Result<(Vec<T>, Vec<(usize, String)>)> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(row) => rows.push(row),
            Err(e) => errors.push((i + 1, e.to_string())),
        }
    }
    Ok((rows, errors))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
