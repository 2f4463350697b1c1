//! Corpus BLEU, METEOR-lite, the ROSE judgment harness and a voice heuristic.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tfa::Voice;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("no judgment for {} item(s): {}", .0.len(), .0.join(", "))]
    MissingJudgment(Vec<String>),
    #[error("judgment file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

const BLEU_EPSILON: f64 = 1e-9;

fn check_lengths<T, U>(h: &[T], r: &[U]) -> Result<(), EvalError> {
    if h.len() != r.len() {
        return Err(EvalError::LengthMismatch {
            hypotheses: h.len(),
            references: r.len(),
        });
    }
    Ok(())
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and hypothesis n-gram totals for n = 1..=4.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BleuStats {
    pub matches: [usize; 4],
    pub totals: [usize; 4],
    pub hypothesis_length: usize,
    pub reference_length: usize,
}

pub fn bleu_stats(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<BleuStats, EvalError> {
    check_lengths(hypotheses, references)?;
    let mut stats = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        stats.hypothesis_length += h.len();
        stats.reference_length += r.len();
        for n in 1..=4 {
            let hc = ngram_counts(h, n);
            let rc = ngram_counts(r, n);
            stats.totals[n - 1] += h.len().saturating_sub(n - 1);
            stats.matches[n - 1] += hc
                .iter()
                .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }
    Ok(stats)
}

impl BleuStats {
    /// Zero matches contribute ε in place of a zero numerator.
    pub fn score(&self) -> f64 {
        if self.hypothesis_length == 0 {
            return 0.0;
        }
        let log_p: f64 = (0..4)
            .map(|i| {
                let m = if self.matches[i] == 0 {
                    BLEU_EPSILON
                } else {
                    self.matches[i] as f64
                };
                (m / self.totals[i].max(1) as f64).ln()
            })
            .sum::<f64>()
            / 4.0;
        let (c, r) = (self.hypothesis_length as f64, self.reference_length as f64);
        let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        100.0 * bp * log_p.exp()
    }
}

/// Corpus-level BLEU-4 on tokenized, aligned lists, in [0, 100].
pub fn bleu(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64, EvalError> {
    Ok(bleu_stats(hypotheses, references)?.score())
}

/// Suffix-stripping stemmer used for the second alignment stage.
pub fn stem(word: &str) -> &str {
    for suffix in ["ing", "ed", "es", "s", "ly"] {
        if let Some(base) = word.strip_suffix(suffix) {
            if base.chars().count() >= 3 && !(suffix == "s" && base.ends_with('s')) {
                return base;
            }
        }
    }
    word
}

/// Matched unigram count and chunk count for one pair.
fn align(h: &[String], r: &[String]) -> (usize, usize) {
    let mut h_used = vec![None; h.len()];
    let mut r_used = vec![false; r.len()];
    let stages: [fn(&str) -> &str; 2] = [|w| w, stem];
    for key in stages {
        for (i, hw) in h.iter().enumerate() {
            if h_used[i].is_some() {
                continue;
            }
            if let Some(j) = (0..r.len()).find(|&j| !r_used[j] && key(&r[j]) == key(hw)) {
                h_used[i] = Some(j);
                r_used[j] = true;
            }
        }
    }
    let pairs: Vec<(usize, usize)> = h_used
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect();
    let mut chunks = 0;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if k == 0 || !(pairs[k - 1].0 + 1 == i && pairs[k - 1].1 + 1 == j) {
            chunks += 1;
        }
    }
    (pairs.len(), chunks)
}

/// METEOR without synonym or paraphrase stages: exact then stem alignment,
/// `F = PR / (αP + (1−α)R)` with α = 0.9 and fragmentation penalty
/// `0.5 · (chunks / matches)³`, aggregated over the corpus.
pub fn meteor_lite(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64, EvalError> {
    check_lengths(hypotheses, references)?;
    let (mut matches, mut chunks, mut hl, mut rl) = (0usize, 0usize, 0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        let (m, c) = align(h, r);
        matches += m;
        chunks += c;
        hl += h.len();
        rl += r.len();
    }
    if matches == 0 {
        return Ok(0.0);
    }
    let p = matches as f64 / hl as f64;
    let r = matches as f64 / rl as f64;
    let alpha = 0.9;
    let fmean = p * r / (alpha * p + (1.0 - alpha) * r);
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    Ok(100.0 * fmean * (1.0 - penalty))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoseJudgment {
    pub source_id: String,
    pub semantics: bool,
    pub grammaticality: bool,
    pub phenomenon: bool,
    pub note: Option<String>,
}

impl RoseJudgment {
    pub fn rose(&self) -> bool {
        self.semantics && self.grammaticality && self.phenomenon
    }
}

fn parse_bit(field: &str, line: usize, name: &str) -> Result<bool, EvalError> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(EvalError::Parse {
            line,
            message: format!("{name} must be 0 or 1, got `{other}`"),
        }),
    }
}

/// Parses `source_id\tsem\tgram\tphen\tnote`. A header row starting with
/// `source_id`, blank lines and `#` comments are skipped.
pub fn parse_judgments(text: &str) -> Result<Vec<RoseJudgment>, EvalError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') || raw.starts_with("source_id\t") {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() < 4 {
            return Err(EvalError::Parse {
                line,
                message: format!("expected at least 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let note = fields.get(4).map(|s| s.trim()).filter(|s| !s.is_empty());
        out.push(RoseJudgment {
            source_id: fields[0].trim().to_string(),
            semantics: parse_bit(fields[1], line, "sem")?,
            grammaticality: parse_bit(fields[2], line, "gram")?,
            phenomenon: parse_bit(fields[3], line, "phen")?,
            note: note.map(str::to_string),
        });
    }
    Ok(out)
}

pub fn read_judgments(path: &Path) -> Result<Vec<RoseJudgment>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_judgments(&text)
}

pub fn write_judgments(judgments: &[RoseJudgment]) -> String {
    let mut out = String::from("source_id\tsem\tgram\tphen\tnote\n");
    for j in judgments {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            j.source_id,
            j.semantics as u8,
            j.grammaticality as u8,
            j.phenomenon as u8,
            j.note.as_deref().unwrap_or("")
        ));
    }
    out
}

/// Direction of a voice conversion, named source → target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PassiveToActive,
    ActiveToPassive,
}

impl Direction {
    /// Conversion away from the source voice.
    pub fn from_source(voice: Voice) -> Option<Direction> {
        match voice {
            Voice::Passive => Some(Direction::PassiveToActive),
            Voice::Active => Some(Direction::ActiveToPassive),
            Voice::NotTransitive => None,
        }
    }

    pub fn target(self) -> Voice {
        match self {
            Direction::PassiveToActive => Voice::Active,
            Direction::ActiveToPassive => Voice::Passive,
        }
    }
}

/// One column of the ROSE table, percentages in [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoseColumn {
    pub count: usize,
    pub semantics: f64,
    pub grammaticality: f64,
    pub phenomenon: f64,
    pub rose: f64,
}

impl RoseColumn {
    fn from_judgments<'a>(items: impl IntoIterator<Item = &'a RoseJudgment>) -> RoseColumn {
        let (mut n, mut s, mut g, mut p, mut r) = (0usize, 0usize, 0usize, 0usize, 0usize);
        for j in items {
            n += 1;
            s += j.semantics as usize;
            g += j.grammaticality as usize;
            p += j.phenomenon as usize;
            r += j.rose() as usize;
        }
        let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
        RoseColumn {
            count: n,
            semantics: pct(s),
            grammaticality: pct(g),
            phenomenon: pct(p),
            rose: pct(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoseReport {
    pub passive_to_active: RoseColumn,
    pub active_to_passive: RoseColumn,
    pub all: RoseColumn,
}

/// Per-direction and overall ROSE columns. Every id in `directions` needs a
/// judgment; judgments for unknown ids are ignored.
pub fn rose_accuracy(
    judgments: &[RoseJudgment],
    directions: &BTreeMap<String, Direction>,
) -> Result<RoseReport, EvalError> {
    let by_id: HashMap<&str, &RoseJudgment> =
        judgments.iter().map(|j| (j.source_id.as_str(), j)).collect();
    let missing: Vec<String> = directions
        .keys()
        .filter(|id| !by_id.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingJudgment(missing));
    }
    let column = |want: Option<Direction>| {
        RoseColumn::from_judgments(
            directions
                .iter()
                .filter(|(_, d)| want.map_or(true, |w| **d == w))
                .map(|(id, _)| by_id[id.as_str()]),
        )
    };
    Ok(RoseReport {
        passive_to_active: column(Some(Direction::PassiveToActive)),
        active_to_passive: column(Some(Direction::ActiveToPassive)),
        all: column(None),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoiceVerdict {
    Active,
    Passive,
    Unknown,
}

impl VoiceVerdict {
    pub fn matches(self, voice: Voice) -> bool {
        matches!(
            (self, voice),
            (VoiceVerdict::Active, Voice::Active) | (VoiceVerdict::Passive, Voice::Passive)
        )
    }
}

const PASSIVE_AUXILIARIES: &[&str] = &[
    "am", "is", "are", "was", "were", "be", "been", "being", "get", "gets", "got", "gotten", "getting",
];

const MODALS: &[&str] = &[
    "can", "could", "will", "would", "shall", "should", "may", "might", "must", "do", "does", "did",
    "has", "have", "had",
];

const IRREGULAR_PARTICIPLES: &[&str] = &[
    "arisen", "awoken", "beaten", "become", "begun", "bent", "bitten", "blown", "born", "borne",
    "bought", "bound", "broken", "brought", "built", "burnt", "caught", "chosen", "come", "cut",
    "dealt", "done", "drawn", "driven", "drunk", "dug", "eaten", "fallen", "fed", "felt", "fought",
    "found", "flown", "forbidden", "forgotten", "forgiven", "frozen", "given", "gone", "ground",
    "grown", "heard", "held", "hidden", "hit", "hung", "hurt", "kept", "known", "laid", "led",
    "left", "lent", "let", "lost", "made", "meant", "met", "paid", "put", "quit", "read", "ridden",
    "rung", "run", "said", "seen", "sent", "set", "sewn", "shaken", "shot", "shown", "shut", "sold",
    "sought", "spent", "spoken", "spun", "stolen", "struck", "stuck", "stung", "sung", "sunk",
    "sworn", "swept", "taken", "taught", "thought", "thrown", "told", "torn", "understood", "upset",
    "won", "woken", "worn", "wound", "written", "wed",
];

const IRREGULAR_PAST: &[&str] = &[
    "ate", "became", "began", "bit", "blew", "bought", "broke", "brought", "built", "came",
    "caught", "chose", "did", "drank", "drew", "drove", "fell", "felt", "flew", "forgot", "found",
    "gave", "got", "grew", "had", "heard", "held", "hid", "hit", "kept", "knew", "laid", "led",
    "left", "lost", "made", "meant", "met", "paid", "put", "ran", "rang", "read", "rode", "rose",
    "said", "sang", "sank", "saw", "sent", "shook", "shot", "showed", "sold", "spoke", "stole",
    "stood", "struck", "stung", "swore", "swam", "took", "taught", "thought", "threw", "told",
    "tore", "understood", "went", "woke", "won", "wore", "wrote",
];

const NOT_PARTICIPLES: &[&str] = &[
    "bed", "red", "need", "seed", "feed", "speed", "weed", "reed", "greed", "breed", "shed",
    "hundred", "indeed", "sled", "sacred", "naked", "wicked", "kindred",
];

const VERB_LEXICON: &[&str] = &[
    "attack", "bite", "boil", "break", "build", "buy", "capture", "carry", "catch", "chase",
    "compose", "desert", "drive", "eat", "find", "follow", "found", "give", "hate", "help", "hit",
    "hold", "kill", "know", "leave", "like", "love", "make", "murder", "own", "paint", "play",
    "read", "rinse", "scare", "see", "sell", "sing", "sting", "take", "teach", "visit", "want",
    "watch", "write",
];

fn is_participle(token: &str) -> bool {
    IRREGULAR_PARTICIPLES.contains(&token)
        || (token.len() >= 4
            && token.ends_with("ed")
            && token.chars().all(|c| c.is_alphabetic())
            && !NOT_PARTICIPLES.contains(&token))
}

fn is_finite_verb(token: &str) -> bool {
    if PASSIVE_AUXILIARIES.contains(&token) || MODALS.contains(&token) || IRREGULAR_PAST.contains(&token) {
        return true;
    }
    if is_participle(token) && !IRREGULAR_PARTICIPLES.contains(&token) {
        return true;
    }
    let third_person = token
        .strip_suffix("es")
        .filter(|b| VERB_LEXICON.contains(b))
        .or_else(|| token.strip_suffix('s').filter(|b| VERB_LEXICON.contains(b)));
    third_person.is_some()
}

/// Classifies a tokenized sentence: passive when an auxiliary is followed
/// within three tokens by a past participle, active when some finite verb is
/// present, unknown otherwise.
pub fn voice_heuristic(tokens: &[String]) -> VoiceVerdict {
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    for (i, t) in lower.iter().enumerate() {
        if PASSIVE_AUXILIARIES.contains(&t.as_str())
            && lower[i + 1..].iter().take(3).any(|w| is_participle(w))
        {
            return VoiceVerdict::Passive;
        }
    }
    if lower.iter().any(|t| is_finite_verb(t)) {
        VoiceVerdict::Active
    } else {
        VoiceVerdict::Unknown
    }
}

/// BLEU and METEOR-lite of one system on one test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub bleu: f64,
    pub meteor_lite: f64,
}

pub fn metric_pair(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<MetricPair, EvalError> {
    Ok(MetricPair {
        bleu: bleu(hypotheses, references)?,
        meteor_lite: meteor_lite(hypotheses, references)?,
    })
}

/// One row of the automatic-metric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomaticRow {
    pub encoder: String,
    pub strategy: String,
    pub normal: Option<MetricPair>,
    pub active_passive: Option<MetricPair>,
}

/// Automatic metrics per system, plus ROSE (or `"pending"` without
/// judgments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub automatic: Vec<AutomaticRow>,
    pub rose: RoseSection,
    pub voice_flip_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoseSection {
    Report(RoseReport),
    Pending(String),
}

impl RoseSection {
    pub fn pending() -> Self {
        RoseSection::Pending("pending".into())
    }
}

/// Share (in %) of generations whose heuristic verdict equals the
/// requested voice.
pub fn voice_agreement(hypotheses: &[Vec<String>], expected: &[Voice]) -> Result<f64, EvalError> {
    check_lengths(hypotheses, expected)?;
    if hypotheses.is_empty() {
        return Ok(0.0);
    }
    let hits = hypotheses
        .iter()
        .zip(expected)
        .filter(|(h, v)| voice_heuristic(h).matches(**v))
        .count();
    Ok(100.0 * hits as f64 / hypotheses.len() as f64)
}

/// Ids present in one list but not the other.
pub fn unmatched_ids<'a>(a: impl IntoIterator<Item = &'a str>, b: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let a: BTreeSet<&str> = a.into_iter().collect();
    let b: BTreeSet<&str> = b.into_iter().collect();
    a.symmetric_difference(&b).map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identity_scores_hundred() {
        let refs = vec![toks("the wolf killed two sheep"), toks("a b c d e f")];
        assert!((bleu(&refs, &refs).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn empty_hypotheses_score_zero() {
        let refs = vec![toks("the wolf killed two sheep")];
        assert_eq!(bleu(&[vec![]], &refs).unwrap(), 0.0);
        assert_eq!(meteor_lite(&[vec![]], &refs).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            bleu(&[toks("a")], &[]),
            Err(EvalError::LengthMismatch { hypotheses: 1, references: 0 })
        ));
        assert!(meteor_lite(&[], &[toks("a")]).is_err());
    }

    /// Counts by rescanning the reference for every hypothesis position.
    fn brute_bleu(h: &[Vec<String>], r: &[Vec<String>]) -> f64 {
        let mut m = [0f64; 4];
        let mut t = [0f64; 4];
        let (mut c, mut rl) = (0.0, 0.0);
        for (hs, rs) in h.iter().zip(r) {
            c += hs.len() as f64;
            rl += rs.len() as f64;
            for n in 1..=4 {
                if hs.len() < n {
                    continue;
                }
                let mut seen: Vec<&[String]> = Vec::new();
                for i in 0..=hs.len() - n {
                    let g = &hs[i..i + n];
                    t[n - 1] += 1.0;
                    if seen.contains(&g) {
                        continue;
                    }
                    seen.push(g);
                    let in_h = (0..=hs.len() - n).filter(|&k| &hs[k..k + n] == g).count();
                    let in_r = if rs.len() >= n {
                        (0..=rs.len() - n).filter(|&k| &rs[k..k + n] == g).count()
                    } else {
                        0
                    };
                    m[n - 1] += in_h.min(in_r) as f64;
                }
            }
        }
        if c == 0.0 {
            return 0.0;
        }
        let mut log = 0.0;
        for n in 0..4 {
            let num = if m[n] == 0.0 { 1e-9 } else { m[n] };
            log += (num / t[n].max(1.0)).ln() / 4.0;
        }
        let bp = if c > rl { 1.0 } else { (1.0 - rl / c).exp() };
        100.0 * bp * log.exp()
    }

    fn corpus() -> impl Strategy<Value = (Vec<Vec<String>>, Vec<Vec<String>>)> {
        let sent = prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..12)
            .prop_map(|v| v.into_iter().map(str::to_string).collect::<Vec<String>>());
        prop::collection::vec((sent.clone(), sent), 1..20).prop_map(|pairs| pairs.into_iter().unzip())
    }

    proptest! {
        #[test]
        fn bleu_matches_brute_force((h, r) in corpus()) {
            let fast = bleu(&h, &r).unwrap();
            let slow = brute_bleu(&h, &r);
            prop_assert!((fast - slow).abs() < 1e-9, "{} vs {}", fast, slow);
        }

        #[test]
        fn bleu_is_order_invariant((h, r) in corpus()) {
            let mut hr: Vec<_> = h.iter().cloned().zip(r.iter().cloned()).collect();
            hr.reverse();
            let (h2, r2): (Vec<_>, Vec<_>) = hr.into_iter().unzip();
            prop_assert!((bleu(&h, &r).unwrap() - bleu(&h2, &r2).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn corrupting_a_token_never_helps() {
        let refs = vec![toks("the wolf killed two sheep in the field"), toks("a dog bit the man")];
        let base = bleu(&refs, &refs).unwrap();
        for i in 0..refs[0].len() {
            let mut hyp = refs.clone();
            hyp[0][i] = "zzz".into();
            assert!(bleu(&hyp, &refs).unwrap() <= base);
        }
    }

    #[test]
    fn meteor_identity_hand_computed() {
        let r = vec![toks("the wolf killed two sheep")];
        // P = R = 1, one chunk over five matches.
        let expected = 100.0 * (1.0 - 0.5 * (1.0f64 / 5.0).powi(3));
        assert!((meteor_lite(&r, &r).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn meteor_zero_overlap_and_stem_match() {
        assert_eq!(meteor_lite(&[toks("x y")], &[toks("a b")]).unwrap(), 0.0);
        assert_eq!(stem("killed"), "kill");
        assert_eq!(stem("kills"), "kill");
        let score = meteor_lite(&[toks("killed")], &[toks("kill")]).unwrap();
        assert!((score - 50.0).abs() < 1e-12);
    }

    #[test]
    fn meteor_counts_chunks() {
        // matches: a b | d, chunks 2, m = 3, P = 3/3, R = 3/4
        let h = vec![toks("a b d")];
        let r = vec![toks("a b c d")];
        let (p, rr) = (1.0, 0.75);
        let f = p * rr / (0.9 * p + 0.1 * rr);
        let expected = 100.0 * f * (1.0 - 0.5 * (2.0f64 / 3.0).powi(3));
        assert!((meteor_lite(&h, &r).unwrap() - expected).abs() < 1e-12);
    }

    fn judgment(id: &str, s: u8, g: u8, p: u8) -> RoseJudgment {
        RoseJudgment {
            source_id: id.into(),
            semantics: s == 1,
            grammaticality: g == 1,
            phenomenon: p == 1,
            note: None,
        }
    }

    #[test]
    fn rose_all_ones_and_conjunction() {
        let dirs: BTreeMap<String, Direction> = [
            ("a".to_string(), Direction::PassiveToActive),
            ("b".to_string(), Direction::ActiveToPassive),
        ]
        .into();
        let all = rose_accuracy(&[judgment("a", 1, 1, 1), judgment("b", 1, 1, 1)], &dirs).unwrap();
        for col in [all.passive_to_active, all.active_to_passive, all.all] {
            assert_eq!((col.semantics, col.grammaticality, col.phenomenon, col.rose), (100.0, 100.0, 100.0, 100.0));
        }
        let none = rose_accuracy(&[judgment("a", 1, 1, 0), judgment("b", 1, 1, 0)], &dirs).unwrap();
        assert_eq!(none.all.rose, 0.0);
        assert_eq!(none.all.semantics, 100.0);
    }

    #[test]
    fn rose_missing_judgment() {
        let dirs: BTreeMap<String, Direction> = [("x".to_string(), Direction::PassiveToActive)].into();
        assert_eq!(
            rose_accuracy(&[], &dirs),
            Err(EvalError::MissingJudgment(vec!["x".into()]))
        );
    }

    #[test]
    fn judgment_tsv_round_trip() {
        let js = vec![judgment("p1", 1, 0, 1), RoseJudgment { note: Some("raw synset".into()), ..judgment("a1", 0, 1, 1) }];
        assert_eq!(parse_judgments(&write_judgments(&js)).unwrap(), js);
        assert!(matches!(parse_judgments("x\t1\t2\t0\n"), Err(EvalError::Parse { line: 1, .. })));
    }

    #[test]
    fn heuristic_on_intro_examples() {
        assert_eq!(voice_heuristic(&tokenize("The two sheep were killed by a wolf.")), VoiceVerdict::Passive);
        assert_eq!(voice_heuristic(&tokenize("The wolf killed two sheep.")), VoiceVerdict::Active);
        assert_eq!(voice_heuristic(&tokenize("hello")), VoiceVerdict::Unknown);
        assert_eq!(voice_heuristic(&tokenize("Mary sees the dog.")), VoiceVerdict::Active);
        assert_eq!(voice_heuristic(&tokenize("The sheep were not killed.")), VoiceVerdict::Passive);
    }
}
