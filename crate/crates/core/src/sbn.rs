//! Sequential box notation (SBN).
//!
//! Supported grammar, one DRS condition per line:
//!
//! ```text
//! line     := head (label target)*          concept or constant line
//!           | RELATION ['<' k]             discourse relation, opens a box
//! head     := synset | constant
//! synset   := lemma '.' pos '.' sense       pos in {n, v, a, r}
//! target   := ('+' | '-') k                 relative line offset, k > 0
//!           | constant
//! constant := "quoted string" | bare token
//! ```
//!
//! Everything after an unquoted `%` is a comment. Blank lines are skipped.
//! Relative offsets count content lines (relation lines included), so a
//! reference on line `i` with offset `k` points at line `i + k`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discourse relations that open a new box.
pub const DISCOURSE_RELATIONS: &[&str] = &[
    "ALTERNATION",
    "ATTRIBUTION",
    "BACKGROUND",
    "COMMENTARY",
    "CONDITION",
    "CONSEQUENCE",
    "CONTINUATION",
    "CONTRAST",
    "ELABORATION",
    "EXPLANATION",
    "INSTANCE",
    "NARRATION",
    "NECESSITY",
    "NEGATION",
    "PARALLEL",
    "POSSIBILITY",
    "PRECONDITION",
    "RESULT",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SbnError {
    #[error("document contains no content lines")]
    EmptyDocument,
    #[error("line {line}: offset {offset:+} does not resolve to a line")]
    UnresolvableReference { line: usize, offset: i32 },
    #[error("malformed synset `{0}`")]
    MalformedSynset(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// A WordNet synset atom such as `kill.v.01`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Synset {
    pub lemma: String,
    pub pos: char,
    /// Sense number as written (`01`), kept verbatim for round-tripping.
    pub sense: String,
}

impl Synset {
    pub fn parse(token: &str) -> Result<Synset, SbnError> {
        let malformed = || SbnError::MalformedSynset(token.to_string());
        let mut parts = token.rsplitn(3, '.');
        let sense = parts.next().ok_or_else(malformed)?;
        let pos = parts.next().ok_or_else(malformed)?;
        let lemma = parts.next().ok_or_else(malformed)?;
        if lemma.is_empty() || sense.is_empty() || !sense.chars().all(|c| c.is_ascii_digit()) {
            return Err(malformed());
        }
        let pos = match pos {
            "n" | "v" | "a" | "r" => pos.chars().next().unwrap(),
            _ => return Err(malformed()),
        };
        Ok(Synset {
            lemma: lemma.to_string(),
            pos,
            sense: sense.to_string(),
        })
    }

    pub fn is_verb(&self) -> bool {
        self.pos == 'v'
    }
}

impl fmt::Display for Synset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.lemma, self.pos, self.sense)
    }
}

/// A constant: name, number, date or deictic token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constant {
    pub text: String,
    pub quoted: bool,
}

impl Constant {
    pub fn bare(text: impl Into<String>) -> Self {
        Constant {
            text: text.into(),
            quoted: false,
        }
    }

    pub fn quoted(text: impl Into<String>) -> Self {
        Constant {
            text: text.into(),
            quoted: true,
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.quoted {
            write!(f, "\"{}\"", self.text)
        } else {
            f.write_str(&self.text)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeAtom {
    Synset(Synset),
    Constant(Constant),
    /// Discourse relation head, e.g. `NEGATION`.
    Relation(String),
}

impl fmt::Display for NodeAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeAtom::Synset(s) => s.fmt(f),
            NodeAtom::Constant(c) => c.fmt(f),
            NodeAtom::Relation(r) => f.write_str(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotTarget {
    /// Offset to another line, never zero.
    RelativeIndex(i32),
    Constant(Constant),
}

impl fmt::Display for SlotTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotTarget::RelativeIndex(k) => write!(f, "{k:+}"),
            SlotTarget::Constant(c) => c.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub label: String,
    pub target: SlotTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbnLine {
    pub head: NodeAtom,
    pub slots: Vec<Slot>,
    pub box_id: usize,
    /// For relation lines: how many boxes back the relation points (`<k`).
    pub box_ref: Option<usize>,
}

impl SbnLine {
    pub fn is_relation(&self) -> bool {
        matches!(self.head, NodeAtom::Relation(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbnDocument {
    pub source_id: String,
    pub lines: Vec<SbnLine>,
}

impl SbnDocument {
    pub fn box_count(&self) -> usize {
        self.lines.last().map(|l| l.box_id + 1).unwrap_or(0)
    }

    /// Absolute line index targeted by `offset` on line `line`, if in bounds.
    pub fn resolve(&self, line: usize, offset: i32) -> Option<usize> {
        let target = line as i64 + offset as i64;
        if offset == 0 || target < 0 || target as usize >= self.lines.len() {
            None
        } else {
            Some(target as usize)
        }
    }

    /// Re-checks the reference-closure and box invariants.
    pub fn validate(&self) -> Result<(), SbnError> {
        if self.lines.is_empty() {
            return Err(SbnError::EmptyDocument);
        }
        let mut expected_box = 0;
        for (i, line) in self.lines.iter().enumerate() {
            if line.is_relation() {
                expected_box += 1;
                let k = line.box_ref.unwrap_or(1);
                if k == 0 || k > expected_box {
                    return Err(SbnError::Syntax {
                        line: i + 1,
                        message: format!("box reference <{k} points before the first box"),
                    });
                }
            }
            if line.box_id != expected_box {
                return Err(SbnError::Syntax {
                    line: i + 1,
                    message: "box ids are not monotone".into(),
                });
            }
            for slot in &line.slots {
                if let SlotTarget::RelativeIndex(k) = slot.target {
                    let ok = self
                        .resolve(i, k)
                        .map(|t| !self.lines[t].is_relation())
                        .unwrap_or(false);
                    if !ok {
                        return Err(SbnError::UnresolvableReference {
                            line: i + 1,
                            offset: k,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn is_relation_token(token: &str) -> bool {
    DISCOURSE_RELATIONS.contains(&token)
}

fn looks_numeric(token: &str) -> bool {
    token.parse::<f64>().is_ok()
}

/// Splits a content line into tokens, keeping quoted strings whole.
/// Returns `(token, was_quoted)` pairs with the comment stripped.
fn tokenize_line(raw: &str, line_no: usize) -> Result<Vec<(String, bool)>, SbnError> {
    let mut tokens = Vec::new();
    let mut chars = raw.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.peek() {
            None | Some('%') => break,
            Some('"') => {
                chars.next();
                let mut text = String::new();
                let mut closed = false;
                for c in chars.by_ref() {
                    if c == '"' {
                        closed = true;
                        break;
                    }
                    text.push(c);
                }
                if !closed {
                    return Err(SbnError::Syntax {
                        line: line_no,
                        message: "unterminated quoted string".into(),
                    });
                }
                tokens.push((text, true));
            }
            Some(_) => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '%' {
                        break;
                    }
                    text.push(c);
                    chars.next();
                }
                tokens.push((text, false));
            }
        }
    }
    Ok(tokens)
}

fn parse_head(token: &str, quoted: bool) -> Result<NodeAtom, SbnError> {
    if quoted {
        return Ok(NodeAtom::Constant(Constant::quoted(token)));
    }
    if is_relation_token(token) {
        return Ok(NodeAtom::Relation(token.to_string()));
    }
    if token.contains('.') && !looks_numeric(token) {
        return Synset::parse(token).map(NodeAtom::Synset);
    }
    Ok(NodeAtom::Constant(Constant::bare(token)))
}

fn parse_target(token: &str, quoted: bool, line_no: usize) -> Result<SlotTarget, SbnError> {
    if quoted {
        return Ok(SlotTarget::Constant(Constant::quoted(token)));
    }
    if let Some(rest) = token.strip_prefix('+').or_else(|| token.strip_prefix('-')) {
        if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
            let magnitude: i32 = rest.parse().map_err(|_| SbnError::Syntax {
                line: line_no,
                message: format!("offset `{token}` out of range"),
            })?;
            if magnitude == 0 {
                return Err(SbnError::Syntax {
                    line: line_no,
                    message: "relative offset must not be zero".into(),
                });
            }
            let sign = if token.starts_with('-') { -1 } else { 1 };
            return Ok(SlotTarget::RelativeIndex(sign * magnitude));
        }
    }
    Ok(SlotTarget::Constant(Constant::bare(token)))
}

/// Parses an SBN document.
pub fn parse_sbn(text: &str, source_id: &str) -> Result<SbnDocument, SbnError> {
    let mut lines = Vec::new();
    let mut box_id = 0;
    for raw in text.lines() {
        let line_no = lines.len() + 1;
        let tokens = tokenize_line(raw, line_no)?;
        let Some(((head_tok, head_quoted), rest)) = tokens.split_first() else {
            continue;
        };
        let head = parse_head(head_tok, *head_quoted)?;
        if let NodeAtom::Relation(name) = &head {
            box_id += 1;
            let box_ref = match rest {
                [] => None,
                [(tok, false)] if tok.starts_with('<') => {
                    let k: usize = tok[1..].parse().map_err(|_| SbnError::Syntax {
                        line: line_no,
                        message: format!("bad box reference `{tok}`"),
                    })?;
                    Some(k)
                }
                _ => {
                    return Err(SbnError::Syntax {
                        line: line_no,
                        message: format!("relation {name} takes only a box reference"),
                    })
                }
            };
            lines.push(SbnLine {
                head,
                slots: Vec::new(),
                box_id,
                box_ref,
            });
            continue;
        }
        if rest.len() % 2 != 0 {
            return Err(SbnError::Syntax {
                line: line_no,
                message: format!("role `{}` has no target", rest[rest.len() - 1].0),
            });
        }
        let slots = rest
            .chunks(2)
            .map(|pair| {
                let (label, label_quoted) = &pair[0];
                if *label_quoted {
                    return Err(SbnError::Syntax {
                        line: line_no,
                        message: "role labels cannot be quoted".into(),
                    });
                }
                Ok(Slot {
                    label: label.clone(),
                    target: parse_target(&pair[1].0, pair[1].1, line_no)?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        lines.push(SbnLine {
            head,
            slots,
            box_id,
            box_ref: None,
        });
    }
    let doc = SbnDocument {
        source_id: source_id.to_string(),
        lines,
    };
    doc.validate()?;
    Ok(doc)
}

/// Writes a document back to SBN text, one line per condition.
pub fn serialize_sbn(doc: &SbnDocument) -> String {
    let mut out = String::new();
    for line in &doc.lines {
        out.push_str(&line.head.to_string());
        if let Some(k) = line.box_ref {
            out.push_str(&format!(" <{k}"));
        }
        for slot in &line.slots {
            out.push(' ');
            out.push_str(&slot.label);
            out.push(' ');
            out.push_str(&slot.target.to_string());
        }
        out.push('\n');
    }
    out
}

/// One successfully loaded manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub document: SbnDocument,
    pub reference: String,
}

/// A manifest row that could not be loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryError {
    /// 1-based manifest row.
    pub row: usize,
    pub error: SbnError,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub entries: Vec<CorpusEntry>,
    pub errors: Vec<EntryError>,
}

/// Loads `<sbn_path>\t<reference_text_or_path>` rows. Paths are resolved
/// relative to the manifest. Bad rows are reported, never fatal.
pub fn load_corpus(manifest_path: &Path) -> Result<LoadedCorpus, SbnError> {
    let manifest = fs::read_to_string(manifest_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => SbnError::MissingFile(manifest_path.to_path_buf()),
        _ => SbnError::Io {
            path: manifest_path.display().to_string(),
            message: e.to_string(),
        },
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut corpus = LoadedCorpus::default();
    for (i, row) in manifest.lines().enumerate() {
        let row_no = i + 1;
        if row.trim().is_empty() || row.starts_with('#') {
            continue;
        }
        match load_row(base, row, row_no) {
            Ok(entry) => corpus.entries.push(entry),
            Err(error) => {
                log::warn!("manifest row {row_no}: {error}");
                corpus.errors.push(EntryError { row: row_no, error });
            }
        }
    }
    Ok(corpus)
}

fn load_row(base: &Path, row: &str, row_no: usize) -> Result<CorpusEntry, SbnError> {
    let (sbn_col, ref_col) = row.split_once('\t').ok_or_else(|| SbnError::Syntax {
        line: row_no,
        message: "manifest row needs two tab-separated columns".into(),
    })?;
    let sbn_path = base.join(sbn_col.trim());
    let text = fs::read_to_string(&sbn_path).map_err(|_| SbnError::MissingFile(sbn_path.clone()))?;
    let document = parse_sbn(&text, sbn_col.trim())?;
    let ref_col = ref_col.trim();
    let ref_path = base.join(ref_col);
    let reference = if !ref_col.is_empty() && ref_path.is_file() {
        fs::read_to_string(&ref_path)
            .map_err(|e| SbnError::Io {
                path: ref_path.display().to_string(),
                message: e.to_string(),
            })?
            .trim()
            .to_string()
    } else {
        ref_col.to_string()
    };
    Ok(CorpusEntry {
        document,
        reference,
    })
}
