use std::collections::BTreeMap;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use tfagen::encoders::{EncoderConfig, EncoderKind, NeighborhoodKind};
use tfagen::eval::{
    metric_pair, read_judgments, rose_accuracy, voice_agreement, AutomaticRow, Direction, EvaluationReport,
    RoseSection,
};
use tfagen::pipeline::{
    augment_all, convert_corpus, generate_records, read_jsonl, write_jsonl, Augmentation, GraphRecord,
};
use tfagen::sbn::load_corpus;
use tfagen::seq2seq::{train_with, EpochMetrics, GenerationRecord, Graph2Seq, ModelConfig, Seq2SeqError, TrainConfig};
use tfagen::tfa::{build_challenge_set, ChallengeConfig, ChallengeItem, Voice};

/// DRS graph-to-text toolkit with topic-focus voice control.
#[derive(Debug, Parser, Serialize)]
#[command(name = "tfagen", version)]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Directory receiving the outputs and the config snapshot.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Parse an SBN manifest into Levi graphs (`graphs.jsonl`, `conversion_stats.json`).
    Convert(ConvertArgs),
    /// Add TFA markers to a graph file (`graphs.<strategy>[.flipped].jsonl`).
    Augment(AugmentArgs),
    /// Train a graph-to-sequence model (`model.json`, `metrics.csv`, `checkpoints/`).
    Train(TrainArgs),
    /// Greedy generation for a graph file (`generations.jsonl`).
    Generate(GenerateArgs),
    /// Automatic metrics and ROSE table (`report.json`).
    Evaluate(EvaluateArgs),
    /// Balanced active/passive test set (`challenge.jsonl`).
    ChallengeSet(ChallengeArgs),
    /// Write a template corpus of transitive sentences (`manifest.tsv`, `sbn/`).
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
struct ConvertArgs {
    /// Manifest rows: `<sbn_path>\t<reference text or path>`.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "graphs.jsonl")]
    out: String,
}

#[derive(Debug, Args, Serialize)]
struct AugmentArgs {
    #[arg(long)]
    input: PathBuf,
    /// none, ctc, btc or rtr.
    #[arg(long)]
    strategy: Augmentation,
    /// Mark the other argument, requesting the opposite voice.
    #[arg(long)]
    flip: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Dev graphs for perplexity, decay and early stopping.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// JSON training settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gcn, gat or ggnn.
    #[arg(long)]
    encoder: Option<EncoderKind>,
    /// local or deep.
    #[arg(long)]
    neighborhood: Option<NeighborhoodKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the model's configured maximum.
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, default_value = "generations.jsonl")]
    out: String,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    /// `<encoder>,<strategy>,<normal.jsonl>[,<active_passive.jsonl>]`; repeatable.
    #[arg(long = "system", required = true)]
    systems: Vec<String>,
    /// TSV of human judgments: source_id, sem, gram, phen, note.
    #[arg(long)]
    judgments: Option<PathBuf>,
    /// Generations the judgments refer to; defaults to the first system's
    /// active/passive file.
    #[arg(long)]
    rose_generations: Option<PathBuf>,
    #[arg(long, default_value = "report.json")]
    out: String,
}

#[derive(Debug, Args, Serialize)]
struct ChallengeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Draw actives without matching the passive role-pair distribution.
    #[arg(long)]
    unstratified: bool,
    #[arg(long, default_value = "challenge.jsonl")]
    out: String,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
}

/// Contents of `train --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSettings {
    encoder: EncoderKind,
    neighborhood: NeighborhoodKind,
    hidden: usize,
    embedding: usize,
    /// Defaults by neighborhood: 2 layers for local, 1 for deep.
    layers: Option<usize>,
    /// Defaults by neighborhood: on for local, off for deep.
    highway: Option<bool>,
    attention_heads: usize,
    dropout: f64,
    copy: bool,
    max_len: usize,
    train: TrainConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            encoder: EncoderKind::Ggnn,
            neighborhood: NeighborhoodKind::Local,
            hidden: 64,
            embedding: 64,
            layers: None,
            highway: None,
            attention_heads: 1,
            dropout: 0.5,
            copy: true,
            max_len: 60,
            train: TrainConfig::default(),
        }
    }
}

impl TrainSettings {
    fn model_config(&self) -> ModelConfig {
        let mut encoder = EncoderConfig::new(self.encoder, self.neighborhood, self.hidden);
        if let Some(l) = self.layers {
            encoder.layers = l;
        }
        if let Some(h) = self.highway {
            encoder.highway = h;
        }
        encoder.attention_heads = self.attention_heads;
        ModelConfig {
            encoder,
            embedding: self.embedding,
            dropout: self.dropout,
            copy: self.copy,
            max_len: self.max_len,
        }
    }
}

#[derive(Serialize)]
struct Snapshot<'a, T: Serialize> {
    version: &'static str,
    seed: u64,
    output_dir: &'a Path,
    log_level: &'a str,
    #[serde(flatten)]
    command: &'a Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolved: Option<T>,
}

fn write_snapshot<T: Serialize>(cli: &Cli, name: &str, resolved: Option<T>) -> Result<()> {
    let snapshot = Snapshot {
        version: env!("CARGO_PKG_VERSION"),
        seed: cli.seed,
        output_dir: &cli.output_dir,
        log_level: &cli.log_level,
        command: &cli.command,
        resolved,
    };
    let path = cli.output_dir.join(format!("{name}.config.json"));
    fs::write(&path, serde_json::to_string_pretty(&snapshot)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let (rows, errors) = read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
    for (line, message) in &errors {
        log::warn!("{}:{line}: skipped: {message}", path.display());
    }
    Ok(rows)
}

fn convert(cli: &Cli, args: &ConvertArgs) -> Result<()> {
    let corpus = load_corpus(&args.manifest)?;
    for e in &corpus.errors {
        log::warn!("manifest row {}: {}", e.row, e.error);
    }
    if corpus.entries.is_empty() {
        log::warn!("{}: no documents loaded", args.manifest.display());
    }
    let (records, stats) = convert_corpus(&corpus);
    write_jsonl(&cli.output_dir.join(&args.out), &records)?;
    fs::write(
        cli.output_dir.join("conversion_stats.json"),
        serde_json::to_string_pretty(&stats)? + "\n",
    )?;
    log::info!(
        "converted {}/{} rows ({} parse failures, {} ambiguous)",
        stats.converted,
        stats.rows,
        stats.parse_failures,
        stats.ambiguous_voice
    );
    write_snapshot::<()>(cli, "convert", None)
}

fn augment(cli: &Cli, args: &AugmentArgs) -> Result<()> {
    let records: Vec<GraphRecord> = read_rows(&args.input)?;
    let out = augment_all(&records, args.strategy, args.flip);
    let skipped = out.iter().filter(|r| r.tag.is_some()).count();
    if skipped > 0 {
        log::warn!("{skipped} of {} graphs left unmarked", out.len());
    }
    let name = args.out.clone().unwrap_or_else(|| {
        format!("graphs.{}{}.jsonl", args.strategy, if args.flip { ".flipped" } else { "" })
    });
    write_jsonl(&cli.output_dir.join(name), &out)?;
    write_snapshot::<()>(cli, "augment", None)
}

fn train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let mut settings = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<TrainSettings>(&text)
                .with_context(|| format!("{}: invalid training settings", path.display()))?
        }
        None => TrainSettings::default(),
    };
    if let Some(e) = args.encoder {
        settings.encoder = e;
    }
    if let Some(n) = args.neighborhood {
        settings.neighborhood = n;
    }
    if let Some(e) = args.epochs {
        settings.train.epochs = e;
    }
    if let Some(h) = args.hidden {
        settings.hidden = h;
        settings.embedding = h;
    }
    let model_config = settings.model_config();
    model_config.validate().context("model settings")?;
    settings.train.validate().context("training settings")?;
    write_snapshot(cli, "train", Some(&settings))?;

    let to_examples = |rs: Vec<GraphRecord>| rs.iter().map(GraphRecord::to_example).collect::<Vec<_>>();
    let train_set = to_examples(read_rows(&args.train)?);
    let dev_set = match &args.dev {
        Some(p) => to_examples(read_rows(p)?),
        None => Vec::new(),
    };
    let mut csv = String::from(EpochMetrics::CSV_HEADER);
    csv.push('\n');
    let csv_path = cli.output_dir.join("metrics.csv");
    let checkpoints = cli.output_dir.join("checkpoints");
    fs::create_dir_all(&checkpoints)?;
    let outcome = train_with(&train_set, &dev_set, &model_config, &settings.train, cli.seed, |m, model| {
        csv.push_str(&m.csv_row());
        csv.push('\n');
        fs::write(&csv_path, &csv)
            .and_then(|()| fs::write(checkpoints.join(format!("epoch-{:03}.json", m.epoch)), model.to_json()))
            .map(|()| ControlFlow::Continue(()))
            .map_err(|e| Seq2SeqError::Model(e.to_string()))
    })?;
    fs::write(cli.output_dir.join("model.json"), outcome.model.to_json())?;
    log::info!("best epoch {}", outcome.best_epoch);
    Ok(())
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let json = fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let model = Graph2Seq::from_json(&json)?;
    let records: Vec<GraphRecord> = read_rows(&args.input)?;
    let max_len = args.max_len.unwrap_or(model.config.max_len);
    let out = generate_records(&model, &records, max_len)?;
    write_jsonl(&cli.output_dir.join(&args.out), &out)?;
    write_snapshot::<()>(cli, "generate", None)
}

struct System {
    encoder: String,
    strategy: String,
    normal: PathBuf,
    active_passive: Option<PathBuf>,
}

fn parse_system(spec: &str) -> Result<System> {
    let parts: Vec<&str> = spec.split(',').collect();
    match parts.as_slice() {
        [enc, strat, normal] | [enc, strat, normal, ""] => Ok(System {
            encoder: enc.to_string(),
            strategy: strat.to_string(),
            normal: normal.into(),
            active_passive: None,
        }),
        [enc, strat, normal, ap] => Ok(System {
            encoder: enc.to_string(),
            strategy: strat.to_string(),
            normal: normal.into(),
            active_passive: Some(ap.into()),
        }),
        _ => bail!("--system expects `<encoder>,<strategy>,<normal.jsonl>[,<active_passive.jsonl>]`, got `{spec}`"),
    }
}

fn metrics_of(path: &Path) -> Result<(tfagen::eval::MetricPair, Vec<GenerationRecord>)> {
    let rows: Vec<GenerationRecord> = read_rows(path)?;
    let hyps: Vec<Vec<String>> = rows.iter().map(|r| r.hypothesis.clone()).collect();
    let refs: Vec<Vec<String>> = rows.iter().map(|r| r.reference.clone()).collect();
    Ok((metric_pair(&hyps, &refs)?, rows))
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let systems = args.systems.iter().map(|s| parse_system(s)).collect::<Result<Vec<_>>>()?;
    let mut automatic = Vec::new();
    let mut first_ap: Option<Vec<GenerationRecord>> = None;
    for s in &systems {
        let (normal, _) = metrics_of(&s.normal)?;
        let active_passive = match &s.active_passive {
            Some(p) => {
                let (m, rows) = metrics_of(p)?;
                first_ap.get_or_insert(rows);
                Some(m)
            }
            None => None,
        };
        automatic.push(AutomaticRow {
            encoder: s.encoder.clone(),
            strategy: s.strategy.clone(),
            normal: Some(normal),
            active_passive,
        });
    }
    let rose_rows = match &args.rose_generations {
        Some(p) => Some(read_rows::<GenerationRecord>(p)?),
        None => first_ap,
    };
    let voice_flip_rate = match &rose_rows {
        Some(rows) => {
            let (hyps, expected): (Vec<_>, Vec<_>) = rows
                .iter()
                .filter(|r| r.voice_expected.voice != Voice::NotTransitive)
                .map(|r| (r.hypothesis.clone(), r.voice_expected.voice))
                .unzip();
            Some(voice_agreement(&hyps, &expected)?)
        }
        None => None,
    };
    let rose = match (&args.judgments, &rose_rows) {
        (Some(path), Some(rows)) => {
            let judgments = read_judgments(path)?;
            let directions: BTreeMap<String, Direction> = rows
                .iter()
                .filter_map(|r| {
                    let target = r.voice_expected.voice;
                    Direction::from_source(target.opposite()).map(|d| (r.source_id.clone(), d))
                })
                .collect();
            match rose_accuracy(&judgments, &directions) {
                Ok(report) => RoseSection::Report(report),
                Err(e) => {
                    log::warn!("ROSE left pending: {e}");
                    RoseSection::pending()
                }
            }
        }
        (Some(_), None) => {
            log::warn!("ROSE left pending: no active/passive generations given");
            RoseSection::pending()
        }
        (None, _) => RoseSection::pending(),
    };
    let report = EvaluationReport {
        automatic,
        rose,
        voice_flip_rate,
    };
    fs::write(cli.output_dir.join(&args.out), serde_json::to_string_pretty(&report)? + "\n")?;
    write_snapshot::<()>(cli, "evaluate", None)
}

fn challenge(cli: &Cli, args: &ChallengeArgs) -> Result<()> {
    let records: Vec<GraphRecord> = read_rows(&args.input)?;
    let items: Vec<ChallengeItem> = records
        .iter()
        .filter_map(|r| {
            r.voice.map(|voice| ChallengeItem {
                source_id: r.source_id.clone(),
                graph: r.graph.clone(),
                reference: r.reference.clone(),
                voice,
            })
        })
        .collect();
    let cfg = ChallengeConfig {
        seed: cli.seed,
        stratified: !args.unstratified,
    };
    let set = build_challenge_set(&items, cfg);
    let out: Vec<GraphRecord> = set
        .items
        .into_iter()
        .map(|c| GraphRecord {
            source_id: c.source_id,
            graph: c.graph,
            reference: c.reference,
            voice: Some(c.voice),
            tfa: None,
            tag: None,
        })
        .collect();
    write_jsonl(&cli.output_dir.join(&args.out), &out)?;
    log::info!("challenge set: {} items, {} warnings", out.len(), set.warnings.len());
    write_snapshot(cli, "challenge-set", Some(&set.warnings))
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let pairs = tfagen::synth::generate_corpus(args.count, cli.seed);
    let manifest = tfagen::synth::write_corpus(&cli.output_dir, &pairs)?;
    log::info!("wrote {} pairs to {}", pairs.len(), manifest.display());
    write_snapshot::<()>(cli, "synth", None)
}

fn run(cli: &Cli) -> Result<()> {
    fs::create_dir_all(&cli.output_dir).with_context(|| format!("creating {}", cli.output_dir.display()))?;
    match &cli.command {
        Command::Convert(a) => convert(cli, a),
        Command::Augment(a) => augment(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Generate(a) => generate(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::ChallengeSet(a) => challenge(cli, a),
        Command::Synth(a) => synth(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
