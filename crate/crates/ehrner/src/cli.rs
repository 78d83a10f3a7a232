//! The `ehrner` command line.
//!
//! Errors print as one line, `ehrner: error[<kind>]: <message>`, with exit
//! code 1 for usage, configuration or input problems, 2 for failures while
//! running, and 3 when `curve --assert-headline` fails.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use ehrner_core::corpus::{
    generate_synthetic_corpus, split_train_test, take_fraction, Dataset, Document, Domain, SplitSpec, SynthSpec,
};
use ehrner_core::eval::{compute_report, EvalReport};
use ehrner_core::repr::{pretrain_contextual_with_clock, train_static_embeddings, ContextualEncoder, StaticEmbeddingTable};
use ehrner_core::tagger::{fine_tune_extend, missing_labels, predict, train, LabelScheme, NerModel, Representation};
use serde::Serialize;

use crate::config::Config;
use crate::error::Error;
use crate::formats::{self, Format};
use crate::harness::{self, Averaging, Method, WallClock};
use crate::service::{router, AnnotationService};

#[derive(Debug, Parser)]
#[command(name = "ehrner", version, about = "Named-entity recognition workbench for clinical text")]
pub struct Cli {
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice of the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn plain text files into an unannotated JSON-lines dataset.
    Ingest(IngestArgs),
    /// Generate a synthetic raw corpus and annotated dataset.
    Synth(SynthArgs),
    /// Split a dataset into train and test files.
    Split(SplitArgs),
    /// Train static word embeddings on raw text.
    Embed(EmbedArgs),
    /// Pretrain the contextual encoder on raw text.
    Pretrain(PretrainArgs),
    /// Train a tagger from scratch.
    Train(TrainArgs),
    /// Extend a trained tagger with new labels and fine-tune it.
    Finetune(FinetuneArgs),
    /// Score predictions against gold annotations.
    Eval(EvalArgs),
    /// Run the learning-curve grid and write its reports.
    Curve(CurveArgs),
    /// Start the annotation service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Text files or directories of `.txt` files; one document per file.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Treat every non-empty line as its own document.
    #[arg(long)]
    pub lines: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub documents: Option<usize>,
    #[arg(long)]
    pub raw_sentences: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    /// clinical or biomedical.
    #[arg(long)]
    pub domain: Option<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub test_ratio: Option<f64>,
    /// Keep only this fraction of the training part.
    #[arg(long)]
    pub fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Raw corpus files, one sentence per line.
    #[arg(required = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(required = true)]
    pub corpus: Vec<PathBuf>,
    /// Static table the targets and inputs come from.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Annotated training data (JSON lines or column format).
    pub data: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Optional pretrained contextual encoder.
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    pub data: PathBuf,
    /// The model to extend.
    #[arg(long)]
    pub base: PathBuf,
    /// Attach this encoder before fine-tuning (the base must have none).
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub gold: PathBuf,
    /// Predicted annotations for the same documents.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub pred: Option<PathBuf>,
    /// Predict with this model instead.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Write the report as JSON here.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Macro-average the overall line.
    #[arg(long = "macro")]
    pub macro_average: bool,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Exit with code 3 unless the half-data pretrained model matches the
    /// full-data blank model.
    #[arg(long)]
    pub assert_headline: bool,
    /// Comma-separated methods to run.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Number of seeds (starting at `--seed`, or the configured list).
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long = "macro")]
    pub macro_average: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Require this value in the `x-ehrner-token` header.
    #[arg(long)]
    pub token: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Config,
    Input,
    Runtime,
    Assertion,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage | ErrorKind::Config | ErrorKind::Input => 1,
            ErrorKind::Runtime => 2,
            ErrorKind::Assertion => 3,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Config => "config",
            ErrorKind::Input => "input",
            ErrorKind::Runtime => "runtime",
            ErrorKind::Assertion => "assertion",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl std::fmt::Display) -> Self {
        CliError {
            kind,
            message: message.to_string(),
        }
    }

    /// The single line printed to stderr.
    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        format!("ehrner: error[{}]: {}", self.kind.tag(), flat.join(" "))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Parse { .. } => ErrorKind::Input,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ErrorKind::Input,
            Error::Experiment(_) => ErrorKind::Config,
            Error::Core(c) if is_config_error(c) => ErrorKind::Config,
            _ => ErrorKind::Runtime,
        };
        CliError::new(kind, e)
    }
}

impl From<ehrner_core::Error> for CliError {
    fn from(e: ehrner_core::Error) -> Self {
        Error::Core(e).into()
    }
}

fn is_config_error(e: &ehrner_core::Error) -> bool {
    use ehrner_core::Error as E;
    matches!(
        e,
        E::InvalidConfig(_) | E::InvalidTestRatio(_) | E::InvalidFraction(_) | E::DimMismatch { .. }
    )
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Serialize)]
struct FileDigest {
    path: PathBuf,
    sha256: String,
}

/// Written beside every artifact a command produces.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    subcommand: String,
    config: Config,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    version: String,
    format_version: u32,
    started_unix: f64,
    finished_unix: f64,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

struct Run {
    subcommand: &'static str,
    config: Config,
    started: f64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn new(subcommand: &'static str, config: &Config) -> Self {
        Run {
            subcommand,
            config: config.clone(),
            started: unix_now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = formats::read_file(path)?;
        self.inputs.push(path.to_path_buf());
        Ok(bytes)
    }

    fn output(&mut self, path: &Path, bytes: &[u8]) -> CliResult {
        formats::write_file(path, bytes)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn digests(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
        paths
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.clone(),
                    sha256: formats::sha256_hex(&formats::read_file(p)?),
                })
            })
            .collect()
    }

    /// Write the manifest to `path`.
    fn finish(self, path: &Path) -> CliResult {
        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            seed: self.config.seed,
            inputs: Self::digests(&self.inputs)?,
            outputs: Self::digests(&self.outputs)?,
            config: self.config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: ehrner_core::codec::FORMAT_VERSION,
            started_unix: self.started,
            finished_unix: unix_now(),
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
        formats::write_file(path, json.as_bytes())?;
        Ok(())
    }
}

/// `model.ehrm` → `model.ehrm.manifest.json`.
fn manifest_beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn load_dataset(run: &mut Run, path: &Path) -> CliResult<Dataset> {
    let bytes = run.input(path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::new(ErrorKind::Input, format!("{}: not UTF-8", path.display())))?;
    Ok(match Format::from_path(path) {
        Format::Jsonl => formats::from_jsonl(&text, path)?,
        Format::Columns => formats::from_columns(&text, path)?,
    })
}

fn load_corpora(run: &mut Run, paths: &[PathBuf]) -> CliResult<Vec<String>> {
    let mut all = Vec::new();
    for p in paths {
        run.input(p)?;
        all.extend(formats::load_corpus(p)?);
    }
    Ok(all)
}

fn load_table(run: &mut Run, path: &Path) -> CliResult<StaticEmbeddingTable> {
    let bytes = run.input(path)?;
    StaticEmbeddingTable::from_bytes(&bytes).map_err(|e| CliError::new(ErrorKind::Input, format!("{}: {e}", path.display())))
}

fn load_encoder(run: &mut Run, path: &Path, dim: usize) -> CliResult<ContextualEncoder> {
    let bytes = run.input(path)?;
    ContextualEncoder::from_bytes_expecting(&bytes, dim)
        .map_err(|e| CliError::new(ErrorKind::Input, format!("{}: {e}", path.display())))
}

fn load_model(run: &mut Run, path: &Path) -> CliResult<NerModel> {
    let bytes = run.input(path)?;
    NerModel::from_bytes(&bytes).map_err(|e| CliError::new(ErrorKind::Input, format!("{}: {e}", path.display())))
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { 0 };
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::new(ErrorKind::Usage, first).line());
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.kind.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    let mut config = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| CliError::new(ErrorKind::Config, e))?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed.or(config.seed) {
        config.apply_seed(seed);
    }
    match cli.command {
        Command::Ingest(a) => ingest(config, a),
        Command::Synth(a) => synth(config, a),
        Command::Split(a) => split(config, a),
        Command::Embed(a) => embed(config, a),
        Command::Pretrain(a) => pretrain(config, a),
        Command::Train(a) => train_cmd(config, a),
        Command::Finetune(a) => finetune(config, a),
        Command::Eval(a) => eval(config, a),
        Command::Curve(a) => curve(config, a),
        Command::Serve(a) => serve(config, a),
    }
}

fn ingest(config: Config, a: IngestArgs) -> CliResult {
    let mut run = Run::new("ingest", &config);
    let mut files = Vec::new();
    for input in &a.inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input).map_err(|e| Error::io(input, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    let mut documents = Vec::new();
    for path in files {
        let bytes = run.input(&path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::new(ErrorKind::Input, format!("{}: not UTF-8", path.display())))?;
        let stem = path.file_stem().map_or_else(|| "doc".into(), |s| s.to_string_lossy().into_owned());
        if a.lines {
            for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
                documents.push(Document::new(format!("{stem}-{:05}", i + 1), line.trim_end(), Vec::new())?);
            }
        } else if !text.trim().is_empty() {
            documents.push(Document::new(stem, text.trim_end(), Vec::new())?);
        }
    }
    let dataset = Dataset::from_documents(documents)?;
    run.output(&a.output, formats::to_jsonl(&dataset).as_bytes())?;
    println!("ingested {} documents into {}", dataset.len(), a.output.display());
    run.finish(&manifest_beside(&a.output))
}

fn synth(mut config: Config, a: SynthArgs) -> CliResult {
    let s = &mut config.synth;
    if let Some(v) = a.documents {
        s.documents = v;
    }
    if let Some(v) = a.raw_sentences {
        s.raw_sentences = v;
    }
    if let Some(v) = a.density {
        s.density = v;
    }
    if let Some(d) = a.domain.as_deref() {
        s.domain = match d {
            "clinical" => Domain::Clinical,
            "biomedical" => Domain::Biomedical,
            other => return Err(CliError::new(ErrorKind::Usage, format!("unknown domain {other:?}"))),
        };
    }
    let seed = config.seed.unwrap_or(0);
    let spec = match s.domain {
        Domain::Clinical => SynthSpec::clinical(s.documents, s.raw_sentences, s.density, seed),
        Domain::Biomedical => SynthSpec::biomedical(s.documents, s.raw_sentences, s.mentions_per_doc, seed),
    };
    let corpus = generate_synthetic_corpus(&spec)?;
    let mut run = Run::new("synth", &config);
    run.output(&a.out_dir.join("dataset.jsonl"), formats::to_jsonl(&corpus.dataset).as_bytes())?;
    let mut raw = corpus.raw.join("\n");
    raw.push('\n');
    run.output(&a.out_dir.join("raw.txt"), raw.as_bytes())?;
    let stats = ehrner_core::corpus::dataset_stats(&corpus.dataset);
    println!("documents\t{}", stats.documents);
    for (label, n) in &stats.spans {
        println!("{label}\t{n}");
    }
    run.finish(&a.out_dir.join("synth.manifest.json"))
}

fn split(mut config: Config, a: SplitArgs) -> CliResult {
    if let Some(v) = a.test_ratio {
        config.split.test_ratio = v;
    }
    if let Some(v) = a.fraction {
        config.split.fraction = v;
    }
    let mut run = Run::new("split", &config);
    let dataset = load_dataset(&mut run, &a.input)?;
    let seed = config.seed.unwrap_or(0);
    let spec = SplitSpec {
        test_ratio: config.split.test_ratio,
        fraction: config.split.fraction,
        seed,
    };
    let (train_set, test) = split_train_test(&dataset, &spec)?;
    let train_set = take_fraction(&train_set, spec.fraction, seed)?;
    run.output(&a.out_dir.join("train.jsonl"), formats::to_jsonl(&train_set).as_bytes())?;
    run.output(&a.out_dir.join("test.jsonl"), formats::to_jsonl(&test).as_bytes())?;
    println!("train\t{}\ntest\t{}", train_set.len(), test.len());
    run.finish(&a.out_dir.join("split.manifest.json"))
}

fn embed(mut config: Config, a: EmbedArgs) -> CliResult {
    if let Some(v) = a.dim {
        config.embeddings.dim = v;
    }
    if let Some(v) = a.epochs {
        config.embeddings.epochs = v;
    }
    if let Some(v) = a.min_count {
        config.embeddings.min_count = v;
    }
    let mut run = Run::new("embed", &config);
    let corpus = load_corpora(&mut run, &a.corpus)?;
    let table = train_static_embeddings(&corpus, &config.embeddings)?;
    run.output(&a.output, &table.to_bytes())?;
    println!("{} words x {} dims -> {}", table.len(), table.dim(), a.output.display());
    run.finish(&manifest_beside(&a.output))
}

fn pretrain(mut config: Config, a: PretrainArgs) -> CliResult {
    if let Some(v) = a.epochs {
        config.pretrain.epochs = v;
    }
    let mut run = Run::new("pretrain", &config);
    let table = load_table(&mut run, &a.embeddings)?;
    // The encoder width follows the table it reads.
    config.pretrain.encoder.dim = table.dim();
    run.config = config.clone();
    let corpus = load_corpora(&mut run, &a.corpus)?;
    let (encoder, report) = pretrain_contextual_with_clock(&corpus, &table, &config.pretrain, &WallClock::new())?;
    run.output(&a.output, &encoder.to_bytes())?;
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        println!("epoch\t{}\t{loss:.6}", i + 1);
    }
    run.finish(&manifest_beside(&a.output))
}

fn train_cmd(mut config: Config, a: TrainArgs) -> CliResult {
    if let Some(v) = a.iterations {
        config.train.iterations = v;
    }
    let mut run = Run::new("train", &config);
    let data = load_dataset(&mut run, &a.data)?;
    let table = load_table(&mut run, &a.embeddings)?;
    let encoder = match &a.encoder {
        Some(p) => Some(load_encoder(&mut run, p, table.dim())?),
        None => None,
    };
    let labels: Vec<&String> = data.label_set.iter().collect();
    if labels.is_empty() {
        return Err(CliError::new(ErrorKind::Input, format!("{}: no annotated spans", a.data.display())));
    }
    let blank = NerModel::blank(LabelScheme::new(&labels)?, Representation::new(table, encoder)?, config.model)?;
    let model = train(&blank, &data, &config.train)?;
    run.output(&a.output, &model.to_bytes())?;
    println!("trained {} labels on {} documents -> {}", labels.len(), data.len(), a.output.display());
    run.finish(&manifest_beside(&a.output))
}

fn finetune(mut config: Config, a: FinetuneArgs) -> CliResult {
    if let Some(v) = a.iterations {
        config.train.iterations = v;
    }
    let mut run = Run::new("finetune", &config);
    let data = load_dataset(&mut run, &a.data)?;
    let mut base = load_model(&mut run, &a.base)?;
    if let Some(p) = &a.encoder {
        let encoder = load_encoder(&mut run, p, base.repr.table.dim())?;
        base = base.attach_encoder(encoder)?;
    }
    let new_labels = missing_labels(&base, &data);
    let model = fine_tune_extend(&base, &new_labels, &data, &config.train)?;
    run.output(&a.output, &model.to_bytes())?;
    println!("added labels {:?}; fine-tuned on {} documents -> {}", new_labels, data.len(), a.output.display());
    run.finish(&manifest_beside(&a.output))
}

/// Tab-separated report: one line per label, then the overall line.
pub fn format_report(report: &EvalReport, averaging: Averaging) -> String {
    let mut out = String::from("label\tprecision\trecall\tf1\ttp\tfp\tfn\n");
    for (label, c) in &report.per_label {
        out.push_str(&format!(
            "{label}\t{:.3}\t{:.3}\t{:.3}\t{}\t{}\t{}\n",
            c.precision(),
            c.recall(),
            c.f1(),
            c.tp,
            c.fp,
            c.fn_
        ));
    }
    let s = averaging.scores(report);
    let name = match averaging {
        Averaging::Micro => "overall",
        Averaging::Macro => "overall(macro)",
    };
    let c = report.overall;
    out.push_str(&format!(
        "{name}\t{:.3}\t{:.3}\t{:.3}\t{}\t{}\t{}\n",
        s.precision, s.recall, s.f1, c.tp, c.fp, c.fn_
    ));
    out
}

fn eval(config: Config, a: EvalArgs) -> CliResult {
    let mut run = Run::new("eval", &config);
    let gold = load_dataset(&mut run, &a.gold)?;
    let pred = match (&a.pred, &a.model) {
        (Some(p), _) => load_dataset(&mut run, p)?,
        (None, Some(m)) => predict(&load_model(&mut run, m)?, &gold),
        (None, None) => return Err(CliError::new(ErrorKind::Usage, "give --pred or --model")),
    };
    let report = compute_report(&gold, &pred)?;
    let averaging = if a.macro_average { Averaging::Macro } else { Averaging::Micro };
    print!("{}", format_report(&report, averaging));
    if let Some(out) = &a.output {
        let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        run.output(out, json.as_bytes())?;
        run.finish(&manifest_beside(out))?;
    }
    Ok(())
}

fn curve(mut config: Config, a: CurveArgs) -> CliResult {
    let spec = &mut config.experiment;
    if let Some(m) = a.methods {
        spec.methods = m;
    }
    if let Some(f) = a.fractions {
        spec.fractions = f;
    }
    if let Some(n) = a.seeds {
        let start = spec.seeds.first().copied().unwrap_or(0);
        spec.seeds = (start..start + n as u64).collect();
    }
    if let Some(t) = a.threads {
        spec.threads = t;
    }
    if a.macro_average {
        spec.averaging = Averaging::Macro;
    }
    let spec = config.experiment.clone();
    spec.validate()?;
    let run = Run::new("curve", &config);
    let prepared = harness::prepare(&spec)?;
    if let Some(f1) = prepared.source_f1 {
        eprintln!("source model held-out F1 {f1:.4}");
    }
    let result = harness::run_prepared_observed(&spec, &prepared, &|c| {
        eprintln!(
            "{}\t{:.1}\tseed {}\tF1 {:.4}\t{:.1}s",
            c.method,
            c.fraction,
            c.seed,
            spec.averaging.scores(&c.report).f1,
            c.seconds
        );
    })?;
    let written = harness::emit_reports(&spec, &result, &a.out_dir)?;
    let mut run = run;
    run.outputs = written;
    print!("{}", harness::table2_csv(&result));
    run.finish(&a.out_dir.join("curve.manifest.json"))?;

    if a.assert_headline {
        let h = harness::headline_check(&result)?;
        println!(
            "headline: transfer+pretrain@0.5 {:.4} vs blank@1.0 {:.4}, margin {:+.4}",
            h.pretrain_half, h.blank_full, h.margin
        );
        if !h.holds {
            return Err(CliError::new(
                ErrorKind::Assertion,
                format!("headline check failed: margin {:+.4}", h.margin),
            ));
        }
    }
    Ok(())
}

fn serve(mut config: Config, a: ServeArgs) -> CliResult {
    let s = &mut config.serve;
    if let Some(v) = a.port {
        s.port = v;
    }
    if let Some(v) = a.host {
        s.host = v;
    }
    if let Some(v) = a.data_dir {
        s.data_dir = Some(v);
    }
    if let Some(v) = a.token {
        s.token = Some(v);
    }
    let mut service = match &s.data_dir {
        Some(dir) => AnnotationService::open(dir)?,
        None => AnnotationService::in_memory(),
    };
    if let Some(t) = &s.token {
        service = service.with_token(t.clone());
    }
    let addr = format!("{}:{}", s.host, s.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new(ErrorKind::Runtime, e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::new(ErrorKind::Runtime, format!("cannot listen on {addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_or(addr.clone(), |a| a.to_string()));
        axum::serve(listener, router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::new(ErrorKind::Runtime, e))
    })
}
