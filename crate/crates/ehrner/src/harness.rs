//! Learning-curve experiments: three model-building methods trained on
//! growing fractions of the training split, several seeds each.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use ehrner_core::corpus::{
    generate_synthetic_corpus, split_train_test, take_fraction, Dataset, SplitSpec, SynthSpec,
};
use ehrner_core::eval::{compute_report, EvalReport, Scores};
use ehrner_core::repr::{
    pretrain_contextual_with_clock, train_static_embeddings, ContextualEncoder, PretrainConfig, PretrainReport,
    SkipGramConfig, StaticEmbeddingTable,
};
use ehrner_core::tagger::{
    fine_tune_extend, missing_labels, predict, train, LabelScheme, ModelConfig, NerModel, Representation,
    TrainConfig,
};
use ehrner_core::Clock;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{self, dataset_hash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Fresh scheme, static representation only.
    #[serde(rename = "blank")]
    Blank,
    /// Extend the source model with the missing labels and fine-tune.
    #[serde(rename = "transfer")]
    Transfer,
    /// As `Transfer`, with the pretrained contextual encoder attached first.
    #[serde(rename = "transfer+pretrain")]
    TransferPretrain,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Blank, Method::Transfer, Method::TransferPretrain];

    pub fn name(self) -> &'static str {
        match self {
            Method::Blank => "blank",
            Method::Transfer => "transfer",
            Method::TransferPretrain => "transfer+pretrain",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected blank, transfer or transfer+pretrain)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Micro,
    Macro,
}

impl Averaging {
    pub fn scores(self, report: &EvalReport) -> Scores {
        match self {
            Averaging::Micro => report.micro(),
            Averaging::Macro => report.macro_scores(),
        }
    }
}

/// Generated target and source corpora. Both domains draw entity names from
/// the same lexicon, so the source model has seen many target names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticBenchmark {
    pub target_documents: usize,
    pub target_raw: usize,
    /// Multiplier on the reference per-sentence mention rates.
    pub density: f64,
    pub source_documents: usize,
    pub source_raw: usize,
    pub source_mentions_per_doc: f64,
    pub seed: u64,
}

impl Default for SyntheticBenchmark {
    fn default() -> Self {
        SyntheticBenchmark {
            target_documents: 1200,
            target_raw: 6000,
            density: 1.0,
            source_documents: 3000,
            source_raw: 3000,
            source_mentions_per_doc: 2.0,
            seed: 7,
        }
    }
}

/// Existing files for every input of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    /// Annotated target dataset (JSON lines); split by `test_ratio`.
    pub target: PathBuf,
    /// Annotated source dataset with only the source labels.
    pub source: PathBuf,
    /// Raw target-domain sentences for pretraining the contextual encoder.
    pub target_raw: PathBuf,
    /// Extra raw sentences for the static embeddings (optional).
    #[serde(default)]
    pub source_raw: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticBenchmark),
    Files(DatasetPaths),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticBenchmark::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub data: DataSource,
    pub source_labels: Vec<String>,
    pub test_ratio: f64,
    pub split_seed: u64,
    pub averaging: Averaging,
    /// Held-out F1 the source model must exceed before the grid runs.
    pub source_gate: f64,
    pub embeddings: SkipGramConfig,
    pub pretrain: PretrainConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub source_train: TrainConfig,
    /// Worker threads for grid cells; 0 picks the available parallelism.
    pub threads: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            methods: Method::ALL.to_vec(),
            fractions: vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            seeds: vec![0, 1, 2, 3, 4],
            data: DataSource::default(),
            source_labels: vec!["DISEASE".into(), "CHEMICAL".into()],
            test_ratio: 0.3,
            split_seed: 0,
            averaging: Averaging::Micro,
            source_gate: 0.8,
            embeddings: SkipGramConfig::default(),
            pretrain: PretrainConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            source_train: TrainConfig::default(),
            threads: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Experiment(m.to_string()));
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return bad("methods must not repeat");
        }
        if self.fractions.is_empty() {
            return bad("at least one fraction is required");
        }
        if self.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return bad("fractions must lie in (0, 1]");
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return bad("fractions must be strictly increasing");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.source_labels.is_empty() {
            return bad("the source label set is empty");
        }
        if self.pretrain.encoder.dim != self.embeddings.dim {
            return bad("encoder dim must equal the static embedding dim");
        }
        self.embeddings.validate()?;
        self.pretrain.validate()?;
        self.train.validate()?;
        self.source_train.validate()?;
        Ok(())
    }

    fn needs_source(&self) -> bool {
        self.methods.iter().any(|m| *m != Method::Blank)
    }

    fn needs_encoder(&self) -> bool {
        self.methods.contains(&Method::TransferPretrain)
    }
}

/// Everything shared by the cells of one grid.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub test_hash: String,
    pub table: StaticEmbeddingTable,
    pub encoder: Option<ContextualEncoder>,
    pub pretrain_report: Option<PretrainReport>,
    pub source_model: Option<NerModel>,
    pub source_f1: Option<f64>,
}

struct Inputs {
    target: Dataset,
    source: Option<Dataset>,
    target_raw: Vec<String>,
    source_raw: Vec<String>,
}

fn load_inputs(spec: &ExperimentSpec) -> Result<Inputs> {
    match &spec.data {
        DataSource::Synthetic(b) => {
            let target = generate_synthetic_corpus(&SynthSpec::clinical(
                b.target_documents,
                b.target_raw,
                b.density,
                b.seed,
            ))?;
            let mut source_spec = SynthSpec::biomedical(
                b.source_documents,
                b.source_raw,
                b.source_mentions_per_doc,
                b.seed.wrapping_add(1),
            );
            source_spec.mentions.retain(|(l, _)| spec.source_labels.contains(l));
            let source = generate_synthetic_corpus(&source_spec)?;
            Ok(Inputs {
                target: target.dataset,
                source: Some(source.dataset),
                target_raw: target.raw,
                source_raw: source.raw,
            })
        }
        DataSource::Files(p) => Ok(Inputs {
            target: formats::load_documents(&p.target, formats::Format::from_path(&p.target))?,
            source: Some(formats::load_documents(&p.source, formats::Format::from_path(&p.source))?),
            target_raw: formats::load_corpus(&p.target_raw)?,
            source_raw: match &p.source_raw {
                Some(path) => formats::load_corpus(path)?,
                None => Vec::new(),
            },
        }),
    }
}

pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Train the source-domain model on `source` and report its held-out F1.
pub fn build_source_model(
    spec: &ExperimentSpec,
    source: &Dataset,
    table: &StaticEmbeddingTable,
) -> Result<(NerModel, f64)> {
    let extra: Vec<&String> = source
        .label_set
        .iter()
        .filter(|l| !spec.source_labels.contains(l))
        .collect();
    if !extra.is_empty() {
        return Err(Error::Experiment(format!(
            "source dataset has labels outside the source label set: {extra:?}"
        )));
    }
    let (train_set, held_out) = split_train_test(
        source,
        &SplitSpec {
            test_ratio: 0.2,
            fraction: 1.0,
            seed: spec.split_seed,
        },
    )?;
    let scheme = LabelScheme::new(&spec.source_labels)?;
    let repr = Representation::new(table.clone(), None)?;
    let blank = NerModel::blank(scheme, repr, spec.model)?;
    let model = train(&blank, &train_set, &spec.source_train)?;
    let report = compute_report(&held_out, &predict(&model, &held_out))?;
    Ok((model, report.micro().f1))
}

/// Load or generate the data, split it, and train the shared components.
pub fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    prepare_with_clock(spec, &WallClock::new())
}

pub fn prepare_with_clock(spec: &ExperimentSpec, clock: &dyn Clock) -> Result<Prepared> {
    spec.validate()?;
    let inputs = load_inputs(spec)?;
    let (train_set, test) = split_train_test(
        &inputs.target,
        &SplitSpec {
            test_ratio: spec.test_ratio,
            fraction: 1.0,
            seed: spec.split_seed,
        },
    )?;

    let mut corpus = inputs.target_raw.clone();
    corpus.extend(inputs.source_raw.iter().cloned());
    let table = train_static_embeddings(&corpus, &spec.embeddings)?;

    let (encoder, pretrain_report) = if spec.needs_encoder() {
        let (enc, report) = pretrain_contextual_with_clock(&inputs.target_raw, &table, &spec.pretrain, clock)?;
        (Some(enc), Some(report))
    } else {
        (None, None)
    };

    let (source_model, source_f1) = match (&inputs.source, spec.needs_source()) {
        (Some(source), true) => {
            let (model, f1) = build_source_model(spec, source, &table)?;
            if f1 <= spec.source_gate {
                return Err(Error::Experiment(format!(
                    "source model held-out F1 {f1:.3} does not exceed the gate {:.3}",
                    spec.source_gate
                )));
            }
            (Some(model), Some(f1))
        }
        _ => (None, None),
    };

    Ok(Prepared {
        test_hash: dataset_hash(&test),
        train: train_set,
        test,
        table,
        encoder,
        pretrain_report,
        source_model,
        source_f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub fraction: f64,
    pub seed: u64,
    pub train_documents: usize,
    pub report: EvalReport,
    pub test_hash: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub fraction: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Sample standard deviation of F1 over seeds (0 for one seed).
    pub f1_std: f64,
    pub per_label_f1: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub methods: Vec<Method>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub averaging: Averaging,
    pub test_hash: String,
    pub source_f1: Option<f64>,
    /// Ordered by method, then fraction, then seed.
    pub cells: Vec<CellResult>,
}

impl GridResult {
    pub fn cells_for(&self, method: Method, fraction: f64) -> impl Iterator<Item = &CellResult> {
        self.cells
            .iter()
            .filter(move |c| c.method == method && c.fraction == fraction)
    }

    pub fn aggregate(&self, method: Method, fraction: f64) -> Option<Aggregate> {
        let cells: Vec<&CellResult> = self.cells_for(method, fraction).collect();
        if cells.is_empty() {
            return None;
        }
        let n = cells.len() as f64;
        let scores: Vec<Scores> = cells.iter().map(|c| self.averaging.scores(&c.report)).collect();
        let mean = |f: fn(&Scores) -> f64| scores.iter().map(f).sum::<f64>() / n;
        let f1 = mean(|s| s.f1);
        let f1_std = if cells.len() > 1 {
            (scores.iter().map(|s| (s.f1 - f1).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut per_label_f1 = BTreeMap::new();
        for c in &cells {
            for label in c.report.per_label.keys() {
                *per_label_f1.entry(label.clone()).or_insert(0.0) += c.report.label(label).f1 / n;
            }
        }
        Some(Aggregate {
            method,
            fraction,
            precision: mean(|s| s.precision),
            recall: mean(|s| s.recall),
            f1,
            f1_std,
            per_label_f1,
        })
    }

    /// Aggregates for every (method, fraction), in grid order.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        self.methods
            .iter()
            .flat_map(|m| self.fractions.iter().filter_map(move |f| self.aggregate(*m, *f)))
            .collect()
    }

    pub fn mean_f1(&self, method: Method, fraction: f64) -> Result<f64> {
        self.aggregate(method, fraction)
            .map(|a| a.f1)
            .ok_or_else(|| Error::Experiment(format!("grid has no cells for {method} at fraction {fraction}")))
    }
}

fn run_cell(spec: &ExperimentSpec, prepared: &Prepared, method: Method, fraction: f64, seed: u64) -> Result<CellResult> {
    let started = Instant::now();
    let subset = take_fraction(&prepared.train, fraction, seed)?;
    let mut cfg = spec.train.clone();
    cfg.seed = seed;
    let missing_source = || Error::Experiment("transfer methods need a source model".into());
    let model = match method {
        Method::Blank => {
            let labels: Vec<&String> = prepared.train.label_set.iter().collect();
            let scheme = LabelScheme::new(&labels)?;
            let repr = Representation::new(prepared.table.clone(), None)?;
            let mut model_cfg = spec.model;
            model_cfg.seed = seed;
            train(&NerModel::blank(scheme, repr, model_cfg)?, &subset, &cfg)?
        }
        Method::Transfer => {
            let source = prepared.source_model.as_ref().ok_or_else(missing_source)?;
            fine_tune_extend(source, &missing_labels(source, &prepared.train), &subset, &cfg)?
        }
        Method::TransferPretrain => {
            let source = prepared.source_model.as_ref().ok_or_else(missing_source)?;
            let encoder = prepared
                .encoder
                .clone()
                .ok_or_else(|| Error::Experiment("transfer+pretrain needs a pretrained encoder".into()))?;
            let base = source.attach_encoder(encoder)?;
            fine_tune_extend(&base, &missing_labels(&base, &prepared.train), &subset, &cfg)?
        }
    };
    let report = compute_report(&prepared.test, &predict(&model, &prepared.test))?;
    Ok(CellResult {
        method,
        fraction,
        seed,
        train_documents: subset.len(),
        report,
        test_hash: dataset_hash(&prepared.test),
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Run every cell of `spec` against already prepared components.
pub fn run_prepared(spec: &ExperimentSpec, prepared: &Prepared) -> Result<GridResult> {
    run_prepared_observed(spec, prepared, &|_| {})
}

/// [`run_prepared`], calling `observe` as each cell finishes.
pub fn run_prepared_observed(
    spec: &ExperimentSpec,
    prepared: &Prepared,
    observe: &(dyn Fn(&CellResult) + Sync),
) -> Result<GridResult> {
    spec.validate()?;
    let jobs: Vec<(Method, f64, u64)> = spec
        .methods
        .iter()
        .flat_map(|m| {
            spec.fractions
                .iter()
                .flat_map(move |f| spec.seeds.iter().map(move |s| (*m, *f, *s)))
        })
        .collect();
    let threads = match spec.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len());

    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Result<CellResult>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("job counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(&(method, fraction, seed)) = jobs.get(i) else {
                    break;
                };
                let outcome = run_cell(spec, prepared, method, fraction, seed).map_err(|e| Error::Cell {
                    method: method.to_string(),
                    fraction,
                    seed,
                    source: Box::new(e),
                });
                if let Ok(cell) = &outcome {
                    observe(cell);
                }
                let failed = outcome.is_err();
                results.lock().expect("results")[i] = Some(outcome);
                if failed {
                    // Stop handing out work; running cells finish.
                    *next.lock().expect("job counter") = jobs.len();
                }
            });
        }
    });

    let mut cells = Vec::with_capacity(jobs.len());
    for outcome in results.into_inner().expect("results").into_iter().flatten() {
        cells.push(outcome?);
    }
    if cells.len() != jobs.len() {
        return Err(Error::Experiment("grid finished with missing cells".into()));
    }
    if cells.iter().any(|c| c.test_hash != prepared.test_hash) {
        return Err(Error::Experiment("cells disagree on the test split".into()));
    }
    Ok(GridResult {
        methods: spec.methods.clone(),
        fractions: spec.fractions.clone(),
        seeds: spec.seeds.clone(),
        averaging: spec.averaging,
        test_hash: prepared.test_hash.clone(),
        source_f1: prepared.source_f1,
        cells,
    })
}

pub fn run_grid(spec: &ExperimentSpec) -> Result<GridResult> {
    let prepared = prepare(spec)?;
    run_prepared(spec, &prepared)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub holds: bool,
    /// Mean F1 of transfer+pretrain at half the data minus blank at all of it.
    pub margin: f64,
    pub pretrain_half: f64,
    pub blank_full: f64,
}

/// Does transfer+pretrain on half the training data match or beat the blank
/// model on all of it?
pub fn headline_check(result: &GridResult) -> Result<Headline> {
    let pretrain_half = result.mean_f1(Method::TransferPretrain, 0.5)?;
    let blank_full = result.mean_f1(Method::Blank, 1.0)?;
    Ok(headline_from_means(pretrain_half, blank_full))
}

pub fn headline_from_means(pretrain_half: f64, blank_full: f64) -> Headline {
    let margin = pretrain_half - blank_full;
    Headline {
        holds: margin >= 0.0,
        margin,
        pretrain_half,
        blank_full,
    }
}

/// CSV with one row per (method, fraction): mean precision, recall and F1.
pub fn table2_csv(result: &GridResult) -> String {
    let mut out = String::from("method,fraction,precision,recall,f1\n");
    for a in result.aggregates() {
        writeln!(
            out,
            "{},{:.1},{:.4},{:.4},{:.4}",
            a.method, a.fraction, a.precision, a.recall, a.f1
        )
        .expect("string write");
    }
    out
}

/// CSV of mean per-label F1 at the largest fraction, one column per method.
pub fn table3_csv(result: &GridResult) -> String {
    let fraction = result.fractions.last().copied().unwrap_or(1.0);
    let aggs: Vec<Aggregate> = result
        .methods
        .iter()
        .filter_map(|m| result.aggregate(*m, fraction))
        .collect();
    let mut labels: Vec<&String> = aggs.iter().flat_map(|a| a.per_label_f1.keys()).collect();
    labels.sort();
    labels.dedup();
    let mut out = String::from("label");
    for a in &aggs {
        write!(out, ",{}", a.method).expect("string write");
    }
    out.push('\n');
    for label in labels {
        out.push_str(label);
        for a in &aggs {
            write!(out, ",{:.4}", a.per_label_f1.get(label).copied().unwrap_or(0.0)).expect("string write");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub method: Method,
    pub points: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub fraction: f64,
    pub f1: f64,
    pub f1_std: f64,
}

/// Learning-curve chart data: F1 against fraction for each method.
pub fn curve_series(result: &GridResult) -> Vec<Series> {
    result
        .methods
        .iter()
        .map(|m| Series {
            method: *m,
            points: result
                .fractions
                .iter()
                .filter_map(|f| result.aggregate(*m, *f))
                .map(|a| SeriesPoint {
                    fraction: a.fraction,
                    f1: a.f1,
                    f1_std: a.f1_std,
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub spec: ExperimentSpec,
    pub test_hash: String,
    pub source_f1: Option<f64>,
    pub headline: Option<Headline>,
    pub version: String,
    pub cell_seconds: Vec<(Method, f64, u64, f64)>,
}

pub const TABLE2_FILE: &str = "table2.csv";
pub const TABLE3_FILE: &str = "table3.csv";
pub const CURVE_FILE: &str = "curve.json";
pub const CELLS_FILE: &str = "cells.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Write the report files into `out_dir` and return their paths. Cell
/// timings only go into the manifest so the other files are reproducible.
pub fn emit_reports(spec: &ExperimentSpec, result: &GridResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if result.methods.is_empty() || result.cells.is_empty() {
        return Err(Error::Experiment("nothing to report: the grid has no methods or cells".into()));
    }
    let headline = headline_check(result).ok();
    let mut cells = result.cells.clone();
    for c in &mut cells {
        c.seconds = 0.0;
    }
    let manifest = GridManifest {
        spec: spec.clone(),
        test_hash: result.test_hash.clone(),
        source_f1: result.source_f1,
        headline,
        version: env!("CARGO_PKG_VERSION").to_string(),
        cell_seconds: result
            .cells
            .iter()
            .map(|c| (c.method, c.fraction, c.seed, c.seconds))
            .collect(),
    };
    let files: [(&str, String); 5] = [
        (TABLE2_FILE, table2_csv(result)),
        (TABLE3_FILE, table3_csv(result)),
        (CURVE_FILE, serde_json::to_string_pretty(&curve_series(result))?),
        (CELLS_FILE, serde_json::to_string_pretty(&cells)?),
        (MANIFEST_FILE, serde_json::to_string_pretty(&manifest)?),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(name);
        formats::write_file(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
