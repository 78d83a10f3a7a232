//! Annotation backend: projects, documents moving through the
//! fresh → suggested → annotated → reviewed workflow, model suggestions,
//! export, and background retraining.
//!
//! [`AnnotationService`] is the transport-independent core; [`router`]
//! exposes it over HTTP.

mod http;
mod store;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use base64::Engine as _;
use ehrner_core::corpus::{split_train_test, Dataset, Document, EntitySpan, SplitSpec};
use ehrner_core::eval::{compute_report, EvalReport};
use ehrner_core::repr::{train_static_embeddings, SkipGramConfig};
use ehrner_core::tagger::{predict, train, LabelScheme, ModelConfig, NerModel, Representation, TrainConfig};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::formats::{self, DocumentRecord, Format, SpanRecord};
pub use http::router;
use store::{Event, Journal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    BadRequest,
    Unauthorized,
    NotFound,
    Conflict,
    Unprocessable,
    Internal,
}

/// An API failure: a stable machine-readable `code` plus a message.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub kind: ErrorKind,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(kind: ErrorKind, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            kind,
            code,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Unprocessable, "validation_error", message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(ErrorKind::NotFound, "not_found", format!("{what} {id} does not exist"))
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(ErrorKind::Internal, "internal_error", message.to_string())
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDef {
    pub label: String,
    pub hotkey: char,
    pub color: String,
}

/// The four clinical entity types with their keyboard shortcuts.
pub fn default_labels() -> Vec<LabelDef> {
    [
        ("CHEMICAL", 'C', "#1f77b4"),
        ("DISEASE", 'D', "#d62728"),
        ("SYMPTOM", 'S', "#2ca02c"),
        ("DOSAGE", 'G', "#ff7f0e"),
    ]
    .into_iter()
    .map(|(label, hotkey, color)| LabelDef {
        label: label.into(),
        hotkey,
        color: color.into(),
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub name: String,
    pub labels: Vec<LabelDef>,
    pub model_version: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Fresh,
    Suggested,
    Annotated,
    Reviewed,
}

impl std::str::FromStr for Status {
    type Err = ApiError;

    fn from_str(s: &str) -> ApiResult<Status> {
        match s {
            "fresh" => Ok(Status::Fresh),
            "suggested" => Ok(Status::Suggested),
            "annotated" => Ok(Status::Annotated),
            "reviewed" => Ok(Status::Reviewed),
            other => Err(ApiError::new(
                ErrorKind::BadRequest,
                "bad_request",
                format!("unknown status {other:?}"),
            )),
        }
    }
}

/// Operations that can change a record's status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Suggest,
    SaveSpans,
    MarkReviewed,
}

/// The status after applying `op` to a record in `status`.
///
/// Saving spans on a reviewed record keeps it reviewed: review corrections
/// are ordinary edits, not a reason to reopen the record.
pub fn next_status(status: Status, op: Transition) -> ApiResult<Status> {
    match (op, status) {
        (Transition::Suggest, Status::Fresh) => Ok(Status::Suggested),
        (Transition::Suggest, s) => Ok(s),
        (Transition::SaveSpans, Status::Reviewed) => Ok(Status::Reviewed),
        (Transition::SaveSpans, _) => Ok(Status::Annotated),
        (Transition::MarkReviewed, Status::Annotated | Status::Reviewed) => Ok(Status::Reviewed),
        (Transition::MarkReviewed, s) => Err(ApiError::new(
            ErrorKind::Unprocessable,
            "invalid_transition",
            format!("only annotated documents can be reviewed (status is {s:?})").to_lowercase(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: String,
    pub project: String,
    pub name: String,
    pub text: String,
    pub spans: Vec<SpanRecord>,
    pub suggestions: Vec<SpanRecord>,
    /// Model version that produced `suggestions`.
    pub suggestion_model: Option<u64>,
    pub status: Status,
    pub revision: u64,
    pub last_editor: Option<String>,
    pub content_hash: String,
}

impl AnnotationRecord {
    pub fn to_document(&self) -> ApiResult<Document> {
        DocumentRecord {
            id: self.id.clone(),
            text: self.text.clone(),
            spans: self.spans.clone(),
        }
        .into_document()
        .map_err(|e| ApiError::validation(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainJob {
    pub id: String,
    pub project: String,
    pub state: JobState,
    pub config: JobConfig,
    /// Seconds since the service started.
    pub queued_at: f64,
    pub started_at: Option<f64>,
    pub finished_at: Option<f64>,
    pub model_version: Option<u64>,
    pub train_documents: usize,
    pub held_out_documents: usize,
    pub metrics: Option<EvalReport>,
    pub error: Option<String>,
}

/// Training settings for a retrain job; sized for interactive use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JobConfig {
    pub iterations: usize,
    pub dim: usize,
    /// Skip-gram passes; project corpora are small, so this runs well above
    /// the library default.
    pub embedding_epochs: usize,
    pub hidden: usize,
    pub held_out_ratio: f64,
    pub include_annotated: bool,
    pub seed: u64,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            iterations: 30,
            dim: 32,
            embedding_epochs: 20,
            hidden: 64,
            held_out_ratio: 0.2,
            include_annotated: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadFile {
    pub name: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub content_base64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadResult {
    pub count: usize,
    pub created: usize,
    pub records: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub model_version: u64,
    pub suggestions: Vec<SpanRecord>,
    pub record: AnnotationRecord,
}

#[derive(Debug, Clone)]
pub(crate) struct InstalledModel {
    pub version: u64,
    pub model: Arc<NerModel>,
}

/// Everything that is journaled and snapshotted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub(crate) struct State {
    pub next_id: u64,
    pub projects: BTreeMap<u64, Project>,
    pub records: BTreeMap<u64, AnnotationRecord>,
    pub jobs: BTreeMap<u64, TrainJob>,
    /// (project, content hash) → record id; rebuilt from `records` on load.
    #[serde(skip)]
    pub by_hash: BTreeMap<(String, String), String>,
    /// Project → file holding each installed model version.
    pub model_files: BTreeMap<String, Vec<(u64, Option<PathBuf>)>>,
}

fn parse_id(id: &str, prefix: char) -> Option<u64> {
    id.strip_prefix(prefix)?.parse().ok()
}

impl State {
    pub(crate) fn reindex(&mut self) {
        self.by_hash = self
            .records
            .values()
            .map(|r| ((r.project.clone(), r.content_hash.clone()), r.id.clone()))
            .collect();
    }

    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn project(&self, id: &str) -> ApiResult<&Project> {
        parse_id(id, 'p')
            .and_then(|n| self.projects.get(&n))
            .ok_or_else(|| ApiError::not_found("project", id))
    }

    fn record(&self, id: &str) -> ApiResult<&AnnotationRecord> {
        parse_id(id, 'd')
            .and_then(|n| self.records.get(&n))
            .ok_or_else(|| ApiError::not_found("document", id))
    }

    pub(crate) fn apply(&mut self, event: &Event) {
        match event {
            Event::Project(p) => {
                if let Some(n) = parse_id(&p.id, 'p') {
                    self.next_id = self.next_id.max(n);
                    self.projects.insert(n, p.clone());
                }
            }
            Event::Record(r) => {
                if let Some(n) = parse_id(&r.id, 'd') {
                    self.next_id = self.next_id.max(n);
                    self.by_hash
                        .insert((r.project.clone(), r.content_hash.clone()), r.id.clone());
                    self.records.insert(n, r.clone());
                }
            }
            Event::Job(j) => {
                if let Some(n) = parse_id(&j.id, 'j') {
                    self.next_id = self.next_id.max(n);
                    self.jobs.insert(n, j.clone());
                }
            }
            Event::ModelInstalled { project, version, file } => {
                self.model_files
                    .entry(project.clone())
                    .or_default()
                    .push((*version, file.clone()));
                if let Some(p) = parse_id(project, 'p').and_then(|n| self.projects.get_mut(&n)) {
                    p.model_version = Some(*version);
                }
            }
        }
    }
}

pub(crate) struct Inner {
    pub state: RwLock<State>,
    pub journal: Mutex<Option<Journal>>,
    pub models: RwLock<BTreeMap<String, InstalledModel>>,
    pub model_dir: Option<PathBuf>,
    pub started: Instant,
    /// Last timestamp handed out, to keep job times monotone.
    pub clock: Mutex<f64>,
    pub token: Option<String>,
}

/// Cheap to clone; clones share state.
#[derive(Clone)]
pub struct AnnotationService {
    inner: Arc<Inner>,
}

impl AnnotationService {
    /// A service that keeps everything in memory.
    pub fn in_memory() -> Self {
        Self::build(State::default(), None, None, BTreeMap::new())
    }

    /// Open (or create) a persistent store in `dir`.
    pub fn open(dir: &Path) -> crate::Result<Self> {
        let (journal, state) = Journal::open(dir)?;
        let mut models = BTreeMap::new();
        for (project, versions) in &state.model_files {
            if let Some((version, Some(file))) = versions.last() {
                let bytes = formats::read_file(file)?;
                let model = NerModel::from_bytes(&bytes)?;
                models.insert(
                    project.clone(),
                    InstalledModel {
                        version: *version,
                        model: Arc::new(model),
                    },
                );
            }
        }
        Ok(Self::build(state, Some(journal), Some(dir.join("models")), models))
    }

    fn build(
        mut state: State,
        journal: Option<Journal>,
        model_dir: Option<PathBuf>,
        models: BTreeMap<String, InstalledModel>,
    ) -> Self {
        // Jobs cut off by a restart cannot resume.
        let mut interrupted = Vec::new();
        for job in state.jobs.values_mut() {
            if matches!(job.state, JobState::Queued | JobState::Running) {
                job.state = JobState::Failed;
                job.error = Some("interrupted by a restart".into());
                interrupted.push(job.clone());
            }
        }
        let service = AnnotationService {
            inner: Arc::new(Inner {
                state: RwLock::new(state),
                journal: Mutex::new(journal),
                models: RwLock::new(models),
                model_dir,
                started: Instant::now(),
                clock: Mutex::new(0.0),
                token: None,
            }),
        };
        for job in interrupted {
            let mut state = service.inner.state.write();
            let _ = service.commit(&mut state, Event::Job(job));
        }
        service
    }

    /// Require `token` on every HTTP request. Must be called before cloning.
    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        let inner = Arc::get_mut(&mut self.inner).expect("with_token must be called before the service is shared");
        inner.token = Some(token.into());
        self
    }

    pub(crate) fn token(&self) -> Option<&str> {
        self.inner.token.as_deref()
    }

    fn now(&self) -> f64 {
        let mut last = self.inner.clock.lock();
        let t = self.inner.started.elapsed().as_secs_f64().max(*last);
        *last = t;
        t
    }

    /// Apply and journal `event`; callers hold the state write lock so the
    /// journal order matches the order of mutations.
    fn commit(&self, state: &mut State, event: Event) -> ApiResult<()> {
        state.apply(&event);
        let mut journal = self.inner.journal.lock();
        if let Some(j) = journal.as_mut() {
            j.append(&event, state).map_err(ApiError::internal)?;
        }
        Ok(())
    }

    pub fn create_project(&self, name: &str, labels: Vec<LabelDef>) -> ApiResult<Project> {
        if name.trim().is_empty() {
            return Err(ApiError::validation("project name is empty"));
        }
        if labels.is_empty() {
            return Err(ApiError::validation("a project needs at least one label"));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.label.trim().is_empty() {
                return Err(ApiError::validation("label names must not be empty"));
            }
            if labels[..i].iter().any(|o| o.hotkey == l.hotkey) {
                return Err(ApiError::validation(format!("hotkey {:?} is used twice", l.hotkey)));
            }
            if labels[..i].iter().any(|o| o.label == l.label) {
                return Err(ApiError::validation(format!("label {} is defined twice", l.label)));
            }
        }
        let mut state = self.inner.state.write();
        let project = Project {
            id: format!("p{}", state.fresh_id()),
            name: name.to_string(),
            labels,
            model_version: None,
        };
        self.commit(&mut state, Event::Project(project.clone()))?;
        Ok(project)
    }

    pub fn project(&self, id: &str) -> ApiResult<Project> {
        self.inner.state.read().project(id).cloned()
    }

    pub fn projects(&self) -> Vec<Project> {
        self.inner.state.read().projects.values().cloned().collect()
    }

    /// Add text files as fresh records. Re-uploading identical content
    /// returns the existing record instead of creating another.
    pub fn upload_documents(&self, project: &str, files: Vec<UploadFile>) -> ApiResult<UploadResult> {
        let mut decoded = Vec::with_capacity(files.len());
        for f in files {
            let text = match (f.text, f.content_base64) {
                (Some(t), None) => t,
                (None, Some(b)) => {
                    let bytes = base64::engine::general_purpose::STANDARD
                        .decode(b.trim())
                        .map_err(|e| ApiError::validation(format!("{}: invalid base64: {e}", f.name)))?;
                    String::from_utf8(bytes)
                        .map_err(|_| ApiError::validation(format!("{}: file is not valid UTF-8", f.name)))?
                }
                _ => {
                    return Err(ApiError::validation(format!(
                        "{}: give exactly one of text or content_base64",
                        f.name
                    )))
                }
            };
            if text.trim().is_empty() {
                return Err(ApiError::validation(format!("{}: file is empty", f.name)));
            }
            decoded.push((f.name, text));
        }
        if decoded.is_empty() {
            return Err(ApiError::validation("no files given"));
        }

        let mut state = self.inner.state.write();
        state.project(project)?;
        let mut records = Vec::with_capacity(decoded.len());
        let mut created = 0;
        for (name, text) in decoded {
            let hash = formats::sha256_hex(text.as_bytes());
            if let Some(existing) = state.by_hash.get(&(project.to_string(), hash.clone())) {
                records.push(state.record(existing)?.clone());
                continue;
            }
            let record = AnnotationRecord {
                id: format!("d{}", state.fresh_id()),
                project: project.to_string(),
                name,
                text,
                spans: Vec::new(),
                suggestions: Vec::new(),
                suggestion_model: None,
                status: Status::Fresh,
                revision: 0,
                last_editor: None,
                content_hash: hash,
            };
            self.commit(&mut state, Event::Record(record.clone()))?;
            records.push(record);
            created += 1;
        }
        Ok(UploadResult {
            count: records.len(),
            created,
            records,
        })
    }

    pub fn documents(&self, project: &str, status: Option<Status>) -> ApiResult<Vec<AnnotationRecord>> {
        let state = self.inner.state.read();
        state.project(project)?;
        Ok(state
            .records
            .values()
            .filter(|r| r.project == project && status.is_none_or(|s| r.status == s))
            .cloned()
            .collect())
    }

    pub fn document(&self, id: &str) -> ApiResult<AnnotationRecord> {
        self.inner.state.read().record(id).cloned()
    }

    /// Replace the confirmed spans if `expected_revision` is current.
    pub fn save_spans(
        &self,
        doc: &str,
        spans: Vec<SpanRecord>,
        expected_revision: u64,
        editor: Option<String>,
    ) -> ApiResult<AnnotationRecord> {
        let mut state = self.inner.state.write();
        let current = state.record(doc)?;
        if current.revision != expected_revision {
            return Err(ApiError::new(
                ErrorKind::Conflict,
                "revision_conflict",
                format!(
                    "document {doc} is at revision {}, not {expected_revision}; fetch it again",
                    current.revision
                ),
            ));
        }
        let project = state.project(&current.project)?;
        if let Some(bad) = spans.iter().find(|s| !project.labels.iter().any(|l| l.label == s.label)) {
            return Err(ApiError::validation(format!(
                "label {} is not defined in project {}",
                bad.label, project.id
            )));
        }
        if let Some(bad) = spans.iter().find(|s| s.end <= s.start) {
            return Err(ApiError::validation(format!("span {}..{} is empty", bad.start, bad.end)));
        }
        let checked = Document::new(
            doc,
            current.text.clone(),
            spans
                .iter()
                .map(|s| EntitySpan::new(s.start, s.end, s.label.clone()))
                .collect(),
        )
        .map_err(|e| ApiError::validation(e.to_string()))?;
        let mut record = current.clone();
        record.spans = DocumentRecord::from(&checked).spans;
        record.status = next_status(record.status, Transition::SaveSpans)?;
        record.revision += 1;
        record.last_editor = editor;
        self.commit(&mut state, Event::Record(record.clone()))?;
        Ok(record)
    }

    /// Run the current model on a document and store its spans as
    /// suggestions. Confirmed spans are left alone.
    pub fn suggest(&self, doc: &str) -> ApiResult<Suggestion> {
        let (record, project) = {
            let state = self.inner.state.read();
            let record = state.record(doc)?.clone();
            (record.clone(), state.project(&record.project)?.id.clone())
        };
        let installed = self.inner.models.read().get(&project).cloned().ok_or_else(|| {
            ApiError::new(
                ErrorKind::Unprocessable,
                "no_model",
                format!("project {project} has no trained model yet; train first (POST /projects/{project}/train)"),
            )
        })?;
        let tokens = ehrner_core::corpus::tokenize(&record.text);
        let suggestions: Vec<SpanRecord> = installed
            .model
            .decode(&tokens)
            .into_iter()
            .map(|s| SpanRecord {
                start: s.start,
                end: s.end,
                label: s.label,
            })
            .collect();

        let mut state = self.inner.state.write();
        let mut updated = state.record(doc)?.clone();
        updated.suggestions = suggestions.clone();
        updated.suggestion_model = Some(installed.version);
        updated.status = next_status(updated.status, Transition::Suggest)?;
        self.commit(&mut state, Event::Record(updated.clone()))?;
        Ok(Suggestion {
            model_version: installed.version,
            suggestions,
            record: updated,
        })
    }

    pub fn set_status(&self, doc: &str, status: Status) -> ApiResult<AnnotationRecord> {
        if status != Status::Reviewed {
            return Err(ApiError::new(
                ErrorKind::Unprocessable,
                "invalid_transition",
                "the status endpoint only marks documents as reviewed",
            ));
        }
        let mut state = self.inner.state.write();
        let mut record = state.record(doc)?.clone();
        record.status = next_status(record.status, Transition::MarkReviewed)?;
        self.commit(&mut state, Event::Record(record.clone()))?;
        Ok(record)
    }

    /// Reviewed records (plus annotated ones if asked) as a dataset.
    pub fn export_dataset(&self, project: &str, include_annotated: bool) -> ApiResult<Dataset> {
        let docs = {
            let state = self.inner.state.read();
            state.project(project)?;
            state
                .records
                .values()
                .filter(|r| {
                    r.project == project
                        && (r.status == Status::Reviewed || (include_annotated && r.status == Status::Annotated))
                })
                .map(AnnotationRecord::to_document)
                .collect::<ApiResult<Vec<_>>>()?
        };
        if docs.is_empty() {
            return Err(ApiError::validation(format!(
                "project {project} has no {} documents to export",
                if include_annotated { "annotated or reviewed" } else { "reviewed" }
            )));
        }
        Dataset::from_documents(docs).map_err(|e| ApiError::internal(e))
    }

    pub fn export(&self, project: &str, format: Format, include_annotated: bool) -> ApiResult<String> {
        let dataset = self.export_dataset(project, include_annotated)?;
        match format {
            Format::Jsonl => Ok(formats::to_jsonl(&dataset)),
            Format::Columns => formats::to_columns(&dataset).map_err(ApiError::internal),
        }
    }

    pub fn job(&self, id: &str) -> ApiResult<TrainJob> {
        let state = self.inner.state.read();
        parse_id(id, 'j')
            .and_then(|n| state.jobs.get(&n))
            .cloned()
            .ok_or_else(|| ApiError::not_found("job", id))
    }

    pub fn model_version(&self, project: &str) -> Option<u64> {
        self.inner.models.read().get(project).map(|m| m.version)
    }

    /// Queue a retrain job and run it on a background thread.
    pub fn start_train_job(&self, project: &str, config: JobConfig) -> ApiResult<TrainJob> {
        if config.iterations == 0 || config.dim == 0 || config.hidden == 0 || config.embedding_epochs == 0 {
            return Err(ApiError::validation("iterations, dim, embedding_epochs and hidden must be at least 1"));
        }
        if !(0.0..1.0).contains(&config.held_out_ratio) {
            return Err(ApiError::validation("held_out_ratio must lie in [0, 1)"));
        }
        let dataset = self.export_dataset(project, config.include_annotated)?;
        let job = {
            let mut state = self.inner.state.write();
            if let Some(live) = state
                .jobs
                .values()
                .find(|j| j.project == project && matches!(j.state, JobState::Queued | JobState::Running))
            {
                return Err(ApiError::new(
                    ErrorKind::Conflict,
                    "job_in_progress",
                    format!("job {} is still {:?} for project {project}", live.id, live.state).to_lowercase(),
                ));
            }
            let job = TrainJob {
                id: format!("j{}", state.fresh_id()),
                project: project.to_string(),
                state: JobState::Queued,
                config,
                queued_at: self.now(),
                started_at: None,
                finished_at: None,
                model_version: None,
                train_documents: 0,
                held_out_documents: 0,
                metrics: None,
                error: None,
            };
            self.commit(&mut state, Event::Job(job.clone()))?;
            job
        };
        let service = self.clone();
        let queued = job.clone();
        std::thread::spawn(move || service.run_job(queued, dataset));
        Ok(job)
    }

    fn update_job(&self, job: &TrainJob) {
        let mut state = self.inner.state.write();
        let _ = self.commit(&mut state, Event::Job(job.clone()));
    }

    fn run_job(&self, mut job: TrainJob, dataset: Dataset) {
        job.state = JobState::Running;
        job.started_at = Some(self.now());
        self.update_job(&job);
        match self.train_for(&job, &dataset) {
            Ok((model, train_docs, held_out, metrics)) => match self.install(&job.project, model) {
                Ok(version) => {
                    job.state = JobState::Done;
                    job.model_version = Some(version);
                    job.train_documents = train_docs;
                    job.held_out_documents = held_out;
                    job.metrics = metrics;
                }
                Err(e) => {
                    job.state = JobState::Failed;
                    job.error = Some(e.to_string());
                }
            },
            Err(e) => {
                job.state = JobState::Failed;
                job.error = Some(e);
            }
        }
        job.finished_at = Some(self.now());
        self.update_job(&job);
    }

    fn train_for(
        &self,
        job: &TrainJob,
        dataset: &Dataset,
    ) -> Result<(NerModel, usize, usize, Option<EvalReport>), String> {
        let cfg = &job.config;
        let labels: Vec<String> = self
            .project(&job.project)
            .map_err(|e| e.to_string())?
            .labels
            .into_iter()
            .map(|l| l.label)
            .collect();
        let (train_set, held_out) = if cfg.held_out_ratio > 0.0 && dataset.len() >= 2 {
            let (t, h) = split_train_test(
                dataset,
                &SplitSpec {
                    test_ratio: cfg.held_out_ratio,
                    fraction: 1.0,
                    seed: cfg.seed,
                },
            )
            .map_err(|e| e.to_string())?;
            if t.is_empty() || h.is_empty() {
                (dataset.clone(), None)
            } else {
                (t, Some(h))
            }
        } else {
            (dataset.clone(), None)
        };
        // The embedding corpus is every document text in the project,
        // annotated or not.
        let corpus: Vec<String> = self
            .documents(&job.project, None)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|r| r.text)
            .collect();
        let table = train_static_embeddings(
            &corpus,
            &SkipGramConfig {
                dim: cfg.dim,
                epochs: cfg.embedding_epochs,
                min_count: 1,
                seed: cfg.seed,
                ..SkipGramConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let scheme = LabelScheme::new(&labels).map_err(|e| e.to_string())?;
        let repr = Representation::new(table, None).map_err(|e| e.to_string())?;
        let blank = NerModel::blank(
            scheme,
            repr,
            ModelConfig {
                hidden: cfg.hidden,
                seed: cfg.seed,
                ..ModelConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let model = train(
            &blank,
            &train_set,
            &TrainConfig {
                iterations: cfg.iterations,
                seed: cfg.seed,
                ..TrainConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let metrics = match &held_out {
            Some(h) => Some(compute_report(h, &predict(&model, h)).map_err(|e| e.to_string())?),
            None => None,
        };
        Ok((model, train_set.len(), held_out.map_or(0, |h| h.len()), metrics))
    }

    /// Make `model` the project's active version. In-flight suggestions keep
    /// the model they started with.
    fn install(&self, project: &str, model: NerModel) -> ApiResult<u64> {
        let mut state = self.inner.state.write();
        let version = state
            .model_files
            .get(project)
            .and_then(|v| v.last())
            .map_or(1, |(v, _)| v + 1);
        let file = match &self.inner.model_dir {
            Some(dir) => {
                let path = dir.join(format!("{project}-v{version}.ehrm"));
                formats::write_file(&path, &model.to_bytes()).map_err(ApiError::internal)?;
                Some(path)
            }
            None => None,
        };
        self.commit(
            &mut state,
            Event::ModelInstalled {
                project: project.to_string(),
                version,
                file,
            },
        )?;
        self.inner.models.write().insert(
            project.to_string(),
            InstalledModel {
                version,
                model: Arc::new(model),
            },
        );
        Ok(version)
    }
}
