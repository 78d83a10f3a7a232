use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use base64::Engine as _;
use ehrner::formats::{from_jsonl, Format, SpanRecord};
use ehrner::service::{
    default_labels, next_status, AnnotationService, ApiError, JobConfig, JobState, LabelDef, Status, TrainJob,
    Transition, UploadFile,
};
use ehrner_core::corpus::{dataset_stats, generate_synthetic_corpus, Document, SynthSpec};
use proptest::prelude::*;

fn text_file(name: &str, text: &str) -> UploadFile {
    UploadFile {
        name: name.into(),
        text: Some(text.into()),
        content_base64: None,
    }
}

fn spans_of(doc: &Document) -> Vec<SpanRecord> {
    doc.spans
        .iter()
        .map(|s| SpanRecord {
            start: s.start,
            end: s.end,
            label: s.label.clone(),
        })
        .collect()
}

fn wait(svc: &AnnotationService, job: &str) -> TrainJob {
    let deadline = Instant::now() + Duration::from_secs(300);
    loop {
        let j = svc.job(job).unwrap();
        if matches!(j.state, JobState::Done | JobState::Failed) {
            return j;
        }
        assert!(Instant::now() < deadline, "job {job} did not finish");
        std::thread::sleep(Duration::from_millis(20));
    }
}

/// Upload, annotate from gold and review `docs`; returns the record ids.
fn annotate(svc: &AnnotationService, project: &str, docs: &[Document], review: bool) -> Vec<String> {
    let files: Vec<UploadFile> = docs.iter().map(|d| text_file(&format!("{}.txt", d.id), &d.text)).collect();
    let uploaded = svc.upload_documents(project, files).unwrap();
    uploaded
        .records
        .iter()
        .zip(docs)
        .map(|(r, d)| {
            let saved = svc.save_spans(&r.id, spans_of(d), r.revision, Some("tester".into())).unwrap();
            if review {
                svc.set_status(&saved.id, Status::Reviewed).unwrap();
            }
            r.id.clone()
        })
        .collect()
}

/// Synthetic notes, dropping repeated texts (uploads would merge them).
fn clinical(documents: usize, seed: u64) -> Vec<Document> {
    dense_clinical(documents, 1.0, seed)
}

fn dense_clinical(documents: usize, density: f64, seed: u64) -> Vec<Document> {
    let mut seen = BTreeSet::new();
    generate_synthetic_corpus(&SynthSpec::clinical(documents, 10, density, seed))
        .unwrap()
        .dataset
        .documents
        .into_iter()
        .filter(|d| seen.insert(d.text.clone()))
        .collect()
}

#[test]
fn concurrent_saves_have_exactly_one_winner() {
    let svc = AnnotationService::in_memory();
    let p = svc.create_project("race", default_labels()).unwrap();
    let doc = svc
        .upload_documents(&p.id, vec![text_file("a.txt", "aspirin relieved the headache")])
        .unwrap()
        .records
        .remove(0);
    let wins = AtomicUsize::new(0);
    let conflicts = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for i in 0..32 {
            let (svc, doc, wins, conflicts) = (&svc, &doc, &wins, &conflicts);
            s.spawn(move || {
                let span = SpanRecord {
                    start: 0,
                    end: 7,
                    label: "CHEMICAL".into(),
                };
                match svc.save_spans(&doc.id, vec![span], 0, Some(format!("editor{i}"))) {
                    Ok(_) => wins.fetch_add(1, Ordering::SeqCst),
                    Err(e) => {
                        assert_eq!(e.code, "revision_conflict");
                        conflicts.fetch_add(1, Ordering::SeqCst)
                    }
                };
            });
        }
    });
    assert_eq!(wins.into_inner(), 1);
    assert_eq!(conflicts.into_inner(), 31);
    assert_eq!(svc.document(&doc.id).unwrap().revision, 1);
}

#[test]
fn status_machine_is_closed_and_reachable() {
    let all = [Status::Fresh, Status::Suggested, Status::Annotated, Status::Reviewed];
    let ops = [Transition::Suggest, Transition::SaveSpans, Transition::MarkReviewed];
    let mut seen = BTreeSet::from([Status::Fresh]);
    let mut frontier = vec![Status::Fresh];
    while let Some(s) = frontier.pop() {
        for op in ops {
            if let Ok(t) = next_status(s, op) {
                if seen.insert(t) {
                    frontier.push(t);
                }
            }
        }
    }
    assert_eq!(seen.len(), all.len());
    for s in all {
        // Nothing ever returns to fresh, and reviewed records stay reviewed.
        for op in ops {
            match next_status(s, op) {
                Ok(t) => {
                    assert_ne!(t, Status::Fresh);
                    if s == Status::Reviewed {
                        assert_eq!(t, Status::Reviewed);
                    }
                }
                Err(e) => {
                    assert_eq!(op, Transition::MarkReviewed);
                    assert!(matches!(s, Status::Fresh | Status::Suggested));
                    assert_eq!(e.code, "invalid_transition");
                }
            }
        }
    }
}

#[test]
fn suggest_without_a_model_says_train_first() {
    let svc = AnnotationService::in_memory();
    let p = svc.create_project("cold", default_labels()).unwrap();
    let d = svc.upload_documents(&p.id, vec![text_file("a.txt", "fever")]).unwrap().records.remove(0);
    let err = svc.suggest(&d.id).unwrap_err();
    assert_eq!(err.code, "no_model");
    assert!(err.message.contains("train"));
    assert_eq!(svc.document(&d.id).unwrap().status, Status::Fresh);
}

#[test]
fn uploads_are_idempotent_and_validated() {
    let svc = AnnotationService::in_memory();
    let p = svc.create_project("up", default_labels()).unwrap();
    let first = svc.upload_documents(&p.id, vec![text_file("a.txt", "cough and fever")]).unwrap();
    assert_eq!((first.count, first.created), (1, 1));
    let encoded = base64::engine::general_purpose::STANDARD.encode("cough and fever");
    let again = svc
        .upload_documents(
            &p.id,
            vec![UploadFile {
                name: "copy.txt".into(),
                text: None,
                content_base64: Some(encoded),
            }],
        )
        .unwrap();
    assert_eq!((again.count, again.created), (1, 0));
    assert_eq!(again.records[0].id, first.records[0].id);
    // Identical content in another project is a separate record.
    let q = svc.create_project("other", default_labels()).unwrap();
    assert_eq!(svc.upload_documents(&q.id, vec![text_file("a.txt", "cough and fever")]).unwrap().created, 1);

    let empty = svc.upload_documents(&p.id, vec![text_file("blank.txt", "  \n")]).unwrap_err();
    assert_eq!(empty.code, "validation_error");
    assert!(empty.message.contains("blank.txt"));
    let binary = UploadFile {
        name: "scan.bin".into(),
        text: None,
        content_base64: Some(base64::engine::general_purpose::STANDARD.encode([0xff, 0xfe, 0x00])),
    };
    let err = svc.upload_documents(&p.id, vec![binary]).unwrap_err();
    assert!(err.message.contains("scan.bin") && err.message.contains("UTF-8"), "{err}");
    assert_eq!(svc.upload_documents("p999", vec![text_file("a", "x")]).unwrap_err().code, "not_found");

    let bulk: Vec<UploadFile> = (0..23).map(|i| text_file(&format!("n{i}.txt"), &format!("note {i}: no acute distress"))).collect();
    let r = svc.upload_documents(&p.id, bulk).unwrap();
    assert_eq!((r.count, r.created), (23, 23));
    assert_eq!(svc.documents(&p.id, Some(Status::Fresh)).unwrap().len(), 24);
}

#[test]
fn label_definitions_are_validated() {
    let svc = AnnotationService::in_memory();
    assert_eq!(svc.create_project("none", vec![]).unwrap_err().code, "validation_error");
    let mut dup = default_labels();
    dup.push(LabelDef {
        label: "ALLERGY".into(),
        hotkey: 'C',
        color: "#000000".into(),
    });
    let err = svc.create_project("dup", dup).unwrap_err();
    assert!(err.message.contains("hotkey"), "{err}");
    assert_eq!(svc.create_project(" ", default_labels()).unwrap_err().code, "validation_error");
}

#[test]
fn spans_are_validated_and_revisions_advance() {
    let svc = AnnotationService::in_memory();
    let p = svc.create_project("spans", default_labels()).unwrap();
    let d = svc
        .upload_documents(&p.id, vec![text_file("a.txt", "aspirin for headache")])
        .unwrap()
        .records
        .remove(0);
    let span = |s, e, l: &str| SpanRecord {
        start: s,
        end: e,
        label: l.into(),
    };
    let code = |e: ApiError| e.code;
    assert_eq!(code(svc.save_spans(&d.id, vec![span(0, 7, "ALLERGY")], 0, None).unwrap_err()), "validation_error");
    assert_eq!(code(svc.save_spans(&d.id, vec![span(0, 4, "CHEMICAL")], 0, None).unwrap_err()), "validation_error");
    assert_eq!(code(svc.save_spans(&d.id, vec![span(0, 99, "CHEMICAL")], 0, None).unwrap_err()), "validation_error");
    let saved = svc.save_spans(&d.id, vec![span(12, 20, "SYMPTOM"), span(0, 7, "CHEMICAL")], 0, None).unwrap();
    assert_eq!(saved.revision, 1);
    assert_eq!(saved.status, Status::Annotated);
    assert_eq!(saved.spans[0].start, 0, "spans come back sorted");
    assert_eq!(code(svc.save_spans(&d.id, vec![], 0, None).unwrap_err()), "revision_conflict");
    assert_eq!(svc.set_status(&d.id, Status::Reviewed).unwrap().status, Status::Reviewed);
    assert_eq!(svc.save_spans(&d.id, vec![], 1, None).unwrap().status, Status::Reviewed);
    assert_eq!(code(svc.set_status(&d.id, Status::Fresh).unwrap_err()), "invalid_transition");
}

#[test]
fn export_round_trips_and_is_deterministic() {
    let svc = AnnotationService::in_memory();
    let p = svc.create_project("export", default_labels()).unwrap();
    assert_eq!(svc.export(&p.id, Format::Jsonl, false).unwrap_err().code, "validation_error");
    let docs = clinical(12, 3);
    let ids = annotate(&svc, &p.id, &docs[..8], true);
    annotate(&svc, &p.id, &docs[8..], false);

    let reviewed = svc.export(&p.id, Format::Jsonl, false).unwrap();
    let back = from_jsonl(&reviewed, std::path::Path::new("export.jsonl")).unwrap();
    assert_eq!(back.len(), 8);
    for (rec, (doc, id)) in back.documents.iter().zip(docs.iter().zip(&ids)) {
        assert_eq!(&rec.id, id);
        assert_eq!(rec.text, doc.text);
        assert_eq!(rec.spans, doc.spans);
    }
    assert_eq!(svc.export(&p.id, Format::Jsonl, true).unwrap().lines().count(), 12);
    assert_eq!(svc.export(&p.id, Format::Jsonl, false).unwrap(), reviewed);
    let cols = svc.export(&p.id, Format::Columns, false).unwrap();
    assert_eq!(svc.export(&p.id, Format::Columns, false).unwrap(), cols);
    assert!(cols.contains("\tB-") || cols.contains("\tU-"));
}

/// One project with an installed model, shared by the tests that need one.
fn trained() -> &'static (AnnotationService, String, TrainJob, usize) {
    static CELL: OnceLock<(AnnotationService, String, TrainJob, usize)> = OnceLock::new();
    CELL.get_or_init(|| {
        let svc = AnnotationService::in_memory();
        let p = svc.create_project("bootstrap", default_labels()).unwrap();
        // About a hundred mentions of the rarest label.
        let docs = dense_clinical(500, 3.0, 11);
        let stats = dataset_stats(&ehrner_core::corpus::Dataset::from_documents(docs.clone()).unwrap());
        for label in ["CHEMICAL", "DISEASE", "SYMPTOM", "DOSAGE"] {
            assert!(stats.count(label) >= 90, "{label}: {}", stats.count(label));
        }
        annotate(&svc, &p.id, &docs, true);
        let job = svc.start_train_job(&p.id, JobConfig::default()).unwrap();
        assert_eq!(job.state, JobState::Queued);
        let second = svc.start_train_job(&p.id, JobConfig::default()).unwrap_err();
        assert_eq!(second.code, "job_in_progress");
        let done = wait(&svc, &job.id);
        let n = docs.len();
        (svc, p.id, done, n)
    })
}

#[test]
fn training_job_installs_a_useful_model() {
    let (svc, project, job, annotated) = trained();
    assert_eq!(job.state, JobState::Done, "{:?}", job.error);
    let (q, s, f) = (job.queued_at, job.started_at.unwrap(), job.finished_at.unwrap());
    assert!(q <= s && s <= f, "{q} {s} {f}");
    assert_eq!(job.model_version, Some(1));
    assert_eq!(job.train_documents + job.held_out_documents, *annotated);
    let m = job.metrics.as_ref().unwrap();
    assert!(m.micro().f1 > 0.5, "{:?} {:?}", m.micro(), m);
    assert_eq!(svc.model_version(project), Some(1));
    assert_eq!(svc.project(project).unwrap().model_version, Some(1));

    let fresh = svc
        .upload_documents(
            project,
            clinical(5, 99).iter().map(|d| text_file("new.txt", &format!("Follow-up visit. {}", d.text))).collect(),
        )
        .unwrap();
    assert_eq!(fresh.created, fresh.count);
    let mut total = 0;
    for r in &fresh.records {
        let s = svc.suggest(&r.id).unwrap();
        assert_eq!(s.model_version, 1);
        assert_eq!(s.record.suggestion_model, Some(1));
        assert_eq!(s.record.status, Status::Suggested);
        assert!(s.record.spans.is_empty(), "suggestions never overwrite confirmed spans");
        total += s.suggestions.len();
    }
    assert!(total > 0);
}

#[test]
fn bad_job_configs_are_rejected() {
    let svc = AnnotationService::in_memory();
    let p = svc.create_project("jobs", default_labels()).unwrap();
    assert_eq!(svc.start_train_job(&p.id, JobConfig::default()).unwrap_err().code, "validation_error");
    annotate(&svc, &p.id, &clinical(3, 1), false);
    let reviewed_only = JobConfig {
        include_annotated: false,
        ..JobConfig::default()
    };
    assert_eq!(svc.start_train_job(&p.id, reviewed_only).unwrap_err().code, "validation_error");
    let zero = JobConfig {
        iterations: 0,
        ..JobConfig::default()
    };
    assert_eq!(svc.start_train_job(&p.id, zero).unwrap_err().code, "validation_error");
    assert_eq!(svc.job("j12345").unwrap_err().code, "not_found");
}

#[test]
fn persistent_store_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (project, doc) = {
        let svc = AnnotationService::open(dir.path()).unwrap();
        let p = svc.create_project("persist", default_labels()).unwrap();
        let docs = clinical(30, 5);
        let ids = annotate(&svc, &p.id, &docs, true);
        let job = svc
            .start_train_job(
                &p.id,
                JobConfig {
                    iterations: 3,
                    dim: 8,
                    hidden: 8,
                    ..JobConfig::default()
                },
            )
            .unwrap();
        assert_eq!(wait(&svc, &job.id).state, JobState::Done);
        (p.id, ids[0].clone())
    };
    let svc = AnnotationService::open(dir.path()).unwrap();
    let p = svc.project(&project).unwrap();
    assert_eq!(p.model_version, Some(1));
    assert_eq!(svc.model_version(&project), Some(1));
    let d = svc.document(&doc).unwrap();
    assert_eq!((d.status, d.revision), (Status::Reviewed, 1));
    assert!(svc.documents(&project, None).unwrap().len() >= 25);
    assert_eq!(svc.suggest(&doc).unwrap().model_version, 1);
    // Ids keep counting instead of reusing old ones.
    let q = svc.create_project("second", default_labels()).unwrap();
    assert!(svc.document(&q.id.replace('p', "d")).is_err());
    drop(svc);

    // A torn final journal line is ignored.
    let journal = dir.path().join("journal.jsonl");
    let mut bytes = std::fs::read(&journal).unwrap_or_default();
    bytes.extend_from_slice(b"{\"event\":\"Record\",\"id\":");
    std::fs::write(&journal, bytes).unwrap();
    let svc = AnnotationService::open(dir.path()).unwrap();
    assert_eq!(svc.projects().len(), 2);
}

#[derive(Debug, Clone)]
enum Op {
    Save(bool),
    Suggest,
    Review,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![any::<bool>().prop_map(Op::Save), Just(Op::Suggest), Just(Op::Review)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_api_sequences_follow_the_status_machine(ops in prop::collection::vec(op(), 1..20)) {
        static N: AtomicUsize = AtomicUsize::new(0);
        let (svc, project, _, _) = trained();
        let n = N.fetch_add(1, Ordering::SeqCst);
        let text = format!("case {n} aspirin eased the fever");
        let mut rec = svc.upload_documents(project, vec![text_file("case.txt", &text)]).unwrap().records.remove(0);
        let mut status = Status::Fresh;
        for op in ops {
            match op {
                Op::Save(stale) => {
                    let rev = if stale { rec.revision + 1 } else { rec.revision };
                    let span = SpanRecord { start: text.find("aspirin").unwrap(), end: text.find(" eased").unwrap(), label: "CHEMICAL".into() };
                    match svc.save_spans(&rec.id, vec![span], rev, None) {
                        Ok(r) => {
                            prop_assert!(!stale);
                            prop_assert_eq!(r.revision, rec.revision + 1);
                            status = next_status(status, Transition::SaveSpans).unwrap();
                            rec = r;
                        }
                        Err(e) => {
                            prop_assert!(stale);
                            prop_assert_eq!(e.code, "revision_conflict");
                        }
                    }
                }
                Op::Suggest => {
                    let s = svc.suggest(&rec.id).unwrap();
                    status = next_status(status, Transition::Suggest).unwrap();
                    prop_assert_eq!(&s.record.spans, &rec.spans);
                    rec = s.record;
                }
                Op::Review => match next_status(status, Transition::MarkReviewed) {
                    Ok(next) => {
                        rec = svc.set_status(&rec.id, Status::Reviewed).unwrap();
                        status = next;
                    }
                    Err(_) => {
                        prop_assert_eq!(svc.set_status(&rec.id, Status::Reviewed).unwrap_err().code, "invalid_transition");
                    }
                },
            }
            prop_assert_eq!(rec.status, status);
            prop_assert_eq!(svc.document(&rec.id).unwrap(), rec.clone());
        }
    }
}
