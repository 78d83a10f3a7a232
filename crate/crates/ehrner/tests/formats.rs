use std::path::Path;

use ehrner::formats::{
    dataset_hash, from_columns, from_jsonl, load_documents, save_documents, to_columns, to_jsonl, Format,
};
use ehrner::Error;
use ehrner_core::corpus::{Dataset, Document, EntitySpan};
use proptest::prelude::*;

const LABELS: [&str; 4] = ["CHEMICAL", "DISEASE", "SYMPTOM", "DOSAGE"];

fn word() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z]{1,8}", "[A-Z][a-z]{1,5}", "[0-9]{1,3}", "[a-z]{1,3}[.,;]", "é[a-z]{0,3}", "#[a-z]{1,3}"]
}

fn separator() -> impl Strategy<Value = &'static str> {
    prop_oneof![4 => Just(" "), 1 => Just("  "), 1 => Just("\t"), 1 => Just("\n")]
}

/// A document with spans over whole tokens. Layout entry `i` says whether
/// a span opens at token `i`, its length and its label.
fn document(id: usize) -> impl Strategy<Value = Document> {
    (
        prop::collection::vec((word(), separator()), 0..15),
        prop::collection::vec((any::<bool>(), 1usize..4, 0usize..4), 45),
    )
        .prop_map(move |(parts, layout)| {
            let text: String = parts.iter().map(|(w, sep)| format!("{w}{sep}")).collect();
            let doc = Document::new(format!("n{id}"), text, vec![]).unwrap();
            let mut spans = Vec::new();
            let mut i = 0;
            while i < doc.tokens.len() {
                let (open, len, label) = layout[i];
                if open {
                    let last = (i + len - 1).min(doc.tokens.len() - 1);
                    spans.push(EntitySpan::new(doc.tokens[i].start, doc.tokens[last].end, LABELS[label]));
                    i = last + 2;
                } else {
                    i += 1;
                }
            }
            doc.with_spans(spans)
        })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..6)
        .prop_flat_map(|n| (0..n).map(document).collect::<Vec<_>>())
        .prop_map(|docs| Dataset::from_documents(docs).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jsonl_round_trips(ds in dataset()) {
        let text = to_jsonl(&ds);
        prop_assert_eq!(from_jsonl(&text, Path::new("x.jsonl")).unwrap(), ds.clone());
        prop_assert_eq!(to_jsonl(&ds), text);
    }

    #[test]
    fn columns_round_trip(ds in dataset()) {
        let text = to_columns(&ds).unwrap();
        let back = from_columns(&text, Path::new("x.tsv")).unwrap();
        prop_assert_eq!(&back.documents, &ds.documents);
        prop_assert_eq!(dataset_hash(&back), dataset_hash(&ds));
    }
}

#[test]
fn bare_columns_rebuild_text() {
    let cols = "Aspirin\tU-CHEMICAL\nfor\tO\nchest\tB-SYMPTOM\npain\tL-SYMPTOM\n\nnothing\tO\n";
    let ds = from_columns(cols, Path::new("bare.conll")).unwrap();
    assert_eq!(ds.len(), 2);
    let d = &ds.documents[0];
    assert_eq!(d.text, "Aspirin for chest pain");
    assert_eq!(d.slice(d.spans[1].start, d.spans[1].end), "chest pain");
    assert_eq!(ds.documents[1].id, "doc00001");
}

#[test]
fn parse_errors_name_file_and_line() {
    let jsonl = "{\"id\":\"a\",\"text\":\"fever\",\"spans\":[]}\n\n{\"id\": 3}\n";
    match from_jsonl(jsonl, Path::new("notes.jsonl")).unwrap_err() {
        Error::Parse { path, line, .. } => {
            assert_eq!(path, Path::new("notes.jsonl"));
            assert_eq!(line, 3);
        }
        other => panic!("{other}"),
    }
    let misaligned = "{\"id\":\"a\",\"text\":\"fever\",\"spans\":[{\"start\":0,\"end\":3,\"label\":\"SYMPTOM\"}]}\n";
    let err = from_jsonl(misaligned, Path::new("m.jsonl")).unwrap_err().to_string();
    assert!(err.contains("a") && err.contains("0..3"), "{err}");

    for (cols, line) in [
        ("fever\tX-SYMPTOM\n", 1),
        ("no tab here\n", 1),
        ("cough\tO\nfever\tI-SYMPTOM\n", 1),
    ] {
        match from_columns(cols, Path::new("bad.tsv")).unwrap_err() {
            Error::Parse { line: l, .. } => assert_eq!(l, line, "{cols:?}"),
            other => panic!("{cols:?}: {other}"),
        }
    }
    let mismatch = "# id = a\n# text = fever cough\nfever\tO\n";
    assert!(from_columns(mismatch, Path::new("m.tsv")).unwrap_err().to_string().contains("do not match"));
}

#[test]
fn files_round_trip_and_formats_parse() {
    let dir = tempfile::tempdir().unwrap();
    let doc = Document::new("a", "Metformin 500 mg for diabetes", vec![
        EntitySpan::new(0, 9, "CHEMICAL"),
        EntitySpan::new(10, 16, "DOSAGE"),
        EntitySpan::new(21, 29, "DISEASE"),
    ])
    .unwrap();
    let ds = Dataset::from_documents(vec![doc]).unwrap();
    for (name, format) in [("x/data.jsonl", Format::Jsonl), ("y/data.conll", Format::Columns)] {
        let path = dir.path().join(name);
        assert_eq!(Format::from_path(&path), format);
        save_documents(&ds, &path, format).unwrap();
        assert_eq!(load_documents(&path, format).unwrap(), ds);
    }
    assert_eq!("tsv".parse::<Format>().unwrap(), Format::Columns);
    assert_eq!("json".parse::<Format>().unwrap(), Format::Jsonl);
    assert!("xml".parse::<Format>().is_err());
    let missing = dir.path().join("missing.jsonl");
    let err = load_documents(&missing, Format::Jsonl).unwrap_err();
    assert!(err.to_string().contains("missing.jsonl"));
}
