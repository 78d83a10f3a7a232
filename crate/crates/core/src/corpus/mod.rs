//! Annotated documents, tokenization and dataset splitting.
//!
//! All offsets are Unicode scalar-value (char) indices into the document
//! text, end-exclusive.

mod synth;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use synth::{generate_synthetic_corpus, Domain, LexiconSpec, SynthCorpus, SynthSpec};

/// The four target entity types.
pub const TARGET_LABELS: [&str; 4] = ["CHEMICAL", "DISEASE", "SYMPTOM", "DOSAGE"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        EntitySpan {
            start,
            end,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub spans: Vec<EntitySpan>,
}

impl Document {
    /// Tokenize `text` and attach `spans`, sorting them by start offset and
    /// checking every span invariant.
    pub fn new(id: impl Into<String>, text: impl Into<String>, mut spans: Vec<EntitySpan>) -> Result<Self> {
        let text = text.into();
        spans.sort();
        let doc = Document {
            id: id.into(),
            tokens: tokenize(&text),
            text,
            spans,
        };
        doc.validate()?;
        Ok(doc)
    }

    /// Check that spans are well-formed, non-overlapping and token-aligned.
    pub fn validate(&self) -> Result<()> {
        let len = self.text.chars().count();
        let mut prev_end = 0;
        for (i, span) in self.spans.iter().enumerate() {
            if span.start >= span.end || span.end > len || span.label.is_empty() {
                return Err(Error::InvalidSpan {
                    doc: self.id.clone(),
                    start: span.start,
                    end: span.end,
                });
            }
            if i > 0 && span.start < prev_end {
                return Err(Error::OverlappingSpans { doc: self.id.clone() });
            }
            prev_end = span.end;
            self.token_range(span)?;
        }
        Ok(())
    }

    /// Indices `[first, last]` of the tokens a span covers.
    pub fn token_range(&self, span: &EntitySpan) -> Result<(usize, usize)> {
        let first = self.tokens.iter().position(|t| t.start == span.start);
        let last = self.tokens.iter().position(|t| t.end == span.end);
        match (first, last) {
            (Some(f), Some(l)) if f <= l => Ok((f, l)),
            _ => Err(Error::SpanNotAligned {
                doc: self.id.clone(),
                start: span.start,
                end: span.end,
            }),
        }
    }

    /// Text covered by a char range.
    pub fn slice(&self, start: usize, end: usize) -> String {
        self.text.chars().skip(start).take(end - start).collect()
    }

    /// Same text and id with a different span list.
    pub fn with_spans(&self, spans: Vec<EntitySpan>) -> Document {
        Document {
            id: self.id.clone(),
            text: self.text.clone(),
            tokens: self.tokens.clone(),
            spans,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub documents: Vec<Document>,
    pub label_set: BTreeSet<String>,
}

impl Dataset {
    pub fn new(documents: Vec<Document>, label_set: BTreeSet<String>) -> Result<Self> {
        let ds = Dataset { documents, label_set };
        ds.validate()?;
        Ok(ds)
    }

    /// Build a dataset whose label set is exactly the labels used by `documents`.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self> {
        let label_set = documents
            .iter()
            .flat_map(|d| d.spans.iter().map(|s| s.label.clone()))
            .collect();
        Self::new(documents, label_set)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for doc in &self.documents {
            if !ids.insert(doc.id.as_str()) {
                return Err(Error::DuplicateDocumentId(doc.id.clone()));
            }
            doc.validate()?;
            if let Some(span) = doc.spans.iter().find(|s| !self.label_set.contains(&s.label)) {
                return Err(Error::UnknownLabel {
                    doc: doc.id.clone(),
                    label: span.label.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    fn with_documents(&self, documents: Vec<Document>) -> Dataset {
        Dataset {
            documents,
            label_set: self.label_set.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_ratio: f64,
    pub fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_ratio: 0.2,
            fraction: 1.0,
            seed: 0,
        }
    }
}

fn is_split_punct(c: char) -> bool {
    c.is_ascii_punctuation()
}

/// Split on whitespace, then detach leading and trailing ASCII punctuation
/// one character at a time. Word-internal punctuation ("2.5", "mg/kg",
/// "well-known") stays inside the token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let end = i;
        let mut lo = start;
        while lo < end && is_split_punct(chars[lo]) {
            lo += 1;
        }
        let mut hi = end;
        while hi > lo && is_split_punct(chars[hi - 1]) {
            hi -= 1;
        }
        let mut push = |s: usize, e: usize| {
            tokens.push(Token {
                text: chars[s..e].iter().collect(),
                start: s,
                end: e,
            })
        };
        for p in start..lo {
            push(p, p + 1);
        }
        if lo < hi {
            push(lo, hi);
        }
        for p in hi.max(lo)..end {
            push(p, p + 1);
        }
    }
    tokens
}

fn shuffled(dataset: &Dataset, seed: u64) -> Vec<Document> {
    let mut docs = dataset.documents.clone();
    docs.shuffle(&mut rng::seeded(seed));
    docs
}

/// Shuffle with `spec.seed` and cut off `round(n × test_ratio)` documents
/// for testing. Returns `(train, test)`.
pub fn split_train_test(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(spec.test_ratio > 0.0 && spec.test_ratio < 1.0) {
        return Err(Error::InvalidTestRatio(spec.test_ratio));
    }
    let mut docs = shuffled(dataset, spec.seed);
    let test_len = libm::round(docs.len() as f64 * spec.test_ratio) as usize;
    let test = docs.split_off(docs.len() - test_len);
    Ok((dataset.with_documents(docs), dataset.with_documents(test)))
}

/// The first `floor(f × n)` documents of a seeded shuffle. Subsets for the
/// same seed are nested: a smaller fraction is always a prefix of a larger one.
pub fn take_fraction(train: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let mut docs = shuffled(train, seed);
    // 1e-9 absorbs products like 0.7 * 10 = 7.000000000000001 landing just under.
    let keep = libm::floor(fraction * docs.len() as f64 + 1e-9) as usize;
    docs.truncate(keep.min(docs.len()));
    Ok(train.with_documents(docs))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub documents: usize,
    pub spans: BTreeMap<String, usize>,
}

impl DatasetStats {
    pub fn count(&self, label: &str) -> usize {
        self.spans.get(label).copied().unwrap_or(0)
    }

    pub fn total_spans(&self) -> usize {
        self.spans.values().sum()
    }
}

pub fn dataset_stats(dataset: &Dataset) -> DatasetStats {
    let mut stats = DatasetStats {
        documents: dataset.len(),
        spans: dataset.label_set.iter().map(|l| (l.clone(), 0)).collect(),
    };
    for span in dataset.documents.iter().flat_map(|d| &d.spans) {
        *stats.spans.entry(span.label.to_string()).or_insert(0) += 1;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn triples(text: &str) -> Vec<(String, usize, usize)> {
        tokenize(text).into_iter().map(|t| (t.text, t.start, t.end)).collect()
    }

    fn t(s: &str, a: usize, b: usize) -> (String, usize, usize) {
        (s.into(), a, b)
    }

    #[test]
    fn tokenize_clinical_sentence() {
        assert_eq!(
            triples("Aspirin 75 mg daily."),
            vec![
                t("Aspirin", 0, 7),
                t("75", 8, 10),
                t("mg", 11, 13),
                t("daily", 14, 19),
                t(".", 19, 20)
            ]
        );
    }

    #[test]
    fn tokenize_trivial_inputs() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t").is_empty());
        assert_eq!(triples("a b"), vec![t("a", 0, 1), t("b", 2, 3)]);
    }

    #[test]
    fn tokenize_keeps_internal_punctuation() {
        assert_eq!(
            triples("(2.5 mg/kg, well-known)"),
            vec![
                t("(", 0, 1),
                t("2.5", 1, 4),
                t("mg/kg", 5, 10),
                t(",", 10, 11),
                t("well-known", 12, 22),
                t(")", 22, 23)
            ]
        );
        assert_eq!(triples("..."), vec![t(".", 0, 1), t(".", 1, 2), t(".", 2, 3)]);
    }

    #[test]
    fn offsets_are_char_indices() {
        let text = "naïve café.";
        for tok in tokenize(text) {
            let s: String = text.chars().skip(tok.start).take(tok.end - tok.start).collect();
            assert_eq!(s, tok.text);
        }
        assert_eq!(triples(text)[1], t("café", 6, 10));
    }

    #[test]
    fn document_rejects_bad_spans() {
        let err = Document::new("d1", "Aspirin helps", vec![EntitySpan::new(0, 3, "CHEMICAL")]).unwrap_err();
        assert!(matches!(err, Error::SpanNotAligned { .. }));
        let err = Document::new("d1", "Aspirin helps", vec![EntitySpan::new(5, 5, "CHEMICAL")]).unwrap_err();
        assert!(matches!(err, Error::InvalidSpan { .. }));
        let err = Document::new(
            "d1",
            "Aspirin helps",
            vec![EntitySpan::new(0, 13, "CHEMICAL"), EntitySpan::new(8, 13, "DISEASE")],
        )
        .unwrap_err();
        assert!(matches!(err, Error::OverlappingSpans { .. }));
    }

    fn numbered(n: usize) -> Dataset {
        let docs = (0..n)
            .map(|i| Document::new(alloc::format!("d{i}"), "some text", vec![]).unwrap())
            .collect();
        Dataset::new(docs, BTreeSet::new()).unwrap()
    }

    #[test]
    fn split_sizes_follow_rounding() {
        let ds = numbered(10);
        let (train, test) = split_train_test(&ds, &SplitSpec { test_ratio: 0.2, ..Default::default() }).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        // 4212 documents at 0.3 → 1264 test, 2948 train.
        let total = 4212usize;
        let test_len = libm::round(total as f64 * 0.3) as usize;
        assert_eq!((total - test_len, test_len), (2948, 1264));
    }

    #[test]
    fn split_rejects_bad_input() {
        let empty = Dataset::default();
        assert_eq!(split_train_test(&empty, &SplitSpec::default()).unwrap_err(), Error::EmptyDataset);
        let ds = numbered(3);
        for ratio in [0.0, 1.0, -0.1, f64::NAN] {
            let spec = SplitSpec { test_ratio: ratio, ..Default::default() };
            assert!(matches!(split_train_test(&ds, &spec), Err(Error::InvalidTestRatio(_))));
        }
    }

    #[test]
    fn split_is_seeded() {
        let ds = numbered(20);
        let spec = SplitSpec { seed: 3, ..Default::default() };
        assert_eq!(split_train_test(&ds, &spec).unwrap(), split_train_test(&ds, &spec).unwrap());
        let other = SplitSpec { seed: 4, ..Default::default() };
        assert_ne!(split_train_test(&ds, &spec).unwrap().0, split_train_test(&ds, &other).unwrap().0);
    }

    #[test]
    fn fraction_sizes_and_errors() {
        let ds = numbered(2948);
        assert_eq!(take_fraction(&ds, 0.5, 1).unwrap().len(), 1474);
        let full = take_fraction(&ds, 1.0, 1).unwrap();
        assert_eq!(full.len(), 2948);
        let mut a: Vec<_> = full.documents.iter().map(|d| d.id.clone()).collect();
        let mut b: Vec<_> = ds.documents.iter().map(|d| d.id.clone()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        for f in [0.0, 1.5, -1.0] {
            assert_eq!(take_fraction(&ds, f, 1).unwrap_err(), Error::InvalidFraction(f));
        }
        let ten = numbered(10);
        for (f, n) in [(0.3, 3), (0.6, 6), (0.7, 7), (0.9, 9)] {
            assert_eq!(take_fraction(&ten, f, 0).unwrap().len(), n);
        }
    }

    #[test]
    fn stats_count_labels() {
        assert_eq!(dataset_stats(&Dataset::default()), DatasetStats::default());
        let doc = Document::new(
            "d",
            "Aspirin and Ibuprofen",
            vec![EntitySpan::new(0, 7, "CHEMICAL"), EntitySpan::new(12, 21, "CHEMICAL")],
        )
        .unwrap();
        let stats = dataset_stats(&Dataset::from_documents(vec![doc]).unwrap());
        assert_eq!(stats.documents, 1);
        assert_eq!(stats.count("CHEMICAL"), 2);
        assert_eq!(stats.total_spans(), 2);
    }
}
