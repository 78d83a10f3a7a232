//! Dataset and corpus file formats.
//!
//! - Annotation JSON lines: `{"id": str, "text": str, "spans": [{"start", "end", "label"}]}`
//!   per line, offsets in Unicode scalar values.
//! - Column export: `token<TAB>tag` per line with BILOU tags, blank line
//!   between documents. Each document is preceded by `# id = …` and
//!   `# text = …` comment lines so that loading restores the exact text;
//!   files without comments are accepted and their text is rebuilt by
//!   joining tokens with single spaces.
//! - Raw corpus: UTF-8 text, one sentence per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ehrner_core::corpus::{Dataset, Document, EntitySpan};
use ehrner_core::tagger::{document_actions, spans_from_actions, Action, LabelScheme};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Columns,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "columns" | "conll" | "tsv" => Ok(Format::Columns),
            other => Err(format!("unknown format {other:?} (expected jsonl or columns)")),
        }
    }
}

impl Format {
    /// Guess from the file extension; JSON lines unless it looks tabular.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv" | "conll" | "cols") => Format::Columns,
            _ => Format::Jsonl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub spans: Vec<SpanRecord>,
}

impl From<&Document> for DocumentRecord {
    fn from(d: &Document) -> Self {
        DocumentRecord {
            id: d.id.clone(),
            text: d.text.clone(),
            spans: d
                .spans
                .iter()
                .map(|s| SpanRecord {
                    start: s.start,
                    end: s.end,
                    label: s.label.clone(),
                })
                .collect(),
        }
    }
}

impl DocumentRecord {
    pub fn into_document(self) -> ehrner_core::Result<Document> {
        let spans = self
            .spans
            .into_iter()
            .map(|s| EntitySpan::new(s.start, s.end, s.label))
            .collect();
        Document::new(self.id, self.text, spans)
    }
}

pub fn to_jsonl(dataset: &Dataset) -> String {
    let mut out = String::new();
    for doc in &dataset.documents {
        let line = serde_json::to_string(&DocumentRecord::from(doc)).expect("records serialize");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Parse JSON lines; `path` only labels errors. Blank lines are skipped.
pub fn from_jsonl(text: &str, path: &Path) -> Result<Dataset> {
    let mut documents = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let record: DocumentRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if let Some(s) = record.spans.iter().find(|s| s.end <= s.start) {
            return Err(parse_err(format!("span {}..{} has end <= start", s.start, s.end)));
        }
        documents.push(record.into_document().map_err(|e| match e {
            ehrner_core::Error::InvalidSpan { .. } => parse_err(e.to_string()),
            other => Error::Core(other),
        })?);
    }
    Ok(Dataset::from_documents(documents)?)
}

fn scheme_for(dataset: &Dataset) -> Result<Option<LabelScheme>> {
    if dataset.label_set.is_empty() {
        return Ok(None);
    }
    let labels: Vec<&str> = dataset.label_set.iter().map(String::as_str).collect();
    Ok(Some(LabelScheme::new(&labels)?))
}

fn needs_json(text: &str) -> bool {
    text.contains(['\n', '\r', '\t'])
}

pub fn to_columns(dataset: &Dataset) -> Result<String> {
    let scheme = scheme_for(dataset)?;
    let mut out = String::new();
    for (i, doc) in dataset.documents.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "# id = {}", doc.id).expect("string write");
        if needs_json(&doc.text) {
            writeln!(out, "# text_json = {}", serde_json::to_string(&doc.text)?).expect("string write");
        } else {
            writeln!(out, "# text = {}", doc.text).expect("string write");
        }
        let actions = match &scheme {
            Some(s) => document_actions(doc, s)?,
            None => vec![Action::Out; doc.tokens.len()],
        };
        for (tok, a) in doc.tokens.iter().zip(actions) {
            let tag = scheme.as_ref().map_or_else(|| "O".to_string(), |s| s.tag(a));
            writeln!(out, "{}\t{}", tok.text, tag).expect("string write");
        }
    }
    Ok(out)
}

#[derive(Default)]
struct ColumnBlock {
    id: Option<String>,
    text: Option<String>,
    rows: Vec<(usize, String, String)>,
}

pub fn from_columns(text: &str, path: &Path) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut blocks: Vec<ColumnBlock> = Vec::new();
    let mut current = ColumnBlock::default();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            if current.id.is_some() || !current.rows.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("# id = ") {
            current.id = Some(rest.to_string());
        } else if let Some(rest) = line.strip_prefix("# text_json = ") {
            current.text = Some(serde_json::from_str(rest).map_err(|e| parse_err(n, e.to_string()))?);
        } else if let Some(rest) = line.strip_prefix("# text = ") {
            current.text = Some(rest.to_string());
        } else {
            let (tok, tag) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(n, "expected token<TAB>tag".into()))?;
            current.rows.push((n, tok.to_string(), tag.trim().to_string()));
        }
    }
    if current.id.is_some() || !current.rows.is_empty() {
        blocks.push(current);
    }

    let mut labels: Vec<String> = Vec::new();
    for (line, _, tag) in blocks.iter().flat_map(|b| &b.rows) {
        if tag == "O" {
            continue;
        }
        let label = match tag.split_once('-') {
            Some((p, l)) if matches!(p, "B" | "I" | "L" | "U") && !l.is_empty() => l,
            _ => return Err(parse_err(*line, format!("bad tag {tag:?}"))),
        };
        if !labels.iter().any(|x| x == label) {
            labels.push(label.to_string());
        }
    }
    labels.sort();
    let scheme = if labels.is_empty() { None } else { Some(LabelScheme::new(&labels)?) };

    let mut documents = Vec::new();
    for (k, block) in blocks.into_iter().enumerate() {
        let first_line = block.rows.first().map_or(0, |r| r.0);
        let id = block.id.unwrap_or_else(|| format!("doc{k:05}"));
        let text = block.text.unwrap_or_else(|| {
            block.rows.iter().map(|r| r.1.as_str()).collect::<Vec<_>>().join(" ")
        });
        let doc = Document::new(id.clone(), text, Vec::new())?;
        if doc.tokens.len() != block.rows.len()
            || doc.tokens.iter().zip(&block.rows).any(|(t, r)| t.text != r.1)
        {
            return Err(parse_err(first_line, format!("tokens of document {id} do not match its text")));
        }
        let spans = match &scheme {
            Some(s) => {
                let actions: Vec<Action> = block
                    .rows
                    .iter()
                    .map(|r| s.parse_tag(&r.2).expect("tags validated above"))
                    .collect();
                if !ehrner_core::tagger::is_valid_sequence(&actions, s) {
                    return Err(parse_err(first_line, format!("document {id} has an invalid BILOU sequence")));
                }
                spans_from_actions(&doc.tokens, &actions, s)
            }
            None => Vec::new(),
        };
        documents.push(doc.with_spans(spans));
    }
    Ok(Dataset::from_documents(documents)?)
}

pub fn load_documents(path: &Path, format: Format) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Jsonl => from_jsonl(&text, path),
        Format::Columns => from_columns(&text, path),
    }
}

pub fn save_documents(dataset: &Dataset, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Jsonl => to_jsonl(dataset),
        Format::Columns => to_columns(dataset)?,
    };
    write_file(path, text.as_bytes())
}

pub fn load_corpus(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

pub fn save_corpus(sentences: &[String], path: &Path) -> Result<()> {
    let mut text = String::new();
    for s in sentences {
        text.push_str(s);
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

/// Create parent directories, then write.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of a dataset's JSON-lines form.
pub fn dataset_hash(dataset: &Dataset) -> String {
    sha256_hex(to_jsonl(dataset).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.jsonl")
    }

    #[test]
    fn bad_record_names_line() {
        let text = "{\"id\":\"a\",\"text\":\"x y\",\"spans\":[]}\n{\"id\":\"b\",\"text\":\"x y\",\"spans\":[{\"start\":2,\"end\":1,\"label\":\"C\"}]}\n";
        match from_jsonl(text, p()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        match from_jsonl("{not json\n", p()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn misaligned_span_names_document() {
        let text = "{\"id\":\"note-7\",\"text\":\"Aspirin helps\",\"spans\":[{\"start\":0,\"end\":3,\"label\":\"CHEMICAL\"}]}";
        let err = from_jsonl(text, p()).unwrap_err();
        assert!(err.to_string().contains("note-7"), "{err}");
    }

    #[test]
    fn column_export_uses_bilou() {
        let doc = Document::new("d", "Aspirin helps", vec![EntitySpan::new(0, 7, "CHEMICAL")]).unwrap();
        let ds = Dataset::from_documents(vec![doc]).unwrap();
        let cols = to_columns(&ds).unwrap();
        let rows: Vec<&str> = cols.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows, ["Aspirin\tU-CHEMICAL", "helps\tO"]);
        assert_eq!(from_columns(&cols, p()).unwrap(), ds);
    }

    #[test]
    fn columns_without_comments() {
        let ds = from_columns("Aspirin\tB-CHEMICAL\ntablets\tL-CHEMICAL\nhelp\tO\n\nfever\tU-SYMPTOM\n", p()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.documents[0].text, "Aspirin tablets help");
        assert_eq!(ds.documents[0].spans, vec![EntitySpan::new(0, 15, "CHEMICAL")]);
        assert!(from_columns("Aspirin\tB-CHEMICAL\n", p()).is_err());
    }

    #[test]
    fn multiline_text_survives_columns() {
        let doc = Document::new("d", "line one\nline\ttwo", vec![]).unwrap();
        let ds = Dataset::from_documents(vec![doc]).unwrap();
        assert_eq!(from_columns(&to_columns(&ds).unwrap(), p()).unwrap(), ds);
    }
}
