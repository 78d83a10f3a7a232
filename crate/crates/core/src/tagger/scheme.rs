use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Document, EntitySpan, Token};
use crate::error::{Error, Result};

/// A BILOU transition. Label payloads index into [`LabelScheme::labels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Out,
    Begin(usize),
    Inside(usize),
    Last(usize),
    Unit(usize),
}

impl Action {
    /// `O` is 0; label `l` owns indices `1 + 4l ..= 4 + 4l` in B, I, L, U order.
    /// Appending labels therefore never renumbers existing actions.
    pub fn index(self) -> usize {
        match self {
            Action::Out => 0,
            Action::Begin(l) => 1 + 4 * l,
            Action::Inside(l) => 2 + 4 * l,
            Action::Last(l) => 3 + 4 * l,
            Action::Unit(l) => 4 + 4 * l,
        }
    }

    pub fn from_index(index: usize) -> Action {
        if index == 0 {
            return Action::Out;
        }
        let l = (index - 1) / 4;
        match (index - 1) % 4 {
            0 => Action::Begin(l),
            1 => Action::Inside(l),
            2 => Action::Last(l),
            _ => Action::Unit(l),
        }
    }

    pub fn label(self) -> Option<usize> {
        match self {
            Action::Out => None,
            Action::Begin(l) | Action::Inside(l) | Action::Last(l) | Action::Unit(l) => Some(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelScheme {
    labels: Vec<String>,
}

impl LabelScheme {
    pub fn new<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut out: Vec<String> = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            if l.is_empty() || l.contains(char::is_whitespace) {
                return Err(Error::InvalidConfig(format!("invalid label {l:?}")));
            }
            if out.iter().any(|x| x == l) {
                return Err(Error::InvalidConfig(format!("duplicate label {l}")));
            }
            out.push(l.to_string());
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("a label scheme needs at least one label".into()));
        }
        Ok(LabelScheme { labels: out })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn action_count(&self) -> usize {
        4 * self.labels.len() + 1
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> {
        (0..self.action_count()).map(Action::from_index)
    }

    /// Tag string: `O`, `B-LABEL`, `I-LABEL`, `L-LABEL` or `U-LABEL`.
    pub fn tag(&self, action: Action) -> String {
        let prefix = match action {
            Action::Out => return "O".into(),
            Action::Begin(_) => "B",
            Action::Inside(_) => "I",
            Action::Last(_) => "L",
            Action::Unit(_) => "U",
        };
        format!("{prefix}-{}", self.labels[action.label().expect("labelled action")])
    }

    pub fn parse_tag(&self, tag: &str) -> Option<Action> {
        if tag == "O" {
            return Some(Action::Out);
        }
        let (prefix, label) = tag.split_once('-')?;
        let l = self.label_index(label)?;
        Some(match prefix {
            "B" => Action::Begin(l),
            "I" => Action::Inside(l),
            "L" => Action::Last(l),
            "U" => Action::Unit(l),
            _ => return None,
        })
    }

    /// A scheme with `new_labels` appended. Any label already present is an error.
    pub fn extend<S: AsRef<str>>(&self, new_labels: &[S]) -> Result<LabelScheme> {
        let clash: Vec<&str> = new_labels
            .iter()
            .map(AsRef::as_ref)
            .filter(|l| self.label_index(l).is_some())
            .collect();
        if !clash.is_empty() {
            return Err(Error::LabelOverlap(clash.join(", ")));
        }
        let mut all: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        all.extend(new_labels.iter().map(AsRef::as_ref));
        LabelScheme::new(&all)
    }
}

/// Gold BILOU actions for token-aligned, non-overlapping spans.
pub fn gold_actions(tokens: &[Token], spans: &[EntitySpan], scheme: &LabelScheme) -> Result<Vec<Action>> {
    gold_actions_for("", tokens, spans, scheme)
}

/// [`gold_actions`] for a document, naming it in errors.
pub fn document_actions(doc: &Document, scheme: &LabelScheme) -> Result<Vec<Action>> {
    gold_actions_for(&doc.id, &doc.tokens, &doc.spans, scheme)
}

fn gold_actions_for(id: &str, tokens: &[Token], spans: &[EntitySpan], scheme: &LabelScheme) -> Result<Vec<Action>> {
    let mut actions = vec![Action::Out; tokens.len()];
    let mut covered = vec![false; tokens.len()];
    for span in spans {
        let label = scheme.label_index(&span.label).ok_or_else(|| Error::UnknownLabel {
            doc: id.to_string(),
            label: span.label.clone(),
        })?;
        let first = tokens.iter().position(|t| t.start == span.start);
        let last = tokens.iter().position(|t| t.end == span.end);
        let (first, last) = match (first, last) {
            (Some(f), Some(l)) if f <= l => (f, l),
            _ => {
                return Err(Error::SpanNotAligned {
                    doc: id.to_string(),
                    start: span.start,
                    end: span.end,
                })
            }
        };
        if covered[first..=last].iter().any(|&c| c) {
            return Err(Error::OverlappingSpans { doc: id.to_string() });
        }
        covered[first..=last].fill(true);
        if first == last {
            actions[first] = Action::Unit(label);
        } else {
            actions[first] = Action::Begin(label);
            actions[first + 1..last].fill(Action::Inside(label));
            actions[last] = Action::Last(label);
        }
    }
    Ok(actions)
}

/// True iff `actions` is a complete, well-formed BILOU sequence.
pub fn is_valid_sequence(actions: &[Action], scheme: &LabelScheme) -> bool {
    let mut open: Option<usize> = None;
    for &a in actions {
        if a.label().is_some_and(|l| l >= scheme.labels.len()) {
            return false;
        }
        open = match (open, a) {
            (None, Action::Out | Action::Unit(_)) => None,
            (None, Action::Begin(l)) => Some(l),
            (Some(o), Action::Inside(l)) if o == l => Some(o),
            (Some(o), Action::Last(l)) if o == l => None,
            _ => return false,
        };
    }
    open.is_none()
}

/// Spans described by a valid action sequence.
pub fn spans_from_actions(tokens: &[Token], actions: &[Action], scheme: &LabelScheme) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    for (tok, &a) in tokens.iter().zip(actions) {
        match a {
            Action::Out => open = None,
            Action::Unit(l) => {
                spans.push(EntitySpan::new(tok.start, tok.end, scheme.labels[l].clone()));
                open = None;
            }
            Action::Begin(l) => open = Some((tok.start, l)),
            Action::Inside(_) => {}
            Action::Last(l) => {
                if let Some((start, ol)) = open.take() {
                    if ol == l {
                        spans.push(EntitySpan::new(start, tok.end, scheme.labels[l].clone()));
                    }
                }
            }
        }
    }
    spans
}
