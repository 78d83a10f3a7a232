use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::scheme::{spans_from_actions, Action, LabelScheme};
use super::scorer::ActionScorer;
use super::transition::greedy_decode;
use crate::codec::{Reader, Writer};
use crate::corpus::{Dataset, EntitySpan, Token};
use crate::error::{Error, FormatError, Result};
use crate::repr::{shape_features, ContextualEncoder, StaticEmbeddingTable, SHAPE_DIM};
use crate::rng;

const MAGIC: &[u8; 4] = b"EHRM";

/// The token-to-vector layer: static lookup plus word shape, optionally
/// followed by a frozen contextual encoder whose output is concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub table: StaticEmbeddingTable,
    pub encoder: Option<ContextualEncoder>,
}

impl Representation {
    pub fn new(table: StaticEmbeddingTable, encoder: Option<ContextualEncoder>) -> Result<Self> {
        if let Some(enc) = &encoder {
            if enc.shape.dim != table.dim() {
                return Err(Error::DimMismatch {
                    expected: table.dim(),
                    found: enc.shape.dim,
                });
            }
        }
        Ok(Representation { table, encoder })
    }

    pub fn static_dim(&self) -> usize {
        self.table.dim() + SHAPE_DIM
    }

    pub fn feature_dim(&self) -> usize {
        self.static_dim() + self.encoder.as_ref().map_or(0, |e| e.shape.dim)
    }

    /// Token features, flattened `n × feature_dim`.
    pub fn features(&self, tokens: &[Token]) -> Vec<f32> {
        let width = self.feature_dim();
        let contextual = self.encoder.as_ref().map(|e| e.encode_flat(&self.table, tokens));
        let mut out = Vec::with_capacity(tokens.len() * width);
        for (i, tok) in tokens.iter().enumerate() {
            out.extend_from_slice(self.table.lookup(&tok.text));
            out.extend_from_slice(&shape_features(&tok.text));
            if let (Some(ctx), Some(enc)) = (&contextual, &self.encoder) {
                let d = enc.shape.dim;
                out.extend_from_slice(&ctx[i * d..(i + 1) * d]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub action_dim: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 64,
            action_dim: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NerModel {
    pub scheme: LabelScheme,
    pub repr: Representation,
    pub scorer: ActionScorer<f32>,
    pub config: ModelConfig,
}

impl NerModel {
    /// An untrained model.
    pub fn blank(scheme: LabelScheme, repr: Representation, config: ModelConfig) -> Result<Self> {
        if config.hidden == 0 || config.action_dim == 0 {
            return Err(Error::InvalidConfig("hidden and action_dim must be at least 1".into()));
        }
        let mut rng = rng::derive(config.seed, 31);
        let scorer = ActionScorer::new(
            repr.feature_dim(),
            config.hidden,
            config.action_dim,
            scheme.action_count(),
            &mut rng,
        );
        Ok(NerModel {
            scheme,
            repr,
            scorer,
            config,
        })
    }

    /// Attach a contextual encoder to a model that has none. The scorer gets
    /// zero-weight columns for the new features, so scores are unchanged.
    pub fn attach_encoder(&self, encoder: ContextualEncoder) -> Result<NerModel> {
        if self.repr.encoder.is_some() {
            return Err(Error::InvalidConfig("model already has a contextual encoder".into()));
        }
        let repr = Representation::new(self.repr.table.clone(), Some(encoder))?;
        let mut scorer = self.scorer.clone();
        scorer.grow_features(repr.feature_dim() - self.repr.feature_dim());
        Ok(NerModel {
            scheme: self.scheme.clone(),
            repr,
            scorer,
            config: self.config,
        })
    }

    pub fn features(&self, tokens: &[Token]) -> Vec<f32> {
        self.repr.features(tokens)
    }

    /// Raw action scores for token `i` of precomputed `features`.
    pub fn scores(&self, features: &[f32], i: usize, prev: Option<Action>) -> Vec<f32> {
        let f = self.scorer.feature_dim;
        let mut out = vec![0.0; self.scorer.actions()];
        let mut s = self.scorer.scratch();
        self.scorer.score(&features[i * f..(i + 1) * f], prev, &mut s, &mut out);
        out
    }

    pub fn decode_actions(&self, tokens: &[Token]) -> Vec<Action> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let features = self.features(tokens);
        let f = self.scorer.feature_dim;
        let mut s = self.scorer.scratch();
        greedy_decode(tokens.len(), &self.scheme, |i, prev, out| {
            self.scorer.score(&features[i * f..(i + 1) * f], prev, &mut s, out)
        })
    }

    pub fn decode(&self, tokens: &[Token]) -> Vec<EntitySpan> {
        spans_from_actions(tokens, &self.decode_actions(tokens), &self.scheme)
    }

    /// Layout after the header: scheme (`u32` count + label strings), model
    /// config (`u32 hidden`, `u32 action_dim`, `u64 seed`), representation
    /// (length-prefixed static table body, `u8` encoder flag, optional
    /// length-prefixed encoder body), scorer (`u32 feature_dim`, then `f32`
    /// blobs for previous-action table, hidden weight, hidden bias, output
    /// weight, output bias).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC);
        let labels = self.scheme.labels();
        w.u32(labels.len() as u32);
        for l in labels {
            w.str(l);
        }
        w.u32(self.config.hidden as u32);
        w.u32(self.config.action_dim as u32);
        w.u64(self.config.seed);
        let mut table = Writer::default();
        self.repr.table.write_body(&mut table);
        w.bytes(&table.finish());
        match &self.repr.encoder {
            Some(enc) => {
                w.u8(1);
                let mut e = Writer::default();
                enc.write_body(&mut e);
                w.bytes(&e.finish());
            }
            None => w.u8(0),
        }
        w.u32(self.scorer.feature_dim as u32);
        for p in self.scorer.params() {
            w.f32s(p);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, MAGIC)?;
        let n = r.usize()?;
        let mut labels: Vec<String> = Vec::new();
        for _ in 0..n {
            labels.push(r.str()?);
        }
        let scheme = LabelScheme::new(&labels)?;
        let config = ModelConfig {
            hidden: r.usize()?,
            action_dim: r.usize()?,
            seed: r.u64()?,
        };
        let mut body = Reader::body(r.bytes()?);
        let table = StaticEmbeddingTable::read_body(&mut body)?;
        body.finish()?;
        let encoder = match r.u8()? {
            0 => None,
            1 => {
                let mut body = Reader::body(r.bytes()?);
                let enc = ContextualEncoder::read_body(&mut body)?;
                body.finish()?;
                Some(enc)
            }
            _ => return Err(FormatError::Invalid("bad encoder flag".into()).into()),
        };
        let repr = Representation::new(table, encoder)?;
        let feature_dim = r.usize()?;
        if feature_dim != repr.feature_dim() {
            return Err(Error::DimMismatch {
                expected: repr.feature_dim(),
                found: feature_dim,
            });
        }
        let mut model = NerModel::blank(scheme, repr, config)?;
        for p in model.scorer.params_mut() {
            let len = p.len();
            p.copy_from_slice(&r.f32s_exact(len, "scorer")?);
        }
        r.finish()?;
        Ok(model)
    }
}

/// Spans for `tokens` using greedy legality-masked decoding.
pub fn decode_greedy(model: &NerModel, tokens: &[Token]) -> Vec<EntitySpan> {
    model.decode(tokens)
}

/// Replace every document's spans with the model's predictions.
pub fn predict(model: &NerModel, dataset: &Dataset) -> Dataset {
    let documents = dataset
        .documents
        .iter()
        .map(|d| d.with_spans(model.decode(&d.tokens)))
        .collect();
    let mut label_set = dataset.label_set.clone();
    label_set.extend(model.scheme.labels().iter().cloned());
    Dataset { documents, label_set }
}
