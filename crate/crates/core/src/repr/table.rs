use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::{Reader, Writer};
use crate::error::{Error, FormatError, Result};
use crate::nn;

const MAGIC: &[u8; 4] = b"EHRE";

/// Number of word-shape features appended to a static vector.
pub const SHAPE_DIM: usize = 3;

/// Vocabulary keys are lowercase.
pub fn normalize_key(word: &str) -> String {
    word.to_lowercase()
}

/// `[is_capitalized, has_digit, is_punct]` as 0/1 values.
pub fn shape_features(word: &str) -> [f32; SHAPE_DIM] {
    let cap = word.chars().next().is_some_and(char::is_uppercase);
    let digit = word.chars().any(|c| c.is_ascii_digit());
    let punct = !word.is_empty() && word.chars().all(|c| c.is_ascii_punctuation());
    [cap as u8 as f32, digit as u8 as f32, punct as u8 as f32]
}

/// Word → vector map. Row `vocab.len()` is the UNK vector used for every
/// out-of-vocabulary word.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticEmbeddingTable {
    dim: usize,
    vocab: BTreeMap<String, u32>,
    vectors: Vec<f32>,
    normalized: bool,
}

impl StaticEmbeddingTable {
    /// Build from words in row order plus `(words + 1) × dim` vectors.
    pub fn from_rows(dim: usize, words: Vec<String>, vectors: Vec<f32>, normalize: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dim must be at least 1".into()));
        }
        let expected = (words.len() + 1) * dim;
        if vectors.len() != expected {
            return Err(Error::DimMismatch {
                expected,
                found: vectors.len(),
            });
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("embedding vectors must be finite".into()));
        }
        let mut vocab = BTreeMap::new();
        for (i, w) in words.into_iter().enumerate() {
            if vocab.insert(normalize_key(&w), i as u32).is_some() {
                return Err(Error::InvalidConfig(alloc::format!("duplicate vocabulary entry {w}")));
            }
        }
        let mut table = StaticEmbeddingTable {
            dim,
            vocab,
            vectors,
            normalized: normalize,
        };
        if normalize {
            for row in table.vectors.chunks_mut(dim) {
                let n = nn::norm(row);
                if n > 0.0 {
                    row.iter_mut().for_each(|x| *x /= n);
                }
            }
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vocabulary words (excluding UNK).
    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn unk_index(&self) -> usize {
        self.vocab.len()
    }

    pub fn index(&self, word: &str) -> usize {
        match self.vocab.get(word) {
            Some(&i) => i as usize,
            None => self
                .vocab
                .get(&normalize_key(word))
                .map_or(self.unk_index(), |&i| i as usize),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index(word) != self.unk_index()
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    /// Total: unknown words get the UNK row.
    pub fn lookup(&self, word: &str) -> &[f32] {
        self.row(self.index(word))
    }

    /// Vocabulary words in row order.
    pub fn words(&self) -> Vec<&str> {
        let mut words: Vec<(&str, u32)> = self.vocab.iter().map(|(w, &i)| (w.as_str(), i)).collect();
        words.sort_by_key(|&(_, i)| i);
        words.into_iter().map(|(w, _)| w).collect()
    }

    pub fn cosine(&self, a: &str, b: &str) -> f32 {
        nn::cosine(self.lookup(a), self.lookup(b))
    }

    /// Layout after the header: `u32 dim`, `u8 normalized`, `u32 words`,
    /// each word as a length-prefixed string in row order, then one `f32`
    /// blob of `(words + 1) × dim` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC);
        self.write_body(&mut w);
        w.finish()
    }

    pub(crate) fn write_body(&self, w: &mut Writer) {
        w.u32(self.dim as u32);
        w.u8(self.normalized as u8);
        let words = self.words();
        w.u32(words.len() as u32);
        for word in words {
            w.str(word);
        }
        w.f32s(&self.vectors);
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, MAGIC)?;
        let table = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(table)
    }

    pub(crate) fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let dim = r.usize()?;
        let normalized = r.u8()? != 0;
        let n = r.usize()?;
        let mut words = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            words.push(r.str()?);
        }
        let vectors = r.f32s_exact((n + 1) * dim, "embedding table")?;
        if dim == 0 {
            return Err(FormatError::Invalid("embedding dim is zero".into()).into());
        }
        // Rows are stored exactly as held in memory; skip re-normalization.
        let mut table = Self::from_rows(dim, words, vectors, false)?;
        table.normalized = normalized;
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy() -> StaticEmbeddingTable {
        StaticEmbeddingTable::from_rows(
            2,
            vec!["aspirin".into(), "fever".into()],
            vec![3.0, 4.0, 0.0, 2.0, 1.0, 1.0],
            true,
        )
        .unwrap()
    }

    #[test]
    fn lookup_is_total_and_case_insensitive() {
        let t = toy();
        assert_eq!(t.lookup("Aspirin"), &[0.6, 0.8]);
        assert_eq!(t.lookup("unseen"), t.row(t.unk_index()));
        assert!(!t.contains("unseen"));
    }

    #[test]
    fn self_cosine_is_one() {
        let t = toy();
        for w in ["aspirin", "fever", "zzz"] {
            assert!((t.cosine(w, w) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bytes_round_trip() {
        let t = toy();
        assert_eq!(StaticEmbeddingTable::from_bytes(&t.to_bytes()).unwrap(), t);
    }

    #[test]
    fn corrupt_bytes_rejected() {
        let mut bytes = toy().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            StaticEmbeddingTable::from_bytes(&bytes),
            Err(Error::Format(FormatError::BadMagic))
        ));
        let bytes = toy().to_bytes();
        assert!(StaticEmbeddingTable::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn shapes() {
        assert_eq!(shape_features("Aspirin"), [1.0, 0.0, 0.0]);
        assert_eq!(shape_features("2.5"), [0.0, 1.0, 0.0]);
        assert_eq!(shape_features("."), [0.0, 0.0, 1.0]);
    }
}
