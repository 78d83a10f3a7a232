//! Token representations: static word vectors and the contextual encoder.

mod encoder;
mod pretrain;
mod skipgram;
mod table;

pub use encoder::{ConvEncoder, ContextualEncoder, EncoderGrads, EncoderShape};
pub use pretrain::{
    pretrain_contextual, pretrain_contextual_with_clock, target_table, LossKind, PretrainConfig,
    PretrainReport,
};
pub use skipgram::{
    negative_sampling_grad, negative_sampling_loss, train_static_embeddings, SkipGramConfig,
};
pub use table::{normalize_key, shape_features, StaticEmbeddingTable, SHAPE_DIM};

use alloc::vec::Vec;

use crate::corpus::Token;
use crate::error::{Error, Result};

/// Contextual vectors for `tokens`, one `dim`-length vector per token.
pub fn encode(encoder: &ContextualEncoder, seeds: &StaticEmbeddingTable, tokens: &[Token]) -> Result<Vec<Vec<f32>>> {
    if encoder.shape.dim != seeds.dim() {
        return Err(Error::DimMismatch {
            expected: encoder.shape.dim,
            found: seeds.dim(),
        });
    }
    let flat = encoder.encode_flat(seeds, tokens);
    Ok(flat.chunks(encoder.shape.dim.max(1)).map(|c| c.to_vec()).collect())
}
