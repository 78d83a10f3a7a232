//! BILOU transition tagger.
//!
//! Decoding walks the sentence left to right. At each token the scorer sees
//! the token's features and an embedding of the previous action, and the
//! decoder picks the best action that is legal in the current state, so the
//! output is always a well-formed span set.

mod model;
mod scheme;
mod scorer;
mod train;
mod transition;

pub use model::{decode_greedy, predict, ModelConfig, NerModel, Representation};
pub use scheme::{document_actions, gold_actions, is_valid_sequence, spans_from_actions, Action, LabelScheme};
pub use scorer::{ActionScorer, Scratch};
pub use train::{extend_labels, fine_tune_extend, missing_labels, train, train_observed, TrainConfig};
pub use transition::{greedy_decode, valid_actions, valid_mask, TransitionState};
