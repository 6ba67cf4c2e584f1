//! Transformer decoder over magnitude and syndrome tokens with a
//! parity-check-derived attention mask.

mod input;
mod model;

pub use input::{build_mask, mask_from_parity_check, preprocess, token_count};
pub use model::{decode_from_scores, Activation, EcctConfig, EcctModel};
