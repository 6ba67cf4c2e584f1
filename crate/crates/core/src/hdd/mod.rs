//! Bounded-distance hard-decision decoding.
//!
//! [`BchDecoder`] is the Berlekamp-Massey / Chien search decoder used in the
//! hybrid pipelines. [`SyndromeTableDecoder`] decodes any code by coset
//! leader lookup and serves as an independent reference.

mod bch;
mod profile;
mod table;

pub use bch::BchDecoder;
pub use profile::{estimate_profile, FrameClass, HardDecoderProfile};
pub use table::SyndromeTableDecoder;

use crate::code::{Code, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HddStatus {
    Success,
    Failure,
}

/// Result of one hard-decision decode.
///
/// On success `word` is a codeword within the decoding radius of the input
/// (possibly the wrong one). On failure `word` is the input, unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HddOutcome {
    pub status: HddStatus,
    pub word: Word,
    pub corrected_positions: Vec<usize>,
}

impl HddOutcome {
    pub fn is_success(&self) -> bool {
        self.status == HddStatus::Success
    }

    pub(crate) fn failure(input: &Word) -> Self {
        HddOutcome {
            status: HddStatus::Failure,
            word: input.clone(),
            corrected_positions: Vec::new(),
        }
    }
}

/// A hard-decision decoder bound to one code.
pub trait HardDecoder: Sync {
    fn code(&self) -> &Code;

    /// Guaranteed correction radius.
    fn radius(&self) -> usize;

    /// Decodes a hard-decision word of length n.
    fn decode(&self, word: &Word) -> HddOutcome;
}

/// Picks the algebraic decoder when the code carries BCH structure and the
/// coset-leader table otherwise.
pub fn decoder_for(code: &Code) -> crate::Result<Box<dyn HardDecoder + '_>> {
    if code.bch_design().is_some() {
        Ok(Box::new(BchDecoder::new(code)?))
    } else {
        Ok(Box::new(SyndromeTableDecoder::new(code)?))
    }
}
