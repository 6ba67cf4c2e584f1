//! Hybrid decoding of binary BCH codes: a code-aware transformer soft
//! decoder combined with bounded-distance hard-decision pre- and
//! post-decoders, with training objectives that account for the hard stages.

pub mod channel;
pub mod code;
pub mod ecct;
pub mod error;
pub mod gf2m;
pub mod hdd;
pub mod hybrid;
pub mod loss;
pub mod rng;
pub mod sim;
pub mod tensorgrad;
pub mod train;

pub use error::{Error, Result};
