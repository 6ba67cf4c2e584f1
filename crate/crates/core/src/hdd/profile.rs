use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{random_codeword, transmit};
use crate::code::{hamming_distance, Word};
use crate::error::{Error, Result};
use crate::rng::{domain, substream};

use super::HardDecoder;

/// How a hard-decision pre-decoder treats one received word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameClass {
    /// At most `t_c` hard errors; the transmitted codeword is recovered.
    WithinRadius,
    /// More than `t_c` errors and the decoder reports failure.
    Detected,
    /// More than `t_c` errors and the decoder returns a wrong codeword; the
    /// payload is the number of bit errors left in its output.
    Undetected(usize),
}

impl FrameClass {
    /// Classifies the pre-decoder's behaviour on `hard` given the truth `x`.
    pub fn classify(decoder: &dyn HardDecoder, x: &Word, hard: &Word) -> FrameClass {
        let errors = hamming_distance(x, hard).expect("equal lengths");
        if errors <= decoder.code().t_c() {
            return FrameClass::WithinRadius;
        }
        let out = decoder.decode(hard);
        if out.is_success() {
            FrameClass::Undetected(hamming_distance(x, &out.word).expect("equal lengths"))
        } else {
            FrameClass::Detected
        }
    }
}

/// Monte Carlo error profile of a hard-decision decoder at one noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardDecoderProfile {
    /// Expected bit errors per frame contributed by undetected errors.
    pub p_bu: f64,
    /// Probability of a detected decoding failure.
    pub p_dd: f64,
    /// Probability of more than `t_c` hard-decision errors.
    pub p_beyond: f64,
    pub sigma: f64,
    pub frames: u64,
}

/// Estimates `P_bu` and `P_dd` from `frames` random-codeword transmissions.
pub fn estimate_profile(
    decoder: &dyn HardDecoder,
    sigma: f64,
    frames: u64,
    seed: u64,
) -> Result<HardDecoderProfile> {
    if frames == 0 {
        return Err(Error::InvalidArgument("frames must be at least 1".into()));
    }
    let code = decoder.code();
    let counts = (0..frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = substream(seed, domain::PROFILE, f);
            let x = random_codeword(code, &mut rng);
            let s = transmit(&x, sigma, &mut rng)?;
            Ok(match FrameClass::classify(decoder, &x, &s.hard_decision()) {
                FrameClass::WithinRadius => [0, 0, 0],
                FrameClass::Detected => [1, 1, 0],
                FrameClass::Undetected(errs) => [1, 0, errs as u64],
            })
        })
        .collect::<Result<Vec<[u64; 3]>>>()?
        .into_iter()
        .fold([0u64; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
    let nf = frames as f64;
    Ok(HardDecoderProfile {
        p_bu: counts[2] as f64 / nf,
        p_dd: counts[1] as f64 / nf,
        p_beyond: counts[0] as f64 / nf,
        sigma,
        frames,
    })
}
