use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{random_codeword, transmit, ChannelSample};
use crate::code::{hamming_distance, Word};
use crate::error::{Error, Result};
use crate::hdd::{FrameClass, HardDecoder};
use crate::hybrid::{run_pipeline, PipelineConfig};
use crate::rng::{domain, substream};

/// Sample mean with a normal-approximation confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MeanEstimate {
    fn from_sums(sum: u64, sum_sq: u64, n: u64, z: f64) -> Self {
        let nf = n as f64;
        let mean = sum as f64 / nf;
        let var = if n > 1 {
            ((sum_sq as f64 - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        let std_err = (var / nf).sqrt();
        MeanEstimate {
            mean,
            std_err,
            ci_low: mean - z * std_err,
            ci_high: mean + z * std_err,
        }
    }

    pub fn overlaps(&self, other: &MeanEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Paired estimates of the hybrid decoder's expected bit errors per frame,
/// measured directly (`lhs`) and through the pre-decoder decomposition
/// (`rhs = p_dd * conditional_mean + p_bu`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub frames: u64,
    pub lhs: MeanEstimate,
    pub rhs: MeanEstimate,
    pub p_dd: f64,
    pub p_bu: f64,
    /// `E[u(d - t_c) d | pre-decoder failed]` for the inner decoder output;
    /// zero when the pre-decoder never failed, since `p_dd` is then zero.
    pub conditional_mean: f64,
    pub conditioning_frames: u64,
    /// Frames whose two per-frame values differ (post-decoder miscorrection
    /// of an inner output with more than `t_c` errors).
    pub disagreeing_frames: u64,
    pub z: f64,
}

impl Lemma1Report {
    pub fn intervals_overlap(&self) -> bool {
        self.lhs.overlaps(&self.rhs)
    }
}

/// Runs `frames` random-codeword transmissions at noise level `sigma`
/// through the pre + inner + post pipeline, with `hdd` as both hard-decision
/// stages and `inner` any deterministic map from a channel sample to a word.
pub fn lemma1_oracle(
    hdd: &dyn HardDecoder,
    inner: &(dyn Fn(&ChannelSample) -> Result<Word> + Sync),
    sigma: f64,
    frames: u64,
    seed: u64,
    z: f64,
) -> Result<Lemma1Report> {
    if frames == 0 {
        return Err(Error::InvalidArgument("frames must be at least 1".into()));
    }
    let code = hdd.code();
    let t_c = code.t_c();
    let per_frame = (0..frames)
        .into_par_iter()
        .map(|f| -> Result<[u64; 8]> {
            let mut rng = substream(seed, domain::LEMMA1, f);
            let x = random_codeword(code, &mut rng);
            let s = transmit(&x, sigma, &mut rng)?;
            let class = FrameClass::classify(hdd, &x, &s.hard_decision());
            let mut inner_out: Option<Word> = None;
            let trace = run_pipeline(PipelineConfig::PRE_POST, hdd, &s.received, &mut |_| {
                let w = inner(&s)?;
                inner_out = Some(w.clone());
                Ok(w)
            })?;
            let lhs = hamming_distance(&x, &trace.final_word)? as u64;
            let (rhs, detected, undetected_bits) = match class {
                FrameClass::WithinRadius => (0, 0, 0),
                FrameClass::Undetected(e) => (e as u64, 0, e as u64),
                FrameClass::Detected => {
                    let w = inner_out.as_ref().expect("inner decoder runs after a pre failure");
                    let d = hamming_distance(&x, w)?;
                    ((if d > t_c { d as u64 } else { 0 }), 1, 0)
                }
            };
            Ok([
                lhs,
                lhs * lhs,
                rhs,
                rhs * rhs,
                detected,
                if detected == 1 { rhs } else { 0 },
                undetected_bits,
                (lhs != rhs) as u64,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let s = per_frame
        .into_iter()
        .fold([0u64; 8], |acc, c| std::array::from_fn(|i| acc[i] + c[i]));
    let nf = frames as f64;
    Ok(Lemma1Report {
        frames,
        lhs: MeanEstimate::from_sums(s[0], s[1], frames, z),
        rhs: MeanEstimate::from_sums(s[2], s[3], frames, z),
        p_dd: s[4] as f64 / nf,
        p_bu: s[6] as f64 / nf,
        conditional_mean: if s[4] == 0 { 0.0 } else { s[5] as f64 / s[4] as f64 },
        conditioning_frames: s[4],
        disagreeing_frames: s[7],
        z,
    })
}
