//! Hard-decision pre/post stages composed around a soft decoder.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{hard_decision, random_codeword, transmit};
use crate::code::{hamming_distance, Code, Word};
use crate::ecct::EcctModel;
use crate::error::{Error, Result};
use crate::hdd::HardDecoder;
use crate::rng::{domain, substream};

/// A decoder from a received real vector to a word of length n.
pub trait SoftDecoder: Sync {
    fn decode_soft(&self, y: &[f64]) -> Result<Word>;
}

impl SoftDecoder for EcctModel {
    fn decode_soft(&self, y: &[f64]) -> Result<Word> {
        self.decode(y)
    }
}

/// Returns the hard decision of the received vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct HardDecisionDecoder;

impl SoftDecoder for HardDecisionDecoder {
    fn decode_soft(&self, y: &[f64]) -> Result<Word> {
        Ok(hard_decision(y))
    }
}

/// Runs a hard-decision decoder on the hard decision of the received vector.
pub struct HddSoftDecoder<'a>(pub &'a dyn HardDecoder);

impl SoftDecoder for HddSoftDecoder<'_> {
    fn decode_soft(&self, y: &[f64]) -> Result<Word> {
        Ok(self.0.decode(&hard_decision(y)).word)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub use_pre: bool,
    pub use_post: bool,
}

impl PipelineConfig {
    pub const ECCT: PipelineConfig = PipelineConfig {
        use_pre: false,
        use_post: false,
    };
    pub const PRE: PipelineConfig = PipelineConfig {
        use_pre: true,
        use_post: false,
    };
    pub const POST: PipelineConfig = PipelineConfig {
        use_pre: false,
        use_post: true,
    };
    pub const PRE_POST: PipelineConfig = PipelineConfig {
        use_pre: true,
        use_post: true,
    };

    pub const ALL: [PipelineConfig; 4] = [Self::ECCT, Self::PRE, Self::POST, Self::PRE_POST];
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.use_pre {
            f.write_str("pre+")?;
        }
        f.write_str("ecct")?;
        if self.use_post {
            f.write_str("+post")?;
        }
        Ok(())
    }
}

impl FromStr for PipelineConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown pipeline {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pre,
    Ecct,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutput {
    pub stage: Stage,
    pub word: Word,
    /// Hard-decision stages: decoder reported success. ECCT: zero syndrome.
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeTrace {
    pub stages: Vec<StageOutput>,
    pub terminating_stage: Stage,
    pub final_word: Word,
    pub final_syndrome_zero: bool,
}

impl DecodeTrace {
    /// Output of `stage`, if it ran.
    pub fn stage(&self, stage: Stage) -> Option<&StageOutput> {
        self.stages.iter().find(|s| s.stage == stage)
    }
}

/// Runs the pipeline with the soft stage supplied as a closure, so that one
/// soft decode can be shared between several configurations.
pub fn run_pipeline(
    config: PipelineConfig,
    hdd: &dyn HardDecoder,
    y: &[f64],
    soft: &mut dyn FnMut(&[f64]) -> Result<Word>,
) -> Result<DecodeTrace> {
    let code = hdd.code();
    if y.len() != code.n() {
        return Err(Error::LengthMismatch {
            expected: code.n(),
            actual: y.len(),
        });
    }
    let mut stages = Vec::with_capacity(3);
    let finish = |stages: Vec<StageOutput>, stage: Stage, word: Word| -> Result<DecodeTrace> {
        let zero = code.is_codeword(&word)?;
        Ok(DecodeTrace {
            stages,
            terminating_stage: stage,
            final_word: word,
            final_syndrome_zero: zero,
        })
    };
    if config.use_pre {
        let out = hdd.decode(&hard_decision(y));
        let success = out.is_success();
        stages.push(StageOutput {
            stage: Stage::Pre,
            word: out.word.clone(),
            success,
        });
        if success {
            return finish(stages, Stage::Pre, out.word);
        }
    }
    let ecct = soft(y)?;
    code.check_len(&ecct)?;
    let valid = code.is_codeword(&ecct)?;
    stages.push(StageOutput {
        stage: Stage::Ecct,
        word: ecct.clone(),
        success: valid,
    });
    if valid || !config.use_post {
        return finish(stages, Stage::Ecct, ecct);
    }
    let out = hdd.decode(&ecct);
    stages.push(StageOutput {
        stage: Stage::Post,
        word: out.word.clone(),
        success: out.is_success(),
    });
    finish(stages, Stage::Post, out.word)
}

/// A pipeline bound to its decoders.
pub struct Pipeline<'a> {
    pub config: PipelineConfig,
    pub hdd: &'a dyn HardDecoder,
    pub soft: &'a dyn SoftDecoder,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: PipelineConfig, hdd: &'a dyn HardDecoder, soft: &'a dyn SoftDecoder) -> Self {
        Pipeline { config, hdd, soft }
    }

    pub fn code(&self) -> &Code {
        self.hdd.code()
    }

    pub fn decode(&self, y: &[f64]) -> Result<DecodeTrace> {
        run_pipeline(self.config, self.hdd, y, &mut |v| self.soft.decode_soft(v))
    }
}

/// Outcome of comparing a pipeline with the same pipeline plus a post stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub frames: u64,
    pub errors_without_post: u64,
    pub errors_with_post: u64,
    /// Frames correct without the post stage but wrong with it.
    pub violations: u64,
    /// Frames whose ECCT output is within `t_c` of the transmitted codeword.
    pub rescuable: u64,
    /// Rescuable frames that still end in error with the post stage.
    pub unrescued: u64,
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.unrescued == 0 && self.errors_with_post <= self.errors_without_post
    }
}

/// Simulates `frames` random-codeword frames and decodes each with `base`
/// and with `base` plus the post stage, sharing the soft decode.
pub fn per_frame_dominance_check(
    soft: &dyn SoftDecoder,
    hdd: &dyn HardDecoder,
    use_pre: bool,
    sigma: f64,
    frames: u64,
    seed: u64,
) -> Result<DominanceReport> {
    let code = hdd.code();
    let t_c = code.t_c();
    let without = PipelineConfig {
        use_pre,
        use_post: false,
    };
    let with = PipelineConfig {
        use_pre,
        use_post: true,
    };
    let counts = (0..frames)
        .into_par_iter()
        .map(|f| -> Result<[u64; 5]> {
            let mut rng = substream(seed, domain::DOMINANCE, f);
            let x = random_codeword(code, &mut rng);
            let s = transmit(&x, sigma, &mut rng)?;
            let mut cached: Option<Word> = None;
            let mut shared = |y: &[f64]| -> Result<Word> {
                if cached.is_none() {
                    cached = Some(soft.decode_soft(y)?);
                }
                Ok(cached.clone().expect("cached"))
            };
            let a = run_pipeline(without, hdd, &s.received, &mut shared)?;
            let b = run_pipeline(with, hdd, &s.received, &mut shared)?;
            let err_a = a.final_word != x;
            let err_b = b.final_word != x;
            let rescuable = match a.stage(Stage::Ecct) {
                Some(e) => hamming_distance(&e.word, &x)? <= t_c,
                None => false,
            };
            Ok([
                err_a as u64,
                err_b as u64,
                (!err_a && err_b) as u64,
                rescuable as u64,
                (rescuable && err_b) as u64,
            ])
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold([0u64; 5], |acc, c| std::array::from_fn(|i| acc[i] + c[i]));
    Ok(DominanceReport {
        frames,
        errors_without_post: counts[0],
        errors_with_post: counts[1],
        violations: counts[2],
        rescuable: counts[3],
        unrescued: counts[4],
    })
}

#[cfg(test)]
mod tests;
