//! Zero-codeword training of ECCT under plain or hybrid-aware loss.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sigma_from_ebn0, transmit, ChannelSample};
use crate::code::{Code, Word};
use crate::ecct::EcctModel;
use crate::error::{Error, Result};
use crate::loss::{sample_loss_on_tape, GateSource, GateSpec, LossBreakdown};
use crate::rng::{domain, substream};
use crate::tensorgrad::{adam_step, AdamConfig, AdamState, Tape, Tensor};

/// Draws per sample before the rejection sampler gives up.
const MAX_ATTEMPTS_PER_SAMPLE: u64 = 100_000;
/// Smallest acceptable retained fraction over one batch.
const MIN_RETAINED_FRACTION: f64 = 1e-4;
/// Samples per gradient reduction chunk.
const REDUCE_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    #[serde(rename = "bce")]
    Bce,
    #[serde(rename = "hybrid-pre-post")]
    HybridPrePost,
    #[serde(rename = "hybrid-pre")]
    HybridPre,
    #[serde(rename = "hybrid-post")]
    HybridPost,
}

impl LossMode {
    pub const ALL: [LossMode; 4] = [
        LossMode::Bce,
        LossMode::HybridPrePost,
        LossMode::HybridPre,
        LossMode::HybridPost,
    ];

    /// Training samples are restricted to more than `t_c` hard errors.
    pub fn uses_pre(self) -> bool {
        matches!(self, LossMode::HybridPrePost | LossMode::HybridPre)
    }

    /// The loss carries the post-decoder step gate.
    pub fn uses_post(self) -> bool {
        matches!(self, LossMode::HybridPrePost | LossMode::HybridPost)
    }

    /// Gate with the default temperature and soft source.
    pub fn gate_for(self, code: &Code) -> Option<GateSpec> {
        TrainConfig {
            loss_mode: self,
            ..TrainConfig::default()
        }
        .gate(code)
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::Bce => "bce",
            LossMode::HybridPrePost => "hybrid-pre-post",
            LossMode::HybridPre => "hybrid-pre",
            LossMode::HybridPost => "hybrid-post",
        })
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: u64,
    pub lr: f64,
    pub snr_low_db: f64,
    pub snr_high_db: f64,
    pub seed: u64,
    pub loss_mode: LossMode,
    pub ste_temperature: f64,
    pub gate_source: GateSource,
    /// Steps between checkpoint writes; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            steps: 20_000,
            lr: 1e-4,
            snr_low_db: 2.0,
            snr_high_db: 8.0,
            seed: 0,
            loss_mode: LossMode::Bce,
            ste_temperature: 1.0,
            gate_source: GateSource::Soft,
            checkpoint_every: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.snr_low_db <= self.snr_high_db) {
            return bad(format!(
                "snr range [{}, {}] is empty",
                self.snr_low_db, self.snr_high_db
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.ste_temperature > 0.0) {
            return bad(format!("ste_temperature must be positive, got {}", self.ste_temperature));
        }
        Ok(())
    }

    /// Sets one field from its `key=value` spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "batch_size" => self.batch_size = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "snr_low_db" => self.snr_low_db = parse(key, value)?,
            "snr_high_db" => self.snr_high_db = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "loss_mode" => self.loss_mode = value.parse()?,
            "ste_temperature" => self.ste_temperature = parse(key, value)?,
            "gate_source" => self.gate_source = value.parse()?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "adam_eps" => self.adam_eps = parse(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` file; blank lines and `#` comments are
    /// skipped.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn to_kv_text(&self) -> String {
        [
            ("batch_size", self.batch_size.to_string()),
            ("steps", self.steps.to_string()),
            ("lr", self.lr.to_string()),
            ("snr_low_db", self.snr_low_db.to_string()),
            ("snr_high_db", self.snr_high_db.to_string()),
            ("seed", self.seed.to_string()),
            ("loss_mode", self.loss_mode.to_string()),
            ("ste_temperature", self.ste_temperature.to_string()),
            ("gate_source", self.gate_source.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
        ]
        .iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
    }

    /// Gate applied to each sample's BCE, if any.
    pub fn gate(&self, code: &Code) -> Option<GateSpec> {
        self.loss_mode.uses_post().then(|| GateSpec {
            t_c: code.t_c() as i64,
            temperature: self.ste_temperature,
            source: self.gate_source,
        })
    }
}

/// One training batch of zero-codeword transmissions.
#[derive(Debug, Clone)]
pub struct Batch {
    pub samples: Vec<ChannelSample>,
    /// Channel draws made, including rejected ones.
    pub attempts: u64,
}

impl Batch {
    pub fn retained_fraction(&self) -> f64 {
        self.samples.len() as f64 / self.attempts as f64
    }
}

/// Draws `batch_size` samples for training step `step`. In pre-decoder
/// modes, draws are repeated (with a fresh SNR) until the hard decision has
/// more than `t_c` errors.
pub fn sample_batch(code: &Code, config: &TrainConfig, step: u64) -> Result<Batch> {
    config.validate()?;
    let zero = Word::zeros(code.n());
    let t_c = code.t_c();
    let m = config.batch_size as u64;
    let drawn = (0..m)
        .into_par_iter()
        .map(|i| -> Result<(ChannelSample, u64)> {
            let mut rng = substream(config.seed, domain::TRAIN_BATCH, step * m + i);
            for attempt in 1..=MAX_ATTEMPTS_PER_SAMPLE {
                let snr = if config.snr_high_db > config.snr_low_db {
                    rng.random_range(config.snr_low_db..=config.snr_high_db)
                } else {
                    config.snr_low_db
                };
                let sigma = sigma_from_ebn0(snr, code.rate())?;
                let s = transmit(&zero, sigma, &mut rng)?;
                if !config.loss_mode.uses_pre() || s.hard_errors() > t_c {
                    return Ok((s, attempt));
                }
            }
            Err(Error::PathologicalRejection {
                fraction: 1.0 / MAX_ATTEMPTS_PER_SAMPLE as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let attempts = drawn.iter().map(|(_, a)| a).sum();
    let batch = Batch {
        samples: drawn.into_iter().map(|(s, _)| s).collect(),
        attempts,
    };
    if batch.retained_fraction() < MIN_RETAINED_FRACTION {
        return Err(Error::PathologicalRejection {
            fraction: batch.retained_fraction(),
        });
    }
    Ok(batch)
}

/// Loss of `model` on fixed samples, without gradients.
pub fn evaluate_loss(
    model: &EcctModel,
    samples: &[ChannelSample],
    gate: Option<&GateSpec>,
) -> Result<LossBreakdown> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let terms = samples
        .par_iter()
        .map(|s| -> Result<(f64, f64, f64)> {
            let mut tape = Tape::new();
            let (_, scores) = model.forward_on(&mut tape, &s.received, false)?;
            let t = sample_loss_on_tape(&mut tape, scores, &s.target, gate)?;
            Ok((tape.value(t.loss).item(), t.gate, t.soft_hamming))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_sample: Vec<f64> = terms.iter().map(|t| t.0).collect();
    Ok(LossBreakdown {
        total: per_sample.iter().sum::<f64>() / per_sample.len() as f64,
        per_sample,
        gate_values: terms.iter().map(|t| t.1).collect(),
        soft_hamming: terms.iter().map(|t| t.2).collect(),
    })
}

/// Mean loss over the batch and its gradient for every parameter tensor.
pub fn loss_and_gradients(
    model: &EcctModel,
    samples: &[ChannelSample],
    gate: Option<&GateSpec>,
) -> Result<(f64, Vec<Tensor>)> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let inv_m = 1.0 / samples.len() as f64;
    let zero_grads = || -> Vec<Vec<f64>> { model.params().iter().map(|p| vec![0.0; p.len()]).collect() };
    let partials = samples
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| -> Result<(f64, Vec<Vec<f64>>)> {
            let mut acc = zero_grads();
            let mut loss = 0.0;
            for s in chunk {
                let mut tape = Tape::new();
                let (params, scores) = model.forward_on(&mut tape, &s.received, true)?;
                let t = sample_loss_on_tape(&mut tape, scores, &s.target, gate)?;
                loss += tape.value(t.loss).item();
                let g = tape.backward_scaled(t.loss, inv_m)?;
                for (slot, &p) in acc.iter_mut().zip(&params) {
                    if let Some(gp) = g.get(p) {
                        for (a, b) in slot.iter_mut().zip(gp.data()) {
                            *a += b;
                        }
                    }
                }
            }
            Ok((loss, acc))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    let mut grads = zero_grads();
    for (loss, part) in partials {
        total += loss;
        for (slot, p) in grads.iter_mut().zip(part) {
            for (a, b) in slot.iter_mut().zip(p) {
                *a += b;
            }
        }
    }
    let grads = grads
        .into_iter()
        .zip(model.params())
        .map(|(g, p)| Tensor::new(p.shape().to_vec(), g))
        .collect::<Result<Vec<_>>>()?;
    Ok((total * inv_m, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub retained_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: Vec<StepRecord>,
    pub wall_seconds: f64,
    pub final_checkpoint: Option<PathBuf>,
}

impl TrainReport {
    /// Overall retained fraction across all steps.
    pub fn retained_fraction(&self) -> f64 {
        if self.steps.is_empty() {
            return 1.0;
        }
        self.steps.iter().map(|s| s.retained_fraction).sum::<f64>() / self.steps.len() as f64
    }

    /// `step,loss,retained_fraction` rows with a header.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "step,loss,retained_fraction")?;
        for s in &self.steps {
            writeln!(out, "{},{:e},{:e}", s.step, s.loss, s.retained_fraction)?;
        }
        Ok(())
    }
}

fn write_checkpoint(model: &EcctModel, config: &TrainConfig, path: &Path) -> Result<()> {
    let mut ckpt = model.to_checkpoint();
    ckpt.header.insert("loss_mode".into(), config.loss_mode.to_string());
    ckpt.header.insert("train_seed".into(), config.seed.to_string());
    let mut out = BufWriter::new(File::create(path)?);
    ckpt.write(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Runs `config.steps` Adam steps on `model`. When `checkpoint` is given the
/// final parameters (and periodic ones, per `checkpoint_every`) are written
/// there. A non-finite loss or gradient restores the last good parameters,
/// writes them to the checkpoint path and returns [`Error::Divergence`].
pub fn train(
    model: &mut EcctModel,
    config: &TrainConfig,
    checkpoint: Option<&Path>,
) -> Result<TrainReport> {
    config.validate()?;
    let start = Instant::now();
    let code = model.code().clone();
    let gate = config.gate(&code);
    let adam = AdamConfig {
        lr: config.lr,
        beta1: config.beta1,
        beta2: config.beta2,
        eps: config.adam_eps,
    };
    let mut state = AdamState::new(model.params());
    let mut records = Vec::with_capacity(config.steps as usize);
    let mut last_good = model.params().to_vec();
    for step in 0..config.steps {
        let batch = sample_batch(&code, config, step)?;
        let (loss, grads) = loss_and_gradients(model, &batch.samples, gate.as_ref())?;
        let finite = loss.is_finite() && grads.iter().all(|g| g.data().iter().all(|v| v.is_finite()));
        if !finite {
            model.params_mut().clone_from_slice(&last_good);
            if let Some(path) = checkpoint {
                write_checkpoint(model, config, path)?;
            }
            return Err(Error::Divergence { step });
        }
        adam_step(model.params_mut(), &grads, &mut state, &adam, config.lr)?;
        last_good.clone_from_slice(model.params());
        records.push(StepRecord {
            step,
            loss,
            retained_fraction: batch.retained_fraction(),
        });
        if let Some(path) = checkpoint {
            if config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0 {
                write_checkpoint(model, config, path)?;
            }
        }
    }
    if let Some(path) = checkpoint {
        write_checkpoint(model, config, path)?;
    }
    Ok(TrainReport {
        steps: records,
        wall_seconds: start.elapsed().as_secs_f64(),
        final_checkpoint: checkpoint.map(Path::to_path_buf),
    })
}

#[cfg(test)]
mod tests;
