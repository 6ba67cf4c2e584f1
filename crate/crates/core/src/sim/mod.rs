//! Monte Carlo frame/bit error rate measurement.
//!
//! Frames are processed in fixed-size chunks and every frame draws from its
//! own substream, so reports depend only on the seed and never on the number
//! of worker threads.

mod ablation;
mod histogram;
mod plot;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{random_codeword, sigma_from_ebn0, transmit};
use crate::code::{Code, Word};
use crate::error::{Error, Result};
use crate::hdd::HardDecoder;
use crate::hybrid::{run_pipeline, PipelineConfig, SoftDecoder};
use crate::rng::{domain, substream};

pub use ablation::{
    reference_fer, run_ablation, AblationModels, AblationRow, AblationTable, ReferenceRow,
    ModelSlot, ABLATION_ROWS, REFERENCE_FER, REFERENCE_SNRS,
};
pub use histogram::{run_histogram, Condition, ErrorHistogram, HistogramPair};
pub use plot::{gnuplot_script, read_reference_curve, ReferencePoint};

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.5758293035489004;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stopping {
    pub min_frame_errors: u64,
    pub max_frames: u64,
    /// Frames simulated between checks of the stopping rule.
    pub chunk: u64,
}

impl Default for Stopping {
    fn default() -> Self {
        Stopping {
            min_frame_errors: 100,
            max_frames: 10_000_000,
            chunk: 1024,
        }
    }
}

impl Stopping {
    pub fn validate(&self) -> Result<()> {
        if self.max_frames == 0 || self.chunk == 0 {
            return Err(Error::InvalidArgument("max_frames and chunk must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodewordMode {
    Random,
    Zero,
}

impl std::str::FromStr for CodewordMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(CodewordMode::Random),
            "zero" => Ok(CodewordMode::Zero),
            other => Err(Error::InvalidArgument(format!("unknown codeword mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FerPoint {
    pub ebn0_db: f64,
    pub sigma: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    pub fer_ci_low: f64,
    pub fer_ci_high: f64,
    pub ber_ci_low: f64,
    pub ber_ci_high: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerReport {
    pub label: String,
    pub points: Vec<FerPoint>,
    pub stopping: Stopping,
    pub seed: u64,
}

impl FerReport {
    /// Writes the CSV table. Wall time is nondeterministic, so the `seconds`
    /// column is only emitted when `timing` is set.
    pub fn write_csv<W: Write>(&self, out: &mut W, timing: bool) -> Result<()> {
        write!(
            out,
            "ebn0_db,sigma,frames,frame_errors,bit_errors,fer,ber,fer_ci_low,fer_ci_high,ber_ci_low,ber_ci_high"
        )?;
        writeln!(out, "{}", if timing { ",seconds" } else { "" })?;
        for p in &self.points {
            write!(
                out,
                "{},{:e},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                p.ebn0_db,
                p.sigma,
                p.frames,
                p.frame_errors,
                p.bit_errors,
                p.fer,
                p.ber,
                p.fer_ci_low,
                p.fer_ci_high,
                p.ber_ci_low,
                p.ber_ci_high
            )?;
            if timing {
                write!(out, ",{:.3}", p.seconds)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// One pipeline evaluated in a joint simulation: `decoder` indexes the soft
/// decoder list passed to [`simulate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arm {
    pub label: String,
    pub decoder: usize,
    pub config: PipelineConfig,
}

/// Simulates every arm on the same frames. Each SNR point runs until every
/// arm has `min_frame_errors` frame errors or `max_frames` frames have been
/// sent. Soft decodes are shared between arms using the same decoder.
pub fn simulate(
    hdd: &dyn HardDecoder,
    decoders: &[&dyn SoftDecoder],
    arms: &[Arm],
    snr_grid: &[f64],
    stopping: &Stopping,
    seed: u64,
    mode: CodewordMode,
) -> Result<Vec<FerReport>> {
    if snr_grid.is_empty() {
        return Err(Error::InvalidArgument("SNR grid is empty".into()));
    }
    if arms.is_empty() {
        return Err(Error::InvalidArgument("nothing to simulate".into()));
    }
    if let Some(a) = arms.iter().find(|a| a.decoder >= decoders.len()) {
        return Err(Error::InvalidArgument(format!("arm {} has no decoder", a.label)));
    }
    stopping.validate()?;
    let code = hdd.code();
    let mut reports: Vec<FerReport> = arms
        .iter()
        .map(|a| FerReport {
            label: a.label.clone(),
            points: Vec::with_capacity(snr_grid.len()),
            stopping: *stopping,
            seed,
        })
        .collect();
    for (pi, &snr) in snr_grid.iter().enumerate() {
        let start = Instant::now();
        let sigma = sigma_from_ebn0(snr, code.rate())?;
        let mut frames = 0u64;
        let mut errs = vec![(0u64, 0u64); arms.len()];
        while frames < stopping.max_frames
            && errs.iter().any(|e| e.0 < stopping.min_frame_errors)
        {
            let end = (frames + stopping.chunk).min(stopping.max_frames);
            let chunk = (frames..end)
                .into_par_iter()
                .map(|f| simulate_frame(code, hdd, decoders, arms, sigma, seed, pi, f, mode))
                .collect::<Result<Vec<_>>>()?;
            for frame in chunk {
                for (acc, (fe, be)) in errs.iter_mut().zip(frame) {
                    acc.0 += fe as u64;
                    acc.1 += be;
                }
            }
            frames = end;
        }
        let seconds = start.elapsed().as_secs_f64();
        let bits = frames * code.n() as u64;
        for (rep, &(fe, be)) in reports.iter_mut().zip(&errs) {
            let (fl, fh) = wilson_interval(fe, frames, Z99);
            let (bl, bh) = wilson_interval(be, bits, Z99);
            rep.points.push(FerPoint {
                ebn0_db: snr,
                sigma,
                frames,
                frame_errors: fe,
                bit_errors: be,
                fer: fe as f64 / frames as f64,
                ber: be as f64 / bits as f64,
                fer_ci_low: fl,
                fer_ci_high: fh,
                ber_ci_low: bl,
                ber_ci_high: bh,
                seconds,
            });
        }
    }
    Ok(reports)
}

#[allow(clippy::too_many_arguments)]
fn simulate_frame(
    code: &Code,
    hdd: &dyn HardDecoder,
    decoders: &[&dyn SoftDecoder],
    arms: &[Arm],
    sigma: f64,
    seed: u64,
    point: usize,
    frame: u64,
    mode: CodewordMode,
) -> Result<Vec<(bool, u64)>> {
    let mut rng = substream(seed, domain::fer_point(point), frame);
    let x = match mode {
        CodewordMode::Random => random_codeword(code, &mut rng),
        CodewordMode::Zero => Word::zeros(code.n()),
    };
    let s = transmit(&x, sigma, &mut rng)?;
    let mut cache: Vec<Option<Word>> = vec![None; decoders.len()];
    arms.iter()
        .map(|arm| {
            let trace = run_pipeline(arm.config, hdd, &s.received, &mut |y| {
                let slot = &mut cache[arm.decoder];
                if slot.is_none() {
                    *slot = Some(decoders[arm.decoder].decode_soft(y)?);
                }
                Ok(slot.clone().expect("filled"))
            })?;
            let bit_errors = trace.final_word.xor(&x)?.weight() as u64;
            Ok((bit_errors > 0, bit_errors))
        })
        .collect()
}

/// FER/BER of a single pipeline over an SNR grid.
pub fn run_fer(
    config: PipelineConfig,
    hdd: &dyn HardDecoder,
    soft: &dyn SoftDecoder,
    snr_grid: &[f64],
    stopping: &Stopping,
    seed: u64,
    mode: CodewordMode,
) -> Result<FerReport> {
    let arm = Arm {
        label: config.to_string(),
        decoder: 0,
        config,
    };
    let mut reps = simulate(hdd, &[soft], &[arm], snr_grid, stopping, seed, mode)?;
    Ok(reps.remove(0))
}
