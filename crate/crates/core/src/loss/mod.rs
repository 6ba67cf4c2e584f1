//! Training objectives for ECCT and the Monte Carlo check of the hybrid
//! loss decomposition.

mod lemma;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::code::Word;
use crate::error::{Error, Result};
use crate::tensorgrad::{sigmoid, sigmoid_proxy_grad, Tape, Tensor, Var};

pub use lemma::{lemma1_oracle, Lemma1Report, MeanEstimate};

/// Sigmoid outputs are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before logs.
pub const PROB_FLOOR: f64 = 1e-12;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

/// Bipolar form of a flip pattern: `0 -> +1`, `1 -> -1`.
pub fn bipolar(target: &Word) -> Vec<f64> {
    target.iter().map(|b| if b { -1.0 } else { 1.0 }).collect()
}

/// `-sum_i [t_i ln(1 - sigmoid(s_i)) + (1 - t_i) ln sigmoid(s_i)]`.
pub fn bce_loss(target: &Word, scores: &[f64]) -> Result<f64> {
    check_lengths(target.len(), scores.len())?;
    Ok(-scores
        .iter()
        .zip(target.iter())
        .map(|(&s, t)| {
            let p = sigmoid(s).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            if t {
                (1.0 - p).ln()
            } else {
                p.ln()
            }
        })
        .sum::<f64>())
}

/// `sum_i sigmoid(-s_i * t_i)` for bipolar targets.
pub fn soft_hamming(target_s: &[f64], scores: &[f64]) -> Result<f64> {
    check_lengths(target_s.len(), scores.len())?;
    Ok(scores.iter().zip(target_s).map(|(s, t)| sigmoid(-s * t)).sum())
}

/// Number of bits with `s_i * t_i <= 0`.
pub fn hard_hamming(target_s: &[f64], scores: &[f64]) -> Result<usize> {
    check_lengths(target_s.len(), scores.len())?;
    Ok(scores.iter().zip(target_s).filter(|(s, t)| *s * *t <= 0.0).count())
}

/// Forward value and straight-through derivative of the step gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateValue {
    pub forward: f64,
    pub grad: f64,
}

/// `u(soft_dh - t_c)` with `u(a) = 0` for `a <= 0`; the derivative is that
/// of `sigmoid((soft_dh - t_c) / temperature)`.
pub fn step_gate(soft_dh: f64, t_c: i64, temperature: f64) -> Result<GateValue> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let a = soft_dh - t_c as f64;
    Ok(GateValue {
        forward: if a <= 0.0 { 0.0 } else { 1.0 },
        grad: sigmoid_proxy_grad(a, temperature),
    })
}

/// Which Hamming distance estimate drives the gate's forward value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateSource {
    /// Thresholds the soft Hamming estimate.
    Soft,
    /// Thresholds the integer error count of the hard-decided output; the
    /// backward pass still uses the soft estimate.
    Integer,
}

impl fmt::Display for GateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateSource::Soft => "soft",
            GateSource::Integer => "integer",
        })
    }
}

impl FromStr for GateSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(GateSource::Soft),
            "integer" => Ok(GateSource::Integer),
            other => Err(Error::InvalidArgument(format!("unknown gate source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub t_c: i64,
    pub temperature: f64,
    pub source: GateSource,
}

/// Per-sample loss recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct SampleTerms {
    pub loss: Var,
    pub bce: f64,
    pub soft_hamming: f64,
    /// Forward gate value; 1 when no gate is applied.
    pub gate: f64,
}

/// Records `gate * bce` for one sample, with `scores` an `n x 1` column.
pub fn sample_loss_on_tape(
    tape: &mut Tape<'_>,
    scores: Var,
    target: &Word,
    gate: Option<&GateSpec>,
) -> Result<SampleTerms> {
    let n = tape.value(scores).len();
    check_lengths(target.len(), n)?;
    let t: Vec<f64> = target.iter().map(|b| b as u8 as f64).collect();
    let t_col = tape.constant(Tensor::column(t.clone()));
    let not_t = tape.constant(Tensor::column(t.iter().map(|v| 1.0 - v).collect()));
    let p = tape.sigmoid(scores);
    let p = tape.clamp(p, PROB_FLOOR, 1.0 - PROB_FLOOR);
    let log_p = tape.log(p);
    let q = tape.scale(p, -1.0);
    let q = tape.add_scalar(q, 1.0);
    let log_q = tape.log(q);
    let a = tape.mul(t_col, log_q)?;
    let b = tape.mul(not_t, log_p)?;
    let ab = tape.add(a, b)?;
    let total = tape.sum(ab);
    let bce = tape.scale(total, -1.0);
    let bce_value = tape.value(bce).item();

    let target_s = bipolar(target);
    let neg_t = tape.constant(Tensor::column(target_s.iter().map(|v| -v).collect()));
    let margins = tape.mul(scores, neg_t)?;
    let flips = tape.sigmoid(margins);
    let soft = tape.sum(flips);
    let soft_value = tape.value(soft).item();

    let Some(spec) = gate else {
        return Ok(SampleTerms {
            loss: bce,
            bce: bce_value,
            soft_hamming: soft_value,
            gate: 1.0,
        });
    };
    let forward = match spec.source {
        GateSource::Soft => None,
        GateSource::Integer => {
            let d = hard_hamming(&target_s, tape.value(scores).data())? as f64;
            Some([if d - spec.t_c as f64 <= 0.0 { 0.0 } else { 1.0 }])
        }
    };
    let g = tape.step_ste(
        soft,
        spec.t_c as f64,
        spec.temperature,
        forward.as_ref().map(|f| &f[..]),
    )?;
    let gate_value = tape.value(g).item();
    let loss = tape.mul(g, bce)?;
    Ok(SampleTerms {
        loss,
        bce: bce_value,
        soft_hamming: soft_value,
        gate: gate_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Mean of `per_sample`.
    pub total: f64,
    pub per_sample: Vec<f64>,
    /// Forward gate values, each 0 or 1.
    pub gate_values: Vec<f64>,
    pub soft_hamming: Vec<f64>,
}

/// Mean over the batch of `gate * bce`, with the derivative of the mean with
/// respect to each sample's scores.
pub fn hybrid_loss_with_grad(
    batch: &[(Word, Vec<f64>)],
    gate: &GateSpec,
) -> Result<(LossBreakdown, Vec<Vec<f64>>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let m = batch.len() as f64;
    let mut out = LossBreakdown {
        total: 0.0,
        per_sample: Vec::with_capacity(batch.len()),
        gate_values: Vec::with_capacity(batch.len()),
        soft_hamming: Vec::with_capacity(batch.len()),
    };
    let mut grads = Vec::with_capacity(batch.len());
    for (target, scores) in batch {
        let mut tape = Tape::new();
        let s = tape.param(Tensor::column(scores.clone()));
        let terms = sample_loss_on_tape(&mut tape, s, target, Some(gate))?;
        let value = tape.value(terms.loss).item();
        out.per_sample.push(value);
        out.gate_values.push(terms.gate);
        out.soft_hamming.push(terms.soft_hamming);
        let g = tape.backward_scaled(terms.loss, 1.0 / m)?;
        grads.push(g.get_or_zeros(s).into_data());
    }
    out.total = out.per_sample.iter().sum::<f64>() / m;
    Ok((out, grads))
}

pub fn hybrid_loss(batch: &[(Word, Vec<f64>)], gate: &GateSpec) -> Result<LossBreakdown> {
    hybrid_loss_with_grad(batch, gate).map(|(b, _)| b)
}

/// `l01(a) = 1` for `a <= 0`, else 0.
pub fn zero_one(a: f64) -> f64 {
    if a <= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `-log2 sigmoid(a)`, computed stably.
pub fn logistic_bits(a: f64) -> f64 {
    // -ln sigmoid(a) = softplus(-a)
    let softplus = if a > 0.0 {
        (-a).exp().ln_1p()
    } else {
        -a + a.exp().ln_1p()
    };
    softplus / std::f64::consts::LN_2
}

/// Sums of the 0-1 loss and of its logistic upper bound over
/// `scores[i] * target_s[i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub zero_one_sum: f64,
    pub logistic_sum: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.zero_one_sum <= self.logistic_sum
    }
}

pub fn bound_check(scores: &[f64], target_s: &[f64]) -> Result<BoundCheck> {
    check_lengths(target_s.len(), scores.len())?;
    let (mut z, mut l) = (0.0, 0.0);
    for (s, t) in scores.iter().zip(target_s) {
        z += zero_one(s * t);
        l += logistic_bits(s * t);
    }
    Ok(BoundCheck {
        zero_one_sum: z,
        logistic_sum: l,
    })
}

#[cfg(test)]
mod tests;
