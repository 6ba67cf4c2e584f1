use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::hard_decision;
use crate::code::{Code, Word};
use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::tensorgrad::{Checkpoint, Tape, Tensor, Var};

use super::input::{build_mask, preprocess, token_count};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    Relu,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Gelu => "gelu",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gelu" => Ok(Activation::Gelu),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcctConfig {
    pub n_layers: usize,
    pub embed_dim: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
    pub activation: Activation,
}

impl Default for EcctConfig {
    fn default() -> Self {
        EcctConfig {
            n_layers: 2,
            embed_dim: 32,
            n_heads: 4,
            ffn_mult: 4,
            activation: Activation::Gelu,
        }
    }
}

impl EcctConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.embed_dim == 0 || self.n_heads == 0 || self.ffn_mult == 0 {
            return Err(Error::InvalidArgument(format!("degenerate ECCT config {self:?}")));
        }
        if self.embed_dim % self.n_heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "embed_dim {} is not divisible by n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.n_heads
    }
}

const PER_LAYER: usize = 16;
const ATTN_NORM: usize = 0;
const WQ: usize = 2;
const WK: usize = 4;
const WV: usize = 6;
const WO: usize = 8;
const FFN_NORM: usize = 10;
const W1: usize = 12;
const W2: usize = 14;

const LAYER_PARAMS: [&str; PER_LAYER] = [
    "attn_norm.gamma",
    "attn_norm.beta",
    "attn.wq",
    "attn.bq",
    "attn.wk",
    "attn.bk",
    "attn.wv",
    "attn.bv",
    "attn.wo",
    "attn.bo",
    "ffn_norm.gamma",
    "ffn_norm.beta",
    "ffn.w1",
    "ffn.b1",
    "ffn.w2",
    "ffn.b2",
];

/// Error correction code transformer bound to one code.
#[derive(Debug, Clone)]
pub struct EcctModel {
    config: EcctConfig,
    code: Code,
    mask: Arc<Vec<f64>>,
    names: Vec<String>,
    params: Vec<Tensor>,
}

fn shapes(config: &EcctConfig, tokens: usize) -> Vec<(String, Vec<usize>)> {
    let d = config.embed_dim;
    let f = d * config.ffn_mult;
    let mut out = vec![("embed".to_string(), vec![tokens, d])];
    for layer in 0..config.n_layers {
        let dims: [Vec<usize>; PER_LAYER] = [
            vec![1, d],
            vec![1, d],
            vec![d, d],
            vec![1, d],
            vec![d, d],
            vec![1, d],
            vec![d, d],
            vec![1, d],
            vec![d, d],
            vec![1, d],
            vec![1, d],
            vec![1, d],
            vec![d, f],
            vec![1, f],
            vec![f, d],
            vec![1, d],
        ];
        for (name, dim) in LAYER_PARAMS.iter().zip(dims) {
            out.push((format!("layers.{layer}.{name}"), dim));
        }
    }
    out.push(("final_norm.gamma".into(), vec![1, d]));
    out.push(("final_norm.beta".into(), vec![1, d]));
    out.push(("head.w".into(), vec![d, 1]));
    out.push(("head.b".into(), vec![1, 1]));
    out
}

impl EcctModel {
    /// Xavier-uniform weight matrices, unit norm gains, zero biases.
    pub fn new(code: &Code, config: EcctConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(seed, domain::PARAM_INIT, 0);
        let (names, params) = shapes(&config, token_count(code))
            .into_iter()
            .map(|(name, shape)| {
                let t = if name.ends_with("gamma") {
                    Tensor::new(shape.clone(), vec![1.0; shape.iter().product()])
                } else if shape[0] > 1 {
                    let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                    let data = (0..shape[0] * shape[1])
                        .map(|_| rng.random_range(-limit..limit))
                        .collect();
                    Tensor::new(shape, data)
                } else {
                    Ok(Tensor::zeros(shape))
                };
                t.map(|t| (name, t))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(EcctModel {
            config,
            code: code.clone(),
            mask: Arc::new(build_mask(code)),
            names,
            params,
        })
    }

    pub fn config(&self) -> &EcctConfig {
        &self.config
    }

    pub fn code(&self) -> &Code {
        &self.code
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    /// Replaces the attention mask; used to compare against an unmasked
    /// encoder.
    pub fn set_mask(&mut self, mask: Vec<f64>) -> Result<()> {
        let l = token_count(&self.code);
        if mask.len() != l * l {
            return Err(Error::LengthMismatch {
                expected: l * l,
                actual: mask.len(),
            });
        }
        self.mask = Arc::new(mask);
        Ok(())
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Records the forward pass on `tape`. Returns the parameter handles in
    /// canonical order and the `n x 1` score column.
    pub fn forward_on<'t>(
        &'t self,
        tape: &mut Tape<'t>,
        y: &[f64],
        trainable: bool,
    ) -> Result<(Vec<Var>, Var)> {
        let tokens = preprocess(&self.code, y)?;
        let p: Vec<Var> = self
            .params
            .iter()
            .map(|t| {
                if trainable {
                    tape.param_ref(t)
                } else {
                    tape.constant_ref(t)
                }
            })
            .collect();
        let scale = tape.constant(Tensor::column(tokens));
        let mut x = tape.scale_rows(p[0], scale)?;
        for layer in 0..self.config.n_layers {
            let base = 1 + layer * PER_LAYER;
            let attn = self.attention_sublayer(tape, &p[base..base + PER_LAYER], x)?;
            x = tape.add(x, attn)?;
            let ffn = self.ffn_sublayer(tape, &p[base..base + PER_LAYER], x)?;
            x = tape.add(x, ffn)?;
        }
        let tail = 1 + self.config.n_layers * PER_LAYER;
        let h = tape.layer_norm(x, p[tail], p[tail + 1])?;
        let bits = tape.slice_rows(h, 0, self.code.n())?;
        let proj = tape.matmul(bits, p[tail + 2])?;
        let scores = tape.add_row_bias(proj, p[tail + 3])?;
        Ok((p, scores))
    }

    fn linear(tape: &mut Tape<'_>, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = tape.matmul(x, w)?;
        tape.add_row_bias(xw, b)
    }

    fn attention_sublayer(&self, tape: &mut Tape<'_>, p: &[Var], x: Var) -> Result<Var> {
        let h = tape.layer_norm(x, p[ATTN_NORM], p[ATTN_NORM + 1])?;
        let q = Self::linear(tape, h, p[WQ], p[WQ + 1])?;
        let k = Self::linear(tape, h, p[WK], p[WK + 1])?;
        let v = Self::linear(tape, h, p[WV], p[WV + 1])?;
        let dh = self.config.head_dim();
        let inv_sqrt = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.config.n_heads);
        for head in 0..self.config.n_heads {
            let qh = tape.slice_cols(q, head * dh, dh)?;
            let kh = tape.slice_cols(k, head * dh, dh)?;
            let vh = tape.slice_cols(v, head * dh, dh)?;
            let logits = tape.matmul_nt(qh, kh)?;
            let logits = tape.scale(logits, inv_sqrt);
            let attn = tape.masked_softmax(logits, Some(&self.mask))?;
            heads.push(tape.matmul(attn, vh)?);
        }
        let joined = tape.concat_cols(&heads)?;
        Self::linear(tape, joined, p[WO], p[WO + 1])
    }

    fn ffn_sublayer(&self, tape: &mut Tape<'_>, p: &[Var], x: Var) -> Result<Var> {
        let h = tape.layer_norm(x, p[FFN_NORM], p[FFN_NORM + 1])?;
        let a = Self::linear(tape, h, p[W1], p[W1 + 1])?;
        let a = match self.config.activation {
            Activation::Gelu => tape.gelu(a),
            Activation::Relu => tape.relu(a),
        };
        Self::linear(tape, a, p[W2], p[W2 + 1])
    }

    /// Normalization and masked multi-head attention of `layer` applied to a
    /// token matrix, without the residual connection.
    pub fn attention_block(&self, x: &Tensor, layer: usize) -> Result<Tensor> {
        if layer >= self.config.n_layers {
            return Err(Error::InvalidArgument(format!("no layer {layer}")));
        }
        let mut tape = Tape::new();
        let base = 1 + layer * PER_LAYER;
        let p: Vec<Var> = self.params[base..base + PER_LAYER]
            .iter()
            .map(|t| tape.constant_ref(t))
            .collect();
        let xv = tape.constant(x.clone());
        let out = self.attention_sublayer(&mut tape, &p, xv)?;
        Ok(tape.value(out).clone())
    }

    /// Scores `f(y)`, one per codeword bit.
    pub fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (_, scores) = self.forward_on(&mut tape, y, false)?;
        Ok(tape.value(scores).data().to_vec())
    }

    /// `bin(sign(f(y) * y))`.
    pub fn decode(&self, y: &[f64]) -> Result<Word> {
        Ok(decode_from_scores(&self.forward(y)?, y))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let c = &self.config;
        let header: BTreeMap<String, String> = [
            ("n_layers", c.n_layers.to_string()),
            ("embed_dim", c.embed_dim.to_string()),
            ("n_heads", c.n_heads.to_string()),
            ("ffn_mult", c.ffn_mult.to_string()),
            ("activation", c.activation.to_string()),
            ("n", self.code.n().to_string()),
            ("k", self.code.k().to_string()),
            ("n_checks", self.code.n_checks().to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Checkpoint {
            header,
            tensors: self.names.iter().cloned().zip(self.params.iter().cloned()).collect(),
        }
    }

    /// Rebuilds a model from a checkpoint, checking it against `code`.
    pub fn from_checkpoint(ckpt: &Checkpoint, code: &Code) -> Result<Self> {
        let num = |key: &str| -> Result<usize> {
            ckpt.header_value(key)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad value for {key}")))
        };
        let config = EcctConfig {
            n_layers: num("n_layers")?,
            embed_dim: num("embed_dim")?,
            n_heads: num("n_heads")?,
            ffn_mult: num("ffn_mult")?,
            activation: ckpt.header_value("activation")?.parse()?,
        };
        let dims = (num("n")?, num("k")?, num("n_checks")?);
        if dims != (code.n(), code.k(), code.n_checks()) {
            return Err(Error::Checkpoint(format!(
                "checkpoint was trained for (n, k, checks) = {dims:?} but the code has ({}, {}, {})",
                code.n(),
                code.k(),
                code.n_checks()
            )));
        }
        let mut model = EcctModel::new(code, config, 0)?;
        if ckpt.tensors.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                model.params.len(),
                ckpt.tensors.len()
            )));
        }
        for ((name, t), (want, slot)) in ckpt
            .tensors
            .iter()
            .zip(model.names.iter().zip(model.params.iter_mut()))
        {
            if name != want || t.shape() != slot.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} {:?} where {want} {:?} was expected",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.clone();
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.to_checkpoint().write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, code: &Code) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?;
        let ckpt = Checkpoint::read(&mut BufReader::new(file))?;
        Self::from_checkpoint(&ckpt, code)
    }
}

/// Hard decision of `scores * y`.
pub fn decode_from_scores(scores: &[f64], y: &[f64]) -> Word {
    let prod: Vec<f64> = scores.iter().zip(y).map(|(s, v)| s * v).collect();
    hard_decision(&prod)
}
