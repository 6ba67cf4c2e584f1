use crate::code::{BchDesign, Code, Word};
use crate::error::{Error, Result};
use crate::gf2m::{self, GaloisField};

use super::{HardDecoder, HddOutcome, HddStatus};

/// Berlekamp-Massey decoder with Chien search for a narrow-sense binary BCH
/// code. Bit `i` of a word is the coefficient of `x^i`.
#[derive(Debug, Clone)]
pub struct BchDecoder<'a> {
    code: &'a Code,
    gf: &'static GaloisField,
    t: usize,
}

impl<'a> BchDecoder<'a> {
    /// Uses the BCH design recorded on the code.
    pub fn new(code: &'a Code) -> Result<Self> {
        let design = code.bch_design().ok_or_else(|| {
            Error::InvalidCode("code has no BCH structure; attach one with with_bch_design".into())
        })?;
        Self::with_design(code, design)
    }

    fn with_design(code: &'a Code, design: BchDesign) -> Result<Self> {
        let gf = gf2m::field(design.m)?;
        if gf.group_order() != code.n() {
            return Err(Error::InvalidCode(format!(
                "n={} does not match GF(2^{})",
                code.n(),
                design.m
            )));
        }
        Ok(BchDecoder {
            code,
            gf,
            t: design.t,
        })
    }

    /// `S_j = r(alpha^j)` for `j = 1..=2t`.
    pub fn syndromes(&self, word: &Word) -> Vec<u16> {
        let mut s = vec![0u16; 2 * self.t];
        for i in word.ones() {
            for (j, sj) in s.iter_mut().enumerate() {
                *sj ^= self.gf.exp_raw((i * (j + 1)) as i64);
            }
        }
        s
    }

    /// Error-locator polynomial, lowest degree first, and its linear
    /// complexity.
    fn berlekamp_massey(&self, s: &[u16]) -> (Vec<u16>, usize) {
        let gf = self.gf;
        let mut c = vec![0u16; s.len() + 1];
        let mut b = vec![0u16; s.len() + 1];
        c[0] = 1;
        b[0] = 1;
        let (mut l, mut shift, mut b_disc) = (0usize, 1usize, 1u16);
        for r in 0..s.len() {
            let mut d = s[r];
            for i in 1..=l {
                d ^= gf.mul_raw(c[i], s[r - i]);
            }
            if d == 0 {
                shift += 1;
                continue;
            }
            let coef = gf.mul_raw(d, gf.inv_raw(b_disc));
            let prev = c.clone();
            for i in 0..c.len() - shift {
                c[i + shift] ^= gf.mul_raw(coef, b[i]);
            }
            if 2 * l <= r {
                l = r + 1 - l;
                b = prev;
                b_disc = d;
                shift = 1;
            } else {
                shift += 1;
            }
        }
        c.truncate(l + 1);
        (c, l)
    }

    /// Positions `i` with `locator(alpha^-i) = 0`.
    fn chien_search(&self, locator: &[u16]) -> Vec<usize> {
        let logs: Vec<Option<usize>> = locator
            .iter()
            .map(|&c| (c != 0).then(|| self.gf.log_raw(c)))
            .collect();
        (0..self.code.n())
            .filter(|&i| {
                let mut acc = 0u16;
                for (k, lg) in logs.iter().enumerate() {
                    if let Some(lg) = lg {
                        acc ^= self.gf.exp_raw(*lg as i64 - (i * k) as i64);
                    }
                }
                acc == 0
            })
            .collect()
    }
}

impl HardDecoder for BchDecoder<'_> {
    fn code(&self) -> &Code {
        self.code
    }

    fn radius(&self) -> usize {
        self.t
    }

    fn decode(&self, word: &Word) -> HddOutcome {
        if word.len() != self.code.n() {
            return HddOutcome::failure(word);
        }
        let s = self.syndromes(word);
        if s.iter().all(|&v| v == 0) {
            return HddOutcome {
                status: HddStatus::Success,
                word: word.clone(),
                corrected_positions: Vec::new(),
            };
        }
        let (locator, l) = self.berlekamp_massey(&s);
        if l > self.t {
            return HddOutcome::failure(word);
        }
        let positions = self.chien_search(&locator);
        if positions.len() != l {
            return HddOutcome::failure(word);
        }
        let mut out = word.clone();
        for &p in &positions {
            out.flip(p);
        }
        debug_assert!(self.code.is_codeword(&out).unwrap_or(false));
        HddOutcome {
            status: HddStatus::Success,
            word: out,
            corrected_positions: positions,
        }
    }
}
