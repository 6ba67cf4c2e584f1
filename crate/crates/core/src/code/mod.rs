//! Linear block codes: parity-check and generator matrices, encoding,
//! syndromes and distance metrics.

mod io;
mod matrix;
mod word;

pub use io::{load_parity_matrix, save_alist, save_dense, MatrixFormat};
pub use matrix::{BitMatrix, Echelon};
pub use word::{hamming_distance, Word};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2m;

/// Largest dimension for which codewords are enumerated.
pub const MAX_ENUMERATION_K: usize = 20;

/// Parameters of a narrow-sense primitive binary BCH code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BchDesign {
    pub m: u32,
    pub t: usize,
}

/// An (n, k) binary linear block code.
///
/// `g` is systematic on `info_positions`: message bit `j` appears unchanged
/// at codeword position `info_positions[j]`.
#[derive(Debug, Clone)]
pub struct Code {
    n: usize,
    k: usize,
    h: BitMatrix,
    g: BitMatrix,
    info_positions: Vec<usize>,
    d_min: usize,
    dependent_rows: usize,
    bch: Option<BchDesign>,
}

impl Code {
    /// Builds a code from a parity-check matrix. The generator matrix is the
    /// null space of `h`. When `d_min` is `None` it is computed by enumeration.
    pub fn from_parity_check(h: BitMatrix, d_min: Option<usize>) -> Result<Self> {
        let n = h.n_cols();
        if n == 0 {
            return Err(Error::InvalidCode("zero-length code".into()));
        }
        let (g, info_positions) = h.null_space();
        let k = g.n_rows();
        if k == 0 {
            return Err(Error::InvalidCode("parity-check matrix has full column rank".into()));
        }
        let rank = n - k;
        let dependent_rows = h.n_rows() - rank;
        if g.mul_transpose(&h)?.count_ones() != 0 {
            return Err(Error::InvalidCode("G * H^T is not zero".into()));
        }
        let mut code = Code {
            n,
            k,
            h,
            g,
            info_positions,
            d_min: 0,
            dependent_rows,
            bch: None,
        };
        code.d_min = match d_min {
            Some(d) => d,
            None => code.min_distance_exhaustive()?,
        };
        if code.d_min == 0 {
            return Err(Error::InvalidCode("minimum distance must be positive".into()));
        }
        Ok(code)
    }

    /// The narrow-sense primitive BCH code of length 2^m - 1 correcting `t`
    /// errors. `d_min` is enumerated for k up to 20 and otherwise taken as
    /// the designed distance 2t + 1.
    pub fn bch(m: u32, t: usize) -> Result<Self> {
        let gen = gf2m::bch_generator(m, t)?;
        let n = (1usize << m) - 1;
        let r = gen.degree().unwrap_or(0);
        let k = n - r;
        let rows = (0..k)
            .map(|shift| {
                let mut w = Word::zeros(n);
                for (i, &c) in gen.coeffs().iter().enumerate() {
                    if c {
                        w.set(i + shift, true);
                    }
                }
                w
            })
            .collect();
        let cyclic_g = BitMatrix::from_rows(n, rows)?;
        let (h, _) = cyclic_g.null_space();
        let d_min = (k > MAX_ENUMERATION_K).then_some(2 * t + 1);
        let mut code = Code::from_parity_check(h, d_min)?;
        code.bch = Some(BchDesign { m, t });
        Ok(code)
    }

    /// Records BCH structure after checking that every generator row, read
    /// as a polynomial with bit `i` the coefficient of `x^i`, vanishes at
    /// `alpha^1 .. alpha^{2t}`.
    pub fn with_bch_design(mut self, design: BchDesign) -> Result<Self> {
        let gf = gf2m::field(design.m)?;
        if gf.group_order() != self.n {
            return Err(Error::InvalidCode(format!(
                "n={} is not 2^{} - 1",
                self.n, design.m
            )));
        }
        for row in self.g.rows() {
            for j in 1..=2 * design.t {
                let mut acc = 0u16;
                for i in row.ones() {
                    acc ^= gf.exp_raw((i * j) as i64);
                }
                if acc != 0 {
                    return Err(Error::InvalidCode(format!(
                        "codeword does not vanish at alpha^{j}; not the BCH code (m={}, t={})",
                        design.m, design.t
                    )));
                }
            }
        }
        self.bch = Some(design);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Number of parity checks, the row count of H.
    pub fn n_checks(&self) -> usize {
        self.h.n_rows()
    }

    pub fn parity_check(&self) -> &BitMatrix {
        &self.h
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.g
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn d_min(&self) -> usize {
        self.d_min
    }

    /// Error correction capability, floor((d_min - 1) / 2).
    pub fn t_c(&self) -> usize {
        (self.d_min - 1) / 2
    }

    /// Rows of H that are linear combinations of other rows.
    pub fn dependent_rows(&self) -> usize {
        self.dependent_rows
    }

    pub fn bch_design(&self) -> Option<BchDesign> {
        self.bch
    }

    pub fn encode(&self, message: &Word) -> Result<Word> {
        if message.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                actual: message.len(),
            });
        }
        let mut out = Word::zeros(self.n);
        for j in message.ones() {
            out.xor_assign(self.g.row(j));
        }
        Ok(out)
    }

    /// Reads the message back from a codeword's information positions.
    pub fn extract_message(&self, codeword: &Word) -> Result<Word> {
        self.check_len(codeword)?;
        Ok(Word::from_bools(
            self.info_positions.iter().map(|&p| codeword.get(p)),
        ))
    }

    /// `H * word^T` over GF(2).
    pub fn syndrome(&self, word: &Word) -> Result<Word> {
        self.h.mul_vec(word)
    }

    /// True when every parity check is satisfied.
    pub fn is_codeword(&self, word: &Word) -> Result<bool> {
        self.check_len(word)?;
        Ok(self.h.rows().iter().all(|r| !r.dot(word)))
    }

    pub fn check_len(&self, word: &Word) -> Result<()> {
        if word.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: word.len(),
            });
        }
        Ok(())
    }

    /// Minimum weight over all nonzero codewords, by Gray-code enumeration.
    pub fn min_distance_exhaustive(&self) -> Result<usize> {
        if self.k > MAX_ENUMERATION_K {
            return Err(Error::TooLarge(self.k));
        }
        let mut cw = Word::zeros(self.n);
        let mut best = usize::MAX;
        for i in 1u64..(1u64 << self.k) {
            cw.xor_assign(self.g.row(i.trailing_zeros() as usize));
            best = best.min(cw.weight());
        }
        Ok(best)
    }
}
