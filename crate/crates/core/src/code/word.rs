use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit-packed binary vector.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Word {
    len: usize,
    blocks: Vec<u64>,
}

impl Word {
    pub fn zeros(len: usize) -> Self {
        Word {
            len,
            blocks: vec![0; len.div_ceil(64)],
        }
    }

    /// Builds a word from 0/1 values; any nonzero byte is read as 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut w = Word::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                w.set(i, true);
            }
        }
        w
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut w = Word::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            if b {
                w.set(i, true);
            }
        }
        w
    }

    /// Low `len` bits of `mask`, bit 0 first.
    pub fn from_u64(mask: u64, len: usize) -> Self {
        let mut w = Word::zeros(len);
        if len > 0 {
            let keep = if len >= 64 { u64::MAX } else { (1u64 << len) - 1 };
            w.blocks[0] = mask & keep;
        }
        w
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.blocks[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.blocks[i / 64] |= mask;
        } else {
            self.blocks[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.blocks[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn weight(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    fn check_len(&self, other: &Word) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        Ok(())
    }

    pub fn xor(&self, other: &Word) -> Result<Word> {
        self.check_len(other)?;
        let mut out = self.clone();
        out.xor_assign(other);
        Ok(out)
    }

    /// In-place XOR; lengths must already agree.
    pub fn xor_assign(&mut self, other: &Word) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a ^= b;
        }
    }

    /// Parity of the bitwise AND, the GF(2) inner product.
    #[inline]
    pub fn dot(&self, other: &Word) -> bool {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.iter().map(u8::from).collect()
    }

    pub fn blocks(&self) -> &[u64] {
        &self.blocks
    }
}

/// Number of positions where `a` and `b` differ.
pub fn hamming_distance(a: &Word, b: &Word) -> Result<usize> {
    a.check_len(b)?;
    Ok(a.blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Result<Vec<u8>> = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected character {other:?} in bit string"),
                }),
            })
            .collect();
        Ok(Word::from_bits(&bits?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let z: Word = "0000000".parse().unwrap();
        let a: Word = "1110000".parse().unwrap();
        assert_eq!(hamming_distance(&z, &z).unwrap(), 0);
        assert_eq!(hamming_distance(&z, &a).unwrap(), 3);
        assert!(hamming_distance(&z, &Word::zeros(6)).is_err());
    }

    #[test]
    fn bits_across_block_boundary() {
        let mut w = Word::zeros(130);
        w.set(63, true);
        w.set(64, true);
        w.set(129, true);
        assert_eq!(w.weight(), 3);
        assert_eq!(w.ones().collect::<Vec<_>>(), vec![63, 64, 129]);
        w.flip(64);
        assert!(!w.get(64));
    }

    proptest! {
        #[test]
        fn distance_symmetric(a in prop::collection::vec(0u8..2, 1..150), seed in any::<u64>()) {
            let x = Word::from_bits(&a);
            let mut y = x.clone();
            for i in 0..a.len() {
                if (seed >> (i % 64)) & 1 == 1 { y.flip(i); }
            }
            let d = hamming_distance(&x, &y).unwrap();
            prop_assert_eq!(d, hamming_distance(&y, &x).unwrap());
            prop_assert_eq!(d, x.xor(&y).unwrap().weight());
        }

        #[test]
        fn display_parse_identity(a in prop::collection::vec(0u8..2, 0..150)) {
            let w = Word::from_bits(&a);
            prop_assert_eq!(w.to_string().parse::<Word>().unwrap(), w);
        }
    }
}
