use crate::error::{Error, Result};

use super::word::Word;

/// Dense binary matrix stored as bit-packed rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<Word>,
}

/// Reduced row echelon form together with its pivot columns.
#[derive(Debug, Clone)]
pub struct Echelon {
    pub matrix: BitMatrix,
    pub pivots: Vec<usize>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix {
            cols,
            rows: vec![Word::zeros(cols); rows],
        }
    }

    pub fn from_rows(cols: usize, rows: Vec<Word>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                expected: cols,
                actual: r.len(),
            });
        }
        Ok(BitMatrix { cols, rows })
    }

    pub fn from_bits(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        BitMatrix::from_rows(cols, rows.iter().map(|r| Word::from_bits(r)).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[Word] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Word {
        &self.rows[i]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.rows[r].set(c, v)
    }

    pub fn column(&self, c: usize) -> Word {
        Word::from_bools(self.rows.iter().map(|r| r.get(c)))
    }

    pub fn count_ones(&self) -> usize {
        self.rows.iter().map(Word::weight).sum()
    }

    /// `M * v` over GF(2).
    pub fn mul_vec(&self, v: &Word) -> Result<Word> {
        if v.len() != self.cols {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                actual: v.len(),
            });
        }
        Ok(Word::from_bools(self.rows.iter().map(|r| r.dot(v))))
    }

    /// `self * other^T` over GF(2).
    pub fn mul_transpose(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{} columns vs {} columns",
                self.cols, other.cols
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| Word::from_bools(other.rows.iter().map(|o| r.dot(o))))
            .collect();
        BitMatrix::from_rows(other.rows.len(), rows)
    }

    /// Gauss-Jordan elimination.
    pub fn echelon(&self) -> Echelon {
        let mut rows = self.rows.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == rows.len() {
                break;
            }
            let Some(p) = (r..rows.len()).find(|&i| rows[i].get(c)) else {
                continue;
            };
            rows.swap(r, p);
            let pivot = rows[r].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != r && row.get(c) {
                    row.xor_assign(&pivot);
                }
            }
            pivots.push(c);
            r += 1;
        }
        Echelon {
            matrix: BitMatrix {
                cols: self.cols,
                rows,
            },
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.echelon().pivots.len()
    }

    /// Basis of the right null space, one row per non-pivot column. Row `j`
    /// has a single 1 among the non-pivot columns, at `free[j]`.
    pub fn null_space(&self) -> (BitMatrix, Vec<usize>) {
        let ech = self.echelon();
        let mut is_pivot = vec![false; self.cols];
        for &p in &ech.pivots {
            is_pivot[p] = true;
        }
        let free: Vec<usize> = (0..self.cols).filter(|&c| !is_pivot[c]).collect();
        let basis = free
            .iter()
            .map(|&f| {
                let mut v = Word::zeros(self.cols);
                v.set(f, true);
                for (i, &p) in ech.pivots.iter().enumerate() {
                    if ech.matrix.get(i, f) {
                        v.set(p, true);
                    }
                }
                v
            })
            .collect();
        (
            BitMatrix {
                cols: self.cols,
                rows: basis,
            },
            free,
        )
    }
}
