use crate::code::{BitMatrix, Code};
use crate::channel::hard_decision;
use crate::error::{Error, Result};
use crate::tensorgrad::MASK_NEG;

/// Number of input tokens: one per bit plus one per parity check.
pub fn token_count(code: &Code) -> usize {
    code.n() + code.n_checks()
}

/// `[|y|, s]` where `s` is the syndrome of the hard decision of `y` with
/// bits mapped `0 -> +1`, `1 -> -1`.
pub fn preprocess(code: &Code, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != code.n() {
        return Err(Error::LengthMismatch {
            expected: code.n(),
            actual: y.len(),
        });
    }
    let syn = code.syndrome(&hard_decision(y))?;
    let mut out: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    out.extend(syn.iter().map(|b| if b { -1.0 } else { 1.0 }));
    Ok(out)
}

/// Additive attention mask over the `n + n_checks` tokens: `0` between
/// related positions, [`MASK_NEG`] elsewhere. Bits are related when they
/// share a check, a bit and a check when the check contains the bit, and two
/// checks when they share a bit. Every token is related to itself.
pub fn build_mask(code: &Code) -> Vec<f64> {
    mask_from_parity_check(code.parity_check())
}

pub fn mask_from_parity_check(h: &BitMatrix) -> Vec<f64> {
    let (r, n) = (h.n_rows(), h.n_cols());
    let l = n + r;
    let mut related = vec![false; l * l];
    let mut link = |a: usize, b: usize| {
        related[a * l + b] = true;
        related[b * l + a] = true;
    };
    for i in 0..l {
        link(i, i);
    }
    for (c, row) in h.rows().iter().enumerate() {
        let bits: Vec<usize> = row.ones().collect();
        for &i in &bits {
            link(i, n + c);
            for &j in &bits {
                link(i, j);
            }
        }
    }
    for c1 in 0..r {
        for c2 in c1 + 1..r {
            if h.row(c1).ones().any(|i| h.get(c2, i)) {
                link(n + c1, n + c2);
            }
        }
    }
    related
        .into_iter()
        .map(|rel| if rel { 0.0 } else { MASK_NEG })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::modulate;
    use crate::code::Word;

    #[test]
    fn noiseless_codeword_tokens() {
        let code = Code::bch(3, 1).unwrap();
        let x = code.encode(&Word::from_u64(0b1011, 4)).unwrap();
        let t = preprocess(&code, &modulate(&x)).unwrap();
        assert_eq!(t, vec![1.0; 10]);
        assert!(preprocess(&code, &[1.0; 6]).is_err());
    }

    #[test]
    fn sign_flip_toggles_checks_containing_the_bit() {
        let code = Code::bch(4, 2).unwrap();
        let y: Vec<f64> = (0..15).map(|i| 0.3 + 0.1 * i as f64).collect();
        let base = preprocess(&code, &y).unwrap();
        for i in 0..15 {
            let mut y2 = y.clone();
            y2[i] = -y2[i];
            let t = preprocess(&code, &y2).unwrap();
            assert_eq!(&t[..15], &base[..15]);
            for c in 0..code.n_checks() {
                let toggled = t[15 + c] != base[15 + c];
                assert_eq!(toggled, code.parity_check().get(c, i));
            }
        }
    }

    #[test]
    fn single_check_relates_everything() {
        let h = BitMatrix::from_bits(&[vec![1, 1]]).unwrap();
        assert_eq!(mask_from_parity_check(&h), vec![0.0; 9]);
    }

    #[test]
    fn mask_structure() {
        for (m, t) in [(3u32, 1usize), (4, 2), (5, 3)] {
            let code = Code::bch(m, t).unwrap();
            let mask = build_mask(&code);
            let (n, l) = (code.n(), token_count(&code));
            let ones = code.parity_check().count_ones();
            let mut bit_check = 0;
            for a in 0..l {
                assert_eq!(mask[a * l + a], 0.0);
                for b in 0..l {
                    assert_eq!(mask[a * l + b], mask[b * l + a]);
                    if (a < n) != (b < n) && mask[a * l + b] == 0.0 {
                        bit_check += 1;
                    }
                }
            }
            assert_eq!(bit_check, 2 * ones);
        }
    }
}
