use std::collections::HashMap;

use crate::code::{Code, Word};
use crate::error::{Error, Result};

use super::{HardDecoder, HddOutcome, HddStatus};

/// Largest table the decoder will build.
const MAX_TABLE_ENTRIES: usize = 1 << 22;

/// Bounded-distance decoding by syndrome lookup of every error pattern of
/// weight at most `t_c`.
#[derive(Debug, Clone)]
pub struct SyndromeTableDecoder<'a> {
    code: &'a Code,
    radius: usize,
    leaders: HashMap<Word, Vec<usize>>,
}

impl<'a> SyndromeTableDecoder<'a> {
    pub fn new(code: &'a Code) -> Result<Self> {
        let radius = code.t_c();
        let n = code.n();
        let mut total = 0usize;
        let mut binom = 1usize;
        for w in 0..=radius {
            if w > 0 {
                binom = binom * (n - w + 1) / w;
            }
            total = total.saturating_add(binom);
        }
        if total > MAX_TABLE_ENTRIES {
            return Err(Error::InvalidArgument(format!(
                "syndrome table would need {total} entries"
            )));
        }
        let columns: Vec<Word> = (0..n).map(|i| code.parity_check().column(i)).collect();
        let mut leaders = HashMap::with_capacity(total);
        let mut stack: Vec<(usize, Vec<usize>, Word)> = vec![(0, Vec::new(), Word::zeros(code.n_checks()))];
        while let Some((start, pattern, syn)) = stack.pop() {
            leaders.entry(syn.clone()).or_insert_with(|| pattern.clone());
            if pattern.len() == radius {
                continue;
            }
            for i in start..n {
                let mut p = pattern.clone();
                p.push(i);
                let mut s = syn.clone();
                s.xor_assign(&columns[i]);
                stack.push((i + 1, p, s));
            }
        }
        Ok(SyndromeTableDecoder {
            code,
            radius,
            leaders,
        })
    }
}

impl HardDecoder for SyndromeTableDecoder<'_> {
    fn code(&self) -> &Code {
        self.code
    }

    fn radius(&self) -> usize {
        self.radius
    }

    fn decode(&self, word: &Word) -> HddOutcome {
        let Ok(syn) = self.code.syndrome(word) else {
            return HddOutcome::failure(word);
        };
        match self.leaders.get(&syn) {
            Some(pattern) => {
                let mut out = word.clone();
                for &p in pattern {
                    out.flip(p);
                }
                HddOutcome {
                    status: HddStatus::Success,
                    word: out,
                    corrected_positions: pattern.clone(),
                }
            }
            None => HddOutcome::failure(word),
        }
    }
}
