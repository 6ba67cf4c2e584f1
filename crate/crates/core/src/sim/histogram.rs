use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{random_codeword, sigma_from_ebn0, transmit};
use crate::code::{hamming_distance, Code};
use crate::error::Result;
use crate::hybrid::SoftDecoder;
use crate::rng::{domain, substream};

/// Which received words a histogram covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// At most `t_c` hard-decision errors.
    WithinRadius,
    /// More than `t_c` hard-decision errors.
    BeyondRadius,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::WithinRadius => "within_tc",
            Condition::BeyondRadius => "beyond_tc",
        }
    }
}

/// Frame counts by number of errors left in the soft decoder output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub condition: Condition,
    pub t_c: usize,
    /// `bins[e]` is the number of frames whose output has `e` bit errors.
    pub bins: Vec<u64>,
}

impl ErrorHistogram {
    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    /// Frames with at most `t_c` output errors, which a post-decoder rescues.
    pub fn rescuable(&self) -> u64 {
        self.bins.iter().take(self.t_c + 1).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    pub within: ErrorHistogram,
    pub beyond: ErrorHistogram,
    pub ebn0_db: f64,
    pub frames: u64,
}

impl HistogramPair {
    /// `condition,errors,count` rows for both histograms.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "condition,errors,count")?;
        for h in [&self.within, &self.beyond] {
            for (e, c) in h.bins.iter().enumerate() {
                writeln!(out, "{},{e},{c}", h.condition.label())?;
            }
        }
        Ok(())
    }
}

/// Histograms of the soft decoder's output error count, split by whether
/// the channel left more than `t_c` hard-decision errors.
pub fn run_histogram(
    soft: &dyn SoftDecoder,
    code: &Code,
    ebn0_db: f64,
    frames: u64,
    seed: u64,
) -> Result<HistogramPair> {
    let sigma = sigma_from_ebn0(ebn0_db, code.rate())?;
    let t_c = code.t_c();
    let n = code.n();
    let per_frame = (0..frames)
        .into_par_iter()
        .map(|f| -> Result<(bool, usize)> {
            let mut rng = substream(seed, domain::HISTOGRAM, f);
            let x = random_codeword(code, &mut rng);
            let s = transmit(&x, sigma, &mut rng)?;
            let out = soft.decode_soft(&s.received)?;
            Ok((s.hard_errors() > t_c, hamming_distance(&x, &out)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut within = vec![0u64; n + 1];
    let mut beyond = vec![0u64; n + 1];
    for (is_beyond, e) in per_frame {
        if is_beyond {
            beyond[e] += 1;
        } else {
            within[e] += 1;
        }
    }
    Ok(HistogramPair {
        within: ErrorHistogram {
            condition: Condition::WithinRadius,
            t_c,
            bins: within,
        },
        beyond: ErrorHistogram {
            condition: Condition::BeyondRadius,
            t_c,
            bins: beyond,
        },
        ebn0_db,
        frames,
    })
}
