use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{simulate, Arm, CodewordMode, FerPoint, Stopping};
use crate::error::{Error, Result};
use crate::hdd::HardDecoder;
use crate::hybrid::{PipelineConfig, SoftDecoder};

/// Which trained model a row decodes with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSlot {
    /// Trained with plain BCE.
    Base,
    /// Trained with the hybrid loss gated for the ECCT+post pipeline.
    HybridPost,
    /// Trained with the hybrid loss gated for the pre+ECCT+post pipeline.
    HybridPrePost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationRow {
    pub label: &'static str,
    pub config: PipelineConfig,
    pub model: ModelSlot,
}

/// Rows of the ablation table, in output order.
pub const ABLATION_ROWS: [AblationRow; 6] = [
    AblationRow {
        label: "ECCT",
        config: PipelineConfig::ECCT,
        model: ModelSlot::Base,
    },
    AblationRow {
        label: "Pre+ECCT",
        config: PipelineConfig::PRE,
        model: ModelSlot::Base,
    },
    AblationRow {
        label: "ECCT+Post",
        config: PipelineConfig::POST,
        model: ModelSlot::Base,
    },
    AblationRow {
        label: "Pre+ECCT+Post",
        config: PipelineConfig::PRE_POST,
        model: ModelSlot::Base,
    },
    AblationRow {
        label: "ECCT+Post+loss",
        config: PipelineConfig::POST,
        model: ModelSlot::HybridPost,
    },
    AblationRow {
        label: "Pre+ECCT+Post+loss",
        config: PipelineConfig::PRE_POST,
        model: ModelSlot::HybridPrePost,
    },
];

/// Published full-scale FERs for one row and code at [`REFERENCE_SNRS`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub label: &'static str,
    pub n: usize,
    pub k: usize,
    pub fer: [Option<f64>; 3],
}

/// Eb/N0 points (dB) of the published reference values.
pub const REFERENCE_SNRS: [f64; 3] = [6.0, 7.0, 8.0];

const fn reference(label: &'static str, n: usize, k: usize, fer: [Option<f64>; 3]) -> ReferenceRow {
    ReferenceRow { label, n, k, fer }
}

/// Published reference FERs for BCH (31,16) and (63,36), N=6, d=128 models.
pub const REFERENCE_FER: [ReferenceRow; 12] = [
    reference("ECCT", 31, 16, [Some(2.54e-4), Some(1.94e-5), Some(9.42e-7)]),
    reference("Pre+ECCT", 31, 16, [Some(8.45e-4), Some(9.23e-5), Some(4.76e-6)]),
    reference("ECCT+Post", 31, 16, [Some(7.78e-5), Some(4.25e-6), Some(1.45e-7)]),
    reference("Pre+ECCT+Post", 31, 16, [Some(6.95e-4), Some(7.59e-5), Some(4.20e-6)]),
    reference("ECCT+Post+loss", 31, 16, [Some(7.32e-5), Some(2.38e-6), Some(5.02e-8)]),
    reference("Pre+ECCT+Post+loss", 31, 16, [None, None, None]),
    reference("ECCT", 63, 36, [Some(1.59e-3), Some(7.44e-5), Some(1.35e-6)]),
    reference("Pre+ECCT", 63, 36, [Some(2.53e-4), Some(5.08e-6), Some(3.26e-8)]),
    reference("ECCT+Post", 63, 36, [Some(1.42e-4), Some(2.51e-6), Some(1.76e-8)]),
    reference("Pre+ECCT+Post", 63, 36, [Some(7.69e-5), Some(9.48e-7), Some(8.29e-9)]),
    reference("ECCT+Post+loss", 63, 36, [None, None, None]),
    reference("Pre+ECCT+Post+loss", 63, 36, [Some(7.00e-5), Some(6.60e-7), Some(6.38e-9)]),
];

/// Published FER for a row, code and SNR, if one exists.
pub fn reference_fer(label: &str, n: usize, k: usize, ebn0_db: f64) -> Option<f64> {
    let col = REFERENCE_SNRS.iter().position(|&s| (s - ebn0_db).abs() < 1e-9)?;
    REFERENCE_FER
        .iter()
        .find(|r| r.label == label && r.n == n && r.k == k)
        .and_then(|r| r.fer[col])
}

/// Models available to an ablation run. Rows whose model is missing are
/// left out of the table.
#[derive(Clone, Copy)]
pub struct AblationModels<'a> {
    pub base: &'a dyn SoftDecoder,
    pub hybrid_post: Option<&'a dyn SoftDecoder>,
    pub hybrid_pre_post: Option<&'a dyn SoftDecoder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub n: usize,
    pub k: usize,
    pub labels: Vec<String>,
    /// `points[row][snr]`.
    pub points: Vec<Vec<FerPoint>>,
}

impl AblationTable {
    pub fn row(&self, label: &str) -> Option<&[FerPoint]> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(&self.points[i])
    }

    /// One line per (row, SNR) in table order, with the published value
    /// where one exists.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "row,ebn0_db,frames,frame_errors,fer,fer_ci_low,fer_ci_high,reference_fer"
        )?;
        for (label, pts) in self.labels.iter().zip(&self.points) {
            for p in pts {
                let reference = reference_fer(label, self.n, self.k, p.ebn0_db)
                    .map(|f| format!("{f:e}"))
                    .unwrap_or_default();
                writeln!(
                    out,
                    "{label},{},{},{},{:e},{:e},{:e},{reference}",
                    p.ebn0_db, p.frames, p.frame_errors, p.fer, p.fer_ci_low, p.fer_ci_high
                )?;
            }
        }
        Ok(())
    }
}

/// Runs every row with an available model on shared frames.
pub fn run_ablation(
    hdd: &dyn HardDecoder,
    models: AblationModels<'_>,
    snr_points: &[f64],
    stopping: &Stopping,
    seed: u64,
    mode: CodewordMode,
) -> Result<AblationTable> {
    let mut decoders: Vec<&dyn SoftDecoder> = vec![models.base];
    let mut post_idx = None;
    let mut pre_post_idx = None;
    for (m, idx) in [
        (models.hybrid_post, &mut post_idx),
        (models.hybrid_pre_post, &mut pre_post_idx),
    ] {
        if let Some(d) = m {
            *idx = Some(decoders.len());
            decoders.push(d);
        }
    }
    let arms: Vec<Arm> = ABLATION_ROWS
        .iter()
        .filter_map(|row| {
            let decoder = match row.model {
                ModelSlot::Base => Some(0),
                ModelSlot::HybridPost => post_idx,
                ModelSlot::HybridPrePost => pre_post_idx,
            }?;
            Some(Arm {
                label: row.label.to_string(),
                decoder,
                config: row.config,
            })
        })
        .collect();
    if arms.is_empty() {
        return Err(Error::InvalidArgument("no ablation rows to run".into()));
    }
    let reports = simulate(hdd, &decoders, &arms, snr_points, stopping, seed, mode)?;
    let code = hdd.code();
    Ok(AblationTable {
        n: code.n(),
        k: code.k(),
        labels: reports.iter().map(|r| r.label.clone()).collect(),
        points: reports.into_iter().map(|r| r.points).collect(),
    })
}
