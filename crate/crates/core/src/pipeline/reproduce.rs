use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{train, TrainSettings};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::knowledge::Taxonomy;
use crate::model::KernConfig;

/// Model variant: the full model or one of its ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "KERN")]
    Kern,
    /// Without internal knowledge.
    #[serde(rename = "KERN-I")]
    KernI,
    /// Without external knowledge.
    #[serde(rename = "KERN-E")]
    KernE,
    /// Without either.
    #[serde(rename = "KERN-IE")]
    KernIe,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::KernIe, Variant::KernE, Variant::KernI, Variant::Kern];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Kern => "KERN",
            Variant::KernI => "KERN-I",
            Variant::KernE => "KERN-E",
            Variant::KernIe => "KERN-IE",
        }
    }

    /// `(ext_kg, int_kg)`.
    pub fn flags(self) -> (bool, bool) {
        match self {
            Variant::Kern => (true, true),
            Variant::KernI => (true, false),
            Variant::KernE => (false, true),
            Variant::KernIe => (false, false),
        }
    }

    pub fn from_flags(ext_kg: bool, int_kg: bool) -> Self {
        match (ext_kg, int_kg) {
            (true, true) => Variant::Kern,
            (true, false) => Variant::KernI,
            (false, true) => Variant::KernE,
            (false, false) => Variant::KernIe,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?} (expected KERN, KERN-I, KERN-E or KERN-IE)")))
    }
}

/// Benchmark setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DatasetId {
    #[serde(rename = "GeoStyle")]
    GeoStyle,
    #[serde(rename = "FIT-half")]
    FitHalf,
    #[serde(rename = "FIT-one")]
    FitOne,
}

impl DatasetId {
    pub const ALL: [DatasetId; 3] = [DatasetId::GeoStyle, DatasetId::FitHalf, DatasetId::FitOne];

    pub fn label(self) -> &'static str {
        match self {
            DatasetId::GeoStyle => "GeoStyle",
            DatasetId::FitHalf => "FIT-half",
            DatasetId::FitOne => "FIT-one",
        }
    }

    /// Tuned `(triplet_lambda, sample_range)` for the variants that were tuned.
    pub fn tuned(self, variant: Variant) -> Option<(f64, usize)> {
        use {DatasetId::*, Variant::*};
        match (self, variant) {
            (GeoStyle, Kern | KernI) => Some((0.002, 50)),
            (FitHalf, KernI) => Some((0.0001, 500)),
            (FitHalf, Kern) => Some((0.001, 500)),
            (FitOne, KernI) => Some((0.01, 1000)),
            (FitOne, Kern) => Some((0.0002, 100)),
            _ => None,
        }
    }

    /// Variants with published numbers, in table order.
    pub fn variants(self) -> Vec<Variant> {
        match self {
            DatasetId::GeoStyle => vec![Variant::KernIe, Variant::KernI, Variant::Kern],
            _ => Variant::ALL.to_vec(),
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One row to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub label: Variant,
    pub dataset: DatasetId,
    pub output_len: usize,
    pub triplet_lambda: f64,
    pub sample_range: usize,
}

impl ExperimentSpec {
    /// `base` with this row's switches and knowledge settings.
    pub fn apply(&self, base: &KernConfig) -> KernConfig {
        let (ext_kg, int_kg) = self.label.flags();
        KernConfig {
            ext_kg,
            int_kg,
            output_len: self.output_len,
            triplet_lambda: self.triplet_lambda,
            sample_range: self.sample_range,
            ..base.clone()
        }
    }
}

/// Rows of one dataset. Untuned variants take their settings from `base`.
pub fn paper_specs(dataset: DatasetId, base: &KernConfig) -> Vec<ExperimentSpec> {
    dataset
        .variants()
        .into_iter()
        .map(|label| {
            let (triplet_lambda, sample_range) = dataset
                .tuned(label)
                .unwrap_or((base.triplet_lambda, base.sample_range));
            ExperimentSpec {
                label,
                dataset,
                output_len: base.output_len,
                triplet_lambda,
                sample_range,
            }
        })
        .collect()
}

/// Published numbers for one row: original and replication.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub mae_original: f64,
    pub mae_replication: f64,
    pub mape_original: Option<f64>,
    pub mape_replication: Option<f64>,
}

pub fn reference(dataset: DatasetId, variant: Variant) -> Option<Reference> {
    use {DatasetId::*, Variant::*};
    let mae = match (dataset, variant) {
        (GeoStyle, KernIe) => (0.0137, 0.0130),
        (GeoStyle, KernI) => (0.0137, 0.0130),
        (GeoStyle, Kern) => (0.0134, 0.0129),
        (GeoStyle, KernE) => return None,
        (FitHalf, KernIe) => (0.0840, 0.0824),
        (FitHalf, KernE) => (0.0835, 0.0827),
        (FitHalf, KernI) => (0.0831, 0.0824),
        (FitHalf, Kern) => (0.0836, 0.0823),
        (FitOne, KernIe) => (0.0966, 0.0940),
        (FitOne, KernE) => (0.0953, 0.0941),
        (FitOne, KernI) => (0.0942, 0.0940),
        (FitOne, Kern) => (0.0939, 0.0931),
    };
    let mape = match (dataset, variant) {
        (GeoStyle, Kern) => Some((14.24, 14.77)),
        (FitHalf, Kern) => Some((30.02, 29.40)),
        (FitOne, Kern) => Some((33.45, 32.56)),
        _ => None,
    };
    Some(Reference {
        mae_original: mae.0,
        mae_replication: mae.1,
        mape_original: mape.map(|m| m.0),
        mape_replication: mape.map(|m| m.1),
    })
}

/// Everything needed to train on one dataset.
pub struct DatasetSource {
    pub base: KernConfig,
    pub settings: TrainSettings,
    /// Loaded data, or why it is unavailable.
    pub data: std::result::Result<(Dataset, Option<Taxonomy>), String>,
    /// Per-row outputs go to `<out_dir>/<dataset>-<variant>/`.
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RowStatus {
    Completed { mae: f64, mape: f64, best_epoch: usize },
    Skipped { reason: String },
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub spec: ExperimentSpec,
    pub result: RowStatus,
    pub reference: Option<Reference>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

fn run_row(spec: &ExperimentSpec, source: Option<&DatasetSource>) -> RowStatus {
    let Some(source) = source else {
        return RowStatus::Skipped {
            reason: format!("no configuration for {}", spec.dataset),
        };
    };
    let (dataset, taxonomy) = match &source.data {
        Ok(d) => d,
        Err(reason) => {
            return RowStatus::Skipped {
                reason: reason.clone(),
            }
        }
    };
    let config = spec.apply(&source.base);
    let dir = source
        .out_dir
        .as_ref()
        .map(|d| d.join(format!("{}-{}", spec.dataset, spec.label)));
    match train(&config, &source.settings, dataset, taxonomy.as_ref(), dir.as_deref()) {
        Ok(out) => RowStatus::Completed {
            mae: out.best_report.mae,
            mape: out.best_report.mape,
            best_epoch: out.best.epoch,
        },
        Err(e) => RowStatus::Failed { error: e.to_string() },
    }
}

/// Trains every row, independent rows in parallel. Rows keep the order of `specs`.
pub fn reproduce(specs: &[ExperimentSpec], sources: &BTreeMap<DatasetId, DatasetSource>) -> ComparisonTable {
    let rows = specs
        .par_iter()
        .map(|spec| ComparisonRow {
            spec: spec.clone(),
            result: run_row(spec, sources.get(&spec.dataset)),
            reference: reference(spec.dataset, spec.label),
        })
        .collect();
    ComparisonTable { rows }
}

impl ComparisonTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "comparison table".into(),
            location: format!("line {}", e.line()),
            message: e.to_string(),
        })
    }

    /// Aligned plain-text rendering.
    pub fn render_text(&self) -> String {
        let opt = |x: Option<f64>, digits: usize| x.map_or("-".to_string(), |v| format!("{v:.digits$}"));
        let header = [
            "dataset", "method", "lambda", "range", "MAE", "MAPE", "MAE orig", "MAE repl", "MAPE orig",
            "MAPE repl", "status",
        ];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for row in &self.rows {
            let (mae, mape, status) = match &row.result {
                RowStatus::Completed { mae, mape, .. } => (Some(*mae), Some(*mape), "ok".to_string()),
                RowStatus::Skipped { reason } => (None, None, format!("skipped: {reason}")),
                RowStatus::Failed { error } => (None, None, format!("failed: {error}")),
            };
            let r = row.reference;
            cells.push(vec![
                row.spec.dataset.to_string(),
                row.spec.label.to_string(),
                row.spec.triplet_lambda.to_string(),
                row.spec.sample_range.to_string(),
                opt(mae, 4),
                opt(mape, 2),
                opt(r.map(|r| r.mae_original), 4),
                opt(r.map(|r| r.mae_replication), 4),
                opt(r.and_then(|r| r.mape_original), 2),
                opt(r.and_then(|r| r.mape_replication), 2),
                status,
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &cells {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| {
                    if i == r.len() - 1 {
                        cell.clone()
                    } else {
                        format!("{cell:<w$}")
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
