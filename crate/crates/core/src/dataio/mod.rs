//! Trend datasets: ingestion, validation, windowing and synthetic generation.

mod formats;
mod synthetic;
mod window;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use formats::{load_dataset, parse_geostyle_csv, GeoStyleImport, parse_trendkern_json, save_dataset, to_trendkern_json, DatasetFormat};
pub use synthetic::{generate_synthetic, SyntheticSpec, NOISE_STD, SEASONAL_PERIOD};
pub use window::{make_samples, SampleRole, SampleSet, TrendSample};

/// Popularity of one fashion element within one user group, one value per time bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub series_id: usize,
    pub group_id: usize,
    pub element_id: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub series: Vec<TrendSeries>,
    pub group_vocab_size: usize,
    pub element_vocab_size: usize,
    pub bin_duration: String,
}

impl Dataset {
    /// Builds a dataset, checking every invariant.
    pub fn new(
        series: Vec<TrendSeries>,
        group_vocab_size: usize,
        element_vocab_size: usize,
        bin_duration: impl Into<String>,
    ) -> Result<Self> {
        let ds = Self {
            series,
            group_vocab_size,
            element_vocab_size,
            bin_duration: bin_duration.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn series_len(&self) -> usize {
        self.series.first().map_or(0, |s| s.values.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::Validation("dataset has no series".into()));
        }

        let bad_values: Vec<usize> = self
            .series
            .iter()
            .filter(|s| s.values.is_empty() || s.values.iter().any(|v| !v.is_finite() || *v < 0.0))
            .map(|s| s.series_id)
            .collect();
        if !bad_values.is_empty() {
            return Err(Error::Validation(format!(
                "series with empty, non-finite or negative values: {bad_values:?}"
            )));
        }

        // Report series that disagree with the most common length.
        let mut lengths: BTreeMap<usize, usize> = BTreeMap::new();
        for s in &self.series {
            *lengths.entry(s.values.len()).or_default() += 1;
        }
        if lengths.len() > 1 {
            let modal = lengths.iter().max_by_key(|(_, &c)| c).map(|(&l, _)| l).unwrap_or(0);
            let offending: Vec<usize> = self
                .series
                .iter()
                .filter(|s| s.values.len() != modal)
                .map(|s| s.series_id)
                .collect();
            return Err(Error::Validation(format!(
                "inconsistent series lengths (expected {modal}): series {offending:?}"
            )));
        }

        let out_of_vocab: Vec<usize> = self
            .series
            .iter()
            .filter(|s| s.group_id >= self.group_vocab_size || s.element_id >= self.element_vocab_size)
            .map(|s| s.series_id)
            .collect();
        if !out_of_vocab.is_empty() {
            return Err(Error::Validation(format!(
                "series with ids outside the vocabularies ({} groups, {} elements): {out_of_vocab:?}",
                self.group_vocab_size, self.element_vocab_size
            )));
        }

        let mut pairs = HashSet::new();
        let mut ids = HashSet::new();
        for s in &self.series {
            if !pairs.insert((s.group_id, s.element_id)) {
                return Err(Error::Validation(format!(
                    "duplicate (group {}, element {}) at series {}",
                    s.group_id, s.element_id, s.series_id
                )));
            }
            if !ids.insert(s.series_id) {
                return Err(Error::Validation(format!("duplicate series_id {}", s.series_id)));
            }
        }
        Ok(())
    }
}
