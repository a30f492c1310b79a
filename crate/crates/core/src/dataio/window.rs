use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// One (input window, target window) instance cut from a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSample {
    pub sample_id: usize,
    pub series_id: usize,
    pub group_id: usize,
    pub element_id: usize,
    pub window_start: usize,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleRole {
    Train,
    Test,
}

#[derive(Clone, Debug)]
pub struct SampleSet {
    pub role: SampleRole,
    samples: Vec<TrendSample>,
    position: HashMap<usize, usize>,
}

impl SampleSet {
    pub fn new(role: SampleRole, samples: Vec<TrendSample>) -> Self {
        let position = samples.iter().enumerate().map(|(i, s)| (s.sample_id, i)).collect();
        Self {
            role,
            samples,
            position,
        }
    }

    pub fn samples(&self) -> &[TrendSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, position: usize) -> &TrendSample {
        &self.samples[position]
    }

    /// Position of `sample_id` in this set.
    pub fn position_of(&self, sample_id: usize) -> Option<usize> {
        self.position.get(&sample_id).copied()
    }

    pub fn by_id(&self, sample_id: usize) -> Option<&TrendSample> {
        self.position_of(sample_id).map(|p| &self.samples[p])
    }

    pub fn input_len(&self) -> Option<usize> {
        self.samples.first().map(|s| s.input.len())
    }
}

/// Cuts every stride-1 window of `input_len + output_len` values from each series.
///
/// The window that ends at the last value of a series is its test sample; every
/// earlier window is a training sample. Sample ids are dense over all windows in
/// (series, window_start) order.
pub fn make_samples(dataset: &Dataset, input_len: usize, output_len: usize) -> Result<(SampleSet, SampleSet)> {
    if input_len == 0 || output_len == 0 {
        return Err(Error::Config("input_len and output_len must be >= 1".into()));
    }
    let window = input_len + output_len;
    let required = window + 1;
    let short: Vec<usize> = dataset
        .series
        .iter()
        .filter(|s| s.values.len() < required)
        .map(|s| s.series_id)
        .collect();
    if !short.is_empty() {
        return Err(Error::SeriesTooShort {
            required,
            series_ids: short,
        });
    }

    let mut train = Vec::new();
    let mut test = Vec::with_capacity(dataset.series.len());
    let mut next_id = 0;
    for s in &dataset.series {
        let last_start = s.values.len() - window;
        for start in 0..=last_start {
            let sample = TrendSample {
                sample_id: next_id,
                series_id: s.series_id,
                group_id: s.group_id,
                element_id: s.element_id,
                window_start: start,
                input: s.values[start..start + input_len].to_vec(),
                target: s.values[start + input_len..start + window].to_vec(),
            };
            next_id += 1;
            if start == last_start {
                test.push(sample);
            } else {
                train.push(sample);
            }
        }
    }
    Ok((SampleSet::new(SampleRole::Train, train), SampleSet::new(SampleRole::Test, test)))
}
