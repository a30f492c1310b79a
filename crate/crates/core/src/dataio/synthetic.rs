use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, TrendSeries};
use crate::error::{Error, Result};

/// Weekly bins per seasonal cycle.
pub const SEASONAL_PERIOD: f64 = 52.0;
pub const NOISE_STD: f64 = 0.01;

/// Parameters of a seeded seasonal dataset.
///
/// Each (group, element) series is
/// `clip(base + amp * sin(2*pi*(t + phase) / 52) + slope * t + noise, 0, 1)`.
/// With `phase_categories = Some(c)`, elements with equal `element_id % c`
/// share one seasonal phase, matching the modulo taxonomy used for synthetic
/// data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub num_groups: usize,
    pub num_elements: usize,
    pub length: usize,
    pub seed: u64,
    pub phase_categories: Option<usize>,
}

impl SyntheticSpec {
    pub fn new(num_groups: usize, num_elements: usize, length: usize, seed: u64) -> Self {
        Self {
            num_groups,
            num_elements,
            length,
            seed,
            phase_categories: None,
        }
    }

    pub fn with_phase_categories(mut self, categories: usize) -> Self {
        self.phase_categories = Some(categories);
        self
    }

    pub fn generate(&self) -> Result<Dataset> {
        if self.num_groups == 0 || self.num_elements == 0 || self.length == 0 {
            return Err(Error::Config(format!(
                "synthetic dataset needs positive counts, got {} groups, {} elements, length {}",
                self.num_groups, self.num_elements, self.length
            )));
        }
        if self.phase_categories == Some(0) {
            return Err(Error::Config("phase_categories must be >= 1".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, NOISE_STD).expect("valid std");
        let shared_phase: Vec<f64> = (0..self.phase_categories.unwrap_or(0))
            .map(|_| rng.random_range(0.0..SEASONAL_PERIOD))
            .collect();

        let mut series = Vec::with_capacity(self.num_groups * self.num_elements);
        for group in 0..self.num_groups {
            for element in 0..self.num_elements {
                let base = rng.random_range(0.2..0.5);
                let amp = rng.random_range(0.05..0.2);
                let own_phase = rng.random_range(0.0..SEASONAL_PERIOD);
                let slope = rng.random_range(-0.001..0.001);
                let phase = match self.phase_categories {
                    Some(c) => shared_phase[element % c],
                    None => own_phase,
                };
                let values = (0..self.length)
                    .map(|t| {
                        let t = t as f64;
                        let clean = base + amp * (2.0 * PI * (t + phase) / SEASONAL_PERIOD).sin() + slope * t;
                        (clean + noise.sample(&mut rng)).clamp(0.0, 1.0)
                    })
                    .collect();
                series.push(TrendSeries {
                    series_id: series.len(),
                    group_id: group,
                    element_id: element,
                    values,
                });
            }
        }
        Dataset::new(series, self.num_groups, self.num_elements, "week")
    }
}

pub fn generate_synthetic(num_groups: usize, num_elements: usize, length: usize, seed: u64) -> Result<Dataset> {
    SyntheticSpec::new(num_groups, num_elements, length, seed).generate()
}
