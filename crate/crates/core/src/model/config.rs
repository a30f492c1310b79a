use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRIPLET_LAMBDA_GRID: [f64; 6] = [0.0001, 0.0002, 0.001, 0.002, 0.01, 0.02];
pub const SAMPLE_RANGE_GRID: [usize; 4] = [50, 100, 500, 1000];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionLoss {
    /// Mean absolute error.
    #[default]
    Mae,
    /// Mean squared error.
    Mse,
}

/// Architecture and loss settings of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernConfig {
    pub input_len: usize,
    pub output_len: usize,
    pub ext_kg: bool,
    pub int_kg: bool,
    pub triplet_lambda: f64,
    pub sample_range: usize,
    pub feat_size: usize,
    pub rnn_hidden_size: usize,
    pub margin: f64,
    pub seed: u64,
    #[serde(default)]
    pub regression_loss: RegressionLoss,
}

impl Default for KernConfig {
    fn default() -> Self {
        Self {
            input_len: 52,
            output_len: 26,
            ext_kg: true,
            int_kg: true,
            triplet_lambda: 0.002,
            sample_range: 500,
            feat_size: 10,
            rnn_hidden_size: 50,
            margin: 0.5,
            seed: 0,
            regression_loss: RegressionLoss::Mae,
        }
    }
}

impl KernConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.input_len == 0 || self.output_len == 0 {
            return fail(format!(
                "input_len and output_len must be >= 1 (got {}, {})",
                self.input_len, self.output_len
            ));
        }
        if self.feat_size == 0 || self.rnn_hidden_size == 0 {
            return fail(format!(
                "feat_size and rnn_hidden_size must be >= 1 (got {}, {})",
                self.feat_size, self.rnn_hidden_size
            ));
        }
        if !(self.triplet_lambda >= 0.0 && self.triplet_lambda.is_finite()) {
            return fail(format!("triplet_lambda must be >= 0, got {}", self.triplet_lambda));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return fail(format!("margin must be > 0, got {}", self.margin));
        }
        if self.int_kg && self.sample_range == 0 {
            return fail("sample_range must be >= 1".into());
        }
        Ok(())
    }

    /// Width of the per-step LSTM input: the value plus one embedding per feature id.
    pub fn input_dim(&self) -> usize {
        1 + self.feature_count() * self.feat_size
    }

    pub fn feature_count(&self) -> usize {
        if self.ext_kg {
            3
        } else {
            2
        }
    }

    /// Non-fatal notes for values outside the tuning grids.
    pub fn grid_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !TRIPLET_LAMBDA_GRID.contains(&self.triplet_lambda) {
            out.push(format!(
                "triplet_lambda {} is outside the tuning grid {TRIPLET_LAMBDA_GRID:?}",
                self.triplet_lambda
            ));
        }
        if !SAMPLE_RANGE_GRID.contains(&self.sample_range) {
            out.push(format!(
                "sample_range {} is outside the tuning grid {SAMPLE_RANGE_GRID:?}",
                self.sample_range
            ));
        }
        out
    }
}

/// Embedding table sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSizes {
    pub element: usize,
    pub group: usize,
    /// Present iff external knowledge is on.
    pub category: Option<usize>,
}
