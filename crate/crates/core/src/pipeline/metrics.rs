use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::KernConfig;

/// Targets with magnitude at or below this are left out of MAPE.
pub const MAPE_EPSILON: f64 = 1e-6;

fn check_shapes(predictions: &[Vec<f64>], targets: &[Vec<f64>], what: &str) -> Result<()> {
    if predictions.len() != targets.len() {
        return Err(Error::Invalid(format!(
            "{what}: {} prediction rows but {} target rows",
            predictions.len(),
            targets.len()
        )));
    }
    for (i, (p, t)) in predictions.iter().zip(targets).enumerate() {
        if p.len() != t.len() {
            return Err(Error::Invalid(format!(
                "{what}: row {i} has {} predictions but {} targets",
                p.len(),
                t.len()
            )));
        }
    }
    Ok(())
}

/// Mean absolute error over every sample and horizon step.
pub fn mae(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    check_shapes(predictions, targets, "mae")?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        for (a, b) in p.iter().zip(t) {
            sum += (a - b).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Invalid("mae of an empty batch".into()));
    }
    Ok(sum / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mape {
    /// Percent.
    pub value: f64,
    pub excluded: usize,
}

/// Mean absolute percentage error over points with `|target| > epsilon`.
pub fn mape(predictions: &[Vec<f64>], targets: &[Vec<f64>], epsilon: f64) -> Result<Mape> {
    check_shapes(predictions, targets, "mape")?;
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut excluded = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        for (a, b) in p.iter().zip(t) {
            if b.abs() <= epsilon {
                excluded += 1;
            } else {
                sum += (a - b).abs() / b.abs();
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Invalid(format!(
            "mape: all {excluded} targets are within {epsilon} of zero"
        )));
    }
    Ok(Mape {
        value: 100.0 * sum / n as f64,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub mape: f64,
    pub mape_excluded: usize,
    /// MAE of each horizon step.
    pub per_step_mae: Vec<f64>,
    pub samples: usize,
    pub config: KernConfig,
}

impl MetricsReport {
    pub fn compute(predictions: &[Vec<f64>], targets: &[Vec<f64>], config: &KernConfig) -> Result<Self> {
        let mae_all = mae(predictions, targets)?;
        let m = mape(predictions, targets, MAPE_EPSILON)?;
        let steps = targets.first().map_or(0, Vec::len);
        let per_step_mae = (0..steps)
            .map(|s| {
                let col = |rows: &[Vec<f64>]| rows.iter().map(|r| vec![r[s]]).collect::<Vec<_>>();
                mae(&col(predictions), &col(targets))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            mae: mae_all,
            mape: m.value,
            mape_excluded: m.excluded,
            per_step_mae,
            samples: predictions.len(),
            config: config.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}
