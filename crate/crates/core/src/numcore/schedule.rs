use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step decay: the rate is multiplied by `gamma` every `decay_interval` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr0: f64,
    pub decay_interval: usize,
    pub gamma: f64,
    pub enabled: bool,
}

impl LrSchedule {
    pub fn new(lr0: f64, decay_interval: usize, gamma: f64, enabled: bool) -> Result<Self> {
        if !(lr0 > 0.0 && lr0.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {lr0}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("lr_decay_gamma must be in (0, 1], got {gamma}")));
        }
        if decay_interval == 0 {
            return Err(Error::Config("lr_decay_interval must be >= 1".into()));
        }
        Ok(Self {
            lr0,
            decay_interval,
            gamma,
            enabled,
        })
    }

    /// Learning rate for a 1-based epoch.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        debug_assert!(epoch >= 1, "epochs are 1-based");
        if !self.enabled {
            return self.lr0;
        }
        let decays = epoch.saturating_sub(1) / self.decay_interval;
        self.lr0 * self.gamma.powi(decays as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs()
    }

    #[test]
    fn table_defaults() {
        let fit = LrSchedule::new(0.001, 10, 0.1, true).unwrap();
        assert!(rel_close(fit.lr_at_epoch(12), 0.0001));
        assert_eq!(fit.lr_at_epoch(1), 0.001);
        assert_eq!(fit.lr_at_epoch(10), 0.001);
        assert!(rel_close(fit.lr_at_epoch(11), 0.0001));

        let geo = LrSchedule::new(0.001, 15, 0.1, true).unwrap();
        assert!(rel_close(geo.lr_at_epoch(20), 0.0001));
        assert_eq!(geo.lr_at_epoch(15), 0.001);
    }

    #[test]
    fn disabled_is_constant() {
        let s = LrSchedule::new(0.001, 10, 0.1, false).unwrap();
        for epoch in [1, 11, 50, 1000] {
            assert_eq!(s.lr_at_epoch(epoch), 0.001);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(LrSchedule::new(0.0, 10, 0.1, true).is_err());
        assert!(LrSchedule::new(0.001, 0, 0.1, true).is_err());
        assert!(LrSchedule::new(0.001, 10, 0.0, true).is_err());
        assert!(LrSchedule::new(0.001, 10, 1.5, true).is_err());
        assert!(LrSchedule::new(0.001, 10, 1.0, true).is_ok());
    }
}
