//! Training schedule and learning-rate halving.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Fme,
    Dsr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub learning_rate: f64,
    /// Halve the learning rate after this many consecutive epochs without
    /// validation improvement.
    pub halve_patience: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        // Desk-scale defaults; the reference settings are batch 16 over 80
        // epochs.
        Self { learning_rate: 2e-4, halve_patience: 5, batch_size: 4, max_epochs: 30 }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.learning_rate <= 0.0 {
            return Err(CoreError::Config("learning rate must be positive".into()));
        }
        if self.halve_patience == 0 {
            return Err(CoreError::Config("halve_patience must be at least 1".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(CoreError::Config("batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Tracks validation loss; reports when the learning rate should halve.
#[derive(Debug, Clone)]
pub struct LrScheduler {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

impl LrScheduler {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None, stale: 0 }
    }

    /// Observes one epoch's validation loss; `true` means halve now.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        match self.best {
            None => {
                self.best = Some(val_loss);
                false
            }
            Some(best) if val_loss < best => {
                self.best = Some(val_loss);
                self.stale = 0;
                false
            }
            Some(_) => {
                self.stale += 1;
                if self.stale >= self.patience {
                    self.stale = 0;
                    true
                } else {
                    false
                }
            }
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}
