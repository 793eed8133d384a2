use std::path::PathBuf;

use super::adam::AdamConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations_per_epoch: usize,
    /// `(first epoch, learning rate)` pairs; epochs strictly increasing,
    /// rates strictly decreasing, first entry at epoch 0.
    pub lr_schedule: Vec<(usize, f64)>,
    pub total_epochs: usize,
    pub adam: AdamConfig,
    /// Write a checkpoint every this many epochs (0 disables).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 4,
            iterations_per_epoch: 30,
            lr_schedule: vec![(0, 0.001), (30, 0.0005), (60, 0.0002), (90, 0.0001)],
            total_epochs: 200,
            adam: AdamConfig::default(),
            checkpoint_every: 10,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.iterations_per_epoch == 0 {
            return Err(Error::Config("iterations per epoch must be at least 1".into()));
        }
        match self.lr_schedule.first() {
            Some(&(0, lr)) if lr >= 0.0 => {}
            _ => {
                return Err(Error::Config(
                    "learning-rate schedule must start at epoch 0 with a non-negative rate".into(),
                ))
            }
        }
        for w in self.lr_schedule.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 >= w[0].1 {
                return Err(Error::Config(format!(
                    "learning-rate schedule must have increasing epochs and decreasing rates: {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.total_epochs * self.iterations_per_epoch
    }

    pub fn lr_for_epoch(&self, epoch: usize) -> f64 {
        lr_for_epoch(&self.lr_schedule, epoch)
    }
}

/// Rate of the latest schedule entry starting at or before `epoch`.
pub fn lr_for_epoch(schedule: &[(usize, f64)], epoch: usize) -> f64 {
    schedule
        .iter()
        .take_while(|&&(start, _)| start <= epoch)
        .last()
        .map(|&(_, lr)| lr)
        .unwrap_or(0.0)
}
