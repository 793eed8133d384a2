//! Layered run settings: command-line flag, then config file, then default.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use lfae::data::{AugmentConfig, DEFAULT_PATTERN};
use lfae::train::TrainConfig;
use lfae::ModelConfig;
use serde::Deserialize;

/// Every tunable value. `None` means "not set at this layer".
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Seed for weight init and augmentation [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Views per grid side [default: 9]
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    /// View side length in pixels [default: 512]
    #[arg(long, global = true)]
    pub spatial: Option<usize>,

    /// Encoder channel schedule, five comma-separated widths [default: 128,256,512,1024,2048]
    #[arg(long, global = true, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,

    /// Decoder output channels before the center view is appended [default: 240]
    #[arg(long, global = true)]
    pub decoder_out: Option<usize>,

    /// View file name pattern inside a light-field directory
    #[arg(long, global = true)]
    pub pattern: Option<String>,

    /// Training epochs [default: 200]
    #[arg(long, global = true)]
    pub epochs: Option<usize>,

    /// Iterations per epoch [default: 30]
    #[arg(long, global = true)]
    pub iters_per_epoch: Option<usize>,

    /// Light fields per batch [default: 4]
    #[arg(long, global = true)]
    pub batch: Option<usize>,

    /// Learning-rate schedule as epoch:rate pairs [default: 0:0.001,30:0.0005,60:0.0002,90:0.0001]
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_stage)]
    pub lr_schedule: Option<Vec<(usize, f64)>>,

    /// Checkpoint interval in epochs, 0 for none [default: 10]
    #[arg(long, global = true)]
    pub checkpoint_every: Option<usize>,

    /// Smallest random crop side [default: 256, capped at the view size]
    #[arg(long, global = true)]
    pub min_crop: Option<usize>,

    #[arg(skip)]
    pub brightness: Option<(f32, f32)>,
    #[arg(skip)]
    pub saturation: Option<(f32, f32)>,
    #[arg(skip)]
    pub flip_probability: Option<f64>,
}

fn parse_stage(s: &str) -> Result<(usize, f64), String> {
    let (epoch, lr) = s.split_once(':').ok_or_else(|| format!("expected epoch:rate, got {s:?}"))?;
    let epoch = epoch.trim().parse().map_err(|_| format!("bad epoch in {s:?}"))?;
    let lr = lr.trim().parse().map_err(|_| format!("bad rate in {s:?}"))?;
    Ok((epoch, lr))
}

macro_rules! layer {
    ($self:ident, $lower:ident, $($field:ident),*) => {
        Settings { $($field: $self.$field.or($lower.$field)),* }
    };
}

impl Settings {
    /// Reads a TOML file of `key = value` lines using the long flag names
    /// with underscores, e.g. `iters_per_epoch = 30`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fills every unset value from `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        layer!(
            self,
            lower,
            seed,
            grid,
            spatial,
            schedule,
            decoder_out,
            pattern,
            epochs,
            iters_per_epoch,
            batch,
            lr_schedule,
            checkpoint_every,
            min_crop,
            brightness,
            saturation,
            flip_probability
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn model_grid(&self) -> usize {
        self.grid.unwrap_or(ModelConfig::default().grid.0)
    }

    pub fn pattern(&self) -> &str {
        self.pattern.as_deref().unwrap_or(DEFAULT_PATTERN)
    }

    pub fn model(&self) -> Result<ModelConfig> {
        let base = ModelConfig::default();
        let grid = self.grid.unwrap_or(base.grid.0);
        let cfg = ModelConfig {
            grid: (grid, grid),
            spatial: self.spatial.unwrap_or(base.spatial),
            channel_schedule: self.schedule.clone().unwrap_or(base.channel_schedule),
            decoder_out_channels: self.decoder_out.unwrap_or(base.decoder_out_channels),
            init_seed: self.seed(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let base = TrainConfig::default();
        let cfg = TrainConfig {
            batch_size: self.batch.unwrap_or(base.batch_size),
            iterations_per_epoch: self.iters_per_epoch.unwrap_or(base.iterations_per_epoch),
            lr_schedule: self.lr_schedule.clone().unwrap_or(base.lr_schedule),
            total_epochs: self.epochs.unwrap_or(base.total_epochs),
            checkpoint_every: self.checkpoint_every.unwrap_or(base.checkpoint_every),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn augment(&self, view_size: usize) -> Result<AugmentConfig> {
        let base = AugmentConfig::default();
        let cfg = AugmentConfig {
            brightness_range: self.brightness.unwrap_or(base.brightness_range),
            saturation_range: self.saturation.unwrap_or(base.saturation_range),
            min_crop: self.min_crop.unwrap_or(base.min_crop.min(view_size)),
            flip_probability: self.flip_probability.unwrap_or(base.flip_probability),
            seed: self.seed(),
        };
        cfg.validate(view_size)?;
        Ok(cfg)
    }

    /// Model-shape keys that were set, for warning when a checkpoint fixes them.
    pub fn model_keys_set(&self) -> bool {
        self.grid.is_some() || self.spatial.is_some() || self.schedule.is_some() || self.decoder_out.is_some()
    }
}

/// Merges flags over an optional config file over the defaults.
pub fn resolve(flags: Settings, file: Option<&Path>) -> Result<Settings> {
    let from_file = match file {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    if let Some(s) = &from_file.lr_schedule {
        if s.is_empty() {
            bail!("lr_schedule in config file is empty");
        }
    }
    Ok(flags.over(from_file))
}
