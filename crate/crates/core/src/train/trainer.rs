use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::config::TrainConfig;
use super::loss::mse_loss;
use crate::codec::{save_checkpoint, Checkpoint};
use crate::data::{sample_augmented, stack_views, AugmentConfig, LightField};
use crate::error::{Error, Result};
use crate::model::{Mode, Model};
use crate::tensor::{Scalar, Tensor};

/// Source of training batches. `batch` must be a pure function of its
/// arguments so that training can resume at any iteration.
pub trait Sampler {
    fn batch(&self, iteration: u64, size: usize) -> Result<Vec<LightField>>;
}

/// Cycles through a fixed list of light fields without augmentation.
pub struct FixedSampler {
    fields: Vec<LightField>,
}

impl FixedSampler {
    pub fn new(fields: Vec<LightField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Config("sampler needs at least one light field".into()));
        }
        Ok(Self { fields })
    }
}

impl Sampler for FixedSampler {
    fn batch(&self, iteration: u64, size: usize) -> Result<Vec<LightField>> {
        let n = self.fields.len();
        let start = iteration as usize * size;
        Ok((0..size).map(|j| self.fields[(start + j) % n].clone()).collect())
    }
}

/// Draws base fields uniformly and augments each one. Iteration `i` uses
/// ChaCha stream `i` of `augment.seed`, so batches never repeat state and any
/// iteration can be regenerated on its own.
pub struct AugmentedSampler {
    fields: Vec<LightField>,
    augment: AugmentConfig,
}

impl AugmentedSampler {
    pub fn new(fields: Vec<LightField>, augment: AugmentConfig) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::Config("sampler needs at least one light field".into()))?;
        augment.validate(first.size())?;
        Ok(Self { fields, augment })
    }
}

impl Sampler for AugmentedSampler {
    fn batch(&self, iteration: u64, size: usize) -> Result<Vec<LightField>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.augment.seed);
        rng.set_stream(iteration);
        Ok((0..size)
            .map(|_| {
                let base = &self.fields[rng.gen_range(0..self.fields.len())];
                sample_augmented(base, &mut rng, &self.augment)
            })
            .collect())
    }
}

pub fn stack_batch<T: Scalar>(batch: &[LightField]) -> Result<Tensor<T>> {
    let samples: Vec<Tensor<T>> = batch.iter().map(stack_views).collect();
    Tensor::stack(&samples)
}

/// One forward, MSE, backward and Adam update. Returns the loss of the
/// pre-update model on `batch`.
pub fn train_iteration<T: Scalar>(
    model: &mut Model<T>,
    batch: &[LightField],
    state: &mut AdamState<T>,
    lr: f64,
    adam: &AdamConfig,
) -> Result<f64> {
    let x = stack_batch::<T>(batch)?;
    train_step(model, &x, state, lr, adam)
}

/// [`train_iteration`] on an already stacked batch.
pub fn train_step<T: Scalar>(
    model: &mut Model<T>,
    x: &Tensor<T>,
    state: &mut AdamState<T>,
    lr: f64,
    adam: &AdamConfig,
) -> Result<f64> {
    if model.mode() != Mode::Train {
        return Err(Error::Config("model must be in train mode to train".into()));
    }
    let (out, cache) = model.forward_train(x)?;
    let (loss, grad) = mse_loss(&out, x)?;
    let grads = model.backward(&cache, &grad)?;
    adam_step(&mut model.parameters_mut(), &grads.params, state, lr, adam);
    Ok(loss)
}

pub fn new_adam_state<T: Scalar>(model: &Model<T>) -> AdamState<T> {
    AdamState::new(model.parameters().iter().map(|p| p.values.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// `epoch,lr,train_mse,test_mse`, with an empty test field when unset.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_mse,test_mse\n");
        for r in &self.records {
            let test = r.test_mse.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.lr, r.train_mse, test);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Mean eval-mode reconstruction MSE over `fields`.
pub fn test_mse(model: &Model<f32>, fields: &[LightField]) -> Result<f64> {
    let mut total = 0.0;
    for lf in fields {
        let x = stack_views::<f32>(lf);
        let out = model.forward_tensor(&x)?;
        total += mse_loss(&out, &x)?.0;
    }
    Ok(total / fields.len() as f64)
}

/// Owns the model and optimizer for a (possibly resumed) training run.
pub struct Trainer {
    pub model: Model<f32>,
    pub adam: AdamState<f32>,
    pub config: TrainConfig,
    pub epochs_done: usize,
    pub history: TrainHistory,
}

impl Trainer {
    pub fn new(mut model: Model<f32>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        model.set_mode(Mode::Train);
        Ok(Self {
            adam: new_adam_state(&model),
            model,
            config,
            epochs_done: 0,
            history: TrainHistory::default(),
        })
    }

    /// Continues from a checkpoint. A checkpoint without optimizer state
    /// restarts the Adam moments from zero.
    pub fn resume(ckpt: Checkpoint, config: TrainConfig) -> Result<Self> {
        let mut trainer = Self::new(ckpt.model, config)?;
        if let Some(adam) = ckpt.adam {
            trainer.adam = adam;
        }
        trainer.epochs_done = ckpt.trained_epochs as usize;
        Ok(trainer)
    }

    pub fn run_epoch(
        &mut self,
        sampler: &dyn Sampler,
        test: Option<&[LightField]>,
    ) -> Result<EpochRecord> {
        let epoch = self.epochs_done;
        let lr = self.config.lr_for_epoch(epoch);
        let iters = self.config.iterations_per_epoch;
        let mut sum = 0.0;
        for i in 0..iters {
            let iteration = (epoch * iters + i) as u64;
            let batch = sampler.batch(iteration, self.config.batch_size)?;
            sum += train_iteration(&mut self.model, &batch, &mut self.adam, lr, &self.config.adam)?;
        }
        let test_mse = match test {
            Some(fields) if !fields.is_empty() => {
                self.model.set_mode(Mode::Eval);
                let result = test_mse(&self.model, fields);
                self.model.set_mode(Mode::Train);
                Some(result?)
            }
            _ => None,
        };
        self.epochs_done += 1;
        let record = EpochRecord {
            epoch,
            lr,
            train_mse: sum / iters as f64,
            test_mse,
        };
        self.history.records.push(record);
        Ok(record)
    }

    /// Trains until `config.total_epochs`, writing periodic checkpoints.
    pub fn run(
        &mut self,
        sampler: &dyn Sampler,
        test: Option<&[LightField]>,
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<()> {
        if let Some(dir) = &self.config.checkpoint_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        while self.epochs_done < self.config.total_epochs {
            let record = self.run_epoch(sampler, test)?;
            on_epoch(&record);
            let every = self.config.checkpoint_every;
            if let (Some(dir), true) = (&self.config.checkpoint_dir, every > 0) {
                if self.epochs_done.is_multiple_of(every) {
                    let path = dir.join(format!("epoch_{:04}.lfck", self.epochs_done));
                    save_checkpoint(&self.model, Some(&self.adam), self.epochs_done as u64, &path)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs `cfg.total_epochs` epochs from a fresh optimizer state.
pub fn train(
    model: Model<f32>,
    sampler: &dyn Sampler,
    cfg: &TrainConfig,
    test: Option<&[LightField]>,
) -> Result<(Model<f32>, TrainHistory)> {
    let mut trainer = Trainer::new(model, cfg.clone())?;
    trainer.run(sampler, test, |_| {})?;
    Ok((trainer.model, trainer.history))
}
