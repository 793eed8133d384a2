mod common;

use common::*;
use lfae::codec::{read_checkpoint, write_checkpoint, Checkpoint};
use lfae::data::{AugmentConfig, LightField};
use lfae::train::*;
use lfae::{build_model, Mode, Model, ModelConfig};

fn toy_fields() -> Vec<LightField> {
    (0..3).map(|i| synthetic_field(3, 32, 0.6, 0.2 * i as f32)).collect()
}

fn sampler() -> AugmentedSampler {
    let augment = AugmentConfig {
        min_crop: 20,
        seed: 5,
        ..AugmentConfig::default()
    };
    AugmentedSampler::new(toy_fields(), augment).unwrap()
}

fn short_run(epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 2,
        iterations_per_epoch: 3,
        lr_schedule: vec![(0, 1e-3), (2, 5e-4)],
        total_epochs: epochs,
        checkpoint_every: 0,
        ..TrainConfig::default()
    }
}

fn toy_model() -> Model<f32> {
    build_model(&ModelConfig::toy()).unwrap()
}

#[test]
fn default_run_is_six_thousand_iterations() {
    let cfg = TrainConfig::default();
    assert_eq!(cfg.total_iterations(), 6000);
    assert_eq!(cfg.lr_for_epoch(0), 1e-3);
    assert_eq!(cfg.lr_for_epoch(30), 5e-4);
    assert_eq!(cfg.lr_for_epoch(75), 2e-4);
    assert_eq!(cfg.lr_for_epoch(199), 1e-4);
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let s = sampler();
    let (straight, history) = train(toy_model(), &s, &short_run(4), None).unwrap();

    let mut first = Trainer::new(toy_model(), short_run(2)).unwrap();
    first.run(&s, None, |_| {}).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(&first.model, Some(&first.adam), first.epochs_done as u64, &mut bytes).unwrap();
    let ck: Checkpoint = read_checkpoint(&bytes[..]).unwrap();
    let mut resumed = Trainer::resume(ck, short_run(4)).unwrap();
    resumed.run(&s, None, |_| {}).unwrap();

    assert_eq!(resumed.model, straight);
    let tail: Vec<_> = history.records[2..].to_vec();
    assert_eq!(resumed.history.records, tail);
    assert_eq!(first.history.records, history.records[..2].to_vec());
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let model = toy_model();
    let cfg = TrainConfig {
        lr_schedule: vec![(0, 0.0)],
        ..short_run(2)
    };
    let (after, history) = train(model.clone(), &sampler(), &cfg, None).unwrap();
    assert_eq!(history.records.len(), 2);
    for (a, b) in after.parameters().iter().zip(model.parameters().iter()) {
        assert_eq!(a.values, b.values, "{}", a.name);
    }
}

#[test]
fn zero_epochs_do_nothing() {
    let model = toy_model();
    let (after, history) = train(model.clone(), &sampler(), &short_run(0), None).unwrap();
    assert!(history.records.is_empty());
    assert_eq!(after, model);
}

#[test]
fn loss_trends_down_after_warmup() {
    let (losses, _) = overfit_toy(300, 1e-3);
    let means: Vec<f64> = losses[100..].chunks(50).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    for pair in means.windows(2) {
        assert!(pair[1] < pair[0], "window means {means:?}");
    }
}

#[test]
fn eval_mode_models_refuse_to_train() {
    let mut model = toy_model().eval();
    let mut adam = new_adam_state(&model);
    let batch = sampler().batch(0, 2).unwrap();
    assert!(train_iteration(&mut model, &batch, &mut adam, 1e-3, &AdamConfig::default()).is_err());
}

#[test]
fn sampler_batches_depend_only_on_the_iteration() {
    let s = sampler();
    assert_eq!(s.batch(17, 2).unwrap(), s.batch(17, 2).unwrap());
    assert_ne!(s.batch(17, 2).unwrap(), s.batch(18, 2).unwrap());
    let other = AugmentedSampler::new(
        toy_fields(),
        AugmentConfig {
            min_crop: 20,
            seed: 6,
            ..AugmentConfig::default()
        },
    )
    .unwrap();
    assert_ne!(s.batch(17, 2).unwrap(), other.batch(17, 2).unwrap());
}

#[test]
fn checkpoints_and_history_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        checkpoint_every: 2,
        checkpoint_dir: Some(dir.path().join("ck")),
        ..short_run(4)
    };
    let mut trainer = Trainer::new(toy_model(), cfg).unwrap();
    let test = toy_fields();
    let mut seen = Vec::new();
    trainer.run(&sampler(), Some(&test), |r| seen.push(r.epoch)).unwrap();
    assert_eq!(seen, vec![0, 1, 2, 3]);
    assert!(dir.path().join("ck/epoch_0002.lfck").is_file());
    let last = lfae::codec::load_checkpoint(&dir.path().join("ck/epoch_0004.lfck")).unwrap();
    assert_eq!(last.trained_epochs, 4);
    assert_eq!(last.model, trainer.model);
    assert_eq!(trainer.model.mode(), Mode::Train);
    assert!(trainer.history.records.iter().all(|r| r.test_mse.is_some()));

    let csv_path = dir.path().join("history.csv");
    trainer.history.write_csv(&csv_path).unwrap();
    let csv = std::fs::read_to_string(csv_path).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("epoch,lr,train_mse,test_mse\n0,0.001,"));
}

#[test]
fn invalid_schedules_are_rejected() {
    let cfg = TrainConfig {
        lr_schedule: vec![(0, 1e-3), (5, 2e-3)],
        ..TrainConfig::default()
    };
    assert!(Trainer::new(toy_model(), cfg).is_err());
    let cfg = TrainConfig {
        lr_schedule: vec![(3, 1e-3)],
        ..TrainConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn adam_matches_a_scalar_reference() {
    let cfg = AdamConfig::default();
    let grads_seq = [[0.5, -2.0, 0.0], [0.1, 0.3, -1e-3], [-0.7, 0.2, 4.0]];
    let mut params = vec![1.0f64, -1.0, 0.25];
    let mut state = AdamState::<f64>::new([3]);
    let (mut m, mut v, mut p) = ([0.0f64; 3], [0.0f64; 3], [1.0f64, -1.0, 0.25]);
    for (t, g) in grads_seq.iter().enumerate() {
        adam_step(&mut [&mut params[..]], &[g.to_vec()], &mut state, 0.01, &cfg);
        for i in 0..3 {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            let mh = m[i] / (1.0 - 0.9f64.powi(t as i32 + 1));
            let vh = v[i] / (1.0 - 0.999f64.powi(t as i32 + 1));
            p[i] -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        for i in 0..3 {
            assert!((params[i] - p[i]).abs() < 1e-15, "step {t}: {params:?} vs {p:?}");
        }
    }
    assert_eq!(state.step, 3);
}

#[test]
fn test_mse_is_measured_in_eval_mode() {
    let model = toy_model().eval();
    let fields = toy_fields();
    let direct: f64 = fields
        .iter()
        .map(|lf| {
            let x = lfae::data::stack_views::<f32>(lf);
            mse_loss(&model.forward_tensor(&x).unwrap(), &x).unwrap().0
        })
        .sum::<f64>()
        / 3.0;
    assert_eq!(test_mse(&model, &fields).unwrap(), direct);
}
