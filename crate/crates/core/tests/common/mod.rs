#![allow(dead_code)]

use lfae::data::LightField;
use lfae::gradcheck::{grad_check, grad_check_where_smooth, GradCheckOptions, GradCheckReport};
use lfae::model::ForwardCache;
use lfae::ops::*;
use lfae::train::{mse_loss, new_adam_state, stack_batch, train_step, AdamConfig};
use lfae::{build_model, Model, ModelConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 4]) -> Tensor<f64> {
    Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0))
}

pub fn random_conv(rng: &mut ChaCha8Rng, dims: [usize; 4], stride: usize) -> ConvParams<f64> {
    let bias = (0..dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ConvParams::new(random_tensor(rng, dims), bias, stride).unwrap()
}

/// Like [`random_conv`] for the transposed layout `(in, out, k, k)`.
pub fn random_transpose(rng: &mut ChaCha8Rng, dims: [usize; 4], stride: usize) -> ConvParams<f64> {
    let bias = (0..dims[1]).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ConvParams::new(random_tensor(rng, dims), bias, stride).unwrap()
}

/// Smooth textured scene seen from a `grid`×`grid` camera array; each view is
/// shifted horizontally and vertically by `disparity` pixels per grid step.
pub fn synthetic_field(grid: usize, size: usize, disparity: f32, phase: f32) -> LightField {
    let mid = (grid / 2) as f32;
    let tau = std::f32::consts::TAU;
    LightField::from_fn(grid, grid, size, |r, c, y, x, ch| {
        let u = x as f32 + disparity * (c as f32 - mid);
        let v = y as f32 + disparity * (r as f32 - mid);
        let s = size as f32;
        let a = (tau * (u / s + phase)).sin() * (tau * (v / s * 0.5 + 0.3 * phase)).cos();
        0.5 + 0.35 * a * (0.6 + 0.2 * ch as f32)
    })
}

pub fn noise_field(rng: &mut ChaCha8Rng, grid: usize, size: usize) -> LightField {
    LightField::from_fn(grid, grid, size, |_, _, _, _, _| rng.gen_range(0.0..1.0))
}

/// Direct quadruple loop over the convolution definition.
pub fn direct_conv2d(x: &Tensor<f64>, p: &ConvParams<f64>) -> Tensor<f64> {
    let [b, c, h, w] = x.shape();
    let [o, _, k, _] = p.weights.shape();
    let s = p.stride;
    let (oh, ow) = ((h - k) / s + 1, (w - k) / s + 1);
    let mut out = Tensor::zeros([b, o, oh, ow]);
    for n in 0..b {
        for oc in 0..o {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = p.bias[oc];
                    for ic in 0..c {
                        for di in 0..k {
                            for dj in 0..k {
                                acc += x.at(n, ic, i * s + di, j * s + dj) * p.weights.at(oc, ic, di, dj);
                            }
                        }
                    }
                    out.set(n, oc, i, j, acc);
                }
            }
        }
    }
    out
}

/// Direct scatter form of the transposed convolution.
pub fn direct_conv_transpose2d(x: &Tensor<f64>, p: &ConvParams<f64>) -> Tensor<f64> {
    let [b, c, h, w] = x.shape();
    let [_, o, k, _] = p.weights.shape();
    let s = p.stride;
    let (oh, ow) = ((h - 1) * s + k, (w - 1) * s + k);
    let mut out = Tensor::zeros([b, o, oh, ow]);
    for n in 0..b {
        for oc in 0..o {
            for i in 0..oh {
                for j in 0..ow {
                    out.set(n, oc, i, j, p.bias[oc]);
                }
            }
        }
        for ic in 0..c {
            for i in 0..h {
                for j in 0..w {
                    for oc in 0..o {
                        for di in 0..k {
                            for dj in 0..k {
                                let v = out.at(n, oc, i * s + di, j * s + dj)
                                    + x.at(n, ic, i, j) * p.weights.at(ic, oc, di, dj);
                                out.set(n, oc, i * s + di, j * s + dj, v);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn with_weights(p: &ConvParams<f64>, w: &[f64]) -> ConvParams<f64> {
    let mut q = p.clone();
    q.weights.data_mut().copy_from_slice(w);
    q
}

fn with_bias(p: &ConvParams<f64>, b: &[f64]) -> ConvParams<f64> {
    let mut q = p.clone();
    q.bias.copy_from_slice(b);
    q
}

fn tensor_like(t: &Tensor<f64>, v: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(t.dims(), v.to_vec()).unwrap()
}

/// Checks input, weight and bias gradients of `conv2d` under the linear loss
/// `⟨conv2d(x), r⟩`.
pub fn conv2d_gradient_report(seed: u64, x_dims: [usize; 4], w_dims: [usize; 4], stride: usize) -> GradCheckReport {
    let mut g = rng(seed);
    let x = random_tensor(&mut g, x_dims);
    let p = random_conv(&mut g, w_dims, stride);
    let y = conv2d(&x, &p).unwrap();
    let r = random_tensor(&mut g, y.shape());
    let grads = conv2d_backward(&x, &p, &r).unwrap();
    let opts = GradCheckOptions::default();
    let loss = |x: &Tensor<f64>, p: &ConvParams<f64>| conv2d(x, p).unwrap().dot(&r).unwrap();
    grad_check(|v| loss(&tensor_like(&x, v), &p), x.data(), grads.input.data(), &opts)
        .merge(grad_check(|v| loss(&x, &with_weights(&p, v)), p.weights.data(), grads.weights.data(), &opts))
        .merge(grad_check(|v| loss(&x, &with_bias(&p, v)), &p.bias, &grads.bias, &opts))
}

pub fn conv_transpose2d_gradient_report(
    seed: u64,
    x_dims: [usize; 4],
    w_dims: [usize; 4],
    stride: usize,
) -> GradCheckReport {
    let mut g = rng(seed);
    let x = random_tensor(&mut g, x_dims);
    let p = random_transpose(&mut g, w_dims, stride);
    let y = conv_transpose2d(&x, &p).unwrap();
    let r = random_tensor(&mut g, y.shape());
    let grads = conv_transpose2d_backward(&x, &p, &r).unwrap();
    let opts = GradCheckOptions::default();
    let loss = |x: &Tensor<f64>, p: &ConvParams<f64>| conv_transpose2d(x, p).unwrap().dot(&r).unwrap();
    grad_check(|v| loss(&tensor_like(&x, v), &p), x.data(), grads.input.data(), &opts)
        .merge(grad_check(|v| loss(&x, &with_weights(&p, v)), p.weights.data(), grads.weights.data(), &opts))
        .merge(grad_check(|v| loss(&x, &with_bias(&p, v)), &p.bias, &grads.bias, &opts))
}

/// ReLU on inputs kept at least `1e-3` away from the kink.
pub fn relu_gradient_report(seed: u64, tolerance: f64) -> GradCheckReport {
    let mut g = rng(seed);
    let x = Tensor::from_fn([2, 3, 5, 5], |_| {
        let m: f64 = g.gen_range(1e-3..1.0);
        if g.gen_bool(0.5) {
            m
        } else {
            -m
        }
    });
    let r = random_tensor(&mut g, x.shape());
    let grad = relu_backward(&x, &r).unwrap();
    let opts = GradCheckOptions {
        tolerance,
        ..Default::default()
    };
    grad_check(|v| relu(&tensor_like(&x, v)).dot(&r).unwrap(), x.data(), grad.data(), &opts)
}

pub fn batchnorm_gradient_report(seed: u64) -> GradCheckReport {
    let mut g = rng(seed);
    let x = random_tensor(&mut g, [3, 4, 3, 3]).map(|v| 2.0 * v + 0.5);
    let mut p = BatchNormParams::<f64>::new(4);
    for c in 0..4 {
        p.gamma[c] = g.gen_range(0.5..1.5);
        p.beta[c] = g.gen_range(-0.5..0.5);
    }
    let r = random_tensor(&mut g, x.shape());
    let (_, cache) = batchnorm_batch_stats(&x, &p).unwrap();
    let grads = batchnorm_backward(&cache, &r).unwrap();
    let loss = |x: &Tensor<f64>, p: &BatchNormParams<f64>| batchnorm_batch_stats(x, p).unwrap().0.dot(&r).unwrap();
    let opts = GradCheckOptions::default();
    let gamma_loss = |v: &[f64]| {
        let mut q = p.clone();
        q.gamma.copy_from_slice(v);
        loss(&x, &q)
    };
    let beta_loss = |v: &[f64]| {
        let mut q = p.clone();
        q.beta.copy_from_slice(v);
        loss(&x, &q)
    };
    grad_check(|v| loss(&tensor_like(&x, v), &p), x.data(), grads.input.data(), &opts)
        .merge(grad_check(gamma_loss, &p.gamma, &grads.gamma, &opts))
        .merge(grad_check(beta_loss, &p.beta, &grads.beta, &opts))
}

pub fn mse_gradient_report(seed: u64, tolerance: f64) -> GradCheckReport {
    let mut g = rng(seed);
    let pred = random_tensor(&mut g, [2, 3, 4, 4]);
    let target = random_tensor(&mut g, [2, 3, 4, 4]);
    let (_, grad) = mse_loss(&pred, &target).unwrap();
    let opts = GradCheckOptions {
        tolerance,
        ..Default::default()
    };
    grad_check(
        |v| mse_loss(&tensor_like(&pred, v), &target).unwrap().0,
        pred.data(),
        grad.data(),
        &opts,
    )
}

/// Relative-error denominator floor for the whole-network check. Gradients
/// smaller than this are judged on absolute error below `1e-3 · floor`,
/// which is about the resolution of central differences on this loss.
pub const END_TO_END_FLOOR: f64 = 1e-5;

/// Finite-difference check of the toy model's MSE training objective over a
/// seeded subsample of every parameter tensor and of the input. Perturbations
/// that move any ReLU unit across its kink are skipped.
pub fn end_to_end_gradient_report(cfg: &ModelConfig, batch: usize, per_tensor: usize) -> GradCheckReport {
    let model: Model<f64> = build_model(cfg).unwrap();
    let fields: Vec<LightField> = (0..batch)
        .map(|i| synthetic_field(cfg.grid.0, cfg.spatial, 0.4 + 0.3 * i as f32, 0.29 * i as f32))
        .collect();
    let x = stack_batch::<f64>(&fields).unwrap();
    let mut scratch = model.clone();
    let (out, cache) = scratch.forward_train(&x).unwrap();
    let pattern = cache.relu_pattern();
    let (_, grad_out) = mse_loss(&out, &x).unwrap();
    let grads = model.backward(&cache, &grad_out).unwrap();

    let opts = GradCheckOptions {
        tolerance: 1e-3,
        max_samples: per_tensor,
        floor: END_TO_END_FLOOR,
        ..Default::default()
    };
    let smooth_loss = |m: &mut Model<f64>, input: &Tensor<f64>| {
        let (o, c): (Tensor<f64>, ForwardCache<f64>) = m.forward_train(input).unwrap();
        (c.relu_pattern() == pattern).then(|| mse_loss(&o, &x).unwrap().0)
    };
    let params = model.parameters();
    let mut report: Option<GradCheckReport> = None;
    for (k, p) in params.iter().enumerate() {
        let r = grad_check_where_smooth(
            |v| {
                let mut m = model.clone();
                m.parameters_mut()[k].copy_from_slice(v);
                smooth_loss(&mut m, &x)
            },
            p.values,
            &grads.params[k],
            &GradCheckOptions {
                seed: k as u64,
                ..opts.clone()
            },
        );
        report = Some(match report {
            None => r,
            Some(acc) => acc.merge(r),
        });
    }
    let input = grad_check_where_smooth(
        |v| smooth_loss(&mut model.clone(), &tensor_like(&x, v)),
        x.data(),
        grads.input.data(),
        &GradCheckOptions {
            max_samples: per_tensor * 10,
            ..opts
        },
    );
    report.expect("model has parameters").merge(input)
}

/// Trains the toy model on two fixed synthetic fields with batch 2 and a
/// constant learning rate, then returns the per-step losses and the final
/// train-mode MSE.
pub fn overfit_toy(steps: usize, lr: f64) -> (Vec<f64>, f64) {
    let cfg = ModelConfig::toy();
    let mut model: Model<f32> = build_model(&cfg).unwrap();
    let fields = vec![
        synthetic_field(3, 32, 0.7, 0.0),
        synthetic_field(3, 32, 0.7, 0.37),
    ];
    let x = stack_batch::<f32>(&fields).unwrap();
    let mut state = new_adam_state(&model);
    let adam = AdamConfig::default();
    let losses = (0..steps)
        .map(|_| train_step(&mut model, &x, &mut state, lr, &adam).unwrap())
        .collect();
    let out = model.forward_tensor(&x).unwrap();
    (losses, mse_loss(&out, &x).unwrap().0)
}

/// Kolmogorov–Smirnov distance between `samples` and the uniform law on
/// `(lo, hi)`.
pub fn ks_uniform(mut samples: Vec<f64>, lo: f64, hi: f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            (cdf - i as f64 / n).abs().max((i as f64 + 1.0) / n - cdf)
        })
        .fold(0.0, f64::max)
}

/// Critical KS distance at `alpha = 0.01` for `n` samples (large-n form).
pub fn ks_critical_001(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Brightness shifts recovered from `n` augmented copies of a mid-gray
/// field. Gray is a fixed point of saturation, flips and resizing, so each
/// output is `0.5 + delta` up to rounding.
pub fn observed_brightness_deltas(n: usize, seed: u64) -> Vec<f64> {
    use lfae::data::{sample_augmented, AugmentConfig};
    let lf = LightField::constant(3, 3, 8, [0.5; 3]);
    let cfg = AugmentConfig {
        min_crop: 4,
        ..AugmentConfig::default()
    };
    let mut g = rng(seed);
    (0..n)
        .map(|_| {
            let out = sample_augmented(&lf, &mut g, &cfg);
            out.views()[0].data()[0] as f64 - 0.5
        })
        .collect()
}

/// Feeds `cases` distinct strict prefixes of `bytes` to `read`: every short
/// prefix up to half the budget, then seeded random cut points. Returns the
/// number of prefixes tried, or a description of the first one that did not
/// fail with [`lfae::Error::Truncated`].
pub fn truncated_prefixes_fail<T: std::fmt::Debug>(
    bytes: &[u8],
    cases: usize,
    seed: u64,
    read: impl Fn(&[u8]) -> lfae::Result<T>,
) -> Result<usize, String> {
    let mut cuts: Vec<usize> = (0..bytes.len().min(cases / 2)).collect();
    let mut g = rng(seed);
    while cuts.len() < cases.min(bytes.len()) {
        let cut = g.gen_range(0..bytes.len());
        if !cuts.contains(&cut) {
            cuts.push(cut);
        }
    }
    for &cut in &cuts {
        match read(&bytes[..cut]) {
            Err(lfae::Error::Truncated { .. }) => {}
            other => return Err(format!("prefix of {cut} bytes gave {other:?}")),
        }
    }
    Ok(cuts.len())
}
