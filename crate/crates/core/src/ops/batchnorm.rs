//! Per-channel batch normalization over `(batch, height, width)`.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub epsilon: T,
    /// Weight of the newest batch in the running-statistics average.
    pub momentum: T,
}

impl<T: Scalar> BatchNormParams<T> {
    /// `gamma = 1`, `beta = 0`, running statistics `(0, 1)`.
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            epsilon: T::from_f64_lossy(DEFAULT_EPSILON),
            momentum: T::from_f64_lossy(DEFAULT_MOMENTUM),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, op: &'static str, x: &Tensor<T>) -> Result<()> {
        if x.dims().channels != self.channels() {
            return Err(Error::shape(op, &x.shape(), &[self.channels()]));
        }
        Ok(())
    }
}

/// What `batchnorm_backward` needs from the training-mode forward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<f64>,
    gamma: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

fn channel_values<'a, T: Scalar>(
    x: &'a Tensor<T>,
    c: usize,
) -> impl Iterator<Item = &'a [T]> + 'a {
    let d = x.dims();
    let plane = d.plane();
    (0..d.batch).map(move |b| &x.sample(b)[c * plane..(c + 1) * plane])
}

/// Normalizes with batch statistics, updates the running averages in `p`
/// (biased batch variance), and returns the cache for the backward pass.
pub fn batchnorm_train<T: Scalar>(
    x: &Tensor<T>,
    p: &mut BatchNormParams<T>,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let (y, cache, stats) = normalize_batch(x, p)?;
    let m = p.momentum.to_f64_lossy();
    for (c, (mean, var)) in stats.into_iter().enumerate() {
        let rm = p.running_mean[c].to_f64_lossy();
        let rv = p.running_var[c].to_f64_lossy();
        p.running_mean[c] = T::from_f64_lossy((1.0 - m) * rm + m * mean);
        p.running_var[c] = T::from_f64_lossy((1.0 - m) * rv + m * var);
    }
    Ok((y, cache))
}

/// Training-mode normalization without touching the running statistics.
pub fn batchnorm_batch_stats<T: Scalar>(
    x: &Tensor<T>,
    p: &BatchNormParams<T>,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let (y, cache, _) = normalize_batch(x, p)?;
    Ok((y, cache))
}

#[allow(clippy::type_complexity)]
fn normalize_batch<T: Scalar>(
    x: &Tensor<T>,
    p: &BatchNormParams<T>,
) -> Result<(Tensor<T>, BatchNormCache<T>, Vec<(f64, f64)>)> {
    p.check("batchnorm_train", x)?;
    let d = x.dims();
    let n = (d.batch * d.plane()) as f64;
    let plane = d.plane();
    let eps = p.epsilon.to_f64_lossy();

    let mut normalized = Tensor::zeros(d);
    let mut y = Tensor::zeros(d);
    let mut inv_std = Vec::with_capacity(d.channels);
    let mut stats = Vec::with_capacity(d.channels);
    for c in 0..d.channels {
        let mean = channel_values(x, c)
            .flat_map(|s| s.iter())
            .map(|v| v.to_f64_lossy())
            .sum::<f64>()
            / n;
        let var = channel_values(x, c)
            .flat_map(|s| s.iter())
            .map(|v| {
                let e = v.to_f64_lossy() - mean;
                e * e
            })
            .sum::<f64>()
            / n;
        let istd = 1.0 / (var + eps).sqrt();
        let gamma = p.gamma[c].to_f64_lossy();
        let beta = p.beta[c].to_f64_lossy();
        for b in 0..d.batch {
            let src = &x.sample(b)[c * plane..(c + 1) * plane];
            let range = c * plane..(c + 1) * plane;
            let xh = &mut normalized.sample_mut(b)[range.clone()];
            for (o, &v) in xh.iter_mut().zip(src) {
                *o = T::from_f64_lossy((v.to_f64_lossy() - mean) * istd);
            }
            let out = &mut y.sample_mut(b)[range];
            for (o, &v) in out.iter_mut().zip(src) {
                *o = T::from_f64_lossy(gamma * (v.to_f64_lossy() - mean) * istd + beta);
            }
        }
        inv_std.push(istd);
        stats.push((mean, var));
    }
    let cache = BatchNormCache {
        normalized,
        inv_std,
        gamma: p.gamma.clone(),
    };
    Ok((y, cache, stats))
}

/// Normalizes with the running statistics only.
pub fn batchnorm_eval<T: Scalar>(x: &Tensor<T>, p: &BatchNormParams<T>) -> Result<Tensor<T>> {
    p.check("batchnorm_eval", x)?;
    let d = x.dims();
    let plane = d.plane();
    let eps = p.epsilon.to_f64_lossy();
    let mut y = x.clone();
    for b in 0..d.batch {
        let sample = y.sample_mut(b);
        for c in 0..d.channels {
            let mean = p.running_mean[c].to_f64_lossy();
            let istd = 1.0 / (p.running_var[c].to_f64_lossy() + eps).sqrt();
            let gamma = p.gamma[c].to_f64_lossy();
            let beta = p.beta[c].to_f64_lossy();
            for v in &mut sample[c * plane..(c + 1) * plane] {
                *v = T::from_f64_lossy(gamma * (v.to_f64_lossy() - mean) * istd + beta);
            }
        }
    }
    Ok(y)
}

pub fn batchnorm_backward<T: Scalar>(
    cache: &BatchNormCache<T>,
    upstream: &Tensor<T>,
) -> Result<BatchNormGrads<T>> {
    upstream.expect_dims("batchnorm_backward", cache.normalized.dims())?;
    let d = upstream.dims();
    let plane = d.plane();
    let n = (d.batch * plane) as f64;
    let mut grad_x = Tensor::zeros(d);
    let mut grad_gamma = Vec::with_capacity(d.channels);
    let mut grad_beta = Vec::with_capacity(d.channels);
    for c in 0..d.channels {
        let range = c * plane..(c + 1) * plane;
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for b in 0..d.batch {
            let g = &upstream.sample(b)[range.clone()];
            let xh = &cache.normalized.sample(b)[range.clone()];
            for (&gv, &xv) in g.iter().zip(xh) {
                let gv = gv.to_f64_lossy();
                sum_g += gv;
                sum_gx += gv * xv.to_f64_lossy();
            }
        }
        let gamma = cache.gamma[c].to_f64_lossy();
        let scale = gamma * cache.inv_std[c] / n;
        for b in 0..d.batch {
            let g = &upstream.sample(b)[range.clone()];
            let xh = &cache.normalized.sample(b)[range.clone()];
            let out = &mut grad_x.sample_mut(b)[range.clone()];
            for ((o, &gv), &xv) in out.iter_mut().zip(g).zip(xh) {
                let v = scale * (n * gv.to_f64_lossy() - sum_g - xv.to_f64_lossy() * sum_gx);
                *o = T::from_f64_lossy(v);
            }
        }
        grad_gamma.push(T::from_f64_lossy(sum_gx));
        grad_beta.push(T::from_f64_lossy(sum_g));
    }
    Ok(BatchNormGrads {
        input: grad_x,
        gamma: grad_gamma,
        beta: grad_beta,
    })
}
