//! Two-lane light-field autoencoder.
//!
//! The encoder lane applies five `conv(k=2, s=2) → ReLU → batch norm` blocks
//! to the channel-stacked light field. The center view bypasses the encoder
//! untouched. The decoder lane mirrors the encoder with transposed
//! convolutions, its output is concatenated with the center view, and a
//! 1×1 merge convolution with ReLU produces one channel per stacked input
//! channel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{center_index, center_view, stack_views, stacked_channel, unstack_sample, Image, LightField};
use crate::error::{Error, Result};
use crate::ops::{
    batchnorm_backward, batchnorm_batch_stats, batchnorm_eval, batchnorm_train, concat_channels,
    conv2d, conv2d_backward, conv_output_size, conv_transpose2d, conv_transpose2d_backward,
    conv_transpose_output_size, relu, relu_backward, split_channels, BatchNormCache,
    BatchNormParams, ConvParams,
};
use crate::tensor::{Dims, Scalar, Tensor};

/// Number of conv/batch-norm blocks in each lane.
pub const LANE_DEPTH: usize = 5;
const LANE_KERNEL: usize = 2;
const LANE_STRIDE: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// View grid `(rows, cols)`.
    pub grid: (usize, usize),
    /// Side length of every view in pixels.
    pub spatial: usize,
    /// Output channels of the encoder blocks; the last entry is the latent width.
    pub channel_schedule: Vec<usize>,
    /// Channels produced by the decoder lane before the center view is appended.
    pub decoder_out_channels: usize,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            grid: (9, 9),
            spatial: 512,
            channel_schedule: vec![128, 256, 512, 1024, 2048],
            decoder_out_channels: 240,
            init_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    ConvTranspose,
    Merge,
}

/// Static description of one layer, derived from a [`ModelConfig`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub in_spatial: usize,
    pub out_spatial: usize,
    /// Trainable scalars, including batch-norm scale and shift.
    pub parameters: usize,
}

impl ModelConfig {
    /// 3×3 grid of 32×32 views with a narrow schedule, for tests and demos.
    pub fn toy() -> Self {
        Self {
            grid: (3, 3),
            spatial: 32,
            channel_schedule: vec![8, 16, 32, 64, 128],
            decoder_out_channels: 24,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.grid;
        let mut problems = Vec::new();
        if rows == 0 || rows != cols || rows % 2 == 0 {
            problems.push(format!("grid must be square with an odd side, got {rows}x{cols}"));
        }
        if rows > u8::MAX as usize {
            problems.push(format!("grid side {rows} exceeds 255"));
        }
        let factor = 1 << LANE_DEPTH;
        if self.spatial == 0 || !self.spatial.is_multiple_of(factor) {
            problems.push(format!(
                "spatial {} must be a positive multiple of {factor}",
                self.spatial
            ));
        }
        if self.channel_schedule.len() != LANE_DEPTH {
            problems.push(format!(
                "channel schedule needs {LANE_DEPTH} entries, got {}",
                self.channel_schedule.len()
            ));
        }
        if self.channel_schedule.contains(&0) || self.decoder_out_channels == 0 {
            problems.push("channel counts must be positive".to_string());
        }
        if self.decoder_out_channels + 3 != self.input_channels() {
            problems.push(format!(
                "decoder_out_channels + 3 = {} must equal the stacked width {}",
                self.decoder_out_channels + 3,
                self.input_channels()
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Stacked channel count, `rows · cols · 3`.
    pub fn input_channels(&self) -> usize {
        self.grid.0 * self.grid.1 * 3
    }

    pub fn latent_channels(&self) -> usize {
        *self.channel_schedule.last().unwrap_or(&0)
    }

    pub fn latent_spatial(&self) -> usize {
        self.spatial >> LANE_DEPTH
    }

    /// Stacked-tensor channel of the center view's red plane.
    pub fn center_channel(&self) -> usize {
        stacked_channel(self.grid.1, self.grid.0 / 2, self.grid.1 / 2, 0)
    }

    /// Input units divided by encoded units (latent plus center view).
    pub fn compression_ratio(&self) -> f64 {
        let s = self.spatial as f64;
        let input = s * s * self.input_channels() as f64;
        let l = self.latent_spatial() as f64;
        let middle = self.latent_channels() as f64 * l * l + s * s * 3.0;
        input / middle
    }

    /// FNV-1a hash of every field, stable across platforms and builds.
    pub fn fingerprint(&self) -> u64 {
        let mut words = vec![
            self.grid.0 as u64,
            self.grid.1 as u64,
            self.spatial as u64,
            self.channel_schedule.len() as u64,
        ];
        words.extend(self.channel_schedule.iter().map(|&c| c as u64));
        words.push(self.decoder_out_channels as u64);
        words.push(self.init_seed);
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in words.iter().flat_map(|w| w.to_le_bytes()) {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::with_capacity(2 * LANE_DEPTH + 1);
        let lane = |c_in: usize, c_out: usize| 4 * c_in * c_out + 3 * c_out;
        let mut channels = self.input_channels();
        let mut spatial = self.spatial;
        for (i, &out) in self.channel_schedule.iter().enumerate() {
            let next = conv_output_size(spatial, LANE_KERNEL, LANE_STRIDE);
            specs.push(LayerSpec {
                name: format!("encoder.{i}"),
                kind: LayerKind::Conv,
                in_channels: channels,
                out_channels: out,
                kernel: LANE_KERNEL,
                stride: LANE_STRIDE,
                in_spatial: spatial,
                out_spatial: next,
                parameters: lane(channels, out),
            });
            channels = out;
            spatial = next;
        }
        for (i, out) in self.decoder_schedule().into_iter().enumerate() {
            let next = conv_transpose_output_size(spatial, LANE_KERNEL, LANE_STRIDE);
            specs.push(LayerSpec {
                name: format!("decoder.{i}"),
                kind: LayerKind::ConvTranspose,
                in_channels: channels,
                out_channels: out,
                kernel: LANE_KERNEL,
                stride: LANE_STRIDE,
                in_spatial: spatial,
                out_spatial: next,
                parameters: lane(channels, out),
            });
            channels = out;
            spatial = next;
        }
        let merge_in = channels + 3;
        let merge_out = self.input_channels();
        specs.push(LayerSpec {
            name: "merge".to_string(),
            kind: LayerKind::Merge,
            in_channels: merge_in,
            out_channels: merge_out,
            kernel: 1,
            stride: 1,
            in_spatial: spatial,
            out_spatial: spatial,
            parameters: merge_in * merge_out + merge_out,
        });
        specs
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_specs().iter().map(|s| s.parameters).sum()
    }

    /// Decoder output widths: the encoder schedule reversed, minus the latent
    /// width, ending at `decoder_out_channels`.
    fn decoder_schedule(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.channel_schedule.iter().rev().skip(1).copied().collect();
        out.push(self.decoder_out_channels);
        out
    }
}

pub fn compression_ratio(cfg: &ModelConfig) -> f64 {
    cfg.compression_ratio()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaneLayer<T> {
    pub conv: ConvParams<T>,
    pub norm: BatchNormParams<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    config: ModelConfig,
    pub encoder: Vec<LaneLayer<T>>,
    pub decoder: Vec<LaneLayer<T>>,
    pub merge: ConvParams<T>,
    mode: Mode,
}

/// Output of the encoder: the latent tensor plus the verbatim center view.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedLightField {
    pub grid: (usize, usize),
    /// `[1, latent_channels, spatial/32, spatial/32]`
    pub latent: Tensor<f32>,
    pub center: Image,
    pub fingerprint: u64,
}

impl EncodedLightField {
    pub fn spatial(&self) -> usize {
        self.center.height()
    }
}

/// Activations kept by [`Model::forward_train`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    input_dims: Dims,
    encoder: Vec<LaneCache<T>>,
    decoder: Vec<LaneCache<T>>,
    merge_input: Tensor<T>,
    merge_pre: Tensor<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Which ReLU units were active, over every layer in forward order. Two
    /// passes with equal patterns lie in the same piecewise-smooth region.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .map(|c| &c.pre_activation)
            .chain(std::iter::once(&self.merge_pre))
            .flat_map(|t| t.data().iter().map(|&v| v > T::zero()))
            .collect()
    }
}

#[derive(Clone, Debug)]
struct LaneCache<T> {
    input: Tensor<T>,
    pre_activation: Tensor<T>,
    norm: BatchNormCache<T>,
}

/// Gradients in canonical parameter order (see [`Model::parameters`]).
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub params: Vec<Vec<T>>,
    pub input: Tensor<T>,
}

/// A named parameter or buffer with its dims.
pub struct NamedSlice<'a, T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: &'a [T],
}

fn he_weights<T: Scalar>(rng: &mut ChaCha8Rng, dims: [usize; 4], fan_in: usize) -> Tensor<T> {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    Tensor::from_fn(dims, |_| T::from_f64_lossy(normal.sample(rng)))
}

impl<T: Scalar> Model<T> {
    /// He-initialized weights from `cfg.init_seed`; zero biases; identity
    /// batch-norm affine; running statistics `(0, 1)`. Starts in train mode.
    pub fn build(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
        Ok(Self::assemble(cfg, |dims, fan_in| he_weights(&mut rng, dims, fan_in)))
    }

    /// Same layout as [`Model::build`] with all-zero weights.
    pub(crate) fn zeroed(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::assemble(cfg, |dims, _| Tensor::zeros(dims)))
    }

    fn assemble(cfg: &ModelConfig, mut weights: impl FnMut([usize; 4], usize) -> Tensor<T>) -> Self {
        let specs = cfg.layer_specs();
        let lane = |spec: &LayerSpec, w: Tensor<T>| LaneLayer {
            conv: ConvParams {
                weights: w,
                bias: vec![T::zero(); spec.out_channels],
                stride: spec.stride,
            },
            norm: BatchNormParams::new(spec.out_channels),
        };
        let mut encoder = Vec::with_capacity(LANE_DEPTH);
        let mut decoder = Vec::with_capacity(LANE_DEPTH);
        let mut merge = None;
        for spec in &specs {
            let k = spec.kernel;
            match spec.kind {
                LayerKind::Conv => {
                    let w = weights([spec.out_channels, spec.in_channels, k, k], spec.in_channels * k * k);
                    encoder.push(lane(spec, w));
                }
                LayerKind::ConvTranspose => {
                    // Each output pixel sees one kernel tap per input channel.
                    let fan_in = spec.in_channels * (k / spec.stride).pow(2);
                    let w = weights([spec.in_channels, spec.out_channels, k, k], fan_in);
                    decoder.push(lane(spec, w));
                }
                LayerKind::Merge => {
                    let w = weights([spec.out_channels, spec.in_channels, 1, 1], spec.in_channels);
                    merge = Some(ConvParams {
                        weights: w,
                        bias: vec![T::zero(); spec.out_channels],
                        stride: 1,
                    });
                }
            }
        }
        Self {
            config: cfg.clone(),
            encoder,
            decoder,
            merge: merge.expect("layer specs end with the merge layer"),
            mode: Mode::Train,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn eval(mut self) -> Self {
        self.mode = Mode::Eval;
        self
    }

    /// Trainable scalars (running statistics excluded).
    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.values.len()).sum()
    }

    fn lanes(&self) -> impl Iterator<Item = (String, &LaneLayer<T>)> {
        let enc = self.encoder.iter().enumerate().map(|(i, l)| (format!("encoder.{i}"), l));
        let dec = self.decoder.iter().enumerate().map(|(i, l)| (format!("decoder.{i}"), l));
        enc.chain(dec)
    }

    /// Trainable tensors in canonical order: per lane layer
    /// `conv.weight, conv.bias, norm.gamma, norm.beta`, then `merge.weight,
    /// merge.bias`.
    pub fn parameters(&self) -> Vec<NamedSlice<'_, T>> {
        let mut out = Vec::new();
        for (prefix, l) in self.lanes() {
            let c = l.norm.channels();
            out.push(NamedSlice {
                name: format!("{prefix}.conv.weight"),
                dims: l.conv.weights.shape().to_vec(),
                values: l.conv.weights.data(),
            });
            out.push(NamedSlice {
                name: format!("{prefix}.conv.bias"),
                dims: vec![l.conv.bias.len()],
                values: &l.conv.bias,
            });
            out.push(NamedSlice {
                name: format!("{prefix}.norm.gamma"),
                dims: vec![c],
                values: &l.norm.gamma,
            });
            out.push(NamedSlice {
                name: format!("{prefix}.norm.beta"),
                dims: vec![c],
                values: &l.norm.beta,
            });
        }
        out.push(NamedSlice {
            name: "merge.weight".into(),
            dims: self.merge.weights.shape().to_vec(),
            values: self.merge.weights.data(),
        });
        out.push(NamedSlice {
            name: "merge.bias".into(),
            dims: vec![self.merge.bias.len()],
            values: &self.merge.bias,
        });
        out
    }

    /// Mutable views in the same order as [`Model::parameters`].
    pub fn parameters_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.push(l.conv.weights.data_mut());
            out.push(&mut l.conv.bias);
            out.push(&mut l.norm.gamma);
            out.push(&mut l.norm.beta);
        }
        out.push(self.merge.weights.data_mut());
        out.push(&mut self.merge.bias);
        out
    }

    /// Batch-norm running statistics: `norm.running_mean, norm.running_var`
    /// per lane layer.
    pub fn buffers(&self) -> Vec<NamedSlice<'_, T>> {
        let mut out = Vec::new();
        for (prefix, l) in self.lanes() {
            let c = l.norm.channels();
            out.push(NamedSlice {
                name: format!("{prefix}.norm.running_mean"),
                dims: vec![c],
                values: &l.norm.running_mean,
            });
            out.push(NamedSlice {
                name: format!("{prefix}.norm.running_var"),
                dims: vec![c],
                values: &l.norm.running_var,
            });
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.push(&mut l.norm.running_mean);
            out.push(&mut l.norm.running_var);
        }
        out
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let d = x.dims();
        let c = &self.config;
        if d.channels != c.input_channels() || d.height != c.spatial || d.width != c.spatial || d.batch == 0 {
            return Err(Error::shape(
                "model input",
                &d.as_array(),
                &[d.batch, c.input_channels(), c.spatial, c.spatial],
            ));
        }
        Ok(())
    }

    fn normalize(&self, x: &Tensor<T>, norm: &BatchNormParams<T>) -> Result<Tensor<T>> {
        match self.mode {
            Mode::Eval => batchnorm_eval(x, norm),
            Mode::Train => Ok(batchnorm_batch_stats(x, norm)?.0),
        }
    }

    /// Latent tensor for a stacked batch. Honors the current mode; never
    /// updates running statistics.
    pub fn encode_tensor(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for l in &self.encoder {
            h = self.normalize(&relu(&conv2d(&h, &l.conv)?), &l.norm)?;
        }
        Ok(h)
    }

    /// Reconstructed stacked batch from latent codes and center views
    /// (`[B, 3, spatial, spatial]`).
    pub fn decode_tensor(&self, latent: &Tensor<T>, center: &Tensor<T>) -> Result<Tensor<T>> {
        let c = &self.config;
        let ls = c.latent_spatial();
        let ld = latent.dims();
        if ld.channels != c.latent_channels() || ld.height != ls || ld.width != ls {
            return Err(Error::shape(
                "decode latent",
                &ld.as_array(),
                &[ld.batch, c.latent_channels(), ls, ls],
            ));
        }
        center.expect_dims("decode center", Dims::new(ld.batch, 3, c.spatial, c.spatial))?;
        let mut h = latent.clone();
        for l in &self.decoder {
            h = self.normalize(&relu(&conv_transpose2d(&h, &l.conv)?), &l.norm)?;
        }
        let merged = conv2d(&concat_channels(&h, center)?, &self.merge)?;
        Ok(relu(&merged))
    }

    /// Reconstruction of a stacked batch, without caching.
    pub fn forward_tensor(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let latent = self.encode_tensor(x)?;
        self.decode_tensor(&latent, &self.center_channels(x))
    }

    fn center_channels(&self, x: &Tensor<T>) -> Tensor<T> {
        let base = self.config.center_channel();
        let d = x.dims();
        let plane = d.plane();
        let mut out = Tensor::zeros([d.batch, 3, d.height, d.width]);
        for b in 0..d.batch {
            out.sample_mut(b)
                .copy_from_slice(&x.sample(b)[base * plane..(base + 3) * plane]);
        }
        out
    }

    /// Training-mode forward pass: batch statistics, running statistics
    /// updated, activations cached for [`Model::backward`].
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        let center = self.center_channels(x);
        let mut h = x.clone();
        let mut enc_cache = Vec::with_capacity(LANE_DEPTH);
        for l in &mut self.encoder {
            let pre = conv2d(&h, &l.conv)?;
            let (y, norm) = batchnorm_train(&relu(&pre), &mut l.norm)?;
            enc_cache.push(LaneCache {
                input: std::mem::replace(&mut h, y),
                pre_activation: pre,
                norm,
            });
        }
        let mut dec_cache = Vec::with_capacity(LANE_DEPTH);
        for l in &mut self.decoder {
            let pre = conv_transpose2d(&h, &l.conv)?;
            let (y, norm) = batchnorm_train(&relu(&pre), &mut l.norm)?;
            dec_cache.push(LaneCache {
                input: std::mem::replace(&mut h, y),
                pre_activation: pre,
                norm,
            });
        }
        let merge_input = concat_channels(&h, &center)?;
        let merge_pre = conv2d(&merge_input, &self.merge)?;
        let out = relu(&merge_pre);
        Ok((
            out,
            ForwardCache {
                input_dims: x.dims(),
                encoder: enc_cache,
                decoder: dec_cache,
                merge_input,
                merge_pre,
            },
        ))
    }

    /// Gradients of a scalar loss given `grad_out = ∂loss/∂output`.
    ///
    /// The input gradient sums the encoder path and the highway path (the
    /// center channels reach the loss only through the merge layer).
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: &Tensor<T>) -> Result<Gradients<T>> {
        grad_out.expect_dims("model backward", cache.merge_pre.dims())?;
        let g = relu_backward(&cache.merge_pre, grad_out)?;
        let merge = conv2d_backward(&cache.merge_input, &self.merge, &g)?;
        let (mut g, g_center) = split_channels(&merge.input, self.config.decoder_out_channels)?;

        let mut lane_grads = Vec::with_capacity(4 * 2 * LANE_DEPTH);
        for (l, c) in self.decoder.iter().zip(&cache.decoder).rev() {
            let bn = batchnorm_backward(&c.norm, &g)?;
            let gp = relu_backward(&c.pre_activation, &bn.input)?;
            let conv = conv_transpose2d_backward(&c.input, &l.conv, &gp)?;
            lane_grads.push([conv.weights.into_vec(), conv.bias, bn.gamma, bn.beta]);
            g = conv.input;
        }
        for (l, c) in self.encoder.iter().zip(&cache.encoder).rev() {
            let bn = batchnorm_backward(&c.norm, &g)?;
            let gp = relu_backward(&c.pre_activation, &bn.input)?;
            let conv = conv2d_backward(&c.input, &l.conv, &gp)?;
            lane_grads.push([conv.weights.into_vec(), conv.bias, bn.gamma, bn.beta]);
            g = conv.input;
        }
        lane_grads.reverse();

        let mut input = g;
        let base = self.config.center_channel();
        let plane = cache.input_dims.plane();
        for b in 0..cache.input_dims.batch {
            let dst = &mut input.sample_mut(b)[base * plane..(base + 3) * plane];
            for (d, &s) in dst.iter_mut().zip(g_center.sample(b)) {
                *d = *d + s;
            }
        }

        let mut params: Vec<Vec<T>> = lane_grads.into_iter().flatten().collect();
        params.push(merge.weights.into_vec());
        params.push(merge.bias);
        Ok(Gradients { params, input })
    }

    fn check_light_field(&self, lf: &LightField) -> Result<()> {
        let c = &self.config;
        if (lf.rows(), lf.cols()) != c.grid || lf.size() != c.spatial {
            return Err(Error::shape(
                "light field",
                &[lf.rows(), lf.cols(), lf.size()],
                &[c.grid.0, c.grid.1, c.spatial],
            ));
        }
        Ok(())
    }

    pub fn encode(&self, lf: &LightField) -> Result<EncodedLightField> {
        self.check_light_field(lf)?;
        let latent = self.encode_tensor(&stack_views::<T>(lf))?;
        Ok(EncodedLightField {
            grid: self.config.grid,
            latent: latent.cast(),
            center: center_view(lf)?.clone(),
            fingerprint: self.config.fingerprint(),
        })
    }

    /// Reconstruction clamped to `[0, 1]`.
    pub fn decode(&self, enc: &EncodedLightField) -> Result<LightField> {
        let expected = self.config.fingerprint();
        if enc.fingerprint != expected {
            return Err(Error::IncompatibleEncoding {
                expected,
                found: enc.fingerprint,
            });
        }
        let center = image_to_tensor::<T>(&enc.center);
        let out = self.decode_tensor(&enc.latent.cast(), &center)?;
        Ok(unstack_sample(&out, 0)?.clamped())
    }

    /// `decode(encode(lf))` in one pass.
    pub fn forward(&self, lf: &LightField) -> Result<LightField> {
        self.check_light_field(lf)?;
        let out = self.forward_tensor(&stack_views::<T>(lf))?;
        Ok(unstack_sample(&out, 0)?.clamped())
    }
}

/// `[1, 3, H, W]` planes from an interleaved RGB image.
fn image_to_tensor<T: Scalar>(img: &Image) -> Tensor<T> {
    let plane = img.height() * img.width();
    let mut t = Tensor::zeros([1, 3, img.height(), img.width()]);
    let data = t.data_mut();
    for (p, px) in img.data().chunks_exact(3).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            data[c * plane + p] = T::from_f64_lossy(v as f64);
        }
    }
    t
}

pub fn build_model<T: Scalar>(cfg: &ModelConfig) -> Result<Model<T>> {
    Model::build(cfg)
}

/// Position of the center view for `cfg`'s grid.
pub fn center_position(cfg: &ModelConfig) -> Result<(usize, usize)> {
    center_index(cfg.grid.0, cfg.grid.1)
}
