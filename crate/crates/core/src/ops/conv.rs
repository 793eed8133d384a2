//! Strided convolution and its transpose, lowered to GEMM through im2col.
//!
//! Weight layouts:
//! - `conv2d`: `(out_channels, in_channels, k, k)`
//! - `conv_transpose2d`: `(in_channels, out_channels, k, k)`, so that a
//!   transpose layer with the same weight tensor is the exact adjoint of the
//!   matching `conv2d`.
//!
//! No padding is applied anywhere.

use crate::error::{Error, Result};
use crate::tensor::{Dims, Scalar, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
    pub stride: usize,
}

/// Gradients produced by the convolution backward passes.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(weights: Tensor<T>, bias: Vec<T>, stride: usize) -> Result<Self> {
        let d = weights.dims();
        if d.height != d.width {
            return Err(Error::Config(format!(
                "convolution kernels must be square, got {}x{}",
                d.height, d.width
            )));
        }
        if stride == 0 {
            return Err(Error::Config("convolution stride must be positive".into()));
        }
        Ok(Self {
            weights,
            bias,
            stride,
        })
    }

    pub fn kernel(&self) -> usize {
        self.weights.dims().height
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn check_bias(&self, op: &'static str, channels: usize) -> Result<()> {
        if self.bias.len() != channels {
            return Err(Error::shape(op, &[channels], &[self.bias.len()]));
        }
        Ok(())
    }
}

/// Output spatial size of a valid strided convolution.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize) -> usize {
    (input - kernel) / stride + 1
}

/// Output spatial size of a strided transposed convolution.
pub fn conv_transpose_output_size(input: usize, kernel: usize, stride: usize) -> usize {
    (input - 1) * stride + kernel
}

/// Row-major GEMM: `c = a' · b' + beta·c`, where `a'` is `a` (stored `m×k`)
/// or `aᵀ` (stored `k×m`), and likewise for `b'`.
#[allow(clippy::too_many_arguments)]
fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_trans: bool,
    b: &[T],
    b_trans: bool,
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every access; `c` is a distinct &mut.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Clone, Copy)]
struct Patches {
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    out_h: usize,
    out_w: usize,
}

impl Patches {
    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// `cols[(c, di, dj), (i, j)] = x[c, i·s + di, j·s + dj]`.
    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let Patches {
            channels,
            height,
            width,
            kernel,
            stride,
            out_h,
            out_w,
        } = *self;
        let p = self.cols();
        for c in 0..channels {
            let plane = &x[c * height * width..(c + 1) * height * width];
            for di in 0..kernel {
                for dj in 0..kernel {
                    let row = ((c * kernel + di) * kernel + dj) * p;
                    let dst = &mut cols[row..row + p];
                    for i in 0..out_h {
                        let src = (i * stride + di) * width + dj;
                        let line = &mut dst[i * out_w..(i + 1) * out_w];
                        for (j, v) in line.iter_mut().enumerate() {
                            *v = plane[src + j * stride];
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of `im2col`: scatter-add patch rows back into `x`.
    fn col2im<T: Scalar>(&self, cols: &[T], x: &mut [T]) {
        let Patches {
            channels,
            height,
            width,
            kernel,
            stride,
            out_h,
            out_w,
        } = *self;
        let p = self.cols();
        for c in 0..channels {
            let plane = &mut x[c * height * width..(c + 1) * height * width];
            for di in 0..kernel {
                for dj in 0..kernel {
                    let row = ((c * kernel + di) * kernel + dj) * p;
                    let src = &cols[row..row + p];
                    for i in 0..out_h {
                        let dst = (i * stride + di) * width + dj;
                        for (j, &v) in src[i * out_w..(i + 1) * out_w].iter().enumerate() {
                            plane[dst + j * stride] = plane[dst + j * stride] + v;
                        }
                    }
                }
            }
        }
    }

    /// A 1×1 stride-1 convolution reads the input planes as-is.
    fn is_identity(&self) -> bool {
        self.kernel == 1 && self.stride == 1
    }
}

fn add_bias<T: Scalar>(out: &mut Tensor<T>, bias: &[T]) {
    let d = out.dims();
    let plane = d.plane();
    for b in 0..d.batch {
        let sample = out.sample_mut(b);
        for (o, &bo) in bias.iter().enumerate() {
            for v in &mut sample[o * plane..(o + 1) * plane] {
                *v = *v + bo;
            }
        }
    }
}

fn bias_grad<T: Scalar>(upstream: &Tensor<T>) -> Vec<T> {
    let d = upstream.dims();
    let plane = d.plane();
    (0..d.channels)
        .map(|o| {
            let mut acc = 0.0f64;
            for b in 0..d.batch {
                acc += upstream.sample(b)[o * plane..(o + 1) * plane]
                    .iter()
                    .map(|v| v.to_f64_lossy())
                    .sum::<f64>();
            }
            T::from_f64_lossy(acc)
        })
        .collect()
}

fn conv_geometry<T: Scalar>(op: &'static str, input: Dims, p: &ConvParams<T>) -> Result<Patches> {
    let w = p.weights.dims();
    let k = p.kernel();
    if input.channels != w.channels {
        return Err(Error::shape(op, &input.as_array(), &w.as_array()));
    }
    if input.height < k || input.width < k {
        return Err(Error::shape(op, &input.as_array(), &w.as_array()));
    }
    p.check_bias(op, w.batch)?;
    Ok(Patches {
        channels: input.channels,
        height: input.height,
        width: input.width,
        kernel: k,
        stride: p.stride,
        out_h: conv_output_size(input.height, k, p.stride),
        out_w: conv_output_size(input.width, k, p.stride),
    })
}

/// `out[b,o,i,j] = bias[o] + Σ_{c,di,dj} x[b,c,i·s+di,j·s+dj] · w[o,c,di,dj]`.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    let d = input.dims();
    let geo = conv_geometry("conv2d", d, p)?;
    let out_c = p.weights.dims().batch;
    let mut out = Tensor::zeros([d.batch, out_c, geo.out_h, geo.out_w]);
    let mut cols = if geo.is_identity() {
        Vec::new()
    } else {
        vec![T::zero(); geo.rows() * geo.cols()]
    };
    for b in 0..d.batch {
        let x = input.sample(b);
        let rhs: &[T] = if geo.is_identity() {
            x
        } else {
            geo.im2col(x, &mut cols);
            &cols
        };
        gemm(
            out_c,
            geo.rows(),
            geo.cols(),
            p.weights.data(),
            false,
            rhs,
            false,
            T::zero(),
            out.sample_mut(b),
        );
    }
    add_bias(&mut out, &p.bias);
    Ok(out)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    p: &ConvParams<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let d = input.dims();
    let geo = conv_geometry("conv2d_backward", d, p)?;
    let out_c = p.weights.dims().batch;
    upstream.expect_dims(
        "conv2d_backward",
        Dims::new(d.batch, out_c, geo.out_h, geo.out_w),
    )?;

    let mut grad_input = Tensor::zeros(d);
    let mut grad_w = Tensor::zeros(p.weights.dims());
    let mut cols = vec![T::zero(); geo.rows() * geo.cols()];
    let mut grad_cols = vec![T::zero(); geo.rows() * geo.cols()];
    for b in 0..d.batch {
        let g = upstream.sample(b);
        let x = input.sample(b);
        let patches: &[T] = if geo.is_identity() {
            x
        } else {
            geo.im2col(x, &mut cols);
            &cols
        };
        // dW += G · colsᵀ
        gemm(
            out_c,
            geo.cols(),
            geo.rows(),
            g,
            false,
            patches,
            true,
            T::one(),
            grad_w.data_mut(),
        );
        // dcols = Wᵀ · G
        if geo.is_identity() {
            gemm(
                geo.rows(),
                out_c,
                geo.cols(),
                p.weights.data(),
                true,
                g,
                false,
                T::zero(),
                grad_input.sample_mut(b),
            );
        } else {
            gemm(
                geo.rows(),
                out_c,
                geo.cols(),
                p.weights.data(),
                true,
                g,
                false,
                T::zero(),
                &mut grad_cols,
            );
            geo.col2im(&grad_cols, grad_input.sample_mut(b));
        }
    }
    Ok(ConvGrads {
        input: grad_input,
        weights: grad_w,
        bias: bias_grad(upstream),
    })
}

fn transpose_geometry<T: Scalar>(
    op: &'static str,
    input: Dims,
    p: &ConvParams<T>,
) -> Result<Patches> {
    let w = p.weights.dims();
    if input.channels != w.batch || input.height == 0 || input.width == 0 {
        return Err(Error::shape(op, &input.as_array(), &w.as_array()));
    }
    p.check_bias(op, w.channels)?;
    let k = p.kernel();
    // Patches over the *output*, which is what im2col/col2im walk.
    Ok(Patches {
        channels: w.channels,
        height: conv_transpose_output_size(input.height, k, p.stride),
        width: conv_transpose_output_size(input.width, k, p.stride),
        kernel: k,
        stride: p.stride,
        out_h: input.height,
        out_w: input.width,
    })
}

/// Adjoint of [`conv2d`] (plus bias):
/// `out[b,o,i·s+di,j·s+dj] += x[b,c,i,j] · w[c,o,di,dj]`.
pub fn conv_transpose2d<T: Scalar>(input: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    let d = input.dims();
    let geo = transpose_geometry("conv_transpose2d", d, p)?;
    let in_c = d.channels;
    let mut out = Tensor::zeros([d.batch, geo.channels, geo.height, geo.width]);
    let mut cols = vec![T::zero(); geo.rows() * geo.cols()];
    for b in 0..d.batch {
        // cols = Wᵀ · X, with W viewed as (in, out·k·k)
        gemm(
            geo.rows(),
            in_c,
            geo.cols(),
            p.weights.data(),
            true,
            input.sample(b),
            false,
            T::zero(),
            &mut cols,
        );
        geo.col2im(&cols, out.sample_mut(b));
    }
    add_bias(&mut out, &p.bias);
    Ok(out)
}

pub fn conv_transpose2d_backward<T: Scalar>(
    input: &Tensor<T>,
    p: &ConvParams<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let d = input.dims();
    let geo = transpose_geometry("conv_transpose2d_backward", d, p)?;
    upstream.expect_dims(
        "conv_transpose2d_backward",
        Dims::new(d.batch, geo.channels, geo.height, geo.width),
    )?;
    let in_c = d.channels;
    let mut grad_input = Tensor::zeros(d);
    let mut grad_w = Tensor::zeros(p.weights.dims());
    let mut gcols = vec![T::zero(); geo.rows() * geo.cols()];
    for b in 0..d.batch {
        geo.im2col(upstream.sample(b), &mut gcols);
        // dX = W · im2col(G)
        gemm(
            in_c,
            geo.rows(),
            geo.cols(),
            p.weights.data(),
            false,
            &gcols,
            false,
            T::zero(),
            grad_input.sample_mut(b),
        );
        // dW += X · im2col(G)ᵀ
        gemm(
            in_c,
            geo.cols(),
            geo.rows(),
            input.sample(b),
            false,
            &gcols,
            true,
            T::one(),
            grad_w.data_mut(),
        );
    }
    Ok(ConvGrads {
        input: grad_input,
        weights: grad_w,
        bias: bias_grad(upstream),
    })
}
