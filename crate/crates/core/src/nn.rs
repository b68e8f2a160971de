//! Forward and backward kernels for the layers used by the fusion networks.
//!
//! Image tensors are laid out `(height, width, channels)`; convolution kernels
//! `(kh, kw, c_in, c_out)`; dense weights `(n_in, n_out)`. All reductions run
//! in a fixed sequential order so results are bit-reproducible.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Clamp applied to probabilities before taking logarithms in [`bce_loss`].
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<F = f32> {
    /// Shape `(kh, kw, c_in, c_out)`.
    pub kernels: Tensor<F>,
    /// Shape `(c_out)`.
    pub bias: Tensor<F>,
}

impl<F: Scalar> ConvParams<F> {
    pub fn new(kernels: Tensor<F>, bias: Tensor<F>) -> Result<Self> {
        if kernels.shape().len() != 4 {
            return Err(Error::shape(
                "conv params",
                format!("kernels must be 4-d, got {:?}", kernels.shape()),
            ));
        }
        let c_out = kernels.shape()[3];
        bias.require_shape("conv bias", &[c_out])?;
        Ok(ConvParams { kernels, bias })
    }

    pub fn zeros(kh: usize, kw: usize, c_in: usize, c_out: usize) -> Self {
        ConvParams {
            kernels: Tensor::zeros(&[kh, kw, c_in, c_out]),
            bias: Tensor::zeros(&[c_out]),
        }
    }

    /// `(kh, kw, c_in, c_out)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let s = self.kernels.shape();
        (s[0], s[1], s[2], s[3])
    }

    /// Output shape for an input of shape `input`, validating compatibility.
    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let (kh, kw, c_in, c_out) = self.dims();
        if input.len() != 3 {
            return Err(Error::shape(
                "conv2d input",
                format!("expected (H, W, C), got {:?}", input),
            ));
        }
        let (h, w, c) = (input[0], input[1], input[2]);
        if h < kh {
            return Err(Error::shape(
                "conv2d input",
                format!("height {} is smaller than kernel height {}", h, kh),
            ));
        }
        if w < kw {
            return Err(Error::shape(
                "conv2d input",
                format!("width {} is smaller than kernel width {}", w, kw),
            ));
        }
        if c != c_in {
            return Err(Error::shape(
                "conv2d input",
                format!("channels {} do not match kernel input channels {}", c, c_in),
            ));
        }
        Ok([h - kh + 1, w - kw + 1, c_out])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<F = f32> {
    /// Shape `(n_in, n_out)`.
    pub weights: Tensor<F>,
    /// Shape `(n_out)`.
    pub bias: Tensor<F>,
}

impl<F: Scalar> DenseParams<F> {
    pub fn new(weights: Tensor<F>, bias: Tensor<F>) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::shape(
                "dense params",
                format!("weights must be 2-d, got {:?}", weights.shape()),
            ));
        }
        let n_out = weights.shape()[1];
        bias.require_shape("dense bias", &[n_out])?;
        Ok(DenseParams { weights, bias })
    }

    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        DenseParams {
            weights: Tensor::zeros(&[n_in, n_out]),
            bias: Tensor::zeros(&[n_out]),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn n_out(&self) -> usize {
        self.weights.shape()[1]
    }
}

#[inline]
fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

#[inline]
fn dot<F: Scalar>(x: &[F], y: &[F]) -> F {
    x.iter().zip(y).fold(F::zero(), |acc, (&a, &b)| acc + a * b)
}

/// Valid (unpadded), stride-1 2-D convolution.
///
/// `out[i, j, f] = bias[f] + sum_{a, b, c} input[i + a, j + b, c] * kernels[a, b, c, f]`
pub fn conv2d_forward<F: Scalar>(input: &Tensor<F>, params: &ConvParams<F>) -> Result<Tensor<F>> {
    let out_shape = params.output_shape(input.shape())?;
    let (kh, kw, c_in, c_out) = params.dims();
    let w = input.shape()[1];
    let (oh, ow) = (out_shape[0], out_shape[1]);
    let x = input.data();
    let k = params.kernels.data();
    let mut out = Tensor::zeros(&out_shape);
    let o = out.data_mut();
    for i in 0..oh {
        for j in 0..ow {
            let row = &mut o[(i * ow + j) * c_out..][..c_out];
            row.copy_from_slice(params.bias.data());
            for a in 0..kh {
                for b in 0..kw {
                    let xin = &x[((i + a) * w + (j + b)) * c_in..][..c_in];
                    let kbase = (a * kw + b) * c_in;
                    for (c, &xv) in xin.iter().enumerate() {
                        axpy(xv, &k[(kbase + c) * c_out..][..c_out], row);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<F = f32> {
    pub input: Tensor<F>,
    pub kernels: Tensor<F>,
    pub bias: Tensor<F>,
}

fn check_conv_upstream<F: Scalar>(
    input: &Tensor<F>,
    params: &ConvParams<F>,
    upstream: &Tensor<F>,
) -> Result<[usize; 3]> {
    let out_shape = params.output_shape(input.shape())?;
    upstream.require_shape("conv2d upstream gradient", &out_shape)?;
    Ok(out_shape)
}

/// Adds the kernel and bias gradients of one sample into `grad_kernels` and
/// `grad_bias`. Shapes must already be validated.
pub(crate) fn conv2d_accumulate_param_grads<F: Scalar>(
    input: &Tensor<F>,
    params: &ConvParams<F>,
    upstream: &Tensor<F>,
    grad_kernels: &mut [F],
    grad_bias: &mut [F],
) {
    let (kh, kw, c_in, c_out) = params.dims();
    let w = input.shape()[1];
    let (oh, ow) = (upstream.shape()[0], upstream.shape()[1]);
    let x = input.data();
    let g = upstream.data();
    for i in 0..oh {
        for j in 0..ow {
            let grow = &g[(i * ow + j) * c_out..][..c_out];
            axpy(F::one(), grow, grad_bias);
            for a in 0..kh {
                for b in 0..kw {
                    let xin = &x[((i + a) * w + (j + b)) * c_in..][..c_in];
                    let kbase = (a * kw + b) * c_in;
                    for (c, &xv) in xin.iter().enumerate() {
                        axpy(xv, grow, &mut grad_kernels[(kbase + c) * c_out..][..c_out]);
                    }
                }
            }
        }
    }
}

/// Gradient of the loss with respect to the convolution input.
pub(crate) fn conv2d_input_grad<F: Scalar>(
    input_shape: &[usize],
    params: &ConvParams<F>,
    upstream: &Tensor<F>,
) -> Tensor<F> {
    let (kh, kw, c_in, c_out) = params.dims();
    let w = input_shape[1];
    let (oh, ow) = (upstream.shape()[0], upstream.shape()[1]);
    let k = params.kernels.data();
    let g = upstream.data();
    let mut gi = Tensor::zeros(input_shape);
    let gx = gi.data_mut();
    for i in 0..oh {
        for j in 0..ow {
            let grow = &g[(i * ow + j) * c_out..][..c_out];
            for a in 0..kh {
                for b in 0..kw {
                    let gin = &mut gx[((i + a) * w + (j + b)) * c_in..][..c_in];
                    let kbase = (a * kw + b) * c_in;
                    for (c, gv) in gin.iter_mut().enumerate() {
                        *gv = *gv + dot(&k[(kbase + c) * c_out..][..c_out], grow);
                    }
                }
            }
        }
    }
    gi
}

/// Exact gradients of [`conv2d_forward`] given the loss gradient `upstream`
/// with respect to its output.
pub fn conv2d_backward<F: Scalar>(
    input: &Tensor<F>,
    params: &ConvParams<F>,
    upstream: &Tensor<F>,
) -> Result<ConvGrads<F>> {
    check_conv_upstream(input, params, upstream)?;
    let mut kernels = Tensor::zeros(params.kernels.shape());
    let mut bias = Tensor::zeros(params.bias.shape());
    conv2d_accumulate_param_grads(input, params, upstream, kernels.data_mut(), bias.data_mut());
    let input_grad = conv2d_input_grad(input.shape(), params, upstream);
    Ok(ConvGrads {
        input: input_grad,
        kernels,
        bias,
    })
}

fn check_dense_input<F: Scalar>(x: &Tensor<F>, params: &DenseParams<F>) -> Result<()> {
    if x.len() != params.n_in() {
        return Err(Error::shape(
            "dense input",
            format!(
                "input length {} does not match layer width {}",
                x.len(),
                params.n_in()
            ),
        ));
    }
    Ok(())
}

/// `out[j] = bias[j] + sum_i x[i] * weights[i, j]`. `x` may have any shape;
/// it is read in row-major order.
pub fn dense_forward<F: Scalar>(x: &Tensor<F>, params: &DenseParams<F>) -> Result<Tensor<F>> {
    check_dense_input(x, params)?;
    let n_out = params.n_out();
    let mut out = params.bias.clone();
    let wt = params.weights.data();
    for (i, &xv) in x.data().iter().enumerate() {
        if xv != F::zero() {
            axpy(xv, &wt[i * n_out..][..n_out], out.data_mut());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<F = f32> {
    pub input: Tensor<F>,
    pub weights: Tensor<F>,
    pub bias: Tensor<F>,
}

pub(crate) fn dense_accumulate_param_grads<F: Scalar>(
    x: &Tensor<F>,
    params: &DenseParams<F>,
    upstream: &Tensor<F>,
    grad_weights: &mut [F],
    grad_bias: &mut [F],
) {
    let n_out = params.n_out();
    axpy(F::one(), upstream.data(), grad_bias);
    for (i, &xv) in x.data().iter().enumerate() {
        if xv != F::zero() {
            axpy(xv, upstream.data(), &mut grad_weights[i * n_out..][..n_out]);
        }
    }
}

pub(crate) fn dense_input_grad<F: Scalar>(
    x_shape: &[usize],
    params: &DenseParams<F>,
    upstream: &Tensor<F>,
) -> Tensor<F> {
    let n_out = params.n_out();
    let wt = params.weights.data();
    let data = (0..params.n_in())
        .map(|i| dot(&wt[i * n_out..][..n_out], upstream.data()))
        .collect();
    Tensor::from_vec(x_shape, data).expect("input shape validated by caller")
}

pub fn dense_backward<F: Scalar>(
    x: &Tensor<F>,
    params: &DenseParams<F>,
    upstream: &Tensor<F>,
) -> Result<DenseGrads<F>> {
    check_dense_input(x, params)?;
    upstream.require_shape("dense upstream gradient", &[params.n_out()])?;
    let mut weights = Tensor::zeros(params.weights.shape());
    let mut bias = Tensor::zeros(params.bias.shape());
    dense_accumulate_param_grads(x, params, upstream, weights.data_mut(), bias.data_mut());
    let input = dense_input_grad(x.shape(), params, upstream);
    Ok(DenseGrads {
        input,
        weights,
        bias,
    })
}

pub fn relu<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    x.map(|v| if v > F::zero() { v } else { F::zero() })
}

/// Passes `upstream` where the forward input was strictly positive; the
/// subgradient at zero is zero.
pub fn relu_backward<F: Scalar>(x: &Tensor<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
    upstream.require_shape("relu upstream gradient", x.shape())?;
    let data = x
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&xv, &g)| if xv > F::zero() { g } else { F::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

#[inline]
pub fn sigmoid_scalar<F: Scalar>(x: F) -> F {
    // Branch keeps exp() from overflowing for large |x|.
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub fn sigmoid<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    x.map(sigmoid_scalar)
}

/// Backward through the sigmoid given its forward output `y`.
pub fn sigmoid_backward<F: Scalar>(y: &Tensor<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
    upstream.require_shape("sigmoid upstream gradient", y.shape())?;
    let data = y
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&s, &g)| g * s * (F::one() - s))
        .collect();
    Tensor::from_vec(y.shape(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-element multipliers recorded by a training-mode dropout: either zero
/// or `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<F = f32> {
    scale: Vec<F>,
}

impl<F: Scalar> DropoutMask<F> {
    pub fn backward(&self, upstream: &Tensor<F>) -> Result<Tensor<F>> {
        if upstream.len() != self.scale.len() {
            return Err(Error::shape(
                "dropout upstream gradient",
                format!(
                    "expected {} elements, got {}",
                    self.scale.len(),
                    upstream.len()
                ),
            ));
        }
        let data = upstream
            .data()
            .iter()
            .zip(&self.scale)
            .map(|(&g, &s)| g * s)
            .collect();
        Tensor::from_vec(upstream.shape(), data)
    }

    pub fn kept(&self) -> usize {
        self.scale.iter().filter(|&&s| s != F::zero()).count()
    }
}

pub(crate) fn check_dropout_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must lie in [0, 1), got {}",
            rate
        )));
    }
    Ok(())
}

/// Inverted dropout. In eval mode (or with rate 0) returns `x` unchanged and
/// no mask; in train mode zeroes each element with probability `rate` and
/// scales survivors by `1 / (1 - rate)`.
pub fn dropout_apply<F: Scalar>(
    x: &Tensor<F>,
    rate: f64,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Tensor<F>, Option<DropoutMask<F>>)> {
    check_dropout_rate(rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = F::from_f64(1.0 / (1.0 - rate));
    let scale: Vec<F> = (0..x.len())
        .map(|_| if rng.bernoulli(rate) { F::zero() } else { keep })
        .collect();
    let data = x.data().iter().zip(&scale).map(|(&v, &s)| v * s).collect();
    Ok((
        Tensor::from_vec(x.shape(), data)?,
        Some(DropoutMask { scale }),
    ))
}

/// Mean binary cross-entropy over a batch with probabilities clamped to
/// `[BCE_EPSILON, 1 - BCE_EPSILON]`. Returns the loss and its exact gradient
/// with respect to `p` (zero where the clamp is active).
pub fn bce_loss<F: Scalar>(p: &Tensor<F>, y: &Tensor<F>) -> Result<(F, Tensor<F>)> {
    if p.len() != y.len() {
        return Err(Error::shape(
            "binary cross-entropy",
            format!("{} probabilities but {} labels", p.len(), y.len()),
        ));
    }
    if p.is_empty() {
        return Err(Error::shape("binary cross-entropy", "empty batch"));
    }
    let n = F::from_f64(p.len() as f64);
    let lo = F::from_f64(BCE_EPSILON);
    let hi = F::one() - lo;
    let mut loss = F::zero();
    let mut grad = Vec::with_capacity(p.len());
    for (&pv, &yv) in p.data().iter().zip(y.data()) {
        let clamped = pv < lo || pv > hi;
        let q = pv.max(lo).min(hi);
        loss = loss - (yv * q.ln() + (F::one() - yv) * (F::one() - q).ln());
        let g = if clamped {
            F::zero()
        } else {
            (-(yv / q) + (F::one() - yv) / (F::one() - q)) / n
        };
        grad.push(g);
    }
    Ok((loss / n, Tensor::from_vec(p.shape(), grad)?))
}
