//! One-, two- and three-modality fusion networks.
//!
//! ```text
//! image (H, W, C) -> conv 3x3 valid -> ReLU -> flatten -> dropout
//!                 -> [concat radar]  -> dense -> ReLU -> dropout
//!                 -> dense(1) -> sigmoid
//! ```
//!
//! The image input is the thermal map alone, or the thermal and optronic
//! maps stacked along channels. Only the three-modality network takes the
//! radar vector.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::data::{Label, ModalitySet, ShapeProfile};
use crate::error::{Error, Result};
use crate::nn::{self, ConvParams, DenseParams, DropoutMask, Mode};
use crate::registration::FusedSample;
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub modality_set: ModalitySet,
    pub profile: ShapeProfile,
    pub conv_filters: usize,
    /// Kernel height and width.
    pub kernel: [usize; 2],
    pub dense_units: usize,
    pub dropout_rate: f64,
}

impl ModelSpec {
    /// 512 filters of 3x3, 512 dense units, dropout 0.5.
    pub fn new(modality_set: ModalitySet, profile: ShapeProfile) -> Self {
        ModelSpec {
            modality_set,
            profile,
            conv_filters: 512,
            kernel: [3, 3],
            dense_units: 512,
            dropout_rate: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if self.conv_filters == 0 || self.dense_units == 0 || self.kernel.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive (filters {}, kernel {:?}, dense units {})",
                self.conv_filters, self.kernel, self.dense_units
            )));
        }
        nn::check_dropout_rate(self.dropout_rate)?;
        let [h, w, _] = self.input_shape();
        if h < self.kernel[0] || w < self.kernel[1] {
            return Err(Error::Config(format!(
                "kernel {:?} does not fit a {}x{} input",
                self.kernel, h, w
            )));
        }
        Ok(())
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.modality_set.image_shape(&self.profile)
    }

    pub fn radar_width(&self) -> usize {
        self.modality_set.radar_width(&self.profile)
    }

    pub fn conv_output_shape(&self) -> [usize; 3] {
        let [h, w, _] = self.input_shape();
        [
            h + 1 - self.kernel[0],
            w + 1 - self.kernel[1],
            self.conv_filters,
        ]
    }

    pub fn flattened_width(&self) -> usize {
        self.conv_output_shape().iter().product()
    }

    /// Width of the first dense layer's input: flattened convolution output
    /// plus the radar vector when present.
    pub fn dense_input_width(&self) -> usize {
        self.flattened_width() + self.radar_width()
    }

    /// Trainable parameter count, from layer sizes alone.
    pub fn parameter_count(&self) -> usize {
        let c_in = self.input_shape()[2];
        let conv = self.kernel[0] * self.kernel[1] * c_in * self.conv_filters + self.conv_filters;
        let dense1 = self.dense_input_width() * self.dense_units + self.dense_units;
        let output = self.dense_units + 1;
        conv + dense1 + output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<F = f32> {
    pub spec: ModelSpec,
    pub conv: ConvParams<F>,
    pub dense1: DenseParams<F>,
    pub output: DenseParams<F>,
}

/// Gradients for every parameter tensor, in [`Model::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F = f32> {
    pub tensors: [Tensor<F>; 6],
}

impl<F: Scalar> Gradients<F> {
    pub fn zeros_like(model: &Model<F>) -> Self {
        Gradients {
            tensors: model.params().map(|p| Tensor::zeros(p.shape())),
        }
    }

    pub fn refs(&self) -> [&Tensor<F>; 6] {
        self.tensors.each_ref()
    }

    /// All components flattened in parameter order.
    pub fn flatten(&self) -> Vec<F> {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }
}

/// Intermediate values of one forward pass, kept for back-propagation.
#[derive(Debug, Clone)]
pub struct Trace<F = f32> {
    conv_pre: Tensor<F>,
    mask1: Option<DropoutMask<F>>,
    dense_in: Tensor<F>,
    hidden_pre: Tensor<F>,
    mask2: Option<DropoutMask<F>>,
    hidden_out: Tensor<F>,
    pub probability: F,
}

fn uniform_tensor<F: Scalar>(shape: &[usize], limit: f64, rng: &mut Rng) -> Tensor<F> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| F::from_f64(rng.uniform_range(-limit, limit)))
        .collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

impl<F: Scalar> Model<F> {
    /// Model with every weight and bias zero.
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let c_in = spec.input_shape()[2];
        Ok(Model {
            spec,
            conv: ConvParams::zeros(spec.kernel[0], spec.kernel[1], c_in, spec.conv_filters),
            dense1: DenseParams::zeros(spec.dense_input_width(), spec.dense_units),
            output: DenseParams::zeros(spec.dense_units, 1),
        })
    }

    /// He-uniform initialisation for the layers feeding ReLUs, Glorot-uniform
    /// for the output layer, zero biases.
    pub fn build(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        let mut m = Model::zeros(spec)?;
        let c_in = spec.input_shape()[2];
        let conv_fan_in = spec.kernel[0] * spec.kernel[1] * c_in;
        m.conv.kernels = uniform_tensor(
            m.conv.kernels.shape(),
            libm::sqrt(6.0 / conv_fan_in as f64),
            rng,
        );
        let d_in = spec.dense_input_width();
        m.dense1.weights =
            uniform_tensor(m.dense1.weights.shape(), libm::sqrt(6.0 / d_in as f64), rng);
        let glorot = libm::sqrt(6.0 / (spec.dense_units + 1) as f64);
        m.output.weights = uniform_tensor(m.output.weights.shape(), glorot, rng);
        Ok(m)
    }

    /// Parameter tensors in fixed order: conv kernels, conv bias, dense
    /// weights, dense bias, output weights, output bias.
    pub fn params(&self) -> [&Tensor<F>; 6] {
        [
            &self.conv.kernels,
            &self.conv.bias,
            &self.dense1.weights,
            &self.dense1.bias,
            &self.output.weights,
            &self.output.bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<F>; 6] {
        [
            &mut self.conv.kernels,
            &mut self.conv.bias,
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]
    }

    pub fn count_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<F> {
        self.params()
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    /// Overwrites all parameters from a flat vector in [`Model::params`] order.
    pub fn set_flat_params(&mut self, values: &[F]) -> Result<()> {
        if values.len() != self.count_parameters() {
            return Err(Error::shape(
                "set_flat_params",
                format!(
                    "expected {} values, got {}",
                    self.count_parameters(),
                    values.len()
                ),
            ));
        }
        let mut rest = values;
        for p in self.params_mut() {
            let (head, tail) = rest.split_at(p.len());
            p.data_mut().copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// SHA-256 over the little-endian bytes of every parameter, as hex.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        let mut buf = Vec::new();
        for p in self.params() {
            buf.clear();
            p.data().iter().for_each(|&v| v.extend_le_bytes(&mut buf));
            hasher.update(&buf);
        }
        let mut hex = String::with_capacity(64);
        for b in hasher.finalize().iter() {
            let _ = write!(hex, "{:02x}", b);
        }
        hex
    }

    pub fn check_input(&self, image: &Tensor<F>, radar: Option<&Tensor<F>>) -> Result<()> {
        let expected = self.spec.input_shape();
        if image.shape() != expected {
            return Err(Error::shape(
                "model input",
                format!(
                    "image input has shape {:?}, model expects {:?}",
                    image.shape(),
                    expected
                ),
            ));
        }
        let width = self.spec.radar_width();
        match radar {
            None if width > 0 => Err(Error::shape(
                "model input",
                format!("radar input of length {} is required", width),
            )),
            Some(r) if r.len() != width => Err(Error::shape(
                "model input",
                format!(
                    "radar input has length {}, model expects {}",
                    r.len(),
                    width
                ),
            )),
            _ => Ok(()),
        }
    }

    /// Forward pass for one sample. In train mode dropout masks are drawn
    /// from `rng`; in eval mode `rng` is untouched.
    pub fn forward(
        &self,
        image: &Tensor<F>,
        radar: Option<&Tensor<F>>,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Trace<F>> {
        self.check_input(image, radar)?;
        let rate = self.spec.dropout_rate;
        let conv_pre = nn::conv2d_forward(image, &self.conv)?;
        let (flat, mask1) = nn::dropout_apply(&nn::relu(&conv_pre).flatten(), rate, mode, rng)?;
        let mut dense_in = flat.into_data();
        if self.spec.radar_width() > 0 {
            dense_in.extend_from_slice(radar.expect("checked above").data());
        }
        let dense_in = Tensor::vector(dense_in);
        let hidden_pre = nn::dense_forward(&dense_in, &self.dense1)?;
        let (hidden_out, mask2) = nn::dropout_apply(&nn::relu(&hidden_pre), rate, mode, rng)?;
        let logit = nn::dense_forward(&hidden_out, &self.output)?;
        let probability = nn::sigmoid_scalar(logit.data()[0]);
        Ok(Trace {
            conv_pre,
            mask1,
            dense_in,
            hidden_pre,
            mask2,
            hidden_out,
            probability,
        })
    }

    /// Eval-mode probability of the UAV class.
    pub fn predict(&self, image: &Tensor<F>, radar: Option<&Tensor<F>>) -> Result<F> {
        // eval mode draws nothing from the generator
        let mut rng = Rng::seed_from(0);
        Ok(self
            .forward(image, radar, Mode::Eval, &mut rng)?
            .probability)
    }

    /// Accumulates parameter gradients of one sample into `grads`, given the
    /// loss gradient `d_logit` with respect to the pre-sigmoid output.
    pub fn backward(
        &self,
        image: &Tensor<F>,
        trace: &Trace<F>,
        d_logit: F,
        grads: &mut Gradients<F>,
    ) -> Result<()> {
        let [gk, gcb, gw1, gb1, gwo, gbo] = &mut grads.tensors;
        let up = Tensor::vector(alloc::vec![d_logit]);
        nn::dense_accumulate_param_grads(
            &trace.hidden_out,
            &self.output,
            &up,
            gwo.data_mut(),
            gbo.data_mut(),
        );
        let d_hidden_out = Tensor::vector(
            self.output
                .weights
                .data()
                .iter()
                .map(|&w| w * d_logit)
                .collect(),
        );
        let d_hidden_relu = match &trace.mask2 {
            Some(m) => m.backward(&d_hidden_out)?,
            None => d_hidden_out,
        };
        let d_hidden_pre = nn::relu_backward(&trace.hidden_pre, &d_hidden_relu)?;
        nn::dense_accumulate_param_grads(
            &trace.dense_in,
            &self.dense1,
            &d_hidden_pre,
            gw1.data_mut(),
            gb1.data_mut(),
        );

        // only the convolution part of the dense input needs a gradient
        let flat = self.spec.flattened_width();
        let units = self.spec.dense_units;
        let w1 = self.dense1.weights.data();
        let d_flat: Vec<F> = (0..flat)
            .map(|i| {
                w1[i * units..][..units]
                    .iter()
                    .zip(d_hidden_pre.data())
                    .fold(F::zero(), |acc, (&w, &g)| acc + w * g)
            })
            .collect();
        let d_flat = Tensor::vector(d_flat);
        let d_conv_relu = match &trace.mask1 {
            Some(m) => m.backward(&d_flat)?,
            None => d_flat,
        };
        let d_conv_relu = d_conv_relu.reshape(trace.conv_pre.shape())?;
        let d_conv_pre = nn::relu_backward(&trace.conv_pre, &d_conv_relu)?;
        nn::conv2d_accumulate_param_grads(
            image,
            &self.conv,
            &d_conv_pre,
            gk.data_mut(),
            gcb.data_mut(),
        );
        Ok(())
    }

    /// Mean binary cross-entropy of a batch and its parameter gradients.
    /// Returns `(loss, gradients, probabilities)`.
    pub fn loss_and_gradients(
        &self,
        batch: &[(&Tensor<F>, Option<&Tensor<F>>)],
        targets: &[F],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(F, Gradients<F>, Vec<F>)> {
        let mut grads = Gradients::zeros_like(self);
        let (loss, probs) = self.accumulate_batch(batch, targets, mode, rng, &mut grads)?;
        Ok((loss, grads, probs))
    }

    /// As [`Model::loss_and_gradients`], adding into caller-owned buffers.
    pub fn accumulate_batch(
        &self,
        batch: &[(&Tensor<F>, Option<&Tensor<F>>)],
        targets: &[F],
        mode: Mode,
        rng: &mut Rng,
        grads: &mut Gradients<F>,
    ) -> Result<(F, Vec<F>)> {
        if batch.len() != targets.len() {
            return Err(Error::shape(
                "batch",
                format!("{} inputs but {} targets", batch.len(), targets.len()),
            ));
        }
        let traces = batch
            .iter()
            .map(|(img, radar)| self.forward(img, *radar, mode, rng))
            .collect::<Result<Vec<_>>>()?;
        let probs: Vec<F> = traces.iter().map(|t| t.probability).collect();
        let (loss, d_prob) = nn::bce_loss(
            &Tensor::vector(probs.clone()),
            &Tensor::vector(targets.to_vec()),
        )?;
        for (((img, _), trace), &dp) in batch.iter().zip(&traces).zip(d_prob.data()) {
            let p = trace.probability;
            self.backward(img, trace, dp * p * (F::one() - p), grads)?;
        }
        Ok((loss, probs))
    }
}

fn sample_input(s: &FusedSample) -> (&Tensor<f32>, Option<&Tensor<f32>>) {
    (&s.stacked, s.radar.as_ref())
}

pub fn build_model(spec: ModelSpec, rng: &mut Rng) -> Result<Model<f32>> {
    Model::build(spec, rng)
}

pub fn count_parameters<F: Scalar>(model: &Model<F>) -> usize {
    model.count_parameters()
}

/// Per-sample UAV probabilities for a batch.
pub fn forward_pass(
    model: &Model<f32>,
    batch: &[FusedSample],
    mode: Mode,
    rng: &mut Rng,
) -> Result<Vec<f32>> {
    batch
        .iter()
        .map(|s| {
            let (img, radar) = sample_input(s);
            model.forward(img, radar, mode, rng).map(|t| t.probability)
        })
        .collect()
}

/// Eval-mode probability and the class it implies (UAV iff `p > 0.5`).
pub fn predict_and_classify(model: &Model<f32>, sample: &FusedSample) -> Result<(f32, Label)> {
    let (img, radar) = sample_input(sample);
    let p = model.predict(img, radar)?;
    Ok((p, Label::from_probability(p as f64)))
}
