//! RMSprop with per-step learning-rate decay.
//!
//! ```text
//! E     <- rho * E + (1 - rho) * g^2
//! lr_t  =  lr0 / (1 + decay * t)        t = optimizer steps taken so far
//! theta <- theta - lr_t * g / (sqrt(E) + eps)
//! ```

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmspropConfig {
    pub lr0: f64,
    pub decay: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for RmspropConfig {
    fn default() -> Self {
        RmspropConfig {
            lr0: 1e-4,
            decay: 1e-7,
            rho: 0.9,
            eps: 1e-7,
        }
    }
}

impl RmspropConfig {
    pub fn learning_rate(&self, step: u64) -> f64 {
        self.lr0 / (1.0 + self.decay * step as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr0 >= 0.0
            && self.lr0.is_finite()
            && self.decay >= 0.0
            && self.decay.is_finite()
            && (0.0..1.0).contains(&self.rho)
            && self.eps > 0.0;
        if !ok {
            return Err(Error::Config(format!(
                "invalid RMSprop settings {:?}",
                self
            )));
        }
        Ok(())
    }
}

/// Accumulator for a single parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RmspropState<F = f32> {
    pub mean_square: Tensor<F>,
    pub step_count: u64,
}

impl<F: Scalar> RmspropState<F> {
    pub fn new(shape: &[usize]) -> Self {
        RmspropState {
            mean_square: Tensor::zeros(shape),
            step_count: 0,
        }
    }
}

fn check_finite<F: Scalar>(grad: &Tensor<F>, which: usize) -> Result<()> {
    if let Some(pos) = grad.data().iter().position(|g| !g.is_finite()) {
        return Err(Error::NumericFault(format!(
            "non-finite gradient in parameter {} at element {}",
            which, pos
        )));
    }
    Ok(())
}

fn apply<F: Scalar>(
    param: &mut Tensor<F>,
    grad: &Tensor<F>,
    mean_square: &mut Tensor<F>,
    lr: F,
    cfg: &RmspropConfig,
) {
    let rho = F::from_f64(cfg.rho);
    let one_minus_rho = F::from_f64(1.0 - cfg.rho);
    let eps = F::from_f64(cfg.eps);
    for ((p, &g), e) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(mean_square.data_mut())
    {
        *e = rho * *e + one_minus_rho * g * g;
        *p = *p - lr * g / (e.sqrt() + eps);
    }
}

fn check_shapes<F: Scalar>(
    param: &Tensor<F>,
    grad: &Tensor<F>,
    mean_square: &Tensor<F>,
) -> Result<()> {
    grad.require_shape("rmsprop gradient", param.shape())?;
    mean_square.require_shape("rmsprop accumulator", param.shape())
}

/// One update of a single parameter tensor. Advances `state.step_count`.
pub fn rmsprop_step<F: Scalar>(
    param: &mut Tensor<F>,
    grad: &Tensor<F>,
    state: &mut RmspropState<F>,
    cfg: &RmspropConfig,
) -> Result<()> {
    check_shapes(param, grad, &state.mean_square)?;
    check_finite(grad, 0)?;
    let lr = F::from_f64(cfg.learning_rate(state.step_count));
    apply(param, grad, &mut state.mean_square, lr, cfg);
    state.step_count += 1;
    Ok(())
}

/// RMSprop over a fixed list of parameter tensors sharing one step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Rmsprop<F = f32> {
    pub config: RmspropConfig,
    mean_square: Vec<Tensor<F>>,
    step_count: u64,
}

impl<F: Scalar> Rmsprop<F> {
    pub fn new<'a>(config: RmspropConfig, params: impl IntoIterator<Item = &'a Tensor<F>>) -> Self {
        let mean_square = params
            .into_iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect();
        Rmsprop {
            config,
            mean_square,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn mean_square(&self) -> &[Tensor<F>] {
        &self.mean_square
    }

    /// Updates every parameter from its gradient. Nothing is modified when
    /// any gradient holds a non-finite value.
    pub fn step(&mut self, params: &mut [&mut Tensor<F>], grads: &[&Tensor<F>]) -> Result<()> {
        if params.len() != self.mean_square.len() || grads.len() != params.len() {
            return Err(Error::shape(
                "rmsprop",
                format!(
                    "{} accumulators, {} parameters, {} gradients",
                    self.mean_square.len(),
                    params.len(),
                    grads.len()
                ),
            ));
        }
        for (i, ((p, g), e)) in params.iter().zip(grads).zip(&self.mean_square).enumerate() {
            check_shapes(p, g, e)?;
            check_finite(g, i)?;
        }
        let lr = F::from_f64(self.config.learning_rate(self.step_count));
        for ((p, g), e) in params
            .iter_mut()
            .zip(grads)
            .zip(self.mean_square.iter_mut())
        {
            apply(p, g, e, lr, &self.config);
        }
        self.step_count += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_gradient_keeps_params_and_decays_accumulator() {
        let cfg = RmspropConfig::default();
        let mut p = Tensor::vector(vec![1.0f64, -2.0]);
        let mut st = RmspropState::new(&[2]);
        st.mean_square = Tensor::vector(vec![0.5, 2.0]);
        rmsprop_step(&mut p, &Tensor::zeros(&[2]), &mut st, &cfg).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0]);
        assert!((st.mean_square.data()[0] - 0.45).abs() < 1e-15);
        assert!((st.mean_square.data()[1] - 1.8).abs() < 1e-15);
    }

    #[test]
    fn single_step_hand_value() {
        let cfg = RmspropConfig::default();
        let mut p = Tensor::vector(vec![0.0f64]);
        let mut st = RmspropState::new(&[1]);
        rmsprop_step(&mut p, &Tensor::vector(vec![1.0]), &mut st, &cfg).unwrap();
        assert!((st.mean_square.data()[0] - 0.1).abs() < 1e-15);
        let expected = -1e-4 / (libm::sqrt(0.1) + 1e-7);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert!((p.data()[0] + 3.16228e-4).abs() < 1e-9);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn two_steps_hand_value() {
        let cfg = RmspropConfig::default();
        let mut p = Tensor::vector(vec![0.0f64]);
        let mut st = RmspropState::new(&[1]);
        let g = Tensor::vector(vec![1.0]);
        rmsprop_step(&mut p, &g, &mut st, &cfg).unwrap();
        rmsprop_step(&mut p, &g, &mut st, &cfg).unwrap();
        assert!((st.mean_square.data()[0] - 0.19).abs() < 1e-15);
        let step1 = 1e-4 / (libm::sqrt(0.1) + 1e-7);
        let step2 = 1e-4 / (1.0 + 1e-7) / (libm::sqrt(0.19) + 1e-7);
        assert!((p.data()[0] + step1 + step2).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_a_fault() {
        let cfg = RmspropConfig::default();
        let mut p = Tensor::vector(vec![0.0f32, 1.0]);
        let mut st = RmspropState::new(&[2]);
        let err =
            rmsprop_step(&mut p, &Tensor::vector(vec![0.1, f32::NAN]), &mut st, &cfg).unwrap_err();
        assert!(matches!(err, Error::NumericFault(_)));
        assert_eq!(p.data(), &[0.0, 1.0]);
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn shared_counter_advances_once_per_step() {
        let mut a = Tensor::vector(vec![0.0f64]);
        let mut b = Tensor::vector(vec![0.0f64, 0.0]);
        let mut opt = Rmsprop::new(RmspropConfig::default(), [&a, &b]);
        let ga = Tensor::vector(vec![1.0]);
        let gb = Tensor::vector(vec![1.0, -1.0]);
        opt.step(&mut [&mut a, &mut b], &[&ga, &gb]).unwrap();
        opt.step(&mut [&mut a, &mut b], &[&ga, &gb]).unwrap();
        assert_eq!(opt.step_count(), 2);
        // same trajectory as the single-tensor form
        let mut c = Tensor::vector(vec![0.0f64]);
        let mut st = RmspropState::new(&[1]);
        rmsprop_step(&mut c, &ga, &mut st, &RmspropConfig::default()).unwrap();
        rmsprop_step(&mut c, &ga, &mut st, &RmspropConfig::default()).unwrap();
        assert_eq!(a, c);
        assert_eq!(b.data()[0], c.data()[0]);
        assert_eq!(b.data()[1], -c.data()[0]);
        assert!(opt
            .mean_square()
            .iter()
            .all(|e| e.data().iter().all(|&v| v >= 0.0)));
    }
}
