//! Finite-difference checks of every backward pass, at 64-bit.

use uavfusion_core::gradcheck::{grad_check, grad_check_indices, DEFAULT_STEP};
use uavfusion_core::nn::{self, ConvParams, DenseParams, Mode};
use uavfusion_core::{ModalitySet, Model, ModelSpec, Rng, ShapeProfile, Tensor};

fn random_vec(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_range(lo, hi)).collect()
}

fn random_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_vec(shape, random_vec(rng, shape.iter().product(), -1.0, 1.0)).unwrap()
}

/// Values in `[-1, -0.05] u [0.05, 1]`, clear of the ReLU kink.
fn away_from_zero(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.uniform_range(0.05, 1.0);
            if rng.bernoulli(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

fn weighted(t: &Tensor<f64>, r: &[f64]) -> f64 {
    t.data().iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Maximum relative error per layer for one seed, with shapes drawn at random.
pub fn layer_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = Rng::seed_from(seed);
    let mut out = Vec::new();

    let h = 3 + rng.index(4);
    let w = 3 + rng.index(4);
    let c = 1 + rng.index(3);
    let kh = 1 + rng.index(3);
    let kw = 1 + rng.index(3);
    let f = 1 + rng.index(4);
    let input = random_tensor(&mut rng, &[h, w, c]);
    let params = ConvParams::new(
        random_tensor(&mut rng, &[kh, kw, c, f]),
        random_tensor(&mut rng, &[f]),
    )
    .unwrap();
    let out_shape = params.output_shape(input.shape()).unwrap();
    let r = random_vec(&mut rng, out_shape.iter().product(), -1.0, 1.0);
    let up = Tensor::from_vec(&out_shape, r.clone()).unwrap();
    let g = nn::conv2d_backward(&input, &params, &up).unwrap();
    let e_in = grad_check(
        |x| {
            weighted(
                &nn::conv2d_forward(
                    &Tensor::from_vec(input.shape(), x.to_vec()).unwrap(),
                    &params,
                )
                .unwrap(),
                &r,
            )
        },
        input.data(),
        g.input.data(),
        DEFAULT_STEP,
    );
    let e_k = grad_check(
        |k| {
            let p = ConvParams::new(
                Tensor::from_vec(params.kernels.shape(), k.to_vec()).unwrap(),
                params.bias.clone(),
            )
            .unwrap();
            weighted(&nn::conv2d_forward(&input, &p).unwrap(), &r)
        },
        params.kernels.data(),
        g.kernels.data(),
        DEFAULT_STEP,
    );
    let e_b = grad_check(
        |b| {
            let p = ConvParams::new(params.kernels.clone(), Tensor::vector(b.to_vec())).unwrap();
            weighted(&nn::conv2d_forward(&input, &p).unwrap(), &r)
        },
        params.bias.data(),
        g.bias.data(),
        DEFAULT_STEP,
    );
    out.push(("conv2d", e_in.max(e_k).max(e_b)));

    let n_in = 1 + rng.index(8);
    let n_out = 1 + rng.index(5);
    let x = random_tensor(&mut rng, &[n_in]);
    let dp = DenseParams::new(
        random_tensor(&mut rng, &[n_in, n_out]),
        random_tensor(&mut rng, &[n_out]),
    )
    .unwrap();
    let r = random_vec(&mut rng, n_out, -1.0, 1.0);
    let g = nn::dense_backward(&x, &dp, &Tensor::vector(r.clone())).unwrap();
    let e_x = grad_check(
        |v| {
            weighted(
                &nn::dense_forward(&Tensor::vector(v.to_vec()), &dp).unwrap(),
                &r,
            )
        },
        x.data(),
        g.input.data(),
        DEFAULT_STEP,
    );
    let e_w = grad_check(
        |v| {
            let p = DenseParams::new(
                Tensor::from_vec(&[n_in, n_out], v.to_vec()).unwrap(),
                dp.bias.clone(),
            )
            .unwrap();
            weighted(&nn::dense_forward(&x, &p).unwrap(), &r)
        },
        dp.weights.data(),
        g.weights.data(),
        DEFAULT_STEP,
    );
    let e_b = grad_check(
        |v| {
            let p = DenseParams::new(dp.weights.clone(), Tensor::vector(v.to_vec())).unwrap();
            weighted(&nn::dense_forward(&x, &p).unwrap(), &r)
        },
        dp.bias.data(),
        g.bias.data(),
        DEFAULT_STEP,
    );
    out.push(("dense", e_x.max(e_w).max(e_b)));

    let n = 2 + rng.index(10);
    let x = Tensor::vector(away_from_zero(&mut rng, n));
    let r = random_vec(&mut rng, n, -1.0, 1.0);
    let g = nn::relu_backward(&x, &Tensor::vector(r.clone())).unwrap();
    out.push((
        "relu",
        grad_check(
            |v| weighted(&nn::relu(&Tensor::vector(v.to_vec())), &r),
            x.data(),
            g.data(),
            DEFAULT_STEP,
        ),
    ));

    let x = Tensor::vector(random_vec(&mut rng, n, -4.0, 4.0));
    let y = nn::sigmoid(&x);
    let g = nn::sigmoid_backward(&y, &Tensor::vector(r.clone())).unwrap();
    out.push((
        "sigmoid",
        grad_check(
            |v| weighted(&nn::sigmoid(&Tensor::vector(v.to_vec())), &r),
            x.data(),
            g.data(),
            DEFAULT_STEP,
        ),
    ));

    let rate = rng.uniform_range(0.1, 0.7);
    let mask_seed = rng.next_u64();
    let (_, mask) =
        nn::dropout_apply(&x, rate, Mode::Train, &mut Rng::seed_from(mask_seed)).unwrap();
    let g = mask.unwrap().backward(&Tensor::vector(r.clone())).unwrap();
    let e = grad_check(
        |v| {
            let (y, _) = nn::dropout_apply(
                &Tensor::vector(v.to_vec()),
                rate,
                Mode::Train,
                &mut Rng::seed_from(mask_seed),
            )
            .unwrap();
            weighted(&y, &r)
        },
        x.data(),
        g.data(),
        DEFAULT_STEP,
    );
    out.push(("dropout", e));

    let p = Tensor::vector(random_vec(&mut rng, n, 0.05, 0.95));
    let y = Tensor::vector(
        (0..n)
            .map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 })
            .collect(),
    );
    let (_, g) = nn::bce_loss(&p, &y).unwrap();
    out.push((
        "bce",
        grad_check(
            |v| nn::bce_loss(&Tensor::vector(v.to_vec()), &y).unwrap().0,
            p.data(),
            g.data(),
            DEFAULT_STEP,
        ),
    ));
    out
}

/// Components checked per parameter tensor in the end-to-end check.
pub const END_TO_END_SAMPLES: usize = 24;

/// Three-modality network at the reduced profile with 16 filters and 32
/// dense units, training mode with a fixed dropout stream, batch of two.
/// Checks a random subset of components from every parameter tensor,
/// including each tensor's first and last.
pub fn end_to_end_error(seed: u64) -> f64 {
    let spec = ModelSpec {
        conv_filters: 16,
        dense_units: 32,
        ..ModelSpec::new(ModalitySet::Three, ShapeProfile::reduced())
    };
    let mut rng = Rng::seed_from(seed);
    let mut model = Model::<f64>::build(spec, &mut rng).unwrap();
    for p in [1, 3, 5] {
        model.params_mut()[p]
            .data_mut()
            .iter_mut()
            .for_each(|b| *b = rng.uniform_range(0.05, 0.2));
    }
    let images: Vec<Tensor<f64>> = (0..2)
        .map(|_| random_tensor(&mut rng, &spec.input_shape()))
        .collect();
    let radars: Vec<Tensor<f64>> = (0..2)
        .map(|_| random_tensor(&mut rng, &[spec.radar_width()]))
        .collect();
    let batch: Vec<(&Tensor<f64>, Option<&Tensor<f64>>)> = images
        .iter()
        .zip(&radars)
        .map(|(i, r)| (i, Some(r)))
        .collect();
    let targets = [1.0, 0.0];
    let dropout_seed = rng.next_u64();
    let (_, grads, _) = model
        .loss_and_gradients(
            &batch,
            &targets,
            Mode::Train,
            &mut Rng::seed_from(dropout_seed),
        )
        .unwrap();

    let mut indices = Vec::new();
    let mut offset = 0;
    for t in model.params() {
        let n = t.len();
        indices.extend([offset, offset + n - 1]);
        indices.extend((0..END_TO_END_SAMPLES).map(|_| offset + rng.index(n)));
        offset += n;
    }
    let mut probe = model.clone();
    grad_check_indices(
        |theta| {
            probe.set_flat_params(theta).unwrap();
            probe
                .loss_and_gradients(
                    &batch,
                    &targets,
                    Mode::Train,
                    &mut Rng::seed_from(dropout_seed),
                )
                .unwrap()
                .0
        },
        &model.flat_params(),
        &grads.flatten(),
        DEFAULT_STEP,
        &indices,
    )
}
