//! Central finite-difference checks of analytic gradients (double precision).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::ModelGraph;
use super::layers::Layer;
use super::{ForwardMode, NeuralError, Tensor};

/// Denominator floor so that near-zero gradients compare absolutely.
const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Worst relative error between `analytic` and the central difference
/// `(f(θ+ε) − f(θ−ε)) / 2ε` over every coordinate of `theta`.
pub fn gradient_check(theta: &[f64], analytic: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(theta.len(), analytic.len());
    let mut probe = theta.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let up = f(&probe);
        probe[i] = theta[i] - eps;
        let down = f(&probe);
        probe[i] = theta[i];
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * eps)));
    }
    worst
}

/// Check one layer's parameter and input gradients against the scalar loss
/// `Σ r ⊙ y` for a fixed random projection `r`. Returns the worst of the two.
pub fn check_layer(layer: &Layer<f64>, x: &Tensor<f64>, eps: f64, seed: u64) -> Result<f64, NeuralError> {
    let mode = |s: u64| Some(ChaCha8Rng::seed_from_u64(s));
    let (y, cache) = layer.forward(x, mode(seed).as_mut())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let r: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dy = Tensor::from_vec(y.shape(), r.clone())?;
    let mut dp = vec![0.0; layer.params.len()];
    let dx = layer.backward(&cache, &dy, &mut dp)?;

    let project = |y: &Tensor<f64>| y.data().iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
    let mut probe = layer.clone();
    let wp = gradient_check(&layer.params, &dp, eps, |p| {
        probe.params.copy_from_slice(p);
        project(&probe.forward(x, mode(seed).as_mut()).unwrap().0)
    });
    let wx = gradient_check(x.data(), dx.data(), eps, |v| {
        let xi = Tensor::from_vec(x.shape(), v.to_vec()).unwrap();
        project(&layer.forward(&xi, mode(seed).as_mut()).unwrap().0)
    });
    Ok(wp.max(wx))
}

/// Check a whole model's cross-entropy gradient with respect to every
/// parameter and the input. Dropout masks are held fixed by `mode`.
pub fn check_model(model: &ModelGraph<f64>, x: &Tensor<f64>, target: usize, mode: ForwardMode, eps: f64) -> Result<f64, NeuralError> {
    let (_, grads, dx) = model.input_grads(x, target, mode)?;
    let theta = model.flat_params();
    let mut probe = model.clone();
    let wp = gradient_check(&theta, &grads, eps, |p| {
        probe.set_flat_params(p).unwrap();
        probe.sample_grads(x, target, mode).unwrap().loss
    });
    let wx = gradient_check(x.data(), dx.data(), eps, |v| {
        let xi = Tensor::from_vec(x.shape(), v.to_vec()).unwrap();
        model.sample_grads(&xi, target, mode).unwrap().loss
    });
    Ok(wp.max(wx))
}
