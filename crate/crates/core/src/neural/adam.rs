use serde::{Deserialize, Serialize};

use super::{NeuralError, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, params: usize) -> Self {
        Self {
            config,
            m: vec![T::zero(); params],
            v: vec![T::zero(); params],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Parameters with a zero gradient and zero
/// moments are left bit-for-bit unchanged.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut AdamState<T>) -> Result<(), NeuralError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(NeuralError::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let c = state.config;
    let t = state.t as i32;
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    // Bias corrections folded into the step size.
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let step = T::lit(c.lr / bc1);
    let root_bc2 = T::lit(bc2.sqrt());
    let eps = T::lit(c.eps);
    for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let delta = step * *m / ((*v).sqrt() / root_bc2 + eps);
        if delta != T::zero() {
            *p -= delta;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_step_hand_value() {
        let mut p = [1.0f64];
        let mut s = AdamState::new(AdamConfig::default(), 1);
        adam_step(&mut p, &[1.0], &mut s).unwrap();
        assert!((p[0] - 0.999).abs() < 1e-9);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = [0.3f32, -1.7, 1e-30];
        let before = p;
        let mut s = AdamState::new(AdamConfig::default(), 3);
        for _ in 0..5 {
            adam_step(&mut p, &[0.0; 3], &mut s).unwrap();
        }
        assert_eq!(p.map(f32::to_bits), before.map(f32::to_bits));
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let mut p = [0.0f64, 0.0];
        let mut s = AdamState::new(AdamConfig::default(), 2);
        let mut last = p;
        for _ in 0..2000 {
            last = p;
            adam_step(&mut p, &[0.5, -3.0], &mut s).unwrap();
        }
        assert!(((last[0] - p[0]) - 1e-3).abs() < 1e-8);
        assert!(((p[1] - last[1]) - 1e-3).abs() < 1e-8);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::<f64>::new(AdamConfig::default(), 2);
        assert!(adam_step(&mut [0.0], &[0.0], &mut s).is_err());
    }

    proptest! {
        #[test]
        fn second_moment_stays_non_negative(gs in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            let mut p = [0.0];
            let mut s = AdamState::new(AdamConfig::default(), 1);
            for g in gs {
                adam_step(&mut p, &[g], &mut s).unwrap();
                prop_assert!(s.v[0] >= 0.0);
                prop_assert!(p[0].is_finite());
            }
        }
    }
}
