use super::Real;

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += a·x`.
#[inline]
pub fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

#[inline]
pub fn sigmoid<T: Real>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// Numerically stable softmax of one row.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub const LOG_CLAMP: f64 = 1e-12;

/// Mean over rows of `−Σ y·ln p`, with `p` clamped below at 1e-12.
pub fn cross_entropy<T: Real>(probs: &[Vec<T>], targets: &[Vec<T>]) -> T {
    let floor = T::lit(LOG_CLAMP);
    let total: T = probs
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            p.iter()
                .zip(y)
                .map(|(&pi, &yi)| -yi * pi.max(floor).ln())
                .sum::<T>()
        })
        .sum();
    total / T::from_usize(probs.len().max(1)).unwrap()
}

/// Softmax followed by cross-entropy for one row; returns the loss and the
/// gradient with respect to the logits, `p − y`.
pub fn softmax_cross_entropy<T: Real>(logits: &[T], target: &[T]) -> (T, Vec<T>) {
    let p = softmax(logits);
    let floor = T::lit(LOG_CLAMP);
    let loss = p
        .iter()
        .zip(target)
        .map(|(&pi, &yi)| -yi * pi.max(floor).ln())
        .sum();
    let grad = p.iter().zip(target).map(|(&pi, &yi)| pi - yi).collect();
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0f64, 0.0, 0.0]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax(&[1000.0f64, 0.0]);
        assert_eq!(p[0], 1.0);
        assert!(p[1] >= 0.0 && p[1] < 1e-300);
    }

    #[test]
    fn cross_entropy_examples() {
        let t = vec![vec![0.0f64, 1.0, 0.0]];
        assert_eq!(cross_entropy(&t, &t), 0.0);
        let u = vec![vec![1.0f64 / 3.0; 3]];
        assert!((cross_entropy(&u, &t) - 3f64.ln()).abs() < 1e-12);
        // Clamping keeps a confident wrong answer finite.
        let wrong = vec![vec![1.0f64, 0.0, 0.0]];
        assert!((cross_entropy(&wrong, &t) - (-(1e-12f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn fused_gradient_matches_finite_differences() {
        let logits = [0.3f64, -1.2, 2.0];
        let target = [0.0, 0.0, 1.0];
        let (_, g) = softmax_cross_entropy(&logits, &target);
        for i in 0..3 {
            let eps = 1e-6;
            let mut up = logits;
            up[i] += eps;
            let mut dn = logits;
            dn[i] -= eps;
            let num = (softmax_cross_entropy(&up, &target).0 - softmax_cross_entropy(&dn, &target).0) / (2.0 * eps);
            assert!((num - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 - i as f64 * 0.1).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn softmax_rows_are_distributions(x in prop::collection::vec(-15.0f64..15.0, 1..10), c in -100.0f64..100.0) {
            let p = softmax(&x);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0 || x.len() == 1));
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
