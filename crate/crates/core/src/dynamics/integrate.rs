//! Fixed-step explicit Runge–Kutta integration.

/// One classical 4th-order Runge–Kutta step of `ẏ = f(t, y)`.
pub fn rk4_step<const N: usize, F>(f: F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// Largest step that keeps RK4 comfortably inside its stability region for a
/// mode with eigenvalue magnitude `|λ|`. The exact boundary on the imaginary
/// axis is `2√2`; this keeps some margin.
pub const RK4_STEP_LIMIT: f64 = 2.0;
