//! Digital Butterworth low-pass filters as cascaded biquads.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.order == 0 {
            return Err(DspError::Config("filter order must be ≥ 1".into()));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(DspError::Config(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist) {
            return Err(DspError::Config(format!(
                "cutoff {} Hz must lie in (0, {nyquist}) Hz",
                self.cutoff_hz
            )));
        }
        Ok(())
    }
}

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + self.b1 * z_inv + self.b2 * z2) / (1.0 + self.a1 * z_inv + self.a2 * z2)
    }

    /// Both poles strictly inside the unit circle (Jury conditions).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoeffs {
    pub spec: FilterSpec,
    pub sections: Vec<Biquad>,
}

/// Analog Butterworth prototype with a pre-warped cutoff, mapped through the
/// bilinear transform. Each section is rescaled so its gain at DC is exactly 1.
pub fn design_butterworth(spec: &FilterSpec) -> Result<FilterCoeffs, DspError> {
    spec.validate()?;
    let n = spec.order;
    let k = (std::f64::consts::PI * spec.cutoff_hz / spec.sample_rate_hz).tan();
    let k2 = k * k;
    let mut sections = Vec::with_capacity(n.div_ceil(2));
    for i in 0..n / 2 {
        // Normalized analog pair s² + q s + 1 with q = 2 sin((2i+1)π / 2n).
        let q = 2.0 * ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).sin();
        let a0 = 1.0 + q * k + k2;
        let a1 = (2.0 * k2 - 2.0) / a0;
        let a2 = (1.0 - q * k + k2) / a0;
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Biquad {
            b0: g,
            b1: 2.0 * g,
            b2: g,
            a1,
            a2,
        });
    }
    if n % 2 == 1 {
        let a1 = (k - 1.0) / (k + 1.0);
        let g = (1.0 + a1) / 2.0;
        sections.push(Biquad {
            b0: g,
            b1: g,
            b2: 0.0,
            a1,
            a2: 0.0,
        });
    }
    Ok(FilterCoeffs {
        spec: *spec,
        sections,
    })
}

/// Complex response at `freq_hz`.
pub fn frequency_response(coeffs: &FilterCoeffs, freq_hz: f64) -> Complex64 {
    let w = std::f64::consts::TAU * freq_hz / coeffs.spec.sample_rate_hz;
    let z_inv = Complex64::from_polar(1.0, -w);
    coeffs
        .sections
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
}

/// Causal filtering from zero initial state, transposed direct form II.
pub fn filter_signal(coeffs: &FilterCoeffs, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in &coeffs.sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in y.iter_mut() {
            let input = *v;
            let out = s.b0 * input + z1;
            z1 = s.b1 * input - s.a1 * out + z2;
            z2 = s.b2 * input - s.a2 * out;
            *v = out;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(order: usize, fc: f64, fs: f64) -> FilterSpec {
        FilterSpec {
            order,
            cutoff_hz: fc,
            sample_rate_hz: fs,
        }
    }

    #[test]
    fn dc_gain_is_one() {
        for order in 1..=8 {
            let c = design_butterworth(&spec(order, 10.0, 100.0)).unwrap();
            assert!((frequency_response(&c, 0.0).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_power_at_cutoff() {
        for order in [1, 2, 3, 4, 7] {
            let c = design_butterworth(&spec(order, 10.0, 100.0)).unwrap();
            let g = frequency_response(&c, 10.0).norm();
            assert!((g - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3, "order {order}: {g}");
        }
    }

    #[test]
    fn higher_order_rolls_off_faster() {
        let g2 = frequency_response(&design_butterworth(&spec(2, 10.0, 100.0)).unwrap(), 40.0).norm();
        let g4 = frequency_response(&design_butterworth(&spec(4, 10.0, 100.0)).unwrap(), 40.0).norm();
        assert!(g4 < g2);
    }

    #[test]
    fn matches_reference_second_order_design() {
        // Reference values computed by hand from the bilinear transform of
        // 1/(s² + √2 s + 1) with K = tan(π/10).
        let c = design_butterworth(&spec(2, 10.0, 100.0)).unwrap();
        let s = c.sections[0];
        let k = (std::f64::consts::PI / 10.0).tan();
        let a0 = 1.0 + std::f64::consts::SQRT_2 * k + k * k;
        assert!((s.b0 - k * k / a0).abs() < 1e-15);
        assert!((s.a1 - 2.0 * (k * k - 1.0) / a0).abs() < 1e-15);
        assert!((s.a2 - (1.0 - std::f64::consts::SQRT_2 * k + k * k) / a0).abs() < 1e-15);
    }

    #[test]
    fn rejects_cutoff_at_or_above_nyquist() {
        assert!(design_butterworth(&spec(4, 50.0, 100.0)).is_err());
        assert!(design_butterworth(&spec(4, 0.0, 100.0)).is_err());
        assert!(design_butterworth(&spec(0, 10.0, 100.0)).is_err());
    }

    #[test]
    fn constant_and_zero_inputs() {
        let c = design_butterworth(&spec(4, 10.0, 100.0)).unwrap();
        let y = filter_signal(&c, &[3.5; 400]);
        assert!((y[399] - 3.5).abs() < 1e-9);
        assert!(filter_signal(&c, &[0.0; 50]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn steady_state_sine_matches_response() {
        let c = design_butterworth(&spec(4, 10.0, 100.0)).unwrap();
        for &f in &[2.0, 8.0, 10.0, 15.0, 25.0] {
            let n = 4000;
            let x: Vec<f64> = (0..n)
                .map(|i| (std::f64::consts::TAU * f * i as f64 / 100.0).sin())
                .collect();
            let y = filter_signal(&c, &x);
            // Least-squares amplitude over the settled tail spanning whole periods.
            let tail = 2000..n;
            let (mut s, mut co) = (0.0, 0.0);
            for i in tail.clone() {
                let ph = std::f64::consts::TAU * f * i as f64 / 100.0;
                s += y[i] * ph.sin();
                co += y[i] * ph.cos();
            }
            let amp = 2.0 * s.hypot(co) / tail.len() as f64;
            let expected = frequency_response(&c, f).norm();
            assert!((amp / expected - 1.0).abs() < 0.01, "f {f}: {amp} vs {expected}");
        }
    }

    proptest! {
        #[test]
        fn sections_are_stable_and_impulse_decays(order in 1usize..9, frac in 0.01f64..0.49) {
            let c = design_butterworth(&spec(order, frac * 100.0, 100.0)).unwrap();
            prop_assert!(c.sections.iter().all(Biquad::is_stable));
            let mut impulse = vec![0.0; 20_000];
            impulse[0] = 1.0;
            let h = filter_signal(&c, &impulse);
            prop_assert!(h[h.len() - 1].abs() < 1e-9);
        }

        #[test]
        fn filtering_is_linear(
            x in prop::collection::vec(-10.0f64..10.0, 64),
            y in prop::collection::vec(-10.0f64..10.0, 64),
            a in -3.0f64..3.0, b in -3.0f64..3.0,
        ) {
            let c = design_butterworth(&spec(4, 10.0, 100.0)).unwrap();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = filter_signal(&c, &mix);
            let fx = filter_signal(&c, &x);
            let fy = filter_signal(&c, &y);
            for i in 0..64 {
                let rhs = a * fx[i] + b * fy[i];
                let scale = (a * fx[i]).abs() + (b * fy[i]).abs() + 1e-12;
                prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * scale.max(1.0));
            }
        }
    }
}
