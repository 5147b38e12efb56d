//! Carbon-fibre rod carrying the remote attitude sensor.
//!
//! The rod is a massless spring-damper (`k`, `c`) with the sensor as tip mass
//! `M`. Driven by base motion `x₁`, the tip `x₂` obeys
//! `M ẍ₂ = k (x₁ − x₂) + c (ẋ₁ − ẋ₂)`, so the tip-per-base response is
//!
//! ```text
//! H(ω) = (k + jωc) / (k − Mω² + jωc)
//! ```
//!
//! The same ratio holds between tip and base accelerations, which is what the
//! time-domain model integrates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::integrate::rk4_step;
use super::DynamicsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RodModel {
    /// Bending stiffness at the tip, N/m.
    pub stiffness: f64,
    /// Structural damping, N·s/m.
    pub damping: f64,
    /// Sensor (tip) mass, kg.
    pub tip_mass_kg: f64,
}

impl Default for RodModel {
    fn default() -> Self {
        Self {
            stiffness: 600.0,
            damping: 0.8,
            tip_mass_kg: 0.03,
        }
    }
}

impl RodModel {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.stiffness > 0.0) {
            return Err(DynamicsError::invalid("stiffness", "must be > 0"));
        }
        if !(self.damping >= 0.0) {
            return Err(DynamicsError::invalid("damping", "must be ≥ 0"));
        }
        if !(self.tip_mass_kg > 0.0) {
            return Err(DynamicsError::invalid("tip_mass_kg", "must be > 0"));
        }
        Ok(())
    }

    /// Resonance `sqrt(k/M)` in rad/s.
    pub fn resonance(&self) -> f64 {
        (self.stiffness / self.tip_mass_kg).sqrt()
    }

    /// Upper edge of the amplification band, `sqrt(2k/M)` in rad/s.
    pub fn amplification_edge(&self) -> f64 {
        (2.0 * self.stiffness / self.tip_mass_kg).sqrt()
    }

    fn check_pole(&self, omega: f64) -> Result<(), DynamicsError> {
        let real = self.stiffness - self.tip_mass_kg * omega * omega;
        if self.damping == 0.0 && real.abs() <= 1e-12 * self.stiffness {
            return Err(DynamicsError::UndampedResonance { omega });
        }
        Ok(())
    }
}

/// Complex tip-per-base response at angular frequency `omega`.
pub fn rod_transfer(omega: f64, rod: &RodModel) -> Result<Complex64, DynamicsError> {
    rod.validate()?;
    rod.check_pole(omega)?;
    let num = Complex64::new(rod.stiffness, omega * rod.damping);
    let den = Complex64::new(rod.stiffness - rod.tip_mass_kg * omega * omega, omega * rod.damping);
    Ok(num / den)
}

/// Gain `|H(ω)|` and phase `arg H(ω)` in radians.
///
/// The phase is `atan(ωc/k) − atan(ωc/(k − Mω²))` with both arctangents taken
/// in the correct quadrant, so it stays continuous through resonance.
pub fn rod_gain_phase(omega: f64, rod: &RodModel) -> Result<(f64, f64), DynamicsError> {
    rod.validate()?;
    rod.check_pole(omega)?;
    let wc = omega * rod.damping;
    let real = rod.stiffness - rod.tip_mass_kg * omega * omega;
    let gain = rod.stiffness.hypot(wc) / real.hypot(wc);
    let phase = wc.atan2(rod.stiffness) - wc.atan2(real);
    Ok((gain, phase))
}

/// Time-domain rod driven by base acceleration.
///
/// State is the tip deflection relative to the base and its rate; the tip
/// acceleration is `−(k·y + c·ẏ) / M`.
#[derive(Debug, Clone, Copy)]
pub struct RodOde {
    rod: RodModel,
    pub deflection: f64,
    pub deflection_rate: f64,
}

impl RodOde {
    pub fn new(rod: RodModel) -> Self {
        Self {
            rod,
            deflection: 0.0,
            deflection_rate: 0.0,
        }
    }

    pub fn tip_acceleration(&self) -> f64 {
        -(self.rod.stiffness * self.deflection + self.rod.damping * self.deflection_rate)
            / self.rod.tip_mass_kg
    }

    /// Derivative of `[y, ẏ]` for a given base acceleration.
    pub fn derivative(rod: &RodModel, state: &[f64; 2], base_accel: f64) -> [f64; 2] {
        let restoring = -(rod.stiffness * state[0] + rod.damping * state[1]) / rod.tip_mass_kg;
        [state[1], restoring - base_accel]
    }

    /// Advance one step with the base acceleration given as a function of time.
    pub fn step(&mut self, t: f64, h: f64, base_accel: impl Fn(f64) -> f64) {
        let rod = self.rod;
        let next = rk4_step(
            |tt, s| Self::derivative(&rod, s, base_accel(tt)),
            t,
            &[self.deflection, self.deflection_rate],
            h,
        );
        self.deflection = next[0];
        self.deflection_rate = next[1];
    }
}

/// Drive the time-domain rod with a unit base-acceleration sine and return the
/// steady-state tip amplitude ratio. Used to cross-check the ODE against `|H(ω)|`.
pub fn steady_state_sine_gain(rod: &RodModel, omega: f64, step: f64) -> Result<f64, DynamicsError> {
    rod.validate()?;
    let period = std::f64::consts::TAU / omega;
    // Let transients decay for several time constants of the slowest mode.
    let zeta = rod.damping / (2.0 * (rod.stiffness * rod.tip_mass_kg).sqrt());
    let decay = 1.0 / (zeta * rod.resonance()).max(1e-9);
    let settle = (12.0 * decay).max(20.0 * period);
    let measure = 10.0 * period;
    let n_settle = (settle / step).ceil() as usize;
    let n_measure = (measure / step).ceil() as usize;

    let mut ode = RodOde::new(*rod);
    let drive = |t: f64| (omega * t).sin();
    let mut t = 0.0;
    for i in 0..n_settle {
        t = i as f64 * step;
        ode.step(t, step, drive);
    }
    t += step;
    // Amplitude from quadrature projection over whole periods of the drive.
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for i in 0..n_measure {
        let tt = t + i as f64 * step;
        let a = ode.tip_acceleration();
        s += a * (omega * tt).sin();
        c += a * (omega * tt).cos();
        n += 1;
        ode.step(tt, step, drive);
    }
    Ok(2.0 * s.hypot(c) / n as f64)
}
