//! Synthetic sensor records from the robot-wall oscillator and the rod.
//!
//! The body is a force-driven single-DOF oscillator `m ẍ + c ẋ + N k_i x = F(t)`
//! normal to the wall. The rod rides on the body and is integrated in
//! relative coordinates. Both sensors see their acceleration along the wall
//! normal plus gravity, rotated by a random mounting orientation per seed,
//! plus white noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adhesion::{contact_stiffness, AdhesionConfig, ClimbState};
use super::frame::{Channel, SignalFrame};
use super::integrate::{rk4_step, RK4_STEP_LIMIT};
use super::rod::RodModel;
use super::DynamicsError;
use crate::dsp::{design_butterworth, filter_signal, FilterSpec};

/// Forcing applied to the robot body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationModel {
    /// Eccentric-motor tone, Hz.
    pub harmonic_hz: f64,
    /// Tone amplitude per excitation level, N.
    pub harmonic_force_per_level_n: f64,
    /// Standard deviation of the band-limited ambient force, N.
    pub ambient_force_std_n: f64,
    /// Ambient noise bandwidth, Hz.
    pub ambient_cutoff_hz: f64,
}

impl Default for ExcitationModel {
    fn default() -> Self {
        Self {
            harmonic_hz: 25.0,
            harmonic_force_per_level_n: 1.5,
            ambient_force_std_n: 0.4,
            ambient_cutoff_hz: 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimScenario {
    pub adhesion: AdhesionConfig,
    pub rod: RodModel,
    pub climb: ClimbState,
    /// 0 is ambient only; 1..=3 add the motor tone at that multiple.
    pub excitation_level: u8,
    pub excitation: ExcitationModel,
    /// White accelerometer noise, m/s².
    pub sensor_noise_std: f64,
    pub gravity_mag: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// RK4 steps per output sample.
    pub substeps: u32,
    pub seed: u64,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            adhesion: AdhesionConfig::default(),
            rod: RodModel::default(),
            climb: ClimbState::default(),
            excitation_level: 0,
            excitation: ExcitationModel::default(),
            sensor_noise_std: 0.02,
            gravity_mag: 9.81,
            duration_s: 10.0,
            sample_rate_hz: 100.0,
            substeps: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Body,
    Rod,
}

impl SensorKind {
    pub const ALL: [SensorKind; 2] = [SensorKind::Body, SensorKind::Rod];

    pub fn axes(self) -> [&'static str; 3] {
        match self {
            SensorKind::Body => ["body_ax", "body_ay", "body_az"],
            SensorKind::Rod => ["rod_ax", "rod_ay", "rod_az"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Body => "body",
            SensorKind::Rod => "rod",
        }
    }
}

impl std::fmt::Display for SensorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SensorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "body" => Ok(SensorKind::Body),
            "rod" => Ok(SensorKind::Rod),
            _ => Err(format!("unknown sensor `{s}` (expected body or rod)")),
        }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.adhesion.validate()?;
        self.rod.validate()?;
        self.climb.validate()?;
        if self.adhesion.plate_count == 0 {
            return Err(DynamicsError::Detached);
        }
        if self.excitation_level > 3 {
            return Err(DynamicsError::invalid("excitation_level", "must be 0..=3"));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(DynamicsError::invalid("duration_s", "must be > 0"));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(DynamicsError::invalid("sample_rate_hz", "must be > 0"));
        }
        if self.substeps == 0 {
            return Err(DynamicsError::invalid("substeps", "must be ≥ 1"));
        }
        if !(self.sensor_noise_std >= 0.0) {
            return Err(DynamicsError::invalid("sensor_noise_std", "must be ≥ 0"));
        }
        if !(self.gravity_mag >= 0.0) {
            return Err(DynamicsError::invalid("gravity_mag", "must be ≥ 0"));
        }
        let ex = &self.excitation;
        if !(ex.ambient_force_std_n >= 0.0) || !(ex.harmonic_force_per_level_n >= 0.0) {
            return Err(DynamicsError::invalid("excitation", "force amplitudes must be ≥ 0"));
        }
        if !(ex.ambient_cutoff_hz > 0.0) || !(ex.harmonic_hz >= 0.0) {
            return Err(DynamicsError::invalid("excitation", "frequencies must be > 0"));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round().max(1.0) as usize
    }

    /// Sample rate at or above which the integration step is stable.
    pub fn min_stable_rate_hz(&self) -> f64 {
        let body = eigen_magnitude(
            self.adhesion.mass_kg,
            self.adhesion.damping,
            contact_stiffness(&self.adhesion),
        );
        let rod = eigen_magnitude(self.rod.tip_mass_kg, self.rod.damping, self.rod.stiffness);
        body.max(rod) / (RK4_STEP_LIMIT * f64::from(self.substeps))
    }
}

/// Largest root magnitude of `m s² + c s + k`.
fn eigen_magnitude(m: f64, c: f64, k: f64) -> f64 {
    let disc = c * c - 4.0 * m * k;
    if disc < 0.0 {
        (k / m).sqrt()
    } else {
        (c + disc.sqrt()) / (2.0 * m)
    }
}

#[derive(Clone, Copy)]
struct Plant {
    m: f64,
    c: f64,
    k: f64,
    rod: RodModel,
}

impl Plant {
    fn new(scn: &SimScenario) -> Self {
        Self {
            m: scn.adhesion.mass_kg,
            c: scn.adhesion.damping,
            k: contact_stiffness(&scn.adhesion),
            rod: scn.rod,
        }
    }

    fn body_accel(&self, s: &[f64; 4], force: f64) -> f64 {
        (force - self.c * s[1] - self.k * s[0]) / self.m
    }

    fn tip_accel(&self, s: &[f64; 4]) -> f64 {
        -(self.rod.stiffness * s[2] + self.rod.damping * s[3]) / self.rod.tip_mass_kg
    }

    /// State is body displacement and velocity, then rod deflection relative
    /// to the body and its rate.
    fn derivative(&self, s: &[f64; 4], force: f64) -> [f64; 4] {
        let a = self.body_accel(s, force);
        [s[1], a, s[3], self.tip_accel(s) - a]
    }

    #[cfg(test)]
    fn body_energy(&self, s: &[f64; 4]) -> f64 {
        0.5 * self.m * s[1] * s[1] + 0.5 * self.k * s[0] * s[0]
    }
}

/// Integrate the plant over `force` sampled on the step grid, returning states
/// at every grid point. Forcing between grid points is linear.
fn integrate_plant(plant: &Plant, force: &[f64], h: f64, init: [f64; 4]) -> Vec<[f64; 4]> {
    let mut states = Vec::with_capacity(force.len());
    let mut s = init;
    states.push(s);
    for i in 0..force.len() - 1 {
        let (f0, f1) = (force[i], force[i + 1]);
        let t0 = i as f64 * h;
        s = rk4_step(
            |t, y| plant.derivative(y, f0 + (f1 - f0) * ((t - t0) / h)),
            t0,
            &s,
            h,
        );
        states.push(s);
    }
    states
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let mut q = [0.0f64; 4];
    loop {
        for v in q.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-9 {
            q.iter_mut().for_each(|v| *v /= n);
            break;
        }
    }
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Simulate one fixed-plate-count run and return a frame with channels
/// `body_ax, body_ay, body_az, rod_ax, rod_ay, rod_az` in m/s².
pub fn simulate_response(scn: &SimScenario) -> Result<SignalFrame, DynamicsError> {
    scn.validate()?;
    let min_rate = scn.min_stable_rate_hz();
    if scn.sample_rate_hz < min_rate {
        return Err(DynamicsError::UnstableStep {
            required_min_rate_hz: min_rate,
        });
    }

    let n = scn.sample_count();
    let sub = scn.substeps as usize;
    let fs_int = scn.sample_rate_hz * sub as f64;
    let h = 1.0 / fs_int;
    let n_int = (n - 1) * sub + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);

    // Draw order is part of the determinism contract.
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let rotations = [random_rotation(&mut rng), random_rotation(&mut rng)];
    let white: Vec<f64> = (0..n_int).map(|_| StandardNormal.sample(&mut rng)).collect();

    let ex = &scn.excitation;
    let mut force = if ex.ambient_force_std_n > 0.0 {
        let nyquist = fs_int / 2.0;
        if ex.ambient_cutoff_hz < nyquist {
            let coeffs = design_butterworth(&FilterSpec {
                order: 4,
                cutoff_hz: ex.ambient_cutoff_hz,
                sample_rate_hz: fs_int,
            })
            .map_err(|e| DynamicsError::invalid("excitation", e.to_string()))?;
            let gain = ex.ambient_force_std_n / (ex.ambient_cutoff_hz / nyquist).sqrt();
            filter_signal(&coeffs, &white).into_iter().map(|v| v * gain).collect()
        } else {
            white.iter().map(|v| v * ex.ambient_force_std_n).collect()
        }
    } else {
        vec![0.0; n_int]
    };
    let tone = f64::from(scn.excitation_level) * ex.harmonic_force_per_level_n;
    if tone > 0.0 {
        let w = std::f64::consts::TAU * ex.harmonic_hz;
        for (i, f) in force.iter_mut().enumerate() {
            *f += tone * (w * i as f64 * h + phase).sin();
        }
    }

    let plant = Plant::new(scn);
    let states = integrate_plant(&plant, &force, h, [0.0; 4]);

    let g = scn.gravity_mag;
    let alpha = scn.climb.wall_angle_rad;
    let gravity = [-g * alpha.cos(), 0.0, g * alpha.sin()];
    let mut channels: Vec<Channel> = Vec::with_capacity(6);
    for (kind, rot) in SensorKind::ALL.into_iter().zip(rotations.iter()) {
        let mut axes = [
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        ];
        for j in 0..n {
            let s = &states[j * sub];
            let a = match kind {
                SensorKind::Body => plant.body_accel(s, force[j * sub]),
                SensorKind::Rod => plant.tip_accel(s),
            };
            let v = [gravity[0], gravity[1], gravity[2] + a];
            for (r, axis) in rot.iter().zip(axes.iter_mut()) {
                let mut val = r[0] * v[0] + r[1] * v[1] + r[2] * v[2];
                if scn.sensor_noise_std > 0.0 {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    val += scn.sensor_noise_std * e;
                }
                axis.push(val);
            }
        }
        for (name, values) in kind.axes().into_iter().zip(axes) {
            channels.push(Channel {
                name: name.to_string(),
                values,
            });
        }
    }
    SignalFrame::new(scn.sample_rate_hz, channels)
        .map_err(|e| DynamicsError::invalid("sample_rate_hz", e.to_string()))
}
