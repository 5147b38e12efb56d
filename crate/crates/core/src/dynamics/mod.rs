//! Physical model of the climbing robot and the synthetic sensor simulator.

mod adhesion;
mod frame;
mod integrate;
mod rod;
mod simulate;

pub use adhesion::{
    adhesion_holds, contact_stiffness, damping_ratio, gravity_load_force, magnetic_force_vector,
    natural_frequency, AdhesionConfig, ClimbState, PlateGeometry,
};
pub use frame::{Channel, FrameError, SignalFrame};
pub use integrate::{rk4_step, RK4_STEP_LIMIT};
pub use rod::{rod_gain_phase, rod_transfer, steady_state_sine_gain, RodModel, RodOde};
pub use simulate::{simulate_response, ExcitationModel, SensorKind, SimScenario};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no plates attached: the robot-wall oscillator has no mode")]
    Detached,
    #[error("undamped rod driven exactly at resonance (ω = {omega} rad/s)")]
    UndampedResonance { omega: f64 },
    #[error("integration step unstable; sample rate must be at least {required_min_rate_hz:.1} Hz")]
    UnstableStep { required_min_rate_hz: f64 },
}

impl DynamicsError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Self::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
