//! Magnetic plate adhesion forces and the lumped robot-wall oscillator.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use super::DynamicsError;

/// Geometry of one magnetic plate as it rolls into the front adhesion area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateGeometry {
    /// Magnetic force coefficient (N·m²); the attraction is `k / L_h²`.
    pub magnetic_coefficient: f64,
    /// Plate-to-wall standoff `L_h` in metres.
    pub standoff_m: f64,
    /// Track restorative force `F_d` in newtons.
    pub track_restore_force_n: f64,
    /// Track tension force `F_a` in newtons.
    pub track_tension_force_n: f64,
    /// Track bending angle θ in radians.
    pub bend_angle_rad: f64,
}

impl PlateGeometry {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.standoff_m > 0.0) {
            return Err(DynamicsError::invalid("standoff_m", "must be > 0"));
        }
        if !(0.0..=FRAC_PI_2).contains(&self.bend_angle_rad) {
            return Err(DynamicsError::invalid("bend_angle_rad", "must lie in [0, π/2]"));
        }
        if !(self.track_restore_force_n >= 0.0) {
            return Err(DynamicsError::invalid("track_restore_force_n", "must be ≥ 0"));
        }
        if !(self.track_tension_force_n >= 0.0) {
            return Err(DynamicsError::invalid("track_tension_force_n", "must be ≥ 0"));
        }
        Ok(())
    }
}

/// Weight and wall inclination during a climb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClimbState {
    /// Robot weight `G_a` in newtons.
    pub robot_weight_n: f64,
    /// Payload weight `G_b` in newtons.
    pub load_weight_n: f64,
    /// Wall inclination α in radians, measured from the vertical.
    pub wall_angle_rad: f64,
}

impl ClimbState {
    /// Robot of ~7 kg carrying the 5 kg test load on a plate inclined at `wall_angle_deg`.
    pub fn with_angle_deg(wall_angle_deg: f64) -> Self {
        Self {
            robot_weight_n: 7.0 * 9.81,
            load_weight_n: 5.0 * 9.81,
            wall_angle_rad: wall_angle_deg.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.robot_weight_n > 0.0) {
            return Err(DynamicsError::invalid("robot_weight_n", "must be > 0"));
        }
        if !(self.load_weight_n >= 0.0) {
            return Err(DynamicsError::invalid("load_weight_n", "must be ≥ 0"));
        }
        if !(0.0..=FRAC_PI_2).contains(&self.wall_angle_rad) {
            return Err(DynamicsError::invalid("wall_angle_rad", "must lie in [0, π/2]"));
        }
        Ok(())
    }
}

impl Default for ClimbState {
    fn default() -> Self {
        Self::with_angle_deg(55.0)
    }
}

/// Lumped parameters of the robot-wall connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdhesionConfig {
    /// Number of attached plates `N`.
    pub plate_count: u32,
    /// Contact stiffness contributed by one plate, N/m.
    pub per_plate_stiffness: f64,
    /// Oscillating mass (robot plus load), kg.
    pub mass_kg: f64,
    /// Viscous damping, N·s/m.
    pub damping: f64,
}

impl Default for AdhesionConfig {
    fn default() -> Self {
        Self {
            plate_count: 6,
            per_plate_stiffness: 0.9e5,
            mass_kg: 12.0,
            damping: 150.0,
        }
    }
}

impl AdhesionConfig {
    pub fn with_plates(self, plate_count: u32) -> Self {
        Self { plate_count, ..self }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.per_plate_stiffness > 0.0) {
            return Err(DynamicsError::invalid("per_plate_stiffness", "must be > 0"));
        }
        if !(self.mass_kg > 0.0) {
            return Err(DynamicsError::invalid("mass_kg", "must be > 0"));
        }
        if !(self.damping >= 0.0) {
            return Err(DynamicsError::invalid("damping", "must be ≥ 0"));
        }
        Ok(())
    }
}

/// `F_m = [k / L_h², F_d cos θ, F_a cos θ]`.
pub fn magnetic_force_vector(geom: &PlateGeometry) -> Result<[f64; 3], DynamicsError> {
    geom.validate()?;
    let cos = geom.bend_angle_rad.cos();
    Ok([
        geom.magnetic_coefficient / (geom.standoff_m * geom.standoff_m),
        geom.track_restore_force_n * cos,
        geom.track_tension_force_n * cos,
    ])
}

/// `F_g = (G_a + G_b) sin(θ + α)`.
pub fn gravity_load_force(climb: &ClimbState, bend_angle_rad: f64) -> Result<f64, DynamicsError> {
    climb.validate()?;
    Ok((climb.robot_weight_n + climb.load_weight_n) * (bend_angle_rad + climb.wall_angle_rad).sin())
}

/// The plate holds when `‖F_m‖₂ ≥ |F_g|` (boundary inclusive).
pub fn adhesion_holds(magnetic_force: &[f64; 3], gravity_load: f64) -> bool {
    let norm = magnetic_force.iter().map(|f| f * f).sum::<f64>().sqrt();
    norm >= gravity_load.abs()
}

/// Total contact stiffness `k = N·k_i`.
pub fn contact_stiffness(cfg: &AdhesionConfig) -> f64 {
    f64::from(cfg.plate_count) * cfg.per_plate_stiffness
}

/// Undamped natural frequency `sqrt(N·k_i / m)` in rad/s.
pub fn natural_frequency(cfg: &AdhesionConfig) -> Result<f64, DynamicsError> {
    cfg.validate()?;
    if cfg.plate_count == 0 {
        return Err(DynamicsError::Detached);
    }
    Ok((contact_stiffness(cfg) / cfg.mass_kg).sqrt())
}

/// Damping ratio `c / (2 sqrt(m·N·k_i))`.
pub fn damping_ratio(cfg: &AdhesionConfig) -> Result<f64, DynamicsError> {
    cfg.validate()?;
    if cfg.plate_count == 0 {
        return Err(DynamicsError::Detached);
    }
    Ok(cfg.damping / (2.0 * (cfg.mass_kg * contact_stiffness(cfg)).sqrt()))
}
