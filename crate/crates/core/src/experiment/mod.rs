//! The experimental protocol on synthetic data: labelled window generation,
//! run-aware splitting, and the sensor and model comparisons.

mod compare;
mod split;

pub use compare::{
    compare_models, compare_sensors, quality_by_level, ModelComparisonReport, ModelSummary, RunRecord, SensorCell,
    SensorComparisonReport,
};
pub use split::{split_by_group, split_dataset};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{preprocess, write_windows_csv, DspError, NormParams, PreprocessConfig, WindowManifest};
use crate::dynamics::{simulate_response, ClimbState, DynamicsError, SensorKind, SimScenario};
use crate::models::{HazardLabel, ModelConfigs, ModelError, WindowSet};
use crate::quality::QualityError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("plate count {0} is outside the protocol (4, 5 or 6)")]
    OutOfProtocol(u32),
    #[error(transparent)]
    Simulation(#[from] DynamicsError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Table mapping: 6 plates safe, 5 potential hazard, 4 hazard occurred.
pub fn label_from_plate_count(n: u32) -> Result<HazardLabel, ExperimentError> {
    match n {
        6 => Ok(HazardLabel::Safe),
        5 => Ok(HazardLabel::PotentialHazard),
        4 => Ok(HazardLabel::HazardOccurred),
        _ => Err(ExperimentError::OutOfProtocol(n)),
    }
}

pub fn one_hot(label: HazardLabel) -> [f64; HazardLabel::COUNT] {
    let mut v = [0.0; HazardLabel::COUNT];
    v[label.index()] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub wall_angles_deg: Vec<f64>,
    pub excitation_levels: Vec<u8>,
    pub plate_counts: Vec<u32>,
    /// Windows per class for each (angle, level, sensor).
    pub windows_per_class: usize,
    /// Windows cut from one simulation run; runs per class follow.
    pub windows_per_run: usize,
    /// Training share of the train/test split.
    pub split_ratio: f64,
    /// Independent training runs per model in the model comparison.
    pub runs: usize,
    pub master_seed: u64,
    /// The (angle, level, sensor) dataset used for training and the
    /// sensor and model comparisons.
    pub model_angle_deg: f64,
    pub model_level: u8,
    pub model_sensor: SensorKind,
    /// Template for every simulation; plate count, angle, level, duration
    /// and seed are overwritten per run.
    pub scenario: SimScenario,
    pub preprocess: PreprocessConfig,
    pub models: ModelConfigs,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            wall_angles_deg: vec![55.0, 65.0],
            excitation_levels: vec![0, 1, 2, 3],
            plate_counts: vec![6, 5, 4],
            windows_per_class: 200,
            windows_per_run: 10,
            split_ratio: 0.7,
            runs: 5,
            master_seed: 0,
            model_angle_deg: 55.0,
            model_level: 3,
            model_sensor: SensorKind::Rod,
            scenario: SimScenario::default(),
            preprocess: PreprocessConfig::default(),
            models: ModelConfigs::default(),
        }
    }
}

/// Where a window came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Unique per simulation run; shared by the body and rod windows of it.
    pub scenario_id: u64,
    pub wall_angle_deg: f64,
    pub plate_count: u32,
    pub excitation_level: u8,
    pub sensor: SensorKind,
    pub run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledWindow {
    pub values: Vec<f64>,
    pub label: HazardLabel,
    pub provenance: Provenance,
}

fn mix(seed: u64, id: u64) -> u64 {
    let mut z = seed.wrapping_add(id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Plan(m));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio {} outside (0, 1)", self.split_ratio));
        }
        if self.plate_counts.is_empty() || self.wall_angles_deg.is_empty() || self.excitation_levels.is_empty() {
            return bad("angles, levels and plate counts must be non-empty".into());
        }
        for &n in &self.plate_counts {
            label_from_plate_count(n)?;
        }
        let mut labels: Vec<_> = self.plate_counts.iter().map(|&n| label_from_plate_count(n).unwrap()).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.plate_counts.len() {
            return bad("plate counts must be distinct".into());
        }
        if self.windows_per_class == 0 || self.windows_per_run == 0 || self.runs == 0 {
            return bad("windows_per_class, windows_per_run and runs must be ≥ 1".into());
        }
        if self.runs_per_class() < 2 {
            return bad("each class needs at least two simulation runs to split by run".into());
        }
        if let Some(a) = self.wall_angles_deg.iter().find(|a| !(0.0..=90.0).contains(*a)) {
            return bad(format!("wall angle {a}° outside [0, 90]"));
        }
        if !self.wall_angles_deg.contains(&self.model_angle_deg) {
            return bad(format!("model angle {}° is not in the plan", self.model_angle_deg));
        }
        if self.preprocess.window_len == 0 || self.preprocess.stride == 0 {
            return bad("window_len and stride must be ≥ 1".into());
        }
        for &level in &self.excitation_levels {
            self.run_scenario(0, 0, level, self.plate_counts[0], 0).validate()?;
        }
        Ok(())
    }

    pub fn runs_per_class(&self) -> usize {
        self.windows_per_class.div_ceil(self.windows_per_run)
    }

    /// Record length giving exactly `windows_per_run` windows after settling.
    pub fn run_duration_s(&self) -> f64 {
        let p = &self.preprocess;
        let samples = p.settle_samples + p.window_len + (self.windows_per_run - 1) * p.stride;
        samples as f64 / self.scenario.sample_rate_hz
    }

    /// Index of one simulation run, stable under subsetting of levels.
    fn scenario_id(&self, angle_idx: usize, level: u8, plate_idx: usize, run: usize) -> u64 {
        let per_angle = 256 * self.plate_counts.len() * self.runs_per_class();
        (angle_idx * per_angle + (level as usize * self.plate_counts.len() + plate_idx) * self.runs_per_class() + run) as u64
    }

    fn run_scenario(&self, angle_idx: usize, plate_idx: usize, level: u8, plates: u32, run: usize) -> SimScenario {
        let mut s = self.scenario.clone();
        s.adhesion = s.adhesion.with_plates(plates);
        s.climb = ClimbState {
            wall_angle_rad: self.wall_angles_deg[angle_idx].to_radians(),
            ..s.climb
        };
        s.excitation_level = level;
        // Round up a hair so float truncation never loses the last sample.
        s.duration_s = self.run_duration_s() + 0.5 / s.sample_rate_hz;
        s.seed = mix(self.master_seed, self.scenario_id(angle_idx, level, plate_idx, run));
        s
    }
}

/// Simulate and window every (angle, plate count, run) at the given levels
/// for the given sensors. Output order is angle, level, plate count, run,
/// sensor, window: independent of thread count.
pub fn generate_windows(plan: &ExperimentPlan, levels: &[u8], sensors: &[SensorKind]) -> Result<Vec<LabeledWindow>, ExperimentError> {
    plan.validate()?;
    let mut jobs = Vec::new();
    for ai in 0..plan.wall_angles_deg.len() {
        for &level in levels {
            if !plan.excitation_levels.contains(&level) {
                return Err(ExperimentError::Plan(format!("level {level} is not in the plan")));
            }
            for (pi, &n) in plan.plate_counts.iter().enumerate() {
                for run in 0..plan.runs_per_class() {
                    jobs.push((ai, level, pi, n, run));
                }
            }
        }
    }
    let per_run: Vec<Result<Vec<LabeledWindow>, ExperimentError>> = jobs
        .par_iter()
        .map(|&(ai, level, pi, n, run)| {
            let scn = plan.run_scenario(ai, pi, level, n, run);
            let frame = simulate_response(&scn)?;
            let label = label_from_plate_count(n)?;
            // The last run of a class may contribute fewer windows.
            let take = plan.windows_per_run.min(plan.windows_per_class - run * plan.windows_per_run);
            let mut out = Vec::new();
            for &sensor in sensors {
                let axes = plan.preprocess.axes.pick(sensor.axes());
                let pre = preprocess(&frame, &axes, &plan.preprocess)?;
                if pre.windows.len() < take {
                    return Err(ExperimentError::Plan(format!(
                        "run produced {} windows, needed {take}",
                        pre.windows.len()
                    )));
                }
                out.extend(pre.windows.into_iter().take(take).map(|values| LabeledWindow {
                    values,
                    label,
                    provenance: Provenance {
                        scenario_id: plan.scenario_id(ai, level, pi, run),
                        wall_angle_deg: plan.wall_angles_deg[ai],
                        plate_count: n,
                        excitation_level: level,
                        sensor,
                        run,
                    },
                }));
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_run {
        all.extend(r?);
    }
    Ok(all)
}

/// Every (angle, level, plate count, sensor) in the plan.
pub fn generate_dataset(plan: &ExperimentPlan) -> Result<Vec<LabeledWindow>, ExperimentError> {
    generate_windows(plan, &plan.excitation_levels, &SensorKind::ALL)
}

/// Windows of one sensor and level as a model dataset grouped by run.
pub fn window_set(windows: &[LabeledWindow], angle_deg: f64, level: u8, sensor: SensorKind) -> WindowSet {
    let pick: Vec<&LabeledWindow> = windows
        .iter()
        .filter(|w| {
            w.provenance.wall_angle_deg == angle_deg
                && w.provenance.excitation_level == level
                && w.provenance.sensor == sensor
        })
        .collect();
    WindowSet {
        windows: pick.iter().map(|w| w.values.clone()).collect(),
        labels: pick.iter().map(|w| w.label.index()).collect(),
        groups: pick.iter().map(|w| w.provenance.scenario_id).collect(),
    }
}

pub const DATASET_META: [&str; 7] = ["scenario_id", "wall_angle_deg", "plate_count", "excitation_level", "sensor", "run", "label"];

/// Windows CSV plus its manifest.
pub fn write_dataset<W: Write>(out: W, plan: &ExperimentPlan, windows: &[LabeledWindow]) -> Result<WindowManifest, ExperimentError> {
    let rows = windows.iter().map(|w| {
        let p = &w.provenance;
        (
            vec![
                p.scenario_id.to_string(),
                p.wall_angle_deg.to_string(),
                p.plate_count.to_string(),
                p.excitation_level.to_string(),
                p.sensor.to_string(),
                p.run.to_string(),
                w.label.to_string(),
            ],
            w.values.clone(),
        )
    });
    let rows = write_windows_csv(out, &DATASET_META, rows, plan.preprocess.window_len)?;
    Ok(WindowManifest {
        window_len: plan.preprocess.window_len,
        stride: plan.preprocess.stride,
        filter: plan.preprocess.filter_spec(plan.scenario.sample_rate_hz),
        preprocess: plan.preprocess,
        norm_params: Vec::<NormParams>::new(),
        rows,
    })
}
