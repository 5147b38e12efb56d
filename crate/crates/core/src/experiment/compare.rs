use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_dataset, generate_windows, mix, split_by_group, window_set, ExperimentError, ExperimentPlan};
use crate::dynamics::{simulate_response, SensorKind};
use crate::models::{fit_model, EvalReport, ModelKind, WindowSet};
use crate::quality::{magnitude_name, quality_report, ChannelQuality, QualityReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorCell {
    pub level: u8,
    pub sensor: SensorKind,
    pub accuracy: f64,
    pub train_windows: usize,
    pub test_windows: usize,
    pub quality: ChannelQuality,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorComparisonReport {
    pub cells: Vec<SensorCell>,
    pub quality: Vec<(u8, QualityReport)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelKind,
    pub run: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation over the runs.
    pub std_accuracy: f64,
    pub best_run: usize,
    pub best_confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparisonReport {
    pub level: u8,
    pub sensor: SensorKind,
    pub train_windows: usize,
    pub test_windows: usize,
    pub summaries: Vec<ModelSummary>,
    pub runs: Vec<RunRecord>,
}

/// One record per level from the plan's template scenario, sharing the
/// master seed so only the excitation differs.
pub fn quality_by_level(plan: &ExperimentPlan) -> Result<Vec<(u8, QualityReport)>, ExperimentError> {
    plan.validate()?;
    plan.excitation_levels
        .par_iter()
        .map(|&level| {
            let mut scn = plan.scenario.clone();
            scn.excitation_level = level;
            scn.seed = mix(plan.master_seed, u64::MAX);
            Ok((level, quality_report(&simulate_response(&scn)?)?))
        })
        .collect()
}

fn split(plan: &ExperimentPlan, set: &WindowSet) -> Result<(WindowSet, WindowSet), ExperimentError> {
    let (tr, te) = split_by_group(&set.labels, &set.groups, plan.split_ratio, plan.master_seed)?;
    Ok((set.subset(&tr), set.subset(&te)))
}

/// ICNN-LSTM accuracy and signal quality for every (level, sensor).
pub fn compare_sensors(plan: &ExperimentPlan) -> Result<SensorComparisonReport, ExperimentError> {
    let quality = quality_by_level(plan)?;
    let data = generate_dataset(plan)?;
    let mut jobs = Vec::new();
    for &level in &plan.excitation_levels {
        for sensor in SensorKind::ALL {
            jobs.push((level, sensor));
        }
    }
    let cells = jobs
        .par_iter()
        .map(|&(level, sensor)| {
            let (train, test) = split(plan, &window_set(&data, plan.model_angle_deg, level, sensor))?;
            let model = fit_model(ModelKind::IcnnLstm, &train, &plan.models, plan.master_seed)?;
            let eval = model.evaluate(&test)?;
            let report = &quality.iter().find(|(l, _)| *l == level).expect("one report per level").1;
            let q = report
                .channel(&magnitude_name(sensor))
                .cloned()
                .ok_or_else(|| ExperimentError::Plan(format!("no {sensor} magnitude channel")))?;
            Ok(SensorCell {
                level,
                sensor,
                accuracy: eval.accuracy,
                train_windows: train.len(),
                test_windows: test.len(),
                quality: q,
                eval,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(SensorComparisonReport { cells, quality })
}

/// Train each model `plan.runs` times (seed `master_seed + run`) on one
/// shared run-aware split of the plan's model level and sensor.
pub fn compare_models(plan: &ExperimentPlan, kinds: &[ModelKind]) -> Result<ModelComparisonReport, ExperimentError> {
    if kinds.is_empty() {
        return Err(ExperimentError::Plan("no models to compare".into()));
    }
    let data = generate_windows(plan, &[plan.model_level], &[plan.model_sensor])?;
    let (train, test) = split(plan, &window_set(&data, plan.model_angle_deg, plan.model_level, plan.model_sensor))?;
    let jobs: Vec<(ModelKind, usize)> = kinds.iter().flat_map(|&k| (0..plan.runs).map(move |r| (k, r))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(model, run)| {
            let seed = plan.master_seed.wrapping_add(run as u64);
            let eval = fit_model(model, &train, &plan.models, seed)?.evaluate(&test)?;
            Ok(RunRecord {
                model,
                run,
                seed,
                accuracy: eval.accuracy,
                eval,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let summaries = kinds
        .iter()
        .map(|&model| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.model == model).collect();
            let accuracies: Vec<f64> = mine.iter().map(|r| r.accuracy).collect();
            let n = accuracies.len() as f64;
            let mean = accuracies.iter().sum::<f64>() / n;
            let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
            let best = mine.iter().fold(mine[0], |b, r| if r.accuracy > b.accuracy { r } else { b });
            ModelSummary {
                model,
                accuracies,
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
                best_run: best.run,
                best_confusion: best.eval.confusion.clone(),
            }
        })
        .collect();
    Ok(ModelComparisonReport {
        level: plan.model_level,
        sensor: plan.model_sensor,
        train_windows: train.len(),
        test_windows: test.len(),
        summaries,
        runs,
    })
}

impl ModelComparisonReport {
    /// `model,run_0..run_{R-1},mean,std`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let runs = self.summaries.first().map_or(0, |s| s.accuracies.len());
        write!(out, "model")?;
        for r in 0..runs {
            write!(out, ",run_{r}")?;
        }
        writeln!(out, ",mean,std")?;
        for s in &self.summaries {
            write!(out, "{}", s.model)?;
            for a in &s.accuracies {
                write!(out, ",{a}")?;
            }
            writeln!(out, ",{},{}", s.mean_accuracy, s.std_accuracy)?;
        }
        Ok(())
    }

    pub fn summary(&self, model: ModelKind) -> Option<&ModelSummary> {
        self.summaries.iter().find(|s| s.model == model)
    }
}

impl SensorComparisonReport {
    /// `level,body,rod` test accuracies.
    pub fn write_accuracy_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "level")?;
        for s in SensorKind::ALL {
            write!(out, ",{s}")?;
        }
        writeln!(out)?;
        let mut levels: Vec<u8> = self.cells.iter().map(|c| c.level).collect();
        levels.dedup();
        for level in levels {
            write!(out, "{level}")?;
            for s in SensorKind::ALL {
                match self.cells.iter().find(|c| c.level == level && c.sensor == s) {
                    Some(c) => write!(out, ",{}", c.accuracy)?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn cell(&self, level: u8, sensor: SensorKind) -> Option<&SensorCell> {
        self.cells.iter().find(|c| c.level == level && c.sensor == sensor)
    }
}
