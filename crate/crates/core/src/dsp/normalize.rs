//! Min-max and z-score scaling.

use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    #[default]
    MinMax,
    ZScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum NormParams {
    MinMax { min: f64, max: f64 },
    ZScore { mean: f64, std: f64 },
}

impl NormParams {
    pub fn mode(&self) -> NormMode {
        match self {
            NormParams::MinMax { .. } => NormMode::MinMax,
            NormParams::ZScore { .. } => NormMode::ZScore,
        }
    }

    /// Zero range or zero spread. Applying degenerate parameters yields zeros.
    pub fn is_degenerate(&self) -> bool {
        match *self {
            NormParams::MinMax { min, max } => max <= min,
            NormParams::ZScore { std, .. } => std <= 0.0,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.is_degenerate() {
            return vec![0.0; x.len()];
        }
        match *self {
            NormParams::MinMax { min, max } => x.iter().map(|v| (v - min) / (max - min)).collect(),
            NormParams::ZScore { mean, std } => x.iter().map(|v| (v - mean) / std).collect(),
        }
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        match *self {
            NormParams::MinMax { min, max } => y.iter().map(|v| v * (max - min) + min).collect(),
            NormParams::ZScore { mean, std } => y.iter().map(|v| v * std + mean).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub params: NormParams,
    /// Set when the input had no spread; `values` are then all zero.
    pub degenerate: bool,
}

pub fn minmax_normalize(x: &[f64]) -> Result<Normalized, DspError> {
    if x.is_empty() {
        return Err(DspError::Empty);
    }
    let (min, max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let params = NormParams::MinMax { min, max };
    Ok(Normalized {
        values: params.apply(x),
        params,
        degenerate: params.is_degenerate(),
    })
}

/// Fit mean and population std unless `params` are supplied, then apply.
pub fn zscore_normalize(x: &[f64], params: Option<&NormParams>) -> Result<Normalized, DspError> {
    if x.is_empty() {
        return Err(DspError::Empty);
    }
    let params = match params {
        Some(p @ NormParams::ZScore { std, .. }) if *std >= 0.0 => *p,
        Some(_) => return Err(DspError::Config("z-score needs z-score parameters with std ≥ 0".into())),
        None => {
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            NormParams::ZScore {
                mean,
                std: var.sqrt(),
            }
        }
    };
    Ok(Normalized {
        values: params.apply(x),
        params,
        degenerate: params.is_degenerate(),
    })
}

pub fn normalize(x: &[f64], mode: NormMode) -> Result<Normalized, DspError> {
    match mode {
        NormMode::MinMax => minmax_normalize(x),
        NormMode::ZScore => zscore_normalize(x, None),
    }
}
