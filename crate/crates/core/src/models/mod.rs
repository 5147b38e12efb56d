//! Hazard-state classifiers: the ICNN-LSTM, three neural baselines and two
//! classical ones over sliding-window statistics.

mod classifier;
mod eval;
mod features;
mod forest;
mod knn;
mod train;

pub use classifier::{fit_model, ModelConfigs, TrainedModel};
pub use eval::{evaluate, EvalReport};
pub use features::{sliding_window_features, FEATURE_NAMES};
pub use forest::{gini, ForestConfig, RandomForest};
pub use knn::{knn_classify, Knn};
pub use train::{carve_validation, train, EpochRecord, History, TrainConfig};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{LayerSpec, ModelGraph, NeuralError, Padding, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

/// Hazard state of the climbing robot. Indices are fixed: 0, 1, 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardLabel {
    Safe,
    PotentialHazard,
    HazardOccurred,
}

impl HazardLabel {
    pub const ALL: [HazardLabel; 3] = [HazardLabel::Safe, HazardLabel::PotentialHazard, HazardLabel::HazardOccurred];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            HazardLabel::Safe => "safe",
            HazardLabel::PotentialHazard => "potential_hazard",
            HazardLabel::HazardOccurred => "hazard_occurred",
        }
    }
}

impl fmt::Display for HazardLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    IcnnLstm,
    Lstm,
    Rnn,
    Bp,
    Rf,
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::IcnnLstm,
        ModelKind::Lstm,
        ModelKind::Rnn,
        ModelKind::Bp,
        ModelKind::Rf,
        ModelKind::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::IcnnLstm => "icnn_lstm",
            ModelKind::Lstm => "lstm",
            ModelKind::Rnn => "rnn",
            ModelKind::Bp => "bp",
            ModelKind::Rf => "rf",
            ModelKind::Knn => "knn",
        }
    }

    pub fn is_neural(self) -> bool {
        !matches!(self, ModelKind::Rf | ModelKind::Knn)
    }

    /// BP, RF and KNN see window statistics; the rest see raw windows.
    pub fn uses_features(self) -> bool {
        matches!(self, ModelKind::Bp | ModelKind::Rf | ModelKind::Knn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model {s:?}; expected one of icnn_lstm, lstm, rnn, bp, rf, knn"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcnnLstmConfig {
    pub conv_blocks: usize,
    pub filters: usize,
    pub kernel: usize,
    /// 1 disables pooling.
    pub pool_window: usize,
    pub dropout_rate: f64,
    pub lstm_hidden: usize,
    pub classes: usize,
}

impl Default for IcnnLstmConfig {
    fn default() -> Self {
        Self {
            conv_blocks: 2,
            filters: 64,
            kernel: 3,
            pool_window: 2,
            dropout_rate: 0.2,
            lstm_hidden: 64,
            classes: 3,
        }
    }
}

impl IcnnLstmConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let counts = [
            ("conv_blocks", self.conv_blocks),
            ("filters", self.filters),
            ("kernel", self.kernel),
            ("pool_window", self.pool_window),
            ("lstm_hidden", self.lstm_hidden),
            ("classes", self.classes),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be ≥ 1")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::Config(format!("dropout_rate {} outside [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }
}

/// Shared shape of the LSTM and RNN baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceBaselineConfig {
    pub hidden: usize,
    pub dense: usize,
    pub classes: usize,
    /// RNN only; `None` backpropagates through the whole window.
    pub truncation: Option<usize>,
}

impl Default for SequenceBaselineConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            dense: 32,
            classes: 3,
            truncation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpConfig {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            inputs: FEATURE_NAMES.len(),
            hidden: 100,
            classes: 3,
        }
    }
}

fn graph<T: crate::neural::Real>(input_channels: usize, specs: &[LayerSpec], seed: u64, window_len: usize) -> Result<ModelGraph<T>, ModelError> {
    let g = ModelGraph::init(input_channels, specs, seed)?;
    let min_len = g.min_input_len()?;
    if window_len < min_len {
        return Err(NeuralError::TooShort { got: window_len, min_len }.into());
    }
    Ok(g)
}

/// `[conv → adaptive ReLU → max-pool → dropout] × blocks → LSTM → flatten →
/// dense`. Convolutions use valid padding; the LSTM returns its full
/// sequence, which is flattened before the classifier.
pub fn build_icnn_lstm<T: crate::neural::Real>(cfg: &IcnnLstmConfig, window_len: usize, seed: u64) -> Result<ModelGraph<T>, ModelError> {
    cfg.validate()?;
    let mut specs = Vec::new();
    let mut ch = 1;
    for _ in 0..cfg.conv_blocks {
        specs.push(LayerSpec::Conv1d {
            in_ch: ch,
            out_ch: cfg.filters,
            width: cfg.kernel,
            padding: Padding::Valid,
        });
        specs.push(LayerSpec::AdaptiveRelu { channels: cfg.filters });
        specs.push(LayerSpec::MaxPool1d { window: cfg.pool_window });
        specs.push(LayerSpec::Dropout { rate: cfg.dropout_rate });
        ch = cfg.filters;
    }
    specs.push(LayerSpec::Lstm {
        input: ch,
        hidden: cfg.lstm_hidden,
        return_sequences: true,
    });
    specs.push(LayerSpec::Flatten);
    // The dense width depends on the sequence length left after the stack.
    let probe: ModelGraph<T> = graph(1, &specs, seed, window_len)?;
    let (_, flat) = probe.output_shape(window_len)?;
    specs.push(LayerSpec::Dense {
        input: flat,
        output: cfg.classes,
    });
    graph(1, &specs, seed, window_len)
}

/// Three stacked LSTMs, then two dense layers.
pub fn build_lstm_baseline<T: crate::neural::Real>(cfg: &SequenceBaselineConfig, window_len: usize, seed: u64) -> Result<ModelGraph<T>, ModelError> {
    let h = cfg.hidden;
    let specs = [
        LayerSpec::Lstm {
            input: 1,
            hidden: h,
            return_sequences: true,
        },
        LayerSpec::Lstm {
            input: h,
            hidden: h,
            return_sequences: true,
        },
        LayerSpec::Lstm {
            input: h,
            hidden: h,
            return_sequences: false,
        },
        LayerSpec::Dense { input: h, output: cfg.dense },
        LayerSpec::Relu,
        LayerSpec::Dense {
            input: cfg.dense,
            output: cfg.classes,
        },
    ];
    graph(1, &specs, seed, window_len)
}

/// Two stacked tanh RNNs, then two dense layers.
pub fn build_rnn_baseline<T: crate::neural::Real>(cfg: &SequenceBaselineConfig, window_len: usize, seed: u64) -> Result<ModelGraph<T>, ModelError> {
    let h = cfg.hidden;
    let specs = [
        LayerSpec::Rnn {
            input: 1,
            hidden: h,
            return_sequences: true,
            truncation: cfg.truncation,
        },
        LayerSpec::Rnn {
            input: h,
            hidden: h,
            return_sequences: false,
            truncation: cfg.truncation,
        },
        LayerSpec::Dense { input: h, output: cfg.dense },
        LayerSpec::Relu,
        LayerSpec::Dense {
            input: cfg.dense,
            output: cfg.classes,
        },
    ];
    graph(1, &specs, seed, window_len)
}

/// Two ReLU hidden layers over a feature vector presented as `[1, inputs]`.
pub fn build_bp_baseline<T: crate::neural::Real>(cfg: &BpConfig, seed: u64) -> Result<ModelGraph<T>, ModelError> {
    let specs = [
        LayerSpec::Dense {
            input: cfg.inputs,
            output: cfg.hidden,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            input: cfg.hidden,
            output: cfg.hidden,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            input: cfg.hidden,
            output: cfg.classes,
        },
    ];
    graph(cfg.inputs, &specs, seed, 1)
}

/// Windows (or feature vectors) with integer labels and the simulation run
/// each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub groups: Vec<u64>,
}

impl WindowSet {
    pub fn new(windows: Vec<Vec<f64>>, labels: Vec<usize>, groups: Vec<u64>) -> Result<Self, ModelError> {
        if windows.len() != labels.len() || windows.len() != groups.len() {
            return Err(ModelError::Config(format!(
                "{} windows, {} labels, {} groups",
                windows.len(),
                labels.len(),
                groups.len()
            )));
        }
        Ok(Self { windows, labels, groups })
    }

    /// Every sample in its own group.
    pub fn ungrouped(windows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, ModelError> {
        let groups = (0..windows.len() as u64).collect();
        Self::new(windows, labels, groups)
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            windows: idx.iter().map(|&i| self.windows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    pub fn features(&self) -> Self {
        Self {
            windows: self.windows.iter().map(|w| sliding_window_features(w).to_vec()).collect(),
            labels: self.labels.clone(),
            groups: self.groups.clone(),
        }
    }

    /// Each window as a single-channel `[len, 1]` sequence.
    pub fn sequences(&self) -> Result<Vec<Tensor<f32>>, ModelError> {
        self.windows
            .iter()
            .map(|w| Ok(Tensor::seq(w.len(), 1, w.iter().map(|&v| v as f32).collect())?))
            .collect()
    }

    /// Each row as a `[1, d]` vector.
    pub fn rows(&self) -> Result<Vec<Tensor<f32>>, ModelError> {
        self.windows
            .iter()
            .map(|w| Ok(Tensor::seq(1, w.len(), w.iter().map(|&v| v as f32).collect())?))
            .collect()
    }
}
