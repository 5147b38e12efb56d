use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    build_bp_baseline, build_icnn_lstm, build_lstm_baseline, build_rnn_baseline, sliding_window_features, train, BpConfig,
    EvalReport, ForestConfig, History, IcnnLstmConfig, Knn, ModelError, ModelKind, RandomForest, SequenceBaselineConfig,
    TrainConfig, WindowSet,
};
use crate::neural::{ModelGraph, Tensor};

/// Hyperparameters for every model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfigs {
    pub icnn_lstm: IcnnLstmConfig,
    pub sequence: SequenceBaselineConfig,
    pub bp: BpConfig,
    pub forest: ForestConfig,
    pub knn_k: usize,
    pub train: TrainConfig,
}

impl Default for ModelConfigs {
    fn default() -> Self {
        Self {
            icnn_lstm: IcnnLstmConfig::default(),
            sequence: SequenceBaselineConfig::default(),
            bp: BpConfig::default(),
            forest: ForestConfig::default(),
            knn_k: 5,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Neural {
        kind: ModelKind,
        graph: ModelGraph<f32>,
        history: History,
    },
    Knn(Knn),
    Forest(RandomForest),
}

/// Input a model of `kind` expects for one raw window.
fn model_input(kind: ModelKind, window: &[f64]) -> Result<Tensor<f32>, ModelError> {
    if kind.uses_features() {
        let f = sliding_window_features(window);
        Ok(Tensor::seq(1, f.len(), f.iter().map(|&v| v as f32).collect())?)
    } else {
        Ok(Tensor::seq(window.len(), 1, window.iter().map(|&v| v as f32).collect())?)
    }
}

/// Train one model on raw windows; feature-based kinds extract window
/// statistics internally. `seed` drives initialisation, shuffling, dropout
/// and bootstrap sampling.
pub fn fit_model(kind: ModelKind, data: &WindowSet, cfg: &ModelConfigs, seed: u64) -> Result<TrainedModel, ModelError> {
    if data.is_empty() {
        return Err(ModelError::Empty("training set"));
    }
    let window_len = data.windows[0].len();
    if data.windows.iter().any(|w| w.len() != window_len) {
        return Err(ModelError::Config("windows differ in length".into()));
    }
    match kind {
        ModelKind::Knn => {
            let f = data.features();
            Ok(TrainedModel::Knn(Knn::fit(f.windows, f.labels, cfg.knn_k)?))
        }
        ModelKind::Rf => {
            let f = data.features();
            Ok(TrainedModel::Forest(RandomForest::fit(&f.windows, &f.labels, &cfg.forest, seed)?))
        }
        _ => {
            let mut graph = match kind {
                ModelKind::IcnnLstm => build_icnn_lstm(&cfg.icnn_lstm, window_len, seed)?,
                ModelKind::Lstm => build_lstm_baseline(&cfg.sequence, window_len, seed)?,
                ModelKind::Rnn => build_rnn_baseline(&cfg.sequence, window_len, seed)?,
                _ => build_bp_baseline(&cfg.bp, seed)?,
            };
            let inputs = data
                .windows
                .iter()
                .map(|w| model_input(kind, w))
                .collect::<Result<Vec<_>, _>>()?;
            let tc = TrainConfig { seed, ..cfg.train.clone() };
            let history = train(&mut graph, &inputs, &data.labels, &data.groups, &tc)?;
            Ok(TrainedModel::Neural { kind, graph, history })
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ClassicFile {
    Knn(Knn),
    Rf(RandomForest),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Neural { kind, .. } => *kind,
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::Forest(_) => ModelKind::Rf,
        }
    }

    pub fn history(&self) -> Option<&History> {
        match self {
            TrainedModel::Neural { history, .. } => Some(history),
            _ => None,
        }
    }

    pub fn predict(&self, window: &[f64]) -> Result<usize, ModelError> {
        match self {
            TrainedModel::Neural { kind, graph, .. } => Ok(graph.predict(&model_input(*kind, window)?)?),
            TrainedModel::Knn(k) => Ok(k.predict(&sliding_window_features(window))),
            TrainedModel::Forest(f) => Ok(f.predict(&sliding_window_features(window))),
        }
    }

    pub fn evaluate(&self, data: &WindowSet) -> Result<EvalReport, ModelError> {
        let predicted = data.windows.iter().map(|w| self.predict(w)).collect::<Result<Vec<_>, _>>()?;
        let mut r = EvalReport::from_predictions(&data.labels, &predicted, super::HazardLabel::COUNT)?;
        r.history = self.history().cloned();
        Ok(r)
    }

    /// Neural models write `<stem>.json` + `<stem>.bin`; KNN and RF write
    /// `<stem>.json` only.
    pub fn save(&self, stem: &Path) -> Result<(), ModelError> {
        let json = match self {
            TrainedModel::Neural { graph, .. } => return Ok(graph.save(stem)?),
            TrainedModel::Knn(k) => serde_json::to_string(&ClassicFile::Knn(k.clone())),
            TrainedModel::Forest(f) => serde_json::to_string(&ClassicFile::Rf(f.clone())),
        }
        .map_err(|e| ModelError::Io(e.to_string()))?;
        fs::write(stem.with_extension("json"), json).map_err(|e| ModelError::Io(format!("{}: {e}", stem.display())))
    }

    /// Load a model written by [`TrainedModel::save`]; `kind` selects how
    /// the neural inputs are framed.
    pub fn load(kind: ModelKind, manifest: &Path) -> Result<Self, ModelError> {
        if kind.is_neural() {
            return Ok(TrainedModel::Neural {
                kind,
                graph: ModelGraph::load(manifest)?,
                history: History::default(),
            });
        }
        let text = fs::read_to_string(manifest).map_err(|e| ModelError::Io(format!("{}: {e}", manifest.display())))?;
        match serde_json::from_str(&text).map_err(|e| ModelError::Io(e.to_string()))? {
            ClassicFile::Knn(k) if kind == ModelKind::Knn => Ok(TrainedModel::Knn(k)),
            ClassicFile::Rf(f) if kind == ModelKind::Rf => Ok(TrainedModel::Forest(f)),
            _ => Err(ModelError::Io(format!("{} does not hold a {kind} model", manifest.display()))),
        }
    }
}
