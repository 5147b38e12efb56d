use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::neural::{adam_step, AdamConfig, AdamState, ModelGraph, NeuralError, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Stop after this many consecutive epochs without improvement (0 stops
    /// at the first).
    pub patience: usize,
    pub seed: u64,
    /// Share of training groups held out for early stopping; 0 monitors the
    /// training loss instead.
    pub validation_fraction: f64,
    /// Stem for the best-so-far checkpoint (`.json` + `.bin`).
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch: 32,
            epochs: 30,
            patience: 5,
            seed: 0,
            validation_fraction: 0.15,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(ModelError::Config("epochs and batch must be ≥ 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(ModelError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(ModelError::Config(format!(
                "validation_fraction {} outside [0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored.
    pub best_epoch: usize,
    pub best_loss: f64,
    pub stopped_early: bool,
}

/// Hold out whole groups, per label, for validation: `round(fraction · g)`
/// of each label's `g` groups, keeping at least one group for training.
/// Returns `(train, validation)` sample indices in ascending order.
pub fn carve_validation(labels: &[usize], groups: &[u64], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_label: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (&l, &g) in labels.iter().zip(groups) {
        let gs = by_label.entry(l).or_default();
        if !gs.contains(&g) {
            gs.push(g);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = Vec::new();
    for gs in by_label.values_mut() {
        gs.sort_unstable();
        gs.shuffle(&mut rng);
        let k = ((fraction * gs.len() as f64).round() as usize).min(gs.len() - 1);
        held.extend_from_slice(&gs[..k]);
    }
    held.sort_unstable();
    (0..labels.len()).partition(|&i| held.binary_search(&groups[i]).is_err())
}

/// Per-batch dropout seed from `(seed, epoch, batch)`.
fn batch_seed(seed: u64, epoch: usize, batch: usize) -> u64 {
    let mut z = seed ^ ((epoch as u64) << 32 | batch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mini-batch Adam with early stopping on validation loss. The parameters
/// with the lowest monitored loss are restored before returning.
pub fn train(
    model: &mut ModelGraph<f32>,
    inputs: &[Tensor<f32>],
    labels: &[usize],
    groups: &[u64],
    cfg: &TrainConfig,
) -> Result<History, ModelError> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(ModelError::Empty("training set"));
    }
    if inputs.len() != labels.len() || inputs.len() != groups.len() {
        return Err(ModelError::Config("inputs, labels and groups differ in length".into()));
    }
    let (mut train_idx, val_idx) = carve_validation(labels, groups, cfg.validation_fraction, cfg.seed);
    let val_x: Vec<&Tensor<f32>> = val_idx.iter().map(|&i| &inputs[i]).collect();
    let val_y: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        model.param_count(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = History {
        best_loss: f64::INFINITY,
        ..History::default()
    };
    let mut best_params = model.flat_params();
    let mut params = best_params.clone();
    let mut wait = 0;

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for (b, chunk) in train_idx.chunks(cfg.batch).enumerate() {
            let xs: Vec<&Tensor<f32>> = chunk.iter().map(|&i| &inputs[i]).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let g = match model.batch_grads(&xs, &ys, Some(batch_seed(cfg.seed, epoch, b))) {
                Err(NeuralError::NonFinite(_)) => return Err(ModelError::NonFinite { epoch, batch: b }),
                r => r?,
            };
            if !g.loss.is_finite() || g.grads.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { epoch, batch: b });
            }
            loss_sum += f64::from(g.loss) * chunk.len() as f64;
            correct += g.correct;
            adam_step(&mut params, &g.grads, &mut adam)?;
            model.set_flat_params(&params)?;
        }
        let n = train_idx.len() as f64;
        let (val_loss, val_accuracy) = if val_x.is_empty() {
            (None, None)
        } else {
            let (l, c) = model.loss_and_correct(&val_x, &val_y)?;
            (Some(f64::from(l)), Some(c as f64 / val_x.len() as f64))
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
        };
        let monitored = val_loss.unwrap_or(record.train_loss);
        history.epochs.push(record);
        if !monitored.is_finite() {
            return Err(ModelError::NonFinite {
                epoch,
                batch: train_idx.len().div_ceil(cfg.batch),
            });
        }
        if monitored < history.best_loss {
            history.best_loss = monitored;
            history.best_epoch = epoch;
            best_params.copy_from_slice(&params);
            wait = 0;
            if let Some(stem) = &cfg.checkpoint_path {
                model.save(stem)?;
            }
        } else {
            wait += 1;
            if wait >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    model.set_flat_params(&best_params)?;
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::LayerSpec;

    #[test]
    fn carve_keeps_groups_whole() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let groups: Vec<u64> = (0..60).map(|i| (i % 3 * 100 + i / 6) as u64).collect();
        let (tr, va) = carve_validation(&labels, &groups, 0.2, 4);
        assert_eq!(tr.len() + va.len(), 60);
        for &v in &va {
            assert!(tr.iter().all(|&t| groups[t] != groups[v]));
        }
        // 10 groups per label, 2 held out, 2 samples each.
        assert_eq!(va.len(), 12);
        assert_eq!(carve_validation(&labels, &groups, 0.0, 4).1.len(), 0);
    }

    fn separable() -> (Vec<Tensor<f32>>, Vec<usize>, Vec<u64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..40 {
            let y = i % 2;
            let s = if y == 0 { -1.0 } else { 1.0 };
            let j = (i as f32) * 0.01;
            xs.push(Tensor::seq(1, 2, vec![s * (0.5 + j), 0.3 - j]).unwrap());
            ys.push(y);
        }
        let gs = (0..40).collect();
        (xs, ys, gs)
    }

    fn linear() -> ModelGraph<f32> {
        ModelGraph::init(2, &[LayerSpec::Dense { input: 2, output: 2 }], 0).unwrap()
    }

    #[test]
    fn fits_separable_toy_set() {
        let (xs, ys, gs) = separable();
        let cfg = TrainConfig {
            lr: 0.05,
            batch: 8,
            epochs: 200,
            patience: 200,
            validation_fraction: 0.0,
            ..Default::default()
        };
        let mut m = linear();
        let h = train(&mut m, &xs, &ys, &gs, &cfg).unwrap();
        assert!(h.epochs.iter().any(|e| e.train_accuracy == 1.0));
        let acc = xs.iter().zip(&ys).filter(|(x, &y)| m.predict(x).unwrap() == y).count();
        assert_eq!(acc, 40);
    }

    #[test]
    fn patience_zero_stops_on_first_plateau() {
        let (xs, ys, gs) = separable();
        // A huge step makes the loss oscillate, so some epoch fails to improve.
        let cfg = TrainConfig {
            lr: 50.0,
            batch: 40,
            epochs: 30,
            patience: 0,
            validation_fraction: 0.0,
            ..Default::default()
        };
        let mut m = linear();
        let h = train(&mut m, &xs, &ys, &gs, &cfg).unwrap();
        assert!(h.stopped_early);
        let last = h.epochs.len() - 1;
        let best_before = h.epochs[..last].iter().map(|e| e.train_loss).fold(f64::INFINITY, f64::min);
        assert!(h.epochs[last].train_loss >= best_before);
        assert!(h.epochs[..last].windows(2).all(|w| w[1].train_loss < w[0].train_loss));
    }

    #[test]
    fn same_seed_same_result() {
        let (xs, ys, gs) = separable();
        let cfg = TrainConfig {
            epochs: 5,
            batch: 8,
            ..Default::default()
        };
        let (mut a, mut b) = (linear(), linear());
        let ha = train(&mut a, &xs, &ys, &gs, &cfg).unwrap();
        let hb = train(&mut b, &xs, &ys, &gs, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn restores_best_validation_checkpoint() {
        let (xs, ys, gs) = separable();
        let cfg = TrainConfig {
            lr: 5.0,
            batch: 4,
            epochs: 15,
            patience: 15,
            validation_fraction: 0.25,
            ..Default::default()
        };
        let mut m = linear();
        let h = train(&mut m, &xs, &ys, &gs, &cfg).unwrap();
        let best = h.epochs.iter().filter_map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(h.best_loss, best);
        let (_, va) = carve_validation(&ys, &gs, 0.25, cfg.seed);
        let vx: Vec<_> = va.iter().map(|&i| &xs[i]).collect();
        let vy: Vec<_> = va.iter().map(|&i| ys[i]).collect();
        let (restored, _) = m.loss_and_correct(&vx, &vy).unwrap();
        assert_eq!(f64::from(restored), best);
    }

    #[test]
    fn divergence_is_reported() {
        let (mut xs, ys, gs) = separable();
        xs[3] = Tensor::seq(1, 2, vec![f32::INFINITY, 0.0]).unwrap();
        let cfg = TrainConfig {
            validation_fraction: 0.0,
            batch: 40,
            ..Default::default()
        };
        match train(&mut linear(), &xs, &ys, &gs, &cfg) {
            Err(ModelError::NonFinite { epoch: 0, batch: 0 }) => {}
            other => panic!("{other:?}"),
        }
    }
}
