use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{Cache, Layer, LayerSpec};
use super::ops::{softmax, softmax_cross_entropy};
use super::{NeuralError, Real, Tensor};

/// Largest input length probed when searching for the shortest valid input.
const MAX_PROBE_LEN: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Infer,
    /// Dropout active, masks drawn from this seed.
    Train(u64),
}

/// A feed-forward stack of layers ending in logits; softmax is applied by
/// [`ModelGraph::predict_proba`] and fused into the loss during training.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph<T> {
    input_channels: usize,
    layers: Vec<Layer<T>>,
    min_len: usize,
}

/// Loss and gradient summed or averaged over some samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrads<T> {
    pub loss: T,
    pub grads: Vec<T>,
    pub correct: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format: String,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
    pub param_counts: Vec<usize>,
    /// Blob encoding; always `f32le`.
    pub dtype: String,
    pub blob: String,
}

const FORMAT: &str = "magclimb-model-v1";

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl<T: Real> ModelGraph<T> {
    pub fn init(input_channels: usize, specs: &[LayerSpec], seed: u64) -> Result<Self, NeuralError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|&s| Layer::init(s, &mut rng))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_layers(input_channels, layers)
    }

    pub fn from_layers(input_channels: usize, layers: Vec<Layer<T>>) -> Result<Self, NeuralError> {
        if input_channels == 0 || layers.is_empty() {
            return Err(NeuralError::Config("a model needs input channels and at least one layer".into()));
        }
        let min_len = Self::probe_min_len(input_channels, &layers)?;
        Ok(Self {
            input_channels,
            layers,
            min_len,
        })
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// `[time, channels]` produced for an input of `len` steps.
    pub fn output_shape(&self, len: usize) -> Result<(usize, usize), NeuralError> {
        self.layers
            .iter()
            .try_fold((len, self.input_channels), |s, l| l.spec.out_shape(s))
    }

    /// Shortest input the stack accepts.
    pub fn min_input_len(&self) -> Result<usize, NeuralError> {
        Ok(self.min_len)
    }

    fn probe_min_len(input_channels: usize, layers: &[Layer<T>]) -> Result<usize, NeuralError> {
        let shape = |len| layers.iter().try_fold((len, input_channels), |s, l| l.spec.out_shape(s));
        let mut last = None;
        for len in 1..=MAX_PROBE_LEN {
            match shape(len) {
                Ok(_) => return Ok(len),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one probe"))
    }

    pub fn classes(&self) -> Result<usize, NeuralError> {
        Ok(self.output_shape(self.min_input_len()?)?.1)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.params.iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<(), NeuralError> {
        if flat.len() != self.param_count() {
            return Err(NeuralError::Shape(format!(
                "model has {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.params.len();
            l.params.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Apply `f(params, grads)` layer by layer over a flat gradient vector.
    pub fn update_params(&mut self, grads: &[T], mut f: impl FnMut(usize, &mut [T], &[T])) {
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.params.len();
            f(off, &mut l.params, &grads[off..off + n]);
            off += n;
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NeuralError> {
        if x.shape().len() != 2 || x.shape()[1] != self.input_channels {
            return Err(NeuralError::Shape(format!(
                "expected [time, {}] input, got {:?}",
                self.input_channels,
                x.shape()
            )));
        }
        let min_len = self.min_input_len()?;
        if x.shape()[0] < min_len {
            return Err(NeuralError::TooShort {
                got: x.shape()[0],
                min_len,
            });
        }
        Ok(())
    }

    fn forward_cached(&self, x: &Tensor<T>, mut rng: Option<&mut ChaCha8Rng>) -> Result<(Vec<T>, Vec<Cache<T>>), NeuralError> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for l in &self.layers {
            let (y, c) = l.forward(&h, rng.as_deref_mut())?;
            if cfg!(debug_assertions) && !y.all_finite() {
                return Err(NeuralError::NonFinite(format!("{:?}", l.spec)));
            }
            caches.push(c);
            h = y;
        }
        Ok((h.into_data(), caches))
    }

    /// Logits for one `[time, channels]` sample.
    pub fn forward(&self, x: &Tensor<T>, mode: ForwardMode) -> Result<Vec<T>, NeuralError> {
        let mut rng = match mode {
            ForwardMode::Infer => None,
            ForwardMode::Train(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Ok(self.forward_cached(x, rng.as_mut())?.0)
    }

    pub fn predict_proba(&self, x: &Tensor<T>) -> Result<Vec<T>, NeuralError> {
        Ok(softmax(&self.forward(x, ForwardMode::Infer)?))
    }

    pub fn predict(&self, x: &Tensor<T>) -> Result<usize, NeuralError> {
        Ok(argmax(&self.forward(x, ForwardMode::Infer)?))
    }

    /// Cross-entropy loss and its parameter gradient for one sample.
    pub fn sample_grads(&self, x: &Tensor<T>, target: usize, mode: ForwardMode) -> Result<SampleGrads<T>, NeuralError> {
        let (loss, grads, _, pred) = self.grads_inner(x, target, mode)?;
        Ok(SampleGrads {
            loss,
            grads,
            correct: usize::from(pred == target),
            samples: 1,
        })
    }

    /// Also returns the gradient with respect to the input.
    pub fn input_grads(&self, x: &Tensor<T>, target: usize, mode: ForwardMode) -> Result<(T, Vec<T>, Tensor<T>), NeuralError> {
        let (loss, grads, dx, _) = self.grads_inner(x, target, mode)?;
        Ok((loss, grads, dx))
    }

    #[allow(clippy::type_complexity)]
    fn grads_inner(&self, x: &Tensor<T>, target: usize, mode: ForwardMode) -> Result<(T, Vec<T>, Tensor<T>, usize), NeuralError> {
        let mut rng = match mode {
            ForwardMode::Infer => None,
            ForwardMode::Train(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let (logits, caches) = self.forward_cached(x, rng.as_mut())?;
        self.backprop(&logits, &caches, target)
    }

    /// Mean loss and gradient over a batch. Samples run in parallel; the
    /// reduction is in index order so results do not depend on scheduling.
    /// With `dropout_seed`, sample `i` draws its masks from stream `i`.
    pub fn batch_grads(&self, xs: &[&Tensor<T>], targets: &[usize], dropout_seed: Option<u64>) -> Result<SampleGrads<T>, NeuralError> {
        if xs.is_empty() || xs.len() != targets.len() {
            return Err(NeuralError::Shape(format!(
                "batch of {} inputs and {} targets",
                xs.len(),
                targets.len()
            )));
        }
        let per: Vec<_> = xs
            .par_iter()
            .zip(targets.par_iter())
            .enumerate()
            .map(|(i, (x, &y))| {
                let mut rng = dropout_seed.map(|s| rng_for(s, i as u64));
                let (logits, caches) = self.forward_cached(x, rng.as_mut())?;
                self.backprop(&logits, &caches, y).map(|(l, g, _, p)| (l, g, usize::from(p == y)))
            })
            .collect();
        let mut total = SampleGrads {
            loss: T::zero(),
            grads: vec![T::zero(); self.param_count()],
            correct: 0,
            samples: xs.len(),
        };
        for r in per {
            let (loss, g, correct) = r?;
            total.loss += loss;
            total.correct += correct;
            total.grads.iter_mut().zip(&g).for_each(|(a, &b)| *a += b);
        }
        let n = T::from_usize(xs.len()).unwrap();
        total.loss /= n;
        total.grads.iter_mut().for_each(|g| *g /= n);
        Ok(total)
    }

    #[allow(clippy::type_complexity)]
    fn backprop(&self, logits: &[T], caches: &[Cache<T>], target: usize) -> Result<(T, Vec<T>, Tensor<T>, usize), NeuralError> {
        if target >= logits.len() {
            return Err(NeuralError::Shape(format!("target {target} out of {} classes", logits.len())));
        }
        let mut onehot = vec![T::zero(); logits.len()];
        onehot[target] = T::one();
        let (loss, dlogits) = softmax_cross_entropy(logits, &onehot);
        let mut grads = vec![T::zero(); self.param_count()];
        let mut dy = Tensor::seq(1, logits.len(), dlogits)?;
        let mut end = grads.len();
        for (l, c) in self.layers.iter().zip(caches).rev() {
            let start = end - l.params.len();
            dy = l.backward(c, &dy, &mut grads[start..end])?;
            end = start;
        }
        Ok((loss, grads, dy, argmax(logits)))
    }

    /// Mean loss and correct count in inference mode.
    pub fn loss_and_correct(&self, xs: &[&Tensor<T>], targets: &[usize]) -> Result<(T, usize), NeuralError> {
        let per: Vec<_> = xs
            .par_iter()
            .zip(targets.par_iter())
            .map(|(x, &y)| {
                let logits = self.forward(x, ForwardMode::Infer)?;
                let mut onehot = vec![T::zero(); logits.len()];
                *onehot
                    .get_mut(y)
                    .ok_or_else(|| NeuralError::Shape(format!("target {y} out of range")))? = T::one();
                Ok((softmax_cross_entropy(&logits, &onehot).0, argmax(&logits) == y))
            })
            .collect::<Result<Vec<_>, NeuralError>>()?;
        let mut loss = T::zero();
        let mut correct = 0;
        for (l, c) in per {
            loss += l;
            correct += usize::from(c);
        }
        Ok((loss / T::from_usize(xs.len().max(1)).unwrap(), correct))
    }

    pub fn manifest(&self, blob_name: &str) -> ModelManifest {
        ModelManifest {
            format: FORMAT.into(),
            input_channels: self.input_channels,
            layers: self.specs(),
            param_counts: self.layers.iter().map(|l| l.params.len()).collect(),
            dtype: "f32le".into(),
            blob: blob_name.into(),
        }
    }

    /// Parameters as little-endian `f32` in manifest order.
    pub fn to_blob(&self) -> Vec<u8> {
        self.flat_params()
            .iter()
            .flat_map(|v| v.to_f32().unwrap().to_le_bytes())
            .collect()
    }

    pub fn from_parts(manifest: &ModelManifest, blob: &[u8]) -> Result<Self, NeuralError> {
        if manifest.format != FORMAT || manifest.dtype != "f32le" {
            return Err(NeuralError::Io(format!(
                "unsupported model format {}/{}",
                manifest.format, manifest.dtype
            )));
        }
        let total: usize = manifest.param_counts.iter().sum();
        if blob.len() != 4 * total || manifest.param_counts.len() != manifest.layers.len() {
            return Err(NeuralError::Io(format!(
                "blob holds {} bytes, manifest needs {}",
                blob.len(),
                4 * total
            )));
        }
        let mut values = blob
            .chunks_exact(4)
            .map(|b| T::from_f32(f32::from_le_bytes([b[0], b[1], b[2], b[3]])).unwrap());
        let layers = manifest
            .layers
            .iter()
            .zip(&manifest.param_counts)
            .map(|(&spec, &n)| Layer::with_params(spec, values.by_ref().take(n).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_layers(manifest.input_channels, layers)
    }

    /// Write `<stem>.json` and `<stem>.bin`.
    pub fn save(&self, stem: &Path) -> Result<(), NeuralError> {
        let blob_path = stem.with_extension("bin");
        let blob_name = blob_path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| NeuralError::Io(format!("bad model path {}", stem.display())))?;
        let json = serde_json::to_string_pretty(&self.manifest(blob_name)).map_err(|e| NeuralError::Io(e.to_string()))?;
        fs::write(stem.with_extension("json"), json).map_err(|e| NeuralError::Io(e.to_string()))?;
        fs::write(&blob_path, self.to_blob()).map_err(|e| NeuralError::Io(e.to_string()))
    }

    /// Load from a manifest path; the blob is resolved next to it.
    pub fn load(manifest_path: &Path) -> Result<Self, NeuralError> {
        let io = |e: std::io::Error| NeuralError::Io(format!("{}: {e}", manifest_path.display()));
        let text = fs::read_to_string(manifest_path).map_err(io)?;
        let manifest: ModelManifest = serde_json::from_str(&text).map_err(|e| NeuralError::Io(e.to_string()))?;
        let blob_path = manifest_path.with_file_name(&manifest.blob);
        let blob = fs::read(&blob_path).map_err(io)?;
        Self::from_parts(&manifest, &blob)
    }

    pub fn cast<U: Real>(&self) -> ModelGraph<U> {
        ModelGraph {
            input_channels: self.input_channels,
            min_len: self.min_len,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    params: l.params.iter().map(|v| U::from_f64(v.to_f64().unwrap()).unwrap()).collect(),
                })
                .collect(),
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
