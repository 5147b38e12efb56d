use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{axpy, dot};
use super::recurrent::{self, RecurrentCache};
use super::{NeuralError, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    #[default]
    Valid,
    Same,
}

/// Layer kind and hyperparameters. Parameter layouts (row-major):
///
/// * `Conv1d`: kernels `[out, width, in]`, then bias `[out]`.
/// * `AdaptiveRelu`: one negative-side slope per channel.
/// * `Lstm`: weights `[4·hidden, input + hidden]` with each row `[W_x | W_h]`
///   and gate blocks ordered forget, input, output, candidate; then bias `[4·hidden]`.
/// * `Rnn`: weights `[hidden, input + hidden]`, then bias `[hidden]`.
/// * `Dense`: weights `[output, input]`, then bias `[output]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        width: usize,
        padding: Padding,
    },
    AdaptiveRelu {
        channels: usize,
    },
    Relu,
    MaxPool1d {
        window: usize,
    },
    Dropout {
        rate: f64,
    },
    Lstm {
        input: usize,
        hidden: usize,
        return_sequences: bool,
    },
    Rnn {
        input: usize,
        hidden: usize,
        return_sequences: bool,
        /// Gradient flows back at most this many steps within a chunk;
        /// `None` is full backpropagation through time.
        truncation: Option<usize>,
    },
    Flatten,
    Dense {
        input: usize,
        output: usize,
    },
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, width, .. } => out_ch * width * in_ch + out_ch,
            LayerSpec::AdaptiveRelu { channels } => channels,
            LayerSpec::Lstm { input, hidden, .. } => 4 * hidden * (input + hidden) + 4 * hidden,
            LayerSpec::Rnn { input, hidden, .. } => hidden * (input + hidden) + hidden,
            LayerSpec::Dense { input, output } => output * input + output,
            LayerSpec::Relu | LayerSpec::MaxPool1d { .. } | LayerSpec::Dropout { .. } | LayerSpec::Flatten => 0,
        }
    }

    /// Output `[time, channels]` for an input of the given shape.
    pub fn out_shape(&self, (t, c): (usize, usize)) -> Result<(usize, usize), NeuralError> {
        let need_ch = |expected: usize| {
            if c == expected {
                Ok(())
            } else {
                Err(NeuralError::Shape(format!("{self:?} expects {expected} channels, got {c}")))
            }
        };
        match *self {
            LayerSpec::Conv1d {
                in_ch,
                out_ch,
                width,
                padding,
            } => {
                need_ch(in_ch)?;
                match padding {
                    Padding::Same => Ok((t, out_ch)),
                    Padding::Valid if width <= t => Ok((t - width + 1, out_ch)),
                    Padding::Valid => Err(NeuralError::Shape(format!(
                        "kernel width {width} exceeds sequence length {t}"
                    ))),
                }
            }
            LayerSpec::AdaptiveRelu { channels } => need_ch(channels).map(|_| (t, c)),
            LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok((t, c)),
            LayerSpec::MaxPool1d { window } => {
                if t / window == 0 {
                    Err(NeuralError::Shape(format!("pool window {window} exceeds sequence length {t}")))
                } else {
                    Ok((t / window, c))
                }
            }
            LayerSpec::Lstm {
                input,
                hidden,
                return_sequences,
            }
            | LayerSpec::Rnn {
                input,
                hidden,
                return_sequences,
                ..
            } => {
                need_ch(input)?;
                if t == 0 {
                    return Err(NeuralError::Shape("empty sequence".into()));
                }
                Ok((if return_sequences { t } else { 1 }, hidden))
            }
            LayerSpec::Flatten => Ok((1, t * c)),
            LayerSpec::Dense { input, output } => need_ch(input).map(|_| (t, output)),
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(NeuralError::Config(format!("{name} must be ≥ 1")))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, width, .. } => {
                positive("in_ch", in_ch)?;
                positive("out_ch", out_ch)?;
                positive("width", width)
            }
            LayerSpec::AdaptiveRelu { channels } => positive("channels", channels),
            LayerSpec::MaxPool1d { window } => positive("window", window),
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                Err(NeuralError::Config(format!("dropout rate {rate} outside [0, 1)")))
            }
            LayerSpec::Lstm { input, hidden, .. } => {
                positive("input", input)?;
                positive("hidden", hidden)
            }
            LayerSpec::Rnn {
                input,
                hidden,
                truncation,
                ..
            } => {
                positive("input", input)?;
                positive("hidden", hidden)?;
                positive("truncation", truncation.unwrap_or(1))
            }
            LayerSpec::Dense { input, output } => {
                positive("input", input)?;
                positive("output", output)
            }
            _ => Ok(()),
        }
    }
}

/// Per-sample forward state needed by the backward pass.
#[derive(Debug, Clone)]
pub enum Cache<T> {
    Input(Tensor<T>),
    Pool { argmax: Vec<usize>, in_len: usize },
    Mask(Option<Vec<T>>),
    Recurrent(Box<RecurrentCache<T>>),
    Flatten { t: usize, c: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub params: Vec<T>,
}

fn uniform<T: Real>(rng: &mut ChaCha8Rng, n: usize, limit: f64) -> impl Iterator<Item = T> + '_ {
    (0..n).map(move |_| T::lit(rng.random_range(-limit..limit)))
}

impl<T: Real> Layer<T> {
    /// Glorot-uniform kernels, `1/√hidden` uniform recurrent weights, zero
    /// biases except the LSTM forget gate (+1), adaptive slopes at 0.25.
    pub fn init(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut params = Vec::with_capacity(spec.param_count());
        match spec {
            LayerSpec::Conv1d { in_ch, out_ch, width, .. } => {
                let limit = (6.0 / ((in_ch + out_ch) * width) as f64).sqrt();
                params.extend(uniform::<T>(rng, out_ch * width * in_ch, limit));
                params.extend(std::iter::repeat_n(T::zero(), out_ch));
            }
            LayerSpec::AdaptiveRelu { channels } => params.extend(std::iter::repeat_n(T::lit(0.25), channels)),
            LayerSpec::Lstm { input, hidden, .. } => {
                let lx = (6.0 / (input + 4 * hidden) as f64).sqrt();
                let lh = 1.0 / (hidden as f64).sqrt();
                for _ in 0..4 * hidden {
                    params.extend(uniform::<T>(rng, input, lx));
                    params.extend(uniform::<T>(rng, hidden, lh));
                }
                for g in 0..4 {
                    let b = if g == 0 { T::one() } else { T::zero() };
                    params.extend(std::iter::repeat_n(b, hidden));
                }
            }
            LayerSpec::Rnn { input, hidden, .. } => {
                let lx = (6.0 / (input + hidden) as f64).sqrt();
                let lh = 1.0 / (hidden as f64).sqrt();
                for _ in 0..hidden {
                    params.extend(uniform::<T>(rng, input, lx));
                    params.extend(uniform::<T>(rng, hidden, lh));
                }
                params.extend(std::iter::repeat_n(T::zero(), hidden));
            }
            LayerSpec::Dense { input, output } => {
                let limit = (6.0 / (input + output) as f64).sqrt();
                params.extend(uniform::<T>(rng, output * input, limit));
                params.extend(std::iter::repeat_n(T::zero(), output));
            }
            LayerSpec::Relu | LayerSpec::MaxPool1d { .. } | LayerSpec::Dropout { .. } | LayerSpec::Flatten => {}
        }
        Ok(Self { spec, params })
    }

    pub fn with_params(spec: LayerSpec, params: Vec<T>) -> Result<Self, NeuralError> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(NeuralError::Shape(format!(
                "{spec:?} needs {} parameters, got {}",
                spec.param_count(),
                params.len()
            )));
        }
        Ok(Self { spec, params })
    }

    /// Forward one `[time, channels]` sample. `rng` enables training-mode
    /// dropout; `None` is inference.
    pub fn forward(&self, x: &Tensor<T>, rng: Option<&mut ChaCha8Rng>) -> Result<(Tensor<T>, Cache<T>), NeuralError> {
        let (t, c) = x.dims2();
        let (ot, oc) = self.spec.out_shape((t, c))?;
        let p = &self.params;
        match self.spec {
            LayerSpec::Conv1d {
                in_ch,
                out_ch,
                width,
                padding,
            } => {
                let padded = pad(x, width, padding);
                let xs = padded.data();
                let k = width * in_ch;
                let (w, b) = p.split_at(out_ch * k);
                let mut out = vec![T::zero(); ot * oc];
                for ti in 0..ot {
                    let patch = &xs[ti * in_ch..ti * in_ch + k];
                    let row = &mut out[ti * oc..(ti + 1) * oc];
                    for (o, y) in row.iter_mut().enumerate() {
                        *y = b[o] + dot(&w[o * k..(o + 1) * k], patch);
                    }
                }
                Ok((Tensor::seq(ot, oc, out)?, Cache::Input(padded)))
            }
            LayerSpec::AdaptiveRelu { channels } => {
                let out = x
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &z)| if z > T::zero() { z } else { p[i % channels] * z })
                    .collect();
                Ok((Tensor::seq(t, c, out)?, Cache::Input(x.clone())))
            }
            LayerSpec::Relu => {
                let out = x.data().iter().map(|&z| z.max(T::zero())).collect();
                Ok((Tensor::seq(t, c, out)?, Cache::Input(x.clone())))
            }
            LayerSpec::MaxPool1d { window } => {
                let xs = x.data();
                let mut out = Vec::with_capacity(ot * c);
                let mut argmax = Vec::with_capacity(ot * c);
                for o in 0..ot {
                    for ch in 0..c {
                        let mut best = o * window * c + ch;
                        for j in 1..window {
                            let idx = (o * window + j) * c + ch;
                            if xs[idx] > xs[best] {
                                best = idx;
                            }
                        }
                        out.push(xs[best]);
                        argmax.push(best);
                    }
                }
                Ok((Tensor::seq(ot, c, out)?, Cache::Pool { argmax, in_len: xs.len() }))
            }
            LayerSpec::Dropout { rate } => match rng {
                Some(rng) if rate > 0.0 => {
                    let keep = 1.0 - rate;
                    let scale = T::lit(1.0 / keep);
                    let mask: Vec<T> = (0..x.len())
                        .map(|_| if rng.random::<f64>() < keep { scale } else { T::zero() })
                        .collect();
                    let out = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
                    Ok((Tensor::seq(t, c, out)?, Cache::Mask(Some(mask))))
                }
                _ => Ok((x.clone(), Cache::Mask(None))),
            },
            LayerSpec::Lstm { .. } | LayerSpec::Rnn { .. } => {
                let (out, cache) = recurrent::forward(&self.spec, p, x)?;
                Ok((out, Cache::Recurrent(Box::new(cache))))
            }
            LayerSpec::Flatten => Ok((Tensor::seq(1, t * c, x.data().to_vec())?, Cache::Flatten { t, c })),
            LayerSpec::Dense { input, output } => {
                let (w, b) = p.split_at(output * input);
                let mut out = vec![T::zero(); t * output];
                for r in 0..t {
                    let xr = x.row(r);
                    for (o, y) in out[r * output..(r + 1) * output].iter_mut().enumerate() {
                        *y = b[o] + dot(&w[o * input..(o + 1) * input], xr);
                    }
                }
                Ok((Tensor::seq(t, output, out)?, Cache::Input(x.clone())))
            }
        }
    }

    /// Accumulate parameter gradients into `dparams` and return the gradient
    /// with respect to the layer input.
    pub fn backward(&self, cache: &Cache<T>, dy: &Tensor<T>, dparams: &mut [T]) -> Result<Tensor<T>, NeuralError> {
        let p = &self.params;
        let (dt, dc) = dy.dims2();
        let dys = dy.data();
        match (self.spec, cache) {
            (
                LayerSpec::Conv1d {
                    in_ch,
                    out_ch,
                    width,
                    padding,
                },
                Cache::Input(padded),
            ) => {
                let xs = padded.data();
                let k = width * in_ch;
                let (w, _) = p.split_at(out_ch * k);
                let (dw, db) = dparams.split_at_mut(out_ch * k);
                let mut dx = vec![T::zero(); xs.len()];
                for ti in 0..dt {
                    let patch = &xs[ti * in_ch..ti * in_ch + k];
                    for o in 0..out_ch {
                        let g = dys[ti * dc + o];
                        db[o] += g;
                        axpy(&mut dw[o * k..(o + 1) * k], g, patch);
                        axpy(&mut dx[ti * in_ch..ti * in_ch + k], g, &w[o * k..(o + 1) * k]);
                    }
                }
                let (pt, _) = padded.dims2();
                let left = if padding == Padding::Same { (width - 1) / 2 } else { 0 };
                let t_in = if padding == Padding::Same { dt } else { pt };
                let dx = dx[left * in_ch..(left + t_in) * in_ch].to_vec();
                Tensor::seq(t_in, in_ch, dx)
            }
            (LayerSpec::AdaptiveRelu { channels }, Cache::Input(x)) => {
                let mut dx = Vec::with_capacity(x.len());
                for (i, (&z, &g)) in x.data().iter().zip(dys).enumerate() {
                    if z > T::zero() {
                        dx.push(g);
                    } else {
                        let ch = i % channels;
                        dparams[ch] += g * z;
                        dx.push(g * p[ch]);
                    }
                }
                Tensor::seq(dt, dc, dx)
            }
            (LayerSpec::Relu, Cache::Input(x)) => {
                let dx = x
                    .data()
                    .iter()
                    .zip(dys)
                    .map(|(&z, &g)| if z > T::zero() { g } else { T::zero() })
                    .collect();
                Tensor::seq(dt, dc, dx)
            }
            (LayerSpec::MaxPool1d { .. }, Cache::Pool { argmax, in_len }) => {
                let mut dx = vec![T::zero(); *in_len];
                for (&idx, &g) in argmax.iter().zip(dys) {
                    dx[idx] += g;
                }
                Tensor::seq(in_len / dc, dc, dx)
            }
            (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => match mask {
                Some(m) => Tensor::seq(dt, dc, dys.iter().zip(m).map(|(&g, &k)| g * k).collect()),
                None => Ok(dy.clone()),
            },
            (LayerSpec::Lstm { .. } | LayerSpec::Rnn { .. }, Cache::Recurrent(c)) => {
                recurrent::backward(&self.spec, p, c, dy, dparams)
            }
            (LayerSpec::Flatten, Cache::Flatten { t, c }) => Tensor::seq(*t, *c, dys.to_vec()),
            (LayerSpec::Dense { input, output }, Cache::Input(x)) => {
                let (w, _) = p.split_at(output * input);
                let (dw, db) = dparams.split_at_mut(output * input);
                let mut dx = vec![T::zero(); dt * input];
                for r in 0..dt {
                    let xr = x.row(r);
                    let dxr = &mut dx[r * input..(r + 1) * input];
                    for o in 0..output {
                        let g = dys[r * output + o];
                        db[o] += g;
                        axpy(&mut dw[o * input..(o + 1) * input], g, xr);
                        axpy(dxr, g, &w[o * input..(o + 1) * input]);
                    }
                }
                Tensor::seq(dt, input, dx)
            }
            (spec, _) => Err(NeuralError::Shape(format!("cache does not belong to {spec:?}"))),
        }
    }
}

fn pad<T: Real>(x: &Tensor<T>, width: usize, padding: Padding) -> Tensor<T> {
    match padding {
        Padding::Valid => x.clone(),
        Padding::Same => {
            let (t, c) = x.dims2();
            let left = (width - 1) / 2;
            let right = width - 1 - left;
            let mut data = vec![T::zero(); (t + left + right) * c];
            data[left * c..(left + t) * c].copy_from_slice(x.data());
            Tensor::seq(t + left + right, c, data).expect("consistent padding shape")
        }
    }
}
