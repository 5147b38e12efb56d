//! LSTM and tanh RNN layers with backpropagation through time.
//!
//! The LSTM cell is the standard one:
//!
//! ```text
//! f = σ(W_f [x, h] + b_f)   i = σ(W_i [x, h] + b_i)   o = σ(W_o [x, h] + b_o)
//! c̃ = tanh(W_c [x, h] + b_c)
//! c' = f ⊙ c + i ⊙ c̃        h' = o ⊙ tanh(c')
//! ```

use super::layers::LayerSpec;
use super::ops::{axpy, dot, sigmoid};
use super::{Layer, NeuralError, Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Real> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![T::zero(); hidden],
            c: vec![T::zero(); hidden],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecurrentCache<T> {
    steps: usize,
    /// `[x_t, h_{t−1}]` for every step.
    xh: Vec<T>,
    /// LSTM: activated gates `f, i, o, c̃` per step. RNN: hidden state per step.
    act: Vec<T>,
    /// LSTM only: cell state per step, with the initial zero state first.
    cells: Vec<T>,
}

impl<T: Real> Layer<T> {
    /// One LSTM time step; also returns the activated gates `[f, i, o, c̃]`.
    pub fn lstm_step(&self, x_t: &[T], prev: &LstmState<T>) -> Result<(LstmState<T>, Vec<T>), NeuralError> {
        let LayerSpec::Lstm { input, hidden, .. } = self.spec else {
            return Err(NeuralError::Config("lstm_step needs an LSTM layer".into()));
        };
        if x_t.len() != input || prev.h.len() != hidden || prev.c.len() != hidden {
            return Err(NeuralError::Shape(format!(
                "lstm_step expects input {input} and state {hidden}, got {} and {}/{}",
                x_t.len(),
                prev.h.len(),
                prev.c.len()
            )));
        }
        let mut xh = x_t.to_vec();
        xh.extend_from_slice(&prev.h);
        let mut gates = vec![T::zero(); 4 * hidden];
        lstm_gates(&self.params, input, hidden, &xh, &mut gates);
        let mut next = LstmState::zeros(hidden);
        lstm_cell(hidden, &gates, &prev.c, &mut next.c, &mut next.h);
        Ok((next, gates))
    }
}

fn lstm_gates<T: Real>(p: &[T], input: usize, hidden: usize, xh: &[T], gates: &mut [T]) {
    let k = input + hidden;
    let (w, b) = p.split_at(4 * hidden * k);
    for (r, g) in gates.iter_mut().enumerate() {
        let z = b[r] + dot(&w[r * k..(r + 1) * k], xh);
        *g = if r < 3 * hidden { sigmoid(z) } else { z.tanh() };
    }
}

fn lstm_cell<T: Real>(hidden: usize, gates: &[T], c_prev: &[T], c: &mut [T], h: &mut [T]) {
    for j in 0..hidden {
        let (f, i, o, g) = (gates[j], gates[hidden + j], gates[2 * hidden + j], gates[3 * hidden + j]);
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * c[j].tanh();
    }
}

pub(crate) fn forward<T: Real>(spec: &LayerSpec, p: &[T], x: &Tensor<T>) -> Result<(Tensor<T>, RecurrentCache<T>), NeuralError> {
    let (steps, _) = x.dims2();
    match *spec {
        LayerSpec::Lstm {
            input,
            hidden,
            return_sequences,
        } => {
            let k = input + hidden;
            let mut xh = vec![T::zero(); steps * k];
            let mut act = vec![T::zero(); steps * 4 * hidden];
            let mut cells = vec![T::zero(); (steps + 1) * hidden];
            let mut hs = vec![T::zero(); (steps + 1) * hidden];
            for t in 0..steps {
                let row = &mut xh[t * k..(t + 1) * k];
                row[..input].copy_from_slice(x.row(t));
                row[input..].copy_from_slice(&hs[t * hidden..(t + 1) * hidden]);
                let gates = &mut act[t * 4 * hidden..(t + 1) * 4 * hidden];
                lstm_gates(p, input, hidden, &xh[t * k..(t + 1) * k], gates);
                let (c_prev, c_next) = cells.split_at_mut((t + 1) * hidden);
                lstm_cell(
                    hidden,
                    gates,
                    &c_prev[t * hidden..],
                    &mut c_next[..hidden],
                    &mut hs[(t + 1) * hidden..(t + 2) * hidden],
                );
            }
            let out = sequence_output(&hs[hidden..], steps, hidden, return_sequences)?;
            Ok((out, RecurrentCache { steps, xh, act, cells }))
        }
        LayerSpec::Rnn {
            input,
            hidden,
            return_sequences,
            ..
        } => {
            let k = input + hidden;
            let (w, b) = p.split_at(hidden * k);
            let mut xh = vec![T::zero(); steps * k];
            let mut hs = vec![T::zero(); (steps + 1) * hidden];
            for t in 0..steps {
                let row = &mut xh[t * k..(t + 1) * k];
                row[..input].copy_from_slice(x.row(t));
                row[input..].copy_from_slice(&hs[t * hidden..(t + 1) * hidden]);
                let row = &xh[t * k..(t + 1) * k];
                for j in 0..hidden {
                    hs[(t + 1) * hidden + j] = (b[j] + dot(&w[j * k..(j + 1) * k], row)).tanh();
                }
            }
            let act = hs[hidden..].to_vec();
            let out = sequence_output(&act, steps, hidden, return_sequences)?;
            Ok((
                out,
                RecurrentCache {
                    steps,
                    xh,
                    act,
                    cells: Vec::new(),
                },
            ))
        }
        _ => Err(NeuralError::Config(format!("{spec:?} is not recurrent"))),
    }
}

fn sequence_output<T: Real>(hs: &[T], steps: usize, hidden: usize, all: bool) -> Result<Tensor<T>, NeuralError> {
    if all {
        Tensor::seq(steps, hidden, hs.to_vec())
    } else {
        Tensor::seq(1, hidden, hs[(steps - 1) * hidden..].to_vec())
    }
}

/// Upstream gradient on the hidden state at step `t`.
fn dy_at<T: Real>(dy: &Tensor<T>, t: usize, steps: usize, hidden: usize, all: bool) -> Option<&[T]> {
    if all {
        Some(&dy.data()[t * hidden..(t + 1) * hidden])
    } else if t == steps - 1 {
        Some(dy.data())
    } else {
        None
    }
}

pub(crate) fn backward<T: Real>(
    spec: &LayerSpec,
    p: &[T],
    cache: &RecurrentCache<T>,
    dy: &Tensor<T>,
    dparams: &mut [T],
) -> Result<Tensor<T>, NeuralError> {
    let steps = cache.steps;
    match *spec {
        LayerSpec::Lstm {
            input,
            hidden,
            return_sequences,
        } => {
            let k = input + hidden;
            let (w, _) = p.split_at(4 * hidden * k);
            let (dw, db) = dparams.split_at_mut(4 * hidden * k);
            let mut dx = vec![T::zero(); steps * input];
            let mut dh_next = vec![T::zero(); hidden];
            let mut dc_next = vec![T::zero(); hidden];
            let mut dz = vec![T::zero(); 4 * hidden];
            let mut dxh = vec![T::zero(); k];
            for t in (0..steps).rev() {
                let gates = &cache.act[t * 4 * hidden..(t + 1) * 4 * hidden];
                let c_prev = &cache.cells[t * hidden..(t + 1) * hidden];
                let c = &cache.cells[(t + 1) * hidden..(t + 2) * hidden];
                let upstream = dy_at(dy, t, steps, hidden, return_sequences);
                for j in 0..hidden {
                    let dh = dh_next[j] + upstream.map_or(T::zero(), |u| u[j]);
                    let (f, i, o, g) = (gates[j], gates[hidden + j], gates[2 * hidden + j], gates[3 * hidden + j]);
                    let tc = c[j].tanh();
                    let dc = dc_next[j] + dh * o * (T::one() - tc * tc);
                    dz[j] = dc * c_prev[j] * f * (T::one() - f);
                    dz[hidden + j] = dc * g * i * (T::one() - i);
                    dz[2 * hidden + j] = dh * tc * o * (T::one() - o);
                    dz[3 * hidden + j] = dc * i * (T::one() - g * g);
                    dc_next[j] = dc * f;
                }
                let xh = &cache.xh[t * k..(t + 1) * k];
                dxh.iter_mut().for_each(|v| *v = T::zero());
                for (r, &g) in dz.iter().enumerate() {
                    db[r] += g;
                    axpy(&mut dw[r * k..(r + 1) * k], g, xh);
                    axpy(&mut dxh, g, &w[r * k..(r + 1) * k]);
                }
                dx[t * input..(t + 1) * input].copy_from_slice(&dxh[..input]);
                dh_next.copy_from_slice(&dxh[input..]);
            }
            Tensor::seq(steps, input, dx)
        }
        LayerSpec::Rnn {
            input,
            hidden,
            return_sequences,
            truncation,
        } => {
            let k = input + hidden;
            let (w, _) = p.split_at(hidden * k);
            let (dw, db) = dparams.split_at_mut(hidden * k);
            let mut dx = vec![T::zero(); steps * input];
            let mut dh_next = vec![T::zero(); hidden];
            let mut da = vec![T::zero(); hidden];
            let mut dxh = vec![T::zero(); k];
            for t in (0..steps).rev() {
                let h = &cache.act[t * hidden..(t + 1) * hidden];
                let upstream = dy_at(dy, t, steps, hidden, return_sequences);
                for j in 0..hidden {
                    let dh = dh_next[j] + upstream.map_or(T::zero(), |u| u[j]);
                    da[j] = dh * (T::one() - h[j] * h[j]);
                }
                let xh = &cache.xh[t * k..(t + 1) * k];
                dxh.iter_mut().for_each(|v| *v = T::zero());
                for (j, &g) in da.iter().enumerate() {
                    db[j] += g;
                    axpy(&mut dw[j * k..(j + 1) * k], g, xh);
                    axpy(&mut dxh, g, &w[j * k..(j + 1) * k]);
                }
                dx[t * input..(t + 1) * input].copy_from_slice(&dxh[..input]);
                // Chunks are counted back from the final step; no gradient
                // crosses a chunk boundary.
                let cut = truncation.is_some_and(|len| (steps - t).is_multiple_of(len));
                if cut {
                    dh_next.iter_mut().for_each(|v| *v = T::zero());
                } else {
                    dh_next.copy_from_slice(&dxh[input..]);
                }
            }
            Tensor::seq(steps, input, dx)
        }
        _ => Err(NeuralError::Config(format!("{spec:?} is not recurrent"))),
    }
}
