//! LSTM, dense softmax layer and Adam, in f64 with hand-written gradients.
//!
//! Gate order inside the stacked LSTM matrices is input, forget, cell,
//! output. Weights are stored row-major with one row per gate unit.

#![allow(clippy::needless_range_loop)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_f32(a: &[f64], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, &y)| x * f64::from(y)).sum()
}

fn glorot_uniform(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

/// `rows x cols` matrix (row-major) whose columns are orthonormal;
/// requires `rows >= cols`.
fn orthogonal_columns(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (c, b) in basis.iter().enumerate() {
        for r in 0..rows {
            out[r * cols + c] = b[r];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub input_dim: usize,
    pub units: usize,
    /// `4u x input_dim`
    pub kernel: Vec<f64>,
    /// `4u x u`
    pub recurrent: Vec<f64>,
    /// `4u`
    pub bias: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
pub struct LstmTrace {
    steps: usize,
    /// `(steps + 1) x u`, row 0 is the zero initial state.
    h: Vec<f64>,
    c: Vec<f64>,
    /// Post-activation gates, `steps x 4u`.
    gates: Vec<f64>,
}

impl LstmTrace {
    pub fn output(&self, units: usize) -> &[f64] {
        &self.h[self.steps * units..(self.steps + 1) * units]
    }
}

impl Lstm {
    /// Glorot-uniform kernel, orthogonal recurrent matrix, zero bias with
    /// the forget gate bias at one.
    pub fn new(input_dim: usize, units: usize, rng: &mut impl Rng) -> Self {
        let kernel = glorot_uniform(rng, input_dim, 4 * units, 4 * units * input_dim);
        let recurrent = orthogonal_columns(rng, 4 * units, units);
        let mut bias = vec![0.0; 4 * units];
        bias[units..2 * units].iter_mut().for_each(|b| *b = 1.0);
        Self { input_dim, units, kernel, recurrent, bias }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            input_dim: self.input_dim,
            units: self.units,
            kernel: vec![0.0; self.kernel.len()],
            recurrent: vec![0.0; self.recurrent.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn step(&self, x: &[f32], h: &[f64], c: &[f64], gates: &mut [f64], h_out: &mut [f64], c_out: &mut [f64]) {
        let u = self.units;
        let d = self.input_dim;
        for r in 0..4 * u {
            let z = self.bias[r]
                + dot_f32(&self.kernel[r * d..(r + 1) * d], x)
                + dot(&self.recurrent[r * u..(r + 1) * u], h);
            gates[r] = if (2 * u..3 * u).contains(&r) { z.tanh() } else { sigmoid(z) };
        }
        for j in 0..u {
            let (i, f, g, o) = (gates[j], gates[u + j], gates[2 * u + j], gates[3 * u + j]);
            c_out[j] = f * c[j] + i * g;
            h_out[j] = o * c_out[j].tanh();
        }
    }

    /// Runs over `xs` (`steps x input_dim`) and keeps every activation.
    /// An empty sequence yields the zero state.
    pub fn forward_trace(&self, xs: &[f32]) -> LstmTrace {
        let u = self.units;
        let steps = xs.len() / self.input_dim;
        let mut h = vec![0.0; (steps + 1) * u];
        let mut c = vec![0.0; (steps + 1) * u];
        let mut gates = vec![0.0; steps * 4 * u];
        for t in 0..steps {
            let x = &xs[t * self.input_dim..(t + 1) * self.input_dim];
            let (h_prev, h_next) = h.split_at_mut((t + 1) * u);
            let (c_prev, c_next) = c.split_at_mut((t + 1) * u);
            self.step(
                x,
                &h_prev[t * u..],
                &c_prev[t * u..],
                &mut gates[t * 4 * u..(t + 1) * 4 * u],
                &mut h_next[..u],
                &mut c_next[..u],
            );
        }
        LstmTrace { steps, h, c, gates }
    }

    /// Final hidden state only.
    pub fn forward(&self, xs: &[f32]) -> Vec<f64> {
        let u = self.units;
        let mut h = vec![0.0; u];
        let mut c = vec![0.0; u];
        let mut h2 = vec![0.0; u];
        let mut c2 = vec![0.0; u];
        let mut gates = vec![0.0; 4 * u];
        for x in xs.chunks_exact(self.input_dim) {
            self.step(x, &h, &c, &mut gates, &mut h2, &mut c2);
            std::mem::swap(&mut h, &mut h2);
            std::mem::swap(&mut c, &mut c2);
        }
        h
    }

    /// Backpropagates `dh` (gradient of the final state) through time and
    /// adds parameter gradients into `grad`.
    pub fn backward(&self, xs: &[f32], trace: &LstmTrace, dh: &[f64], grad: &mut Lstm) {
        let u = self.units;
        let d = self.input_dim;
        let mut dh = dh.to_vec();
        let mut dc = vec![0.0; u];
        let mut dz = vec![0.0; 4 * u];
        for t in (0..trace.steps).rev() {
            let gates = &trace.gates[t * 4 * u..(t + 1) * 4 * u];
            let c_prev = &trace.c[t * u..(t + 1) * u];
            let c_t = &trace.c[(t + 1) * u..(t + 2) * u];
            let h_prev = &trace.h[t * u..(t + 1) * u];
            for j in 0..u {
                let (i, f, g, o) = (gates[j], gates[u + j], gates[2 * u + j], gates[3 * u + j]);
                let tc = c_t[j].tanh();
                let do_ = dh[j] * tc;
                let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
                dz[j] = dcj * g * i * (1.0 - i);
                dz[u + j] = dcj * c_prev[j] * f * (1.0 - f);
                dz[2 * u + j] = dcj * i * (1.0 - g * g);
                dz[3 * u + j] = do_ * o * (1.0 - o);
                dc[j] = dcj * f;
            }
            let x = &xs[t * d..(t + 1) * d];
            dh.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..4 * u {
                let g = dz[r];
                if g == 0.0 {
                    continue;
                }
                grad.bias[r] += g;
                for (w, &xv) in grad.kernel[r * d..(r + 1) * d].iter_mut().zip(x) {
                    *w += g * f64::from(xv);
                }
                let rec = &self.recurrent[r * u..(r + 1) * u];
                for ((w, &hv), (dhj, &uv)) in grad.recurrent[r * u..(r + 1) * u]
                    .iter_mut()
                    .zip(h_prev)
                    .zip(dh.iter_mut().zip(rec))
                {
                    *w += g * hv;
                    *dhj += g * uv;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Self {
            inputs,
            outputs,
            weight: glorot_uniform(rng, inputs, outputs, inputs * outputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self { inputs: self.inputs, outputs: self.outputs, weight: vec![0.0; self.weight.len()], bias: vec![0.0; self.outputs] }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| self.bias[o] + dot(&self.weight[o * self.inputs..(o + 1) * self.inputs], x))
            .collect()
    }

    /// Adds parameter gradients into `grad` and returns the input gradient.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for o in 0..self.outputs {
            grad.bias[o] += dy[o];
            let row = o * self.inputs..(o + 1) * self.inputs;
            for ((gw, &w), (dxi, &xi)) in grad.weight[row.clone()].iter_mut().zip(&self.weight[row]).zip(dx.iter_mut().zip(x)) {
                *gw += dy[o] * xi;
                *dxi += dy[o] * w;
            }
        }
        dx
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Adam as configured by default in Keras: beta1 0.9, beta2 0.999,
/// epsilon 1e-7, bias correction folded into the step size.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-7, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step(&mut self, params: Vec<&mut Vec<f64>>, grads: Vec<&Vec<f64>>) {
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let lr_t = self.learning_rate * (1.0 - self.beta2.powi(self.t)).sqrt() / (1.0 - self.beta1.powi(self.t));
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            for ((w, &gi), (m, v)) in p.iter_mut().zip(g).zip(self.m[k].iter_mut().zip(self.v[k].iter_mut())) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                *w -= lr_t * *m / (v.sqrt() + self.epsilon);
            }
        }
    }
}
