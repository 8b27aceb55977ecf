//! Layer kinds with forward and exact backward passes.
//!
//! Weights live in one flat parameter vector owned by the network; each
//! layer reads and writes its own slice. Layouts:
//!
//! * dense: `W[in][out]`, then `b[out]`
//! * conv1d: `W[k][in][filters]`, then `b[filters]` (stride 1, "same" zero padding)
//! * batch norm: `gamma[c]`, `beta[c]`; state `running_mean[c]`, `running_var[c]`
//! * lstm: `W[in][4h]`, `U[h][4h]`, `b[4h]`, gate blocks ordered i, f, g, o

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

pub const BN_EPSILON: f64 = 1e-3;
pub const BN_MOMENTUM: f64 = 0.99;

/// Activation used for the LSTM candidate and cell output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellActivation {
    #[default]
    Relu,
    Tanh,
}

impl CellActivation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            CellActivation::Relu => z.max(0.0),
            CellActivation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activated value.
    #[inline]
    fn derivative(self, a: f64) -> f64 {
        match self {
            CellActivation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            CellActivation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        units: usize,
    },
    Conv1d {
        in_channels: usize,
        filters: usize,
        kernel: usize,
    },
    GlobalAvgPool,
    BatchNorm {
        features: usize,
    },
    Dropout {
        rate: f64,
    },
    Relu,
    Sigmoid,
    Lstm {
        inputs: usize,
        units: usize,
        return_sequences: bool,
        #[serde(default)]
        activation: CellActivation,
    },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::GlobalAvgPool => "global_avg_pool",
            LayerSpec::BatchNorm { .. } => "batch_norm",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Relu => "relu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Lstm { .. } => "lstm",
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, units } => inputs * units + units,
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel,
            } => kernel * in_channels * filters + filters,
            LayerSpec::BatchNorm { features } => 2 * features,
            LayerSpec::Lstm { inputs, units, .. } => 4 * units * (inputs + units + 1),
            _ => 0,
        }
    }

    /// Non-trainable values (batch-norm running statistics).
    pub fn state_count(&self) -> usize {
        match *self {
            LayerSpec::BatchNorm { features } => 2 * features,
            _ => 0,
        }
    }

    pub fn is_trainable(&self) -> bool {
        self.param_count() > 0
    }

    /// Per-sample output shape for per-sample input shape `input`.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |what: &str| Err(Error::Shape(format!("{}: {what}, input {input:?}", self.kind_name())));
        match *self {
            LayerSpec::Dense { inputs, units } => match input {
                [f] if *f == inputs => Ok(vec![units]),
                _ => bad(&format!("expects [{inputs}]")),
            },
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel,
            } => {
                if kernel % 2 == 0 {
                    return bad("kernel length must be odd");
                }
                match input {
                    [t, c] if *c == in_channels => Ok(vec![*t, filters]),
                    _ => bad(&format!("expects [T, {in_channels}]")),
                }
            }
            LayerSpec::GlobalAvgPool => match input {
                [_, c] => Ok(vec![*c]),
                _ => bad("expects [T, C]"),
            },
            LayerSpec::BatchNorm { features } => match input.last() {
                Some(&c) if c == features => Ok(input.to_vec()),
                _ => bad(&format!("expects last axis {features}")),
            },
            LayerSpec::Dropout { rate } => {
                if (0.0..1.0).contains(&rate) {
                    Ok(input.to_vec())
                } else {
                    bad("rate must be in [0, 1)")
                }
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok(input.to_vec()),
            LayerSpec::Lstm {
                inputs,
                units,
                return_sequences,
                ..
            } => match input {
                [t, f] if *f == inputs => Ok(if return_sequences { vec![*t, units] } else { vec![units] }),
                _ => bad(&format!("expects [T, {inputs}]")),
            },
        }
    }

    /// Glorot-uniform weights, zero biases, unit batch-norm gain.
    pub(crate) fn init_params<R: Rng + ?Sized>(&self, params: &mut [f64], state: &mut [f64], rng: &mut R) {
        let mut glorot = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in slice {
                *w = rng.gen_range(-limit..=limit);
            }
        };
        match *self {
            LayerSpec::Dense { inputs, units } => {
                let (w, b) = params.split_at_mut(inputs * units);
                glorot(w, inputs, units);
                b.fill(0.0);
            }
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel,
            } => {
                let (w, b) = params.split_at_mut(kernel * in_channels * filters);
                glorot(w, kernel * in_channels, kernel * filters);
                b.fill(0.0);
            }
            LayerSpec::BatchNorm { features } => {
                params[..features].fill(1.0);
                params[features..].fill(0.0);
                state[..features].fill(0.0);
                state[features..].fill(1.0);
            }
            LayerSpec::Lstm { inputs, units, .. } => {
                let g = 4 * units;
                let (w, rest) = params.split_at_mut(inputs * g);
                let (u, b) = rest.split_at_mut(units * g);
                glorot(w, inputs, g);
                glorot(u, units, g);
                b.fill(0.0);
            }
            _ => {}
        }
    }
}

/// Intermediates recorded by a training-mode forward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Input(Tensor),
    Pool {
        time: usize,
    },
    BatchNorm {
        x_hat: Vec<f64>,
        inv_std: Vec<f64>,
        mean: Vec<f64>,
        var: Vec<f64>,
    },
    Mask(Vec<f64>),
    Output(Vec<f64>),
    Lstm(LstmCache),
    None,
}

#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    input: Tensor,
    /// Activated gates `[b][t][4h]`.
    gates: Vec<f64>,
    /// Cell state `[b][t][h]`.
    cell: Vec<f64>,
    /// Activated cell state `[b][t][h]`.
    cell_act: Vec<f64>,
    /// Hidden state `[b][t][h]`.
    hidden: Vec<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Forward pass. `rng` is `Some` in training mode (dropout active, batch
/// statistics) and `None` at inference.
pub(crate) fn forward(
    spec: &LayerSpec,
    params: &[f64],
    state: &[f64],
    x: Tensor,
    rng: Option<&mut dyn rand::RngCore>,
) -> (Tensor, Cache) {
    let train = rng.is_some();
    match *spec {
        LayerSpec::Dense { inputs, units } => {
            let b = x.batch();
            let (w, bias) = params.split_at(inputs * units);
            let mut out = vec![0.0; b * units];
            for (xi, yo) in x.data().chunks_exact(inputs).zip(out.chunks_exact_mut(units)) {
                yo.copy_from_slice(bias);
                for (i, &v) in xi.iter().enumerate() {
                    if v != 0.0 {
                        for (y, &wij) in yo.iter_mut().zip(&w[i * units..(i + 1) * units]) {
                            *y += v * wij;
                        }
                    }
                }
            }
            let y = Tensor::from_parts(vec![b, units], out);
            (y, if train { Cache::Input(x) } else { Cache::None })
        }
        LayerSpec::Conv1d {
            in_channels: cin,
            filters,
            kernel,
        } => {
            let (b, t_len) = (x.shape()[0], x.shape()[1]);
            let pad = kernel / 2;
            let (w, bias) = params.split_at(kernel * cin * filters);
            let mut out = vec![0.0; b * t_len * filters];
            let xd = x.data();
            for bi in 0..b {
                for t in 0..t_len {
                    let yo = &mut out[(bi * t_len + t) * filters..(bi * t_len + t + 1) * filters];
                    yo.copy_from_slice(bias);
                    for k in 0..kernel {
                        let ti = t + k;
                        if ti < pad || ti - pad >= t_len {
                            continue;
                        }
                        let src = &xd[(bi * t_len + ti - pad) * cin..(bi * t_len + ti - pad + 1) * cin];
                        for (c, &v) in src.iter().enumerate() {
                            let wrow = &w[(k * cin + c) * filters..(k * cin + c + 1) * filters];
                            for (y, &wv) in yo.iter_mut().zip(wrow) {
                                *y += v * wv;
                            }
                        }
                    }
                }
            }
            let y = Tensor::from_parts(vec![b, t_len, filters], out);
            (y, if train { Cache::Input(x) } else { Cache::None })
        }
        LayerSpec::GlobalAvgPool => {
            let (b, t_len, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
            let mut out = vec![0.0; b * c];
            for bi in 0..b {
                let yo = &mut out[bi * c..(bi + 1) * c];
                for row in x.data()[bi * t_len * c..(bi + 1) * t_len * c].chunks_exact(c) {
                    for (y, &v) in yo.iter_mut().zip(row) {
                        *y += v;
                    }
                }
                for y in yo.iter_mut() {
                    *y /= t_len as f64;
                }
            }
            (Tensor::from_parts(vec![b, c], out), Cache::Pool { time: t_len })
        }
        LayerSpec::BatchNorm { features: c } => {
            let (gamma, beta) = params.split_at(c);
            let shape = x.shape().to_vec();
            let mut data = x.into_data();
            if !train {
                let (rm, rv) = state.split_at(c);
                let scale: Vec<f64> = (0..c).map(|j| gamma[j] / (rv[j] + BN_EPSILON).sqrt()).collect();
                for row in data.chunks_exact_mut(c) {
                    for j in 0..c {
                        row[j] = (row[j] - rm[j]) * scale[j] + beta[j];
                    }
                }
                return (Tensor::from_parts(shape, data), Cache::None);
            }
            let n = (data.len() / c) as f64;
            let mut mean = vec![0.0; c];
            for row in data.chunks_exact(c) {
                for j in 0..c {
                    mean[j] += row[j];
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; c];
            for row in data.chunks_exact(c) {
                for j in 0..c {
                    var[j] += (row[j] - mean[j]).powi(2);
                }
            }
            var.iter_mut().for_each(|v| *v /= n);
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
            let mut x_hat = data.clone();
            for (row, xh) in data.chunks_exact_mut(c).zip(x_hat.chunks_exact_mut(c)) {
                for j in 0..c {
                    xh[j] = (row[j] - mean[j]) * inv_std[j];
                    row[j] = gamma[j] * xh[j] + beta[j];
                }
            }
            (
                Tensor::from_parts(shape, data),
                Cache::BatchNorm {
                    x_hat,
                    inv_std,
                    mean,
                    var,
                },
            )
        }
        LayerSpec::Dropout { rate } => match rng {
            Some(rng) if rate > 0.0 => {
                let keep = 1.0 / (1.0 - rate);
                let mask: Vec<f64> = (0..x.len())
                    .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                    .collect();
                let shape = x.shape().to_vec();
                let data = x.into_data().into_iter().zip(&mask).map(|(v, m)| v * m).collect();
                (Tensor::from_parts(shape, data), Cache::Mask(mask))
            }
            _ => (x, Cache::None),
        },
        LayerSpec::Relu => {
            let shape = x.shape().to_vec();
            let data: Vec<f64> = x.into_data().into_iter().map(|v| v.max(0.0)).collect();
            let cache = if train {
                Cache::Output(data.clone())
            } else {
                Cache::None
            };
            (Tensor::from_parts(shape, data), cache)
        }
        LayerSpec::Sigmoid => {
            let shape = x.shape().to_vec();
            let data: Vec<f64> = x.into_data().into_iter().map(sigmoid).collect();
            let cache = if train {
                Cache::Output(data.clone())
            } else {
                Cache::None
            };
            (Tensor::from_parts(shape, data), cache)
        }
        LayerSpec::Lstm {
            inputs,
            units: h,
            return_sequences,
            activation,
        } => {
            let (b, t_len) = (x.shape()[0], x.shape()[1]);
            let g4 = 4 * h;
            let (w, rest) = params.split_at(inputs * g4);
            let (u, bias) = rest.split_at(h * g4);
            let mut gates = vec![0.0; b * t_len * g4];
            let mut cell = vec![0.0; b * t_len * h];
            let mut cell_act = vec![0.0; b * t_len * h];
            let mut hidden = vec![0.0; b * t_len * h];
            let mut z = vec![0.0; g4];
            for bi in 0..b {
                for t in 0..t_len {
                    let idx = bi * t_len + t;
                    z.copy_from_slice(bias);
                    let xt = &x.data()[idx * inputs..(idx + 1) * inputs];
                    for (i, &v) in xt.iter().enumerate() {
                        if v != 0.0 {
                            for (zz, &wv) in z.iter_mut().zip(&w[i * g4..(i + 1) * g4]) {
                                *zz += v * wv;
                            }
                        }
                    }
                    if t > 0 {
                        let hp = &hidden[(idx - 1) * h..idx * h];
                        for (i, &v) in hp.iter().enumerate() {
                            if v != 0.0 {
                                for (zz, &uv) in z.iter_mut().zip(&u[i * g4..(i + 1) * g4]) {
                                    *zz += v * uv;
                                }
                            }
                        }
                    }
                    let gt = &mut gates[idx * g4..(idx + 1) * g4];
                    for j in 0..h {
                        gt[j] = sigmoid(z[j]);
                        gt[h + j] = sigmoid(z[h + j]);
                        gt[2 * h + j] = activation.apply(z[2 * h + j]);
                        gt[3 * h + j] = sigmoid(z[3 * h + j]);
                    }
                    for j in 0..h {
                        let c_prev = if t > 0 { cell[(idx - 1) * h + j] } else { 0.0 };
                        let c = gt[h + j] * c_prev + gt[j] * gt[2 * h + j];
                        let ac = activation.apply(c);
                        cell[idx * h + j] = c;
                        cell_act[idx * h + j] = ac;
                        hidden[idx * h + j] = gt[3 * h + j] * ac;
                    }
                }
            }
            let y = if return_sequences {
                Tensor::from_parts(vec![b, t_len, h], hidden.clone())
            } else {
                let mut last = Vec::with_capacity(b * h);
                for bi in 0..b {
                    let idx = bi * t_len + t_len - 1;
                    last.extend_from_slice(&hidden[idx * h..(idx + 1) * h]);
                }
                Tensor::from_parts(vec![b, h], last)
            };
            let cache = if train {
                Cache::Lstm(LstmCache {
                    input: x,
                    gates,
                    cell,
                    cell_act,
                    hidden,
                })
            } else {
                Cache::None
            };
            (y, cache)
        }
    }
}

/// Backward pass: accumulates parameter gradients into `grads` and returns
/// the gradient with respect to the layer input.
pub(crate) fn backward(spec: &LayerSpec, params: &[f64], cache: &Cache, dy: Tensor, grads: &mut [f64]) -> Tensor {
    match (*spec, cache) {
        (LayerSpec::Dense { inputs, units }, Cache::Input(x)) => {
            let (w, _) = params.split_at(inputs * units);
            let (gw, gb) = grads.split_at_mut(inputs * units);
            let mut dx = vec![0.0; x.len()];
            for ((xi, dyo), dxi) in x
                .data()
                .chunks_exact(inputs)
                .zip(dy.data().chunks_exact(units))
                .zip(dx.chunks_exact_mut(inputs))
            {
                for (g, &d) in gb.iter_mut().zip(dyo) {
                    *g += d;
                }
                for i in 0..inputs {
                    let wrow = &w[i * units..(i + 1) * units];
                    let grow = &mut gw[i * units..(i + 1) * units];
                    let v = xi[i];
                    let mut acc = 0.0;
                    for j in 0..units {
                        grow[j] += v * dyo[j];
                        acc += wrow[j] * dyo[j];
                    }
                    dxi[i] = acc;
                }
            }
            Tensor::from_parts(x.shape().to_vec(), dx)
        }
        (
            LayerSpec::Conv1d {
                in_channels: cin,
                filters,
                kernel,
            },
            Cache::Input(x),
        ) => {
            let (b, t_len) = (x.shape()[0], x.shape()[1]);
            let pad = kernel / 2;
            let (w, _) = params.split_at(kernel * cin * filters);
            let (gw, gb) = grads.split_at_mut(kernel * cin * filters);
            let mut dx = vec![0.0; x.len()];
            let (xd, dyd) = (x.data(), dy.data());
            for bi in 0..b {
                for t in 0..t_len {
                    let dyo = &dyd[(bi * t_len + t) * filters..(bi * t_len + t + 1) * filters];
                    for (g, &d) in gb.iter_mut().zip(dyo) {
                        *g += d;
                    }
                    for k in 0..kernel {
                        let ti = t + k;
                        if ti < pad || ti - pad >= t_len {
                            continue;
                        }
                        let src = (bi * t_len + ti - pad) * cin;
                        for c in 0..cin {
                            let off = (k * cin + c) * filters;
                            let v = xd[src + c];
                            let wrow = &w[off..off + filters];
                            let grow = &mut gw[off..off + filters];
                            let mut acc = 0.0;
                            for f in 0..filters {
                                grow[f] += v * dyo[f];
                                acc += wrow[f] * dyo[f];
                            }
                            dx[src + c] += acc;
                        }
                    }
                }
            }
            Tensor::from_parts(x.shape().to_vec(), dx)
        }
        (LayerSpec::GlobalAvgPool, Cache::Pool { time }) => {
            let (b, c) = (dy.shape()[0], dy.shape()[1]);
            let scale = 1.0 / *time as f64;
            let mut dx = Vec::with_capacity(b * time * c);
            for row in dy.data().chunks_exact(c) {
                for _ in 0..*time {
                    dx.extend(row.iter().map(|d| d * scale));
                }
            }
            Tensor::from_parts(vec![b, *time, c], dx)
        }
        (LayerSpec::BatchNorm { features: c }, Cache::BatchNorm { x_hat, inv_std, .. }) => {
            let gamma = &params[..c];
            let (gg, gbeta) = grads.split_at_mut(c);
            let n = (x_hat.len() / c) as f64;
            let mut sum_dy = vec![0.0; c];
            let mut sum_dy_xhat = vec![0.0; c];
            for (d, xh) in dy.data().chunks_exact(c).zip(x_hat.chunks_exact(c)) {
                for j in 0..c {
                    sum_dy[j] += d[j];
                    sum_dy_xhat[j] += d[j] * xh[j];
                }
            }
            for j in 0..c {
                gg[j] += sum_dy_xhat[j];
                gbeta[j] += sum_dy[j];
            }
            let shape = dy.shape().to_vec();
            let mut dx = dy.into_data();
            for (d, xh) in dx.chunks_exact_mut(c).zip(x_hat.chunks_exact(c)) {
                for j in 0..c {
                    d[j] = gamma[j] * inv_std[j] / n * (n * d[j] - sum_dy[j] - xh[j] * sum_dy_xhat[j]);
                }
            }
            Tensor::from_parts(shape, dx)
        }
        (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => {
            let shape = dy.shape().to_vec();
            let data = dy.into_data().into_iter().zip(mask).map(|(d, m)| d * m).collect();
            Tensor::from_parts(shape, data)
        }
        (LayerSpec::Relu, Cache::Output(out)) => {
            let shape = dy.shape().to_vec();
            let data = dy
                .into_data()
                .into_iter()
                .zip(out)
                .map(|(d, &o)| if o > 0.0 { d } else { 0.0 })
                .collect();
            Tensor::from_parts(shape, data)
        }
        (LayerSpec::Sigmoid, Cache::Output(out)) => {
            let shape = dy.shape().to_vec();
            let data = dy
                .into_data()
                .into_iter()
                .zip(out)
                .map(|(d, &p)| d * p * (1.0 - p))
                .collect();
            Tensor::from_parts(shape, data)
        }
        (
            LayerSpec::Lstm {
                inputs,
                units: h,
                return_sequences,
                activation,
            },
            Cache::Lstm(c),
        ) => lstm_backward(inputs, h, return_sequences, activation, params, c, dy, grads),
        (_, Cache::None) => dy,
        (spec, _) => unreachable!("cache does not match layer {}", spec.kind_name()),
    }
}

#[allow(clippy::too_many_arguments)]
fn lstm_backward(
    inputs: usize,
    h: usize,
    return_sequences: bool,
    activation: CellActivation,
    params: &[f64],
    c: &LstmCache,
    dy: Tensor,
    grads: &mut [f64],
) -> Tensor {
    let (b, t_len) = (c.input.shape()[0], c.input.shape()[1]);
    let g4 = 4 * h;
    let (w, rest) = params.split_at(inputs * g4);
    let (u, _) = rest.split_at(h * g4);
    let (gw, rest) = grads.split_at_mut(inputs * g4);
    let (gu, gb) = rest.split_at_mut(h * g4);
    let mut dx = vec![0.0; c.input.len()];
    let mut dz = vec![0.0; g4];
    let mut dh = vec![0.0; h];
    let mut dc = vec![0.0; h];
    for bi in 0..b {
        dh.fill(0.0);
        dc.fill(0.0);
        for t in (0..t_len).rev() {
            let idx = bi * t_len + t;
            if return_sequences {
                for (d, &g) in dh.iter_mut().zip(&dy.data()[idx * h..(idx + 1) * h]) {
                    *d += g;
                }
            } else if t == t_len - 1 {
                dh.copy_from_slice(&dy.data()[bi * h..(bi + 1) * h]);
            }
            let gt = &c.gates[idx * g4..(idx + 1) * g4];
            for j in 0..h {
                let (i_g, f_g, g_g, o_g) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                let ac = c.cell_act[idx * h + j];
                let c_prev = if t > 0 { c.cell[(idx - 1) * h + j] } else { 0.0 };
                let d_o = dh[j] * ac;
                dc[j] += dh[j] * o_g * activation.derivative(ac);
                let d_i = dc[j] * g_g;
                let d_g = dc[j] * i_g;
                let d_f = dc[j] * c_prev;
                dz[j] = d_i * i_g * (1.0 - i_g);
                dz[h + j] = d_f * f_g * (1.0 - f_g);
                dz[2 * h + j] = d_g * activation.derivative(g_g);
                dz[3 * h + j] = d_o * o_g * (1.0 - o_g);
                dc[j] *= f_g;
            }
            for (g, &d) in gb.iter_mut().zip(&dz) {
                *g += d;
            }
            let xt = &c.input.data()[idx * inputs..(idx + 1) * inputs];
            let dxt = &mut dx[idx * inputs..(idx + 1) * inputs];
            for i in 0..inputs {
                let v = xt[i];
                let wrow = &w[i * g4..(i + 1) * g4];
                let grow = &mut gw[i * g4..(i + 1) * g4];
                let mut acc = 0.0;
                for k in 0..g4 {
                    grow[k] += v * dz[k];
                    acc += wrow[k] * dz[k];
                }
                dxt[i] = acc;
            }
            for i in 0..h {
                let hp = if t > 0 { c.hidden[(idx - 1) * h + i] } else { 0.0 };
                let urow = &u[i * g4..(i + 1) * g4];
                let grow = &mut gu[i * g4..(i + 1) * g4];
                let mut acc = 0.0;
                for k in 0..g4 {
                    grow[k] += hp * dz[k];
                    acc += urow[k] * dz[k];
                }
                dh[i] = acc;
            }
        }
    }
    Tensor::from_parts(c.input.shape().to_vec(), dx)
}

/// Updates running statistics from a training-mode batch-norm cache.
pub(crate) fn update_running_stats(spec: &LayerSpec, state: &mut [f64], cache: &Cache) {
    if let (LayerSpec::BatchNorm { features }, Cache::BatchNorm { mean, var, .. }) = (spec, cache) {
        let (rm, rv) = state.split_at_mut(*features);
        for j in 0..*features {
            rm[j] = BN_MOMENTUM * rm[j] + (1.0 - BN_MOMENTUM) * mean[j];
            rv[j] = BN_MOMENTUM * rv[j] + (1.0 - BN_MOMENTUM) * var[j];
        }
    }
}
