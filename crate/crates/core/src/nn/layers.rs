//! Layer primitives with explicit forward and backward passes.
//!
//! Backward functions come in two forms: the public ones return fresh gradient
//! buffers, the `*_accumulate` ones add into caller-owned buffers so a batch can
//! be reduced without per-sample allocation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tensor::{Shape, Tensor};
use super::NnError;

/// Probability floor applied inside the cross-entropy logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conv1dSpec {
    pub filters: usize,
    pub kernel_size: usize,
    pub in_channels: usize,
}

impl Conv1dSpec {
    pub fn param_count(&self) -> usize {
        self.filters * (self.kernel_size * self.in_channels + 1)
    }

    pub fn weight_index(&self, f: usize, k: usize, c: usize) -> usize {
        (f * self.kernel_size + k) * self.in_channels + c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DenseSpec {
    pub in_units: usize,
    pub out_units: usize,
}

impl DenseSpec {
    pub fn param_count(&self) -> usize {
        self.in_units * self.out_units + self.out_units
    }
}

/// One layer of a sequential network. Pooling is fixed at window 2, stride 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv1D(Conv1dSpec),
    MaxPool1D,
    Flatten,
    Dense(DenseSpec),
    ReLU,
    Softmax,
}

impl LayerSpec {
    pub fn conv1d(filters: usize, kernel_size: usize, in_channels: usize) -> Self {
        LayerSpec::Conv1D(Conv1dSpec { filters, kernel_size, in_channels })
    }

    pub fn dense(in_units: usize, out_units: usize) -> Self {
        LayerSpec::Dense(DenseSpec { in_units, out_units })
    }

    pub fn param_count(&self) -> usize {
        match self {
            LayerSpec::Conv1D(s) => s.param_count(),
            LayerSpec::Dense(s) => s.param_count(),
            _ => 0,
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, LayerSpec::Conv1D(_) | LayerSpec::Dense(_))
    }

    pub fn validate(&self) -> Result<(), NnError> {
        match *self {
            LayerSpec::Conv1D(s) if s.filters == 0 || s.kernel_size == 0 || s.in_channels == 0 => {
                Err(NnError::InvalidLayer(format!("{self}")))
            }
            LayerSpec::Dense(s) if s.in_units == 0 || s.out_units == 0 => Err(NnError::InvalidLayer(format!("{self}"))),
            _ => Ok(()),
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, NnError> {
        let mismatch = || NnError::ShapeMismatch(format!("{self} cannot take input {input}"));
        match (*self, input) {
            (LayerSpec::Conv1D(s), Shape::Seq { len, channels }) if channels == s.in_channels && len >= s.kernel_size => {
                Ok(Shape::Seq { len: len - s.kernel_size + 1, channels: s.filters })
            }
            (LayerSpec::MaxPool1D, Shape::Seq { len, channels }) if len >= 2 => Ok(Shape::Seq { len: len / 2, channels }),
            (LayerSpec::Flatten, s) => Ok(Shape::Flat(s.size())),
            (LayerSpec::Dense(s), Shape::Flat(n)) if n == s.in_units => Ok(Shape::Flat(s.out_units)),
            (LayerSpec::ReLU, s) => Ok(s),
            (LayerSpec::Softmax, Shape::Flat(n)) => Ok(Shape::Flat(n)),
            _ => Err(mismatch()),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv1D(s) => write!(f, "conv1d({},{},{})", s.filters, s.kernel_size, s.in_channels),
            LayerSpec::MaxPool1D => f.write_str("maxpool1d(2)"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::Dense(s) => write!(f, "dense({},{})", s.in_units, s.out_units),
            LayerSpec::ReLU => f.write_str("relu"),
            LayerSpec::Softmax => f.write_str("softmax"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NnError::InvalidLayer(s.to_string());
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((name, rest)) => (name, rest.strip_suffix(')').ok_or_else(bad)?),
            None => (s, ""),
        };
        let nums: Vec<usize> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',').map(|a| a.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
        };
        let spec = match (name, nums.as_slice()) {
            ("conv1d", &[f, k, c]) => LayerSpec::conv1d(f, k, c),
            ("maxpool1d", &[2]) => LayerSpec::MaxPool1D,
            ("flatten", &[]) => LayerSpec::Flatten,
            ("dense", &[i, o]) => LayerSpec::dense(i, o),
            ("relu", &[]) => LayerSpec::ReLU,
            ("softmax", &[]) => LayerSpec::Softmax,
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Weights and biases of a trainable layer.
///
/// Conv1D weights are indexed `[filter][tap][in_channel]`; Dense weights are
/// `[in][out]`, so the forward map is `W^T x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn zeros_like(&self) -> Self {
        Self { weights: vec![0.0; self.weights.len()], biases: vec![0.0; self.biases.len()] }
    }

    pub fn zeros_for(spec: &LayerSpec) -> Option<Self> {
        match spec {
            LayerSpec::Conv1D(s) => {
                Some(Self { weights: vec![0.0; s.filters * s.kernel_size * s.in_channels], biases: vec![0.0; s.filters] })
            }
            LayerSpec::Dense(s) => Some(Self { weights: vec![0.0; s.in_units * s.out_units], biases: vec![0.0; s.out_units] }),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.biases[i - self.weights.len()]
        }
    }

    pub fn get_mut(&mut self, i: usize) -> &mut f64 {
        let nw = self.weights.len();
        if i < nw {
            &mut self.weights[i]
        } else {
            &mut self.biases[i - nw]
        }
    }

    fn check(&self, weights: usize, biases: usize) -> Result<(), NnError> {
        if self.weights.len() != weights || self.biases.len() != biases {
            return Err(NnError::ShapeMismatch(format!(
                "expected {weights} weights and {biases} biases, got {} and {}",
                self.weights.len(),
                self.biases.len()
            )));
        }
        Ok(())
    }
}

fn seq_dims(t: &Tensor, what: &str) -> Result<(usize, usize), NnError> {
    match t.shape() {
        Shape::Seq { len, channels } => Ok((len, channels)),
        s => Err(NnError::ShapeMismatch(format!("{what} expects a sequence, got {s}"))),
    }
}

/// Valid (unpadded) cross-correlation:
/// `out[t, f] = b[f] + sum_{k, c} w[f, k, c] * in[t + k, c]`.
pub fn conv1d_forward(input: &Tensor, params: &LayerParams, spec: &Conv1dSpec) -> Result<Tensor, NnError> {
    let (len, channels) = seq_dims(input, "conv1d")?;
    if channels != spec.in_channels || len < spec.kernel_size {
        return Err(NnError::ShapeMismatch(format!("conv1d {spec:?} cannot take {len}x{channels}")));
    }
    params.check(spec.filters * spec.kernel_size * spec.in_channels, spec.filters)?;
    let out_len = len - spec.kernel_size + 1;
    let x = input.data();
    let span = spec.kernel_size * channels;
    let mut out = vec![0.0; out_len * spec.filters];
    for t in 0..out_len {
        // Taps t..t+K are contiguous in time-major layout.
        let window = &x[t * channels..t * channels + span];
        for f in 0..spec.filters {
            let w = &params.weights[f * span..(f + 1) * span];
            let acc: f64 = w.iter().zip(window).map(|(a, b)| a * b).sum();
            out[t * spec.filters + f] = params.biases[f] + acc;
        }
    }
    Ok(Tensor::seq(out_len, spec.filters, out))
}

/// Adds this sample's weight and bias gradients into `grads` and returns the
/// gradient with respect to the input.
pub fn conv1d_backward_accumulate(
    input: &Tensor,
    params: &LayerParams,
    spec: &Conv1dSpec,
    upstream: &Tensor,
    grads: &mut LayerParams,
) -> Result<Tensor, NnError> {
    let (len, channels) = seq_dims(input, "conv1d")?;
    let out_len = len.checked_sub(spec.kernel_size).map(|d| d + 1).unwrap_or(0);
    if channels != spec.in_channels || upstream.shape() != (Shape::Seq { len: out_len, channels: spec.filters }) {
        return Err(NnError::ShapeMismatch(format!("conv1d backward: input {len}x{channels}, upstream {}", upstream.shape())));
    }
    params.check(spec.filters * spec.kernel_size * spec.in_channels, spec.filters)?;
    grads.check(params.weights.len(), params.biases.len())?;
    let x = input.data();
    let g = upstream.data();
    let span = spec.kernel_size * channels;
    let mut dx = vec![0.0; x.len()];
    for t in 0..out_len {
        let window = &x[t * channels..t * channels + span];
        for f in 0..spec.filters {
            let up = g[t * spec.filters + f];
            if up == 0.0 {
                continue;
            }
            grads.biases[f] += up;
            let wg = &mut grads.weights[f * span..(f + 1) * span];
            for (a, &b) in wg.iter_mut().zip(window) {
                *a += up * b;
            }
            let w = &params.weights[f * span..(f + 1) * span];
            for (d, &wv) in dx[t * channels..t * channels + span].iter_mut().zip(w) {
                *d += up * wv;
            }
        }
    }
    Ok(Tensor::new(input.shape(), dx))
}

/// Returns `(input_grad, param_grads)`.
pub fn conv1d_backward(
    input: &Tensor,
    params: &LayerParams,
    spec: &Conv1dSpec,
    upstream: &Tensor,
) -> Result<(Tensor, LayerParams), NnError> {
    let mut grads = params.zeros_like();
    let dx = conv1d_backward_accumulate(input, params, spec, upstream, &mut grads)?;
    Ok((dx, grads))
}

/// Non-overlapping max over windows of two. An odd trailing step is dropped and
/// ties go to the earlier position. Also returns, per output element, the flat
/// input index it was taken from.
pub fn maxpool1d_forward(input: &Tensor) -> Result<(Tensor, Vec<usize>), NnError> {
    let (len, channels) = seq_dims(input, "maxpool1d")?;
    if len < 2 {
        return Err(NnError::ShapeMismatch(format!("maxpool1d needs length >= 2, got {len}")));
    }
    let out_len = len / 2;
    let x = input.data();
    let mut out = Vec::with_capacity(out_len * channels);
    let mut argmax = Vec::with_capacity(out_len * channels);
    for t in 0..out_len {
        for c in 0..channels {
            let a = (2 * t) * channels + c;
            let b = a + channels;
            let pick = if x[b] > x[a] { b } else { a };
            out.push(x[pick]);
            argmax.push(pick);
        }
    }
    Ok((Tensor::seq(out_len, channels, out), argmax))
}

pub fn maxpool1d_backward(input_shape: Shape, argmax: &[usize], upstream: &Tensor) -> Result<Tensor, NnError> {
    if upstream.data().len() != argmax.len() || argmax.iter().any(|&i| i >= input_shape.size()) {
        return Err(NnError::ShapeMismatch(format!(
            "maxpool1d backward: {} upstream values for {} routes into {input_shape}",
            upstream.data().len(),
            argmax.len()
        )));
    }
    let mut dx = Tensor::zeros(input_shape);
    for (&i, &g) in argmax.iter().zip(upstream.data()) {
        dx.data_mut()[i] += g;
    }
    Ok(dx)
}

fn flat_len(t: &Tensor, what: &str) -> Result<usize, NnError> {
    match t.shape() {
        Shape::Flat(n) => Ok(n),
        s => Err(NnError::ShapeMismatch(format!("{what} expects a flat vector, got {s}"))),
    }
}

/// `out = W^T x + b`.
pub fn dense_forward(input: &Tensor, params: &LayerParams, spec: &DenseSpec) -> Result<Tensor, NnError> {
    let n = flat_len(input, "dense")?;
    if n != spec.in_units {
        return Err(NnError::ShapeMismatch(format!("dense expects {} inputs, got {n}", spec.in_units)));
    }
    params.check(spec.in_units * spec.out_units, spec.out_units)?;
    let mut out = params.biases.clone();
    for (i, &xi) in input.data().iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &params.weights[i * spec.out_units..(i + 1) * spec.out_units];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += xi * w;
        }
    }
    Ok(Tensor::flat(out))
}

pub fn dense_backward_accumulate(
    input: &Tensor,
    params: &LayerParams,
    spec: &DenseSpec,
    upstream: &Tensor,
    grads: &mut LayerParams,
) -> Result<Tensor, NnError> {
    let n = flat_len(input, "dense")?;
    let m = flat_len(upstream, "dense backward")?;
    if n != spec.in_units || m != spec.out_units {
        return Err(NnError::ShapeMismatch(format!("dense backward: {n} inputs, {m} upstream for {spec:?}")));
    }
    params.check(spec.in_units * spec.out_units, spec.out_units)?;
    grads.check(params.weights.len(), params.biases.len())?;
    let g = upstream.data();
    for (b, &u) in grads.biases.iter_mut().zip(g) {
        *b += u;
    }
    let mut dx = vec![0.0; n];
    for (i, &xi) in input.data().iter().enumerate() {
        let row = &params.weights[i * m..(i + 1) * m];
        dx[i] = row.iter().zip(g).map(|(w, u)| w * u).sum();
        if xi != 0.0 {
            let grow = &mut grads.weights[i * m..(i + 1) * m];
            for (gw, &u) in grow.iter_mut().zip(g) {
                *gw += xi * u;
            }
        }
    }
    Ok(Tensor::flat(dx))
}

pub fn dense_backward(input: &Tensor, params: &LayerParams, spec: &DenseSpec, upstream: &Tensor) -> Result<(Tensor, LayerParams), NnError> {
    let mut grads = params.zeros_like();
    let dx = dense_backward_accumulate(input, params, spec, upstream, &mut grads)?;
    Ok((dx, grads))
}

pub fn relu(input: &Tensor) -> Tensor {
    Tensor::new(input.shape(), input.data().iter().map(|&v| v.max(0.0)).collect())
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, upstream: &Tensor) -> Result<Tensor, NnError> {
    if input.shape() != upstream.shape() {
        return Err(NnError::ShapeMismatch(format!("relu backward: {} vs {}", input.shape(), upstream.shape())));
    }
    let dx = input.data().iter().zip(upstream.data()).map(|(&x, &g)| if x > 0.0 { g } else { 0.0 }).collect();
    Ok(Tensor::new(input.shape(), dx))
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `ln(sum(exp(z)))`, computed stably.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

fn check_one_hot(onehot: &[f64]) -> Result<usize, NnError> {
    let hot: Vec<usize> = onehot.iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(i, _)| i).collect();
    if hot.len() != 1 || onehot.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(NnError::InvalidOneHot);
    }
    Ok(hot[0])
}

/// `-sum(y_i * ln(max(p_i, 1e-12)))` for a one-hot `y`.
pub fn cross_entropy(pred: &[f64], onehot: &[f64]) -> Result<f64, NnError> {
    if pred.len() != onehot.len() {
        return Err(NnError::ShapeMismatch(format!("cross entropy: {} predictions, {} targets", pred.len(), onehot.len())));
    }
    let class = check_one_hot(onehot)?;
    Ok(-pred[class].max(PROB_FLOOR).ln())
}

/// Gradient of cross-entropy composed with softmax, taken with respect to the
/// logits: `p - y`.
pub fn softmax_cross_entropy_grad(pred: &[f64], onehot: &[f64]) -> Result<Vec<f64>, NnError> {
    if pred.len() != onehot.len() {
        return Err(NnError::ShapeMismatch(format!("cross entropy: {} predictions, {} targets", pred.len(), onehot.len())));
    }
    check_one_hot(onehot)?;
    Ok(pred.iter().zip(onehot).map(|(p, y)| p - y).collect())
}

/// Index of the largest probability. Ties go to the higher index, so an exact
/// 0.5/0.5 binary split picks class 1.
pub fn predict_class(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p >= probs[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    v
}
