use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    conv1d_backward_accumulate, conv1d_forward, dense_backward_accumulate, dense_forward, log_sum_exp, maxpool1d_backward,
    maxpool1d_forward, predict_class, relu, relu_backward, softmax, LayerParams, LayerSpec,
};
use super::tensor::{Shape, Tensor};
use super::NnError;

/// A sequential stack of layers with its parameters.
///
/// `params[i]` is `Some` exactly for Conv1D and Dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Shape,
    layers: Vec<LayerSpec>,
    shapes: Vec<Shape>,
    params: Vec<Option<LayerParams>>,
}

/// Per-layer inputs recorded during a forward pass, plus pooling routes.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Tensor>,
    argmax: Vec<Option<Vec<usize>>>,
    logits: Vec<f64>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Input seen by each layer before the final softmax.
    pub fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    /// Flat input index chosen by each output of a pooling layer.
    pub fn pool_routes(&self, layer: usize) -> Option<&[usize]> {
        self.argmax.get(layer).and_then(|a| a.as_deref())
    }

    /// ReLU sign pattern and pooling routes, used to detect when a perturbation
    /// crosses a point where the network is not differentiable.
    pub fn activation_pattern(&self, layers: &[LayerSpec]) -> Vec<u64> {
        let mut out = Vec::new();
        for (i, spec) in layers.iter().enumerate() {
            match spec {
                LayerSpec::ReLU => out.extend(self.inputs[i].data().iter().map(|&v| u64::from(v > 0.0))),
                LayerSpec::MaxPool1D => {
                    if let Some(a) = &self.argmax[i] {
                        out.extend(a.iter().map(|&j| j as u64));
                    }
                }
                _ => {}
            }
        }
        out
    }
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..=limit)).collect()
}

impl Network {
    /// Builds the stack and initializes weights uniformly in
    /// `±sqrt(6 / (fan_in + fan_out))` with zero biases.
    pub fn new(input_shape: Shape, layers: Vec<LayerSpec>, seed: u64) -> Result<Self, NnError> {
        let mut net = Self::zeroed(input_shape, layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (spec, p) in net.layers.iter().zip(net.params.iter_mut()) {
            if let Some(p) = p {
                let (fan_in, fan_out) = match spec {
                    LayerSpec::Conv1D(s) => (s.kernel_size * s.in_channels, s.kernel_size * s.filters),
                    LayerSpec::Dense(s) => (s.in_units, s.out_units),
                    _ => unreachable!(),
                };
                p.weights = glorot(&mut rng, fan_in, fan_out, p.weights.len());
            }
        }
        Ok(net)
    }

    /// Same stack with every parameter zero.
    pub fn zeroed(input_shape: Shape, layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidLayer("empty layer stack".into()));
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut shape = input_shape;
        for spec in &layers {
            spec.validate()?;
            shape = spec.output_shape(shape)?;
            shapes.push(shape);
        }
        let params = layers.iter().map(LayerParams::zeros_for).collect();
        Ok(Self { input_shape, layers, shapes, params })
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn output_shape(&self) -> Shape {
        *self.shapes.last().unwrap()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Output shape after each layer.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn params(&self) -> &[Option<LayerParams>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<LayerParams>] {
        &mut self.params
    }

    /// Replaces all parameters, checking sizes.
    pub fn set_params(&mut self, params: Vec<Option<LayerParams>>) -> Result<(), NnError> {
        if params.len() != self.params.len() {
            return Err(NnError::ShapeMismatch(format!("{} parameter slots for {} layers", params.len(), self.params.len())));
        }
        for (i, (new, old)) in params.iter().zip(&self.params).enumerate() {
            let ok = match (new, old) {
                (Some(n), Some(o)) => n.weights.len() == o.weights.len() && n.biases.len() == o.biases.len(),
                (None, None) => true,
                _ => false,
            };
            if !ok {
                return Err(NnError::ShapeMismatch(format!("parameters for layer {i} ({})", self.layers[i])));
            }
        }
        self.params = params;
        Ok(())
    }

    /// Trainable parameter count per layer, zero for parameter-free layers.
    pub fn layer_param_counts(&self) -> Vec<usize> {
        self.layers.iter().map(LayerSpec::param_count).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_param_counts().iter().sum()
    }

    pub fn zero_grads(&self) -> Vec<Option<LayerParams>> {
        self.params.iter().map(|p| p.as_ref().map(LayerParams::zeros_like)).collect()
    }

    fn ends_in_softmax(&self) -> bool {
        matches!(self.layers.last(), Some(LayerSpec::Softmax))
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NnError> {
        if x.shape() != self.input_shape {
            return Err(NnError::ShapeMismatch(format!("network expects input {}, got {}", self.input_shape, x.shape())));
        }
        Ok(())
    }

    fn apply(&self, i: usize, x: &Tensor) -> Result<(Tensor, Option<Vec<usize>>), NnError> {
        let p = self.params[i].as_ref();
        Ok(match self.layers[i] {
            LayerSpec::Conv1D(s) => (conv1d_forward(x, p.unwrap(), &s)?, None),
            LayerSpec::Dense(s) => (dense_forward(x, p.unwrap(), &s)?, None),
            LayerSpec::MaxPool1D => {
                let (y, a) = maxpool1d_forward(x)?;
                (y, Some(a))
            }
            LayerSpec::Flatten => (x.clone().reshape(Shape::Flat(x.shape().size())), None),
            LayerSpec::ReLU => (relu(x), None),
            LayerSpec::Softmax => (Tensor::flat(softmax(x.data())), None),
        })
    }

    /// Full forward pass.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NnError> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for i in 0..self.layers.len() {
            cur = self.apply(i, &cur)?.0;
        }
        Ok(cur)
    }

    /// Forward pass up to, not including, a final Softmax, recording what the
    /// backward pass needs.
    pub fn trace(&self, x: &Tensor) -> Result<Trace, NnError> {
        self.check_input(x)?;
        let body = self.layers.len() - usize::from(self.ends_in_softmax());
        let mut inputs = Vec::with_capacity(body);
        let mut argmax = Vec::with_capacity(body);
        let mut cur = x.clone();
        for i in 0..body {
            let (next, a) = self.apply(i, &cur)?;
            inputs.push(std::mem::replace(&mut cur, next));
            argmax.push(a);
        }
        Ok(Trace { inputs, argmax, logits: cur.into_data() })
    }

    /// Backpropagates `dlogits` through the layers recorded in `trace`, adding
    /// parameter gradients into `grads`.
    pub fn backward_accumulate(&self, trace: &Trace, dlogits: &[f64], grads: &mut [Option<LayerParams>]) -> Result<(), NnError> {
        if dlogits.len() != trace.logits.len() || grads.len() != self.params.len() {
            return Err(NnError::ShapeMismatch("backward buffers do not match the network".into()));
        }
        let body = trace.inputs.len();
        let out_shape = if body == 0 { self.input_shape } else { self.shapes[body - 1] };
        let mut up = Tensor::new(out_shape, dlogits.to_vec());
        for i in (0..body).rev() {
            let input = &trace.inputs[i];
            let p = self.params[i].as_ref();
            up = match self.layers[i] {
                LayerSpec::Conv1D(s) => conv1d_backward_accumulate(input, p.unwrap(), &s, &up, grads[i].as_mut().unwrap())?,
                LayerSpec::Dense(s) => dense_backward_accumulate(input, p.unwrap(), &s, &up, grads[i].as_mut().unwrap())?,
                LayerSpec::MaxPool1D => maxpool1d_backward(input.shape(), trace.argmax[i].as_ref().unwrap(), &up)?,
                LayerSpec::Flatten => up.reshape(input.shape()),
                LayerSpec::ReLU => relu_backward(input, &up)?,
                LayerSpec::Softmax => return Err(NnError::InvalidLayer("softmax is only supported as the last layer".into())),
            };
        }
        Ok(())
    }

    /// Mean categorical cross-entropy over a batch and its gradient. The loss
    /// is evaluated from the logits as `logsumexp(z) - z_y`; the returned
    /// gradients are already divided by the batch size.
    pub fn loss_and_grad(&self, xs: &[Tensor], classes: &[usize]) -> Result<(f64, Vec<Option<LayerParams>>), NnError> {
        let mut grads = self.zero_grads();
        let (loss, _) = self.loss_and_grad_into(xs, classes, &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds batch gradients into `grads`; returns the mean loss and the number
    /// of rows whose predicted class matches.
    pub fn loss_and_grad_into(&self, xs: &[Tensor], classes: &[usize], grads: &mut [Option<LayerParams>]) -> Result<(f64, usize), NnError> {
        self.check_batch(xs, classes)?;
        let scale = 1.0 / xs.len() as f64;
        let mut loss = 0.0;
        let mut hits = 0;
        for (x, &c) in xs.iter().zip(classes) {
            let tr = self.trace(x)?;
            loss += log_sum_exp(&tr.logits) - tr.logits[c];
            let mut d = softmax(&tr.logits);
            hits += usize::from(predict_class(&d) == c);
            d[c] -= 1.0;
            for v in d.iter_mut() {
                *v *= scale;
            }
            self.backward_accumulate(&tr, &d, grads)?;
        }
        Ok((loss * scale, hits))
    }

    /// Mean cross-entropy without gradients.
    pub fn loss(&self, xs: &[Tensor], classes: &[usize]) -> Result<f64, NnError> {
        self.check_batch(xs, classes)?;
        let mut loss = 0.0;
        for (x, &c) in xs.iter().zip(classes) {
            let tr = self.trace(x)?;
            loss += log_sum_exp(&tr.logits) - tr.logits[c];
        }
        Ok(loss / xs.len() as f64)
    }

    fn check_batch(&self, xs: &[Tensor], classes: &[usize]) -> Result<(), NnError> {
        if !self.ends_in_softmax() {
            return Err(NnError::InvalidLayer("cross-entropy training needs a final softmax layer".into()));
        }
        if xs.is_empty() || xs.len() != classes.len() {
            return Err(NnError::ShapeMismatch(format!("{} inputs with {} labels", xs.len(), classes.len())));
        }
        let k = self.output_shape().size();
        if classes.iter().any(|&c| c >= k) {
            return Err(NnError::InvalidOneHot);
        }
        Ok(())
    }

    /// Text form of the architecture, e.g. `16x1|conv1d(5,5,1)|relu|...`.
    pub fn descriptor(&self) -> String {
        let mut s = self.input_shape.to_string();
        for l in &self.layers {
            s.push('|');
            s.push_str(&l.to_string());
        }
        s
    }

    /// Zero-initialized network from a descriptor.
    pub fn from_descriptor(text: &str) -> Result<Self, NnError> {
        let mut parts = text.split('|');
        let head = parts.next().unwrap_or_default();
        let bad = || NnError::InvalidLayer(format!("input shape `{head}`"));
        let input_shape = match head.split_once('x') {
            Some((l, c)) => Shape::Seq { len: l.parse().map_err(|_| bad())?, channels: c.parse().map_err(|_| bad())? },
            None => Shape::Flat(head.parse().map_err(|_| bad())?),
        };
        let layers = parts.map(str::parse).collect::<Result<Vec<LayerSpec>, _>>()?;
        Self::zeroed(input_shape, layers)
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input {}", self.input_shape)?;
        for (spec, shape) in self.layers.iter().zip(&self.shapes) {
            writeln!(f, "{spec:<16} -> {shape:<6} params {}", spec.param_count())?;
        }
        write!(f, "total params {}", self.param_count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Network {
        Network::new(
            Shape::Seq { len: 8, channels: 1 },
            vec![
                LayerSpec::conv1d(2, 3, 1),
                LayerSpec::ReLU,
                LayerSpec::MaxPool1D,
                LayerSpec::Flatten,
                LayerSpec::dense(6, 2),
                LayerSpec::Softmax,
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn shape_inference() {
        let net = small();
        assert_eq!(net.output_shape(), Shape::Flat(2));
        assert_eq!(net.param_count(), 2 * 4 + 14);
        assert!(Network::new(Shape::Flat(4), vec![LayerSpec::conv1d(1, 2, 1)], 0).is_err());
        assert!(Network::new(Shape::Flat(4), vec![LayerSpec::dense(5, 2)], 0).is_err());
    }

    #[test]
    fn seeded_init_is_reproducible_and_bounded() {
        assert_eq!(small(), small());
        let net = small();
        let limit = (6.0f64 / 8.0).sqrt();
        let p = net.params()[4].as_ref().unwrap();
        assert!(p.weights.iter().all(|w| w.abs() <= limit));
        assert!(p.biases.iter().all(|&b| b == 0.0));
        let other = Network::new(net.input_shape(), net.layers().to_vec(), 2).unwrap();
        assert_ne!(other.params(), net.params());
    }

    #[test]
    fn forward_is_a_distribution() {
        let net = small();
        let y = net.forward(&Tensor::seq(8, 1, (0..8).map(|v| v as f64 / 8.0).collect())).unwrap();
        assert!((y.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn descriptor_round_trip() {
        let net = small();
        let back = Network::from_descriptor(&net.descriptor()).unwrap();
        assert_eq!(back.layers(), net.layers());
        assert_eq!(back.input_shape(), net.input_shape());
        assert!(Network::from_descriptor("8x1|bogus").is_err());
    }

    #[test]
    fn set_params_checks_sizes() {
        let mut net = small();
        let mut p = net.params().to_vec();
        p[0] = None;
        assert!(net.set_params(p).is_err());
    }
}
