//! Finite-difference verification of backpropagated gradients.
//!
//! The central difference `(L(θ+h) − L(θ−h)) / 2h` is evaluated as
//! `(ΔL(+h) − ΔL(−h)) / 2h`, where each `ΔL` is obtained by pushing the
//! parameter change through the network as a difference of activations and
//! finishing with `log1p(Σ p_i·expm1(Δz_i)) − Δz_y`, so no two rounded losses
//! are ever subtracted.

use serde::{Deserialize, Serialize};

use super::layers::{softmax, LayerSpec};
use super::network::{Network, Trace};
use super::tensor::{Shape, Tensor};
use super::NnError;

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(layer, flat parameter index)` of the worst parameter.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Parameters whose perturbation moved a ReLU input across zero or changed
    /// a pooling choice for some sample.
    pub skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Change of the logits of one sample when parameter `index` of `layer`
/// moves by `delta`. `None` when the change crosses a non-differentiable point.
fn logit_delta(net: &Network, trace: &Trace, layer: usize, index: usize, delta: f64) -> Option<Vec<f64>> {
    let layers = net.layers();
    let body = trace.inputs().len();
    let x = trace.inputs()[layer].data();
    let p = net.params()[layer].as_ref().unwrap();
    let mut d: Vec<f64> = match layers[layer] {
        LayerSpec::Dense(s) => {
            let mut out = vec![0.0; s.out_units];
            if index < p.weights.len() {
                out[index % s.out_units] = delta * x[index / s.out_units];
            } else {
                out[index - p.weights.len()] = delta;
            }
            out
        }
        LayerSpec::Conv1D(s) => {
            let out_len = x.len() / s.in_channels - s.kernel_size + 1;
            let mut out = vec![0.0; out_len * s.filters];
            if index < p.weights.len() {
                let c = index % s.in_channels;
                let k = (index / s.in_channels) % s.kernel_size;
                let f = index / (s.in_channels * s.kernel_size);
                for t in 0..out_len {
                    out[t * s.filters + f] = delta * x[(t + k) * s.in_channels + c];
                }
            } else {
                let f = index - p.weights.len();
                for t in 0..out_len {
                    out[t * s.filters + f] = delta;
                }
            }
            out
        }
        _ => unreachable!("only trainable layers are perturbed"),
    };
    for (l, spec) in layers.iter().enumerate().take(body).skip(layer + 1) {
        let a = trace.inputs()[l].data();
        d = match *spec {
            LayerSpec::Dense(s) => {
                let w = &net.params()[l].as_ref().unwrap().weights;
                let mut out = vec![0.0; s.out_units];
                for (i, &di) in d.iter().enumerate() {
                    if di != 0.0 {
                        for (o, &wv) in out.iter_mut().zip(&w[i * s.out_units..(i + 1) * s.out_units]) {
                            *o += di * wv;
                        }
                    }
                }
                out
            }
            LayerSpec::Conv1D(s) => {
                let w = &net.params()[l].as_ref().unwrap().weights;
                let span = s.kernel_size * s.in_channels;
                let out_len = a.len() / s.in_channels - s.kernel_size + 1;
                let mut out = vec![0.0; out_len * s.filters];
                for t in 0..out_len {
                    let window = &d[t * s.in_channels..t * s.in_channels + span];
                    for f in 0..s.filters {
                        out[t * s.filters + f] = w[f * span..(f + 1) * span].iter().zip(window).map(|(p, q)| p * q).sum();
                    }
                }
                out
            }
            LayerSpec::ReLU => {
                let mut out = vec![0.0; d.len()];
                for i in 0..d.len() {
                    let before = a[i] > 0.0;
                    let after = a[i] + d[i] > 0.0;
                    if before != after {
                        return None;
                    }
                    if before {
                        out[i] = d[i];
                    }
                }
                out
            }
            LayerSpec::MaxPool1D => {
                let routes = trace.pool_routes(l).unwrap();
                let Shape::Seq { channels, .. } = trace.inputs()[l].shape() else { unreachable!("pooling takes a sequence") };
                let mut out = Vec::with_capacity(routes.len());
                for (j, &pick) in routes.iter().enumerate() {
                    let (t, c) = (j / channels, j % channels);
                    let first = (2 * t) * channels + c;
                    let second = first + channels;
                    let moved = if a[second] + d[second] > a[first] + d[first] { second } else { first };
                    if moved != pick {
                        return None;
                    }
                    out.push(d[pick]);
                }
                out
            }
            LayerSpec::Flatten => d,
            LayerSpec::Softmax => unreachable!("softmax is excluded from the trace"),
        };
    }
    Some(d)
}

/// `L(z + dz) − L(z)` for cross-entropy on softmax probabilities `p`.
fn loss_delta(p: &[f64], dz: &[f64], class: usize) -> f64 {
    let s: f64 = p.iter().zip(dz).map(|(pi, di)| pi * di.exp_m1()).sum();
    s.ln_1p() - dz[class]
}

/// Central-difference derivative of the mean loss with respect to one
/// parameter, or `None` when `±h` crosses a kink for some sample.
pub fn numeric_derivative(net: &Network, traces: &[Trace], classes: &[usize], layer: usize, index: usize, h: f64) -> Option<f64> {
    let mut up = 0.0;
    let mut down = 0.0;
    for (tr, &c) in traces.iter().zip(classes) {
        let p = softmax(tr.logits());
        up += loss_delta(&p, &logit_delta(net, tr, layer, index, h)?, c);
        down += loss_delta(&p, &logit_delta(net, tr, layer, index, -h)?, c);
    }
    Some((up - down) / (2.0 * h * traces.len() as f64))
}

/// Compares backpropagated gradients with central differences over every
/// parameter of `net`.
pub fn grad_check(net: &Network, xs: &[Tensor], classes: &[usize], h: f64) -> Result<GradCheckReport, NnError> {
    let (_, analytic) = net.loss_and_grad(xs, classes)?;
    let traces: Vec<Trace> = xs.iter().map(|x| net.trace(x)).collect::<Result<_, _>>()?;
    let mut report = GradCheckReport { max_rel_err: 0.0, worst: None, checked: 0, skipped: 0 };
    for (layer, grad) in analytic.iter().enumerate() {
        let Some(grad) = grad else { continue };
        for i in 0..grad.len() {
            let Some(numeric) = numeric_derivative(net, &traces, classes, layer, i, h) else {
                report.skipped += 1;
                continue;
            };
            let err = relative_error(grad.get(i), numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((layer, i));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(rng: &mut ChaCha8Rng, shape: Shape, n: usize) -> (Vec<Tensor>, Vec<usize>) {
        let xs = (0..n).map(|_| Tensor::new(shape, (0..shape.size()).map(|_| rng.gen_range(0.0..1.0)).collect())).collect();
        let ys = (0..n).map(|_| rng.gen_range(0..2)).collect();
        (xs, ys)
    }

    fn conv_net(seed: u64) -> Network {
        Network::new(
            Shape::Seq { len: 10, channels: 1 },
            vec![
                LayerSpec::conv1d(3, 3, 1),
                LayerSpec::ReLU,
                LayerSpec::MaxPool1D,
                LayerSpec::conv1d(2, 2, 3),
                LayerSpec::ReLU,
                LayerSpec::Flatten,
                LayerSpec::dense(6, 2),
                LayerSpec::Softmax,
            ],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn agrees_with_plain_difference_of_losses() {
        let net = conv_net(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (xs, ys) = batch(&mut rng, net.input_shape(), 3);
        let traces: Vec<Trace> = xs.iter().map(|x| net.trace(x).unwrap()).collect();
        let h = 1e-4;
        let mut compared = 0;
        for (layer, p) in net.params().iter().enumerate() {
            let Some(p) = p else { continue };
            for i in 0..p.len() {
                let Some(stable) = numeric_derivative(&net, &traces, &ys, layer, i, h) else { continue };
                let mut probe = net.clone();
                *probe.params_mut()[layer].as_mut().unwrap().get_mut(i) = p.get(i) + h;
                let up = probe.loss(&xs, &ys).unwrap();
                *probe.params_mut()[layer].as_mut().unwrap().get_mut(i) = p.get(i) - h;
                let down = probe.loss(&xs, &ys).unwrap();
                let plain = (up - down) / (2.0 * h);
                assert!((stable - plain).abs() < 1e-10, "layer {layer} index {i}: {stable} vs {plain}");
                compared += 1;
            }
        }
        assert!(compared > 20);
    }

    #[test]
    fn dense_only_network_is_tight() {
        let net = Network::new(Shape::Flat(6), vec![LayerSpec::dense(6, 5), LayerSpec::dense(5, 2), LayerSpec::Softmax], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (xs, ys) = batch(&mut rng, Shape::Flat(6), 4);
        let r = grad_check(&net, &xs, &ys, DEFAULT_STEP).unwrap();
        assert_eq!(r.checked, net.param_count());
        assert!(r.max_rel_err < 1e-7, "{r:?}");
    }

    #[test]
    fn kink_crossing_parameters_are_skipped() {
        // The hidden unit sits exactly on the ReLU kink: x = 1, w = 0, b = 0.
        let mut net =
            Network::new(Shape::Flat(1), vec![LayerSpec::dense(1, 1), LayerSpec::ReLU, LayerSpec::dense(1, 2), LayerSpec::Softmax], 0)
                .unwrap();
        net.params_mut()[0].as_mut().unwrap().weights[0] = 0.0;
        net.params_mut()[2].as_mut().unwrap().weights = vec![1.0, -1.0];
        let r = grad_check(&net, &[Tensor::flat(vec![1.0])], &[0], DEFAULT_STEP).unwrap();
        assert_eq!(r.skipped, 2);
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_err < 1e-7, "{r:?}");
    }

    #[test]
    fn small_conv_network() {
        let net = conv_net(9);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (xs, ys) = batch(&mut rng, net.input_shape(), 4);
        let r = grad_check(&net, &xs, &ys, DEFAULT_STEP).unwrap();
        assert!(r.checked > 0);
        assert!(r.max_rel_err < 1e-5, "{r:?}");
    }

    #[test]
    fn distinguishes_a_scaled_gradient() {
        let net = Network::new(Shape::Flat(3), vec![LayerSpec::dense(3, 2), LayerSpec::Softmax], 1).unwrap();
        let xs = vec![Tensor::flat(vec![0.2, 0.4, 0.9])];
        let traces: Vec<Trace> = xs.iter().map(|x| net.trace(x).unwrap()).collect();
        let (_, g) = net.loss_and_grad(&xs, &[1]).unwrap();
        let n = numeric_derivative(&net, &traces, &[1], 0, 0, DEFAULT_STEP).unwrap();
        assert!(relative_error(g[0].as_ref().unwrap().get(0), n) < 1e-8);
        assert!(relative_error(2.0 * g[0].as_ref().unwrap().get(0), n) > 0.1);
    }
}
