use serde::{Deserialize, Serialize};

use super::layers::LayerParams;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One Adam update over a flat array. `t` is the step number after
/// incrementing, so the first call uses `t = 1`.
pub fn adam_update(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, h: &AdamHyper) -> Result<(), NnError> {
    if theta.len() != grad.len() || m.len() != grad.len() || v.len() != grad.len() {
        return Err(NnError::ShapeMismatch(format!("adam: {} params, {} grads, {} m, {} v", theta.len(), grad.len(), m.len(), v.len())));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(NnError::NonFiniteGradient);
    }
    let c1 = 1.0 - h.beta1.powi(t as i32);
    let c2 = 1.0 - h.beta2.powi(t as i32);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
    }
    Ok(())
}

/// Adam moments for every trainable layer of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Option<LayerParams>>,
    pub v: Vec<Option<LayerParams>>,
    pub t: u64,
    pub hyper: AdamHyper,
    /// Layers marked here are never updated.
    pub frozen: Vec<bool>,
}

impl AdamState {
    pub fn new(params: &[Option<LayerParams>], hyper: AdamHyper) -> Self {
        let zeros: Vec<Option<LayerParams>> = params.iter().map(|p| p.as_ref().map(LayerParams::zeros_like)).collect();
        Self { m: zeros.clone(), v: zeros, t: 0, hyper, frozen: vec![false; params.len()] }
    }

    pub fn freeze(&mut self, layer: usize) {
        self.frozen[layer] = true;
    }
}

/// Advances the step counter and updates every non-frozen layer.
pub fn adam_step(params: &mut [Option<LayerParams>], grads: &[Option<LayerParams>], state: &mut AdamState) -> Result<(), NnError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(NnError::ShapeMismatch("adam: layer counts differ".into()));
    }
    for g in grads.iter().flatten() {
        if g.weights.iter().chain(&g.biases).any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteGradient);
        }
    }
    state.t += 1;
    let t = state.t;
    let hyper = state.hyper;
    for i in 0..params.len() {
        if state.frozen[i] {
            continue;
        }
        match (&mut params[i], &grads[i], &mut state.m[i], &mut state.v[i]) {
            (Some(p), Some(g), Some(m), Some(v)) => {
                adam_update(&mut p.weights, &g.weights, &mut m.weights, &mut v.weights, t, &hyper)?;
                adam_update(&mut p.biases, &g.biases, &mut m.biases, &mut v.biases, t, &hyper)?;
            }
            (None, None, None, None) => {}
            _ => return Err(NnError::ShapeMismatch(format!("adam: layer {i} parameter layout differs"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut theta = vec![0.3, -1.2];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&mut theta, &[0.0, 0.0], &mut m, &mut v, 1, &AdamHyper::default()).unwrap();
        assert_eq!(theta, vec![0.3, -1.2]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut theta = vec![1.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        adam_update(&mut theta, &[1.0], &mut m, &mut v, 1, &AdamHyper::default()).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        assert!((theta[0] - (1.0 - 0.001 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((theta[0] - 0.999).abs() < 1e-10);
    }

    #[test]
    fn two_steps_match_scalar_recurrence() {
        let h = AdamHyper::default();
        let g = 0.37;
        let mut theta = vec![0.5];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        for t in 1..=2 {
            adam_update(&mut theta, &[g], &mut m, &mut v, t, &h).unwrap();
        }
        let (mut th, mut mm, mut vv) = (0.5f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            mm = 0.9 * mm + 0.1 * g;
            vv = 0.999 * vv + 0.001 * g * g;
            let mh = mm / (1.0 - 0.9f64.powi(t));
            let vh = vv / (1.0 - 0.999f64.powi(t));
            th -= 0.001 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((theta[0] - th).abs() <= 1e-15);
    }

    #[test]
    fn lr_zero_is_identity_and_errors() {
        let h = AdamHyper { lr: 0.0, ..Default::default() };
        let mut theta = vec![0.1, 0.2, 0.3];
        let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
        for t in 1..=5 {
            adam_update(&mut theta, &[1.0, -3.0, 1e-9], &mut m, &mut v, t, &h).unwrap();
        }
        assert_eq!(theta, vec![0.1, 0.2, 0.3]);
        assert_eq!(adam_update(&mut theta, &[f64::NAN, 0.0, 0.0], &mut m, &mut v, 6, &h), Err(NnError::NonFiniteGradient));
        assert!(matches!(adam_update(&mut theta, &[0.0], &mut m, &mut v, 6, &h), Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn frozen_layers_untouched() {
        let p = LayerParams { weights: vec![1.0, 2.0], biases: vec![0.5] };
        let mut params = vec![Some(p.clone()), None, Some(p.clone())];
        let grads = vec![
            Some(LayerParams { weights: vec![1.0, 1.0], biases: vec![1.0] }),
            None,
            Some(LayerParams { weights: vec![1.0, 1.0], biases: vec![1.0] }),
        ];
        let mut st = AdamState::new(&params, AdamHyper::default());
        st.freeze(0);
        adam_step(&mut params, &grads, &mut st).unwrap();
        assert_eq!(params[0].as_ref().unwrap(), &p);
        assert_ne!(params[2].as_ref().unwrap(), &p);
        assert_eq!(st.t, 1);
    }
}
