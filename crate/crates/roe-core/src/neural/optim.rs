//! Gradient-norm clipping and RMSprop.

use crate::error::{Error, Result};

use super::PolicyValueNet;

/// Scale the whole gradient so its global L2 norm is at most `max_norm`;
/// direction is preserved exactly. Returns the pre-clip norm.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// Elementwise RMSprop on raw slices:
/// `s <- alpha * s + (1 - alpha) * g^2`,
/// `p <- p - lr * g / (sqrt(s) + eps)`.
pub fn rmsprop_update(params: &mut [f64], sq_avg: &mut [f64], grad: &[f64], lr: f64, alpha: f64, eps: f64) {
    for ((p, s), &g) in params.iter_mut().zip(sq_avg.iter_mut()).zip(grad.iter()) {
        *s = alpha * *s + (1.0 - alpha) * g * g;
        *p -= lr * g / (s.sqrt() + eps);
    }
}

/// Apply one RMSprop step to the network's parameters and running
/// square-average state.
pub fn rmsprop_step(
    net: &mut PolicyValueNet,
    grad: &[f64],
    lr: f64,
    alpha: f64,
    eps: f64,
) -> Result<()> {
    if grad.len() != net.param_len() {
        return Err(Error::contract(format!(
            "gradient length {} does not match parameter count {}",
            grad.len(),
            net.param_len()
        )));
    }
    let (params, sq) = net.state_mut();
    rmsprop_update(params, sq, grad, lr, alpha, eps);
    Ok(())
}
