//! Loss and exact analytic gradients for the policy/value network.
//!
//! Total loss per batch:
//! `-mean[log pi(a|s) * A] + value_coef * mean[(R - V)^2 / 2]
//!  - entropy_coef * mean[H(pi(.|s))]`,
//! with the advantage `A = R - V(s)` treated as a constant in the policy
//! term (the value head only receives gradient through the value loss).

use std::ops::Range;

use crate::env::Observation;
use crate::error::{Error, Result};

use super::{
    forward_acts, softmax, BodyLayer, ConvDesc, DenseDesc, LossCoefficients, Plan,
    PolicyValueNet,
};

/// One update batch: parallel arrays of observations, chosen actions, and
/// n-step returns.
pub struct LossBatch<'a> {
    pub observations: Vec<&'a Observation>,
    pub actions: &'a [usize],
    pub returns: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossDiagnostics {
    /// Mean of `-log pi(a|s) * A`.
    pub policy_loss: f64,
    /// Mean of `(R - V)^2 / 2` (unweighted).
    pub value_loss: f64,
    /// Mean policy entropy.
    pub entropy: f64,
}

/// Gradient chunks are fixed by batch size alone so the floating-point
/// summation order never depends on thread scheduling or core count.
const GRAD_CHUNKS: usize = 8;

struct ChunkResult {
    grad: Vec<f64>,
    policy_sum: f64,
    value_sum: f64,
    entropy_sum: f64,
}

/// Compute the batch loss, its exact gradient with respect to every
/// parameter, and per-term diagnostics.
pub fn loss_and_gradients(
    net: &PolicyValueNet,
    batch: &LossBatch<'_>,
    coefs: &LossCoefficients,
) -> Result<(f64, Vec<f64>, LossDiagnostics)> {
    let n = batch.observations.len();
    if n == 0 || batch.actions.len() != n || batch.returns.len() != n {
        return Err(Error::contract(format!(
            "batch arrays must be non-empty and aligned: {} observations, {} actions, {} returns",
            n,
            batch.actions.len(),
            batch.returns.len()
        )));
    }
    for (i, &a) in batch.actions.iter().enumerate() {
        if a >= net.config().action_count {
            return Err(Error::contract(format!(
                "action {a} out of range at sample {i}"
            )));
        }
    }
    let plan = net.config().plan()?;
    let params = net.params();

    let chunk_count = GRAD_CHUNKS.min(n);
    let bounds: Vec<Range<usize>> = (0..chunk_count)
        .map(|c| (c * n / chunk_count)..((c + 1) * n / chunk_count))
        .collect();

    let results: Vec<Result<ChunkResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = bounds
            .iter()
            .cloned()
            .map(|range| {
                let plan = &plan;
                let batch = &batch;
                scope.spawn(move || chunk_pass(plan, params, batch, coefs, range))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    let mut grad = vec![0.0f64; plan.param_len];
    let mut policy_sum = 0.0;
    let mut value_sum = 0.0;
    let mut entropy_sum = 0.0;
    for result in results {
        let chunk = result?;
        for (g, c) in grad.iter_mut().zip(chunk.grad.iter()) {
            *g += c;
        }
        policy_sum += chunk.policy_sum;
        value_sum += chunk.value_sum;
        entropy_sum += chunk.entropy_sum;
    }
    let scale = 1.0 / n as f64;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    let diagnostics = LossDiagnostics {
        policy_loss: policy_sum * scale,
        value_loss: value_sum * scale,
        entropy: entropy_sum * scale,
    };
    let loss = diagnostics.policy_loss + coefs.value_coef * diagnostics.value_loss
        - coefs.entropy_coef * diagnostics.entropy;
    if !loss.is_finite() {
        return Err(Error::Numeric {
            msg: "batch loss is not finite".into(),
            diagnostics: format!(
                "policy_loss={} value_loss={} entropy={}",
                diagnostics.policy_loss, diagnostics.value_loss, diagnostics.entropy
            ),
        });
    }
    Ok((loss, grad, diagnostics))
}

fn chunk_pass(
    plan: &Plan,
    params: &[f64],
    batch: &LossBatch<'_>,
    coefs: &LossCoefficients,
    range: Range<usize>,
) -> Result<ChunkResult> {
    let mut grad = vec![0.0f64; plan.param_len];
    let mut policy_sum = 0.0;
    let mut value_sum = 0.0;
    let mut entropy_sum = 0.0;
    for i in range {
        let obs = batch.observations[i];
        let acts = forward_acts(plan, params, &obs.data);
        if !acts.value.is_finite() || acts.logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numeric {
                msg: "non-finite network output".into(),
                diagnostics: format!("sample={i} value={}", acts.value),
            });
        }
        let probs = softmax(&acts.logits);
        let action = batch.actions[i];
        let ret = batch.returns[i];
        let advantage = ret - acts.value;

        // 0 * ln 0 = 0 for fully saturated rows.
        let mut entropy = 0.0;
        for &p in &probs {
            if p > 0.0 {
                entropy -= p * p.ln();
            }
        }
        let log_p_action = probs[action].max(f64::MIN_POSITIVE).ln();
        policy_sum += -log_p_action * advantage;
        value_sum += 0.5 * (ret - acts.value) * (ret - acts.value);
        entropy_sum += entropy;

        // d(loss)/d(logit_j), unscaled (the 1/n factor is applied once at
        // the end):
        //   policy term: A * (p_j - [j == a])
        //   entropy term: entropy_coef * p_j * (ln p_j + H)
        let mut dlogits = vec![0.0f64; probs.len()];
        for (j, &p) in probs.iter().enumerate() {
            let indicator = if j == action { 1.0 } else { 0.0 };
            let mut d = advantage * (p - indicator);
            if p > 0.0 {
                d += coefs.entropy_coef * p * (p.ln() + entropy);
            }
            dlogits[j] = d;
        }
        let dvalue = coefs.value_coef * (acts.value - ret);

        backward_sample(plan, params, &obs.data, &acts, &dlogits, dvalue, &mut grad);
    }
    Ok(ChunkResult {
        grad,
        policy_sum,
        value_sum,
        entropy_sum,
    })
}

/// Accumulate one sample's parameter gradient given head gradients.
fn backward_sample(
    plan: &Plan,
    params: &[f64],
    obs: &[f64],
    acts: &super::ForwardActs,
    dlogits: &[f64],
    dvalue: f64,
    grad: &mut [f64],
) {
    // Heads share the hidden activation.
    let mut dhidden = vec![0.0f64; plan.hidden.out_dim];
    dense_backward(&plan.policy, params, &acts.hidden_post, dlogits, grad, &mut dhidden);
    dense_backward(&plan.value, params, &acts.hidden_post, &[dvalue], grad, &mut dhidden);
    for (d, &pre) in dhidden.iter_mut().zip(acts.hidden_pre.iter()) {
        if pre <= 0.0 {
            *d = 0.0;
        }
    }

    // Body output (post-rectifier) feeds the hidden layer.
    let body_post: Vec<Vec<f64>> = acts
        .pre
        .iter()
        .map(|pre| pre.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect())
        .collect();
    let hidden_input: &[f64] = body_post.last().map(|v| v.as_slice()).unwrap_or(obs);
    let mut dx = vec![0.0f64; plan.hidden.in_dim];
    dense_backward(&plan.hidden, params, hidden_input, &dhidden, grad, &mut dx);

    for (l, layer) in plan.body.iter().enumerate().rev() {
        // Rectifier gate for this layer's output.
        for (d, &pre) in dx.iter_mut().zip(acts.pre[l].iter()) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }
        let input: &[f64] = if l == 0 { obs } else { &body_post[l - 1] };
        let mut dinput = vec![0.0f64; input.len()];
        match layer {
            BodyLayer::Conv(c) => conv_backward(c, params, input, &dx, grad, &mut dinput),
            BodyLayer::Dense(d) => dense_backward(d, params, input, &dx, grad, &mut dinput),
        }
        dx = dinput;
    }
}

/// Dense layer backward: accumulates weight/bias gradients and adds the
/// input gradient into `dinput`.
fn dense_backward(
    desc: &DenseDesc,
    params: &[f64],
    input: &[f64],
    dout: &[f64],
    grad: &mut [f64],
    dinput: &mut [f64],
) {
    debug_assert_eq!(input.len(), desc.in_dim);
    debug_assert_eq!(dout.len(), desc.out_dim);
    debug_assert_eq!(dinput.len(), desc.in_dim);
    for (o, &d) in dout.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        grad[desc.b_off + o] += d;
        let row = desc.w_off + o * desc.in_dim;
        let w = &params[row..row + desc.in_dim];
        let gw = &mut grad[row..row + desc.in_dim];
        for i in 0..desc.in_dim {
            gw[i] += d * input[i];
            dinput[i] += d * w[i];
        }
    }
}

/// Convolution backward: accumulates filter/bias gradients and adds the
/// input gradient into `dinput`.
fn conv_backward(
    desc: &ConvDesc,
    params: &[f64],
    input: &[f64],
    dout: &[f64],
    grad: &mut [f64],
    dinput: &mut [f64],
) {
    let k = desc.kernel;
    let s = desc.stride;
    let in_plane = desc.in_h * desc.in_w;
    let out_plane = desc.out_h * desc.out_w;
    for f in 0..desc.filters {
        let w_f = desc.w_off + f * desc.in_c * k * k;
        for oy in 0..desc.out_h {
            for ox in 0..desc.out_w {
                let d = dout[f * out_plane + oy * desc.out_w + ox];
                if d == 0.0 {
                    continue;
                }
                grad[desc.b_off + f] += d;
                for c in 0..desc.in_c {
                    let i_base = c * in_plane + oy * s * desc.in_w + ox * s;
                    let w_base = w_f + c * k * k;
                    for ky in 0..k {
                        let irow = i_base + ky * desc.in_w;
                        let wrow = w_base + ky * k;
                        for kx in 0..k {
                            grad[wrow + kx] += d * input[irow + kx];
                            dinput[irow + kx] += d * params[wrow + kx];
                        }
                    }
                }
            }
        }
    }
}
