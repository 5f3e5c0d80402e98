//! Policy/value function approximator with hand-derived gradients.
//!
//! A shared body (convolutional stack or plain MLP) feeds a fully connected
//! hidden layer and two heads: combined-action logits (softmax policy) and a
//! scalar state value. Parameters live in one flat `f64` vector with named
//! per-layer views, gradients are exact analytic derivatives (checked
//! against finite differences in the tests), and the optimizer is RMSprop
//! with global gradient-norm clipping.

mod loss;
mod optim;

pub use loss::{loss_and_gradients, LossBatch, LossDiagnostics};
pub use optim::{clip_grad_norm, rmsprop_step, rmsprop_update};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};

/// Observation shape (channels, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ObsShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodySpec {
    /// Convolution stack; each layer is followed by a rectifier.
    Conv(Vec<ConvSpec>),
    /// Fully connected stack on the flattened observation.
    Mlp(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input: ObsShape,
    pub body: BodySpec,
    /// Width of the fully connected layer between body and heads.
    pub hidden_units: usize,
    pub action_count: usize,
}

impl NetConfig {
    /// Compact default body for gridworld observations: two 3x3 stride-1
    /// convolutions (16 and 32 filters) and a 128-unit hidden layer.
    pub fn compact(input: ObsShape, action_count: usize) -> Self {
        NetConfig {
            input,
            body: BodySpec::Conv(vec![
                ConvSpec { filters: 16, kernel: 3, stride: 1 },
                ConvSpec { filters: 32, kernel: 3, stride: 1 },
            ]),
            hidden_units: 128,
            action_count,
        }
    }

    /// The large pixel-oriented architecture: [32, 64, 32] filters with
    /// strides [4, 2, 1] and a 512-unit hidden layer, sized for 80x80
    /// single-channel inputs.
    pub fn doom80(action_count: usize) -> Self {
        NetConfig {
            input: ObsShape { channels: 1, height: 80, width: 80 },
            body: BodySpec::Conv(vec![
                ConvSpec { filters: 32, kernel: 8, stride: 4 },
                ConvSpec { filters: 64, kernel: 4, stride: 2 },
                ConvSpec { filters: 32, kernel: 3, stride: 1 },
            ]),
            hidden_units: 512,
            action_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.len() == 0 {
            return Err(Error::config("observation shape has zero elements"));
        }
        if self.hidden_units == 0 || self.action_count == 0 {
            return Err(Error::config("hidden_units and action_count must be positive"));
        }
        self.plan().map(|_| ())
    }

    /// Flat-parameter layout for this architecture.
    pub(crate) fn plan(&self) -> Result<Plan> {
        let mut offset = 0usize;
        let mut body = Vec::new();
        let (mut c, mut h, mut w) = (self.input.channels, self.input.height, self.input.width);
        let mut flat = self.input.len();
        match &self.body {
            BodySpec::Conv(layers) => {
                if layers.is_empty() {
                    return Err(Error::config("conv body needs at least one layer"));
                }
                for spec in layers {
                    if spec.kernel == 0 || spec.stride == 0 || spec.filters == 0 {
                        return Err(Error::config("conv layer dimensions must be positive"));
                    }
                    if h < spec.kernel || w < spec.kernel {
                        return Err(Error::config(format!(
                            "conv kernel {} does not fit {}x{} input",
                            spec.kernel, h, w
                        )));
                    }
                    let out_h = (h - spec.kernel) / spec.stride + 1;
                    let out_w = (w - spec.kernel) / spec.stride + 1;
                    let weights = spec.filters * c * spec.kernel * spec.kernel;
                    body.push(BodyLayer::Conv(ConvDesc {
                        in_c: c,
                        in_h: h,
                        in_w: w,
                        filters: spec.filters,
                        kernel: spec.kernel,
                        stride: spec.stride,
                        out_h,
                        out_w,
                        w_off: offset,
                        b_off: offset + weights,
                    }));
                    offset += weights + spec.filters;
                    c = spec.filters;
                    h = out_h;
                    w = out_w;
                    flat = c * h * w;
                }
            }
            BodySpec::Mlp(hidden) => {
                let mut in_dim = flat;
                for &units in hidden {
                    if units == 0 {
                        return Err(Error::config("mlp layer width must be positive"));
                    }
                    body.push(BodyLayer::Dense(DenseDesc {
                        in_dim,
                        out_dim: units,
                        w_off: offset,
                        b_off: offset + in_dim * units,
                    }));
                    offset += in_dim * units + units;
                    in_dim = units;
                }
                flat = in_dim;
            }
        }
        let hidden = DenseDesc {
            in_dim: flat,
            out_dim: self.hidden_units,
            w_off: offset,
            b_off: offset + flat * self.hidden_units,
        };
        offset += flat * self.hidden_units + self.hidden_units;
        let policy = DenseDesc {
            in_dim: self.hidden_units,
            out_dim: self.action_count,
            w_off: offset,
            b_off: offset + self.hidden_units * self.action_count,
        };
        offset += self.hidden_units * self.action_count + self.action_count;
        let value = DenseDesc {
            in_dim: self.hidden_units,
            out_dim: 1,
            w_off: offset,
            b_off: offset + self.hidden_units,
        };
        offset += self.hidden_units + 1;
        Ok(Plan {
            body,
            hidden,
            policy,
            value,
            param_len: offset,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct DenseDesc {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w_off: usize,
    pub b_off: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDesc {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl ConvDesc {
    pub fn out_len(&self) -> usize {
        self.filters * self.out_h * self.out_w
    }
}

#[derive(Debug, Clone)]
pub(crate) enum BodyLayer {
    Conv(ConvDesc),
    Dense(DenseDesc),
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub body: Vec<BodyLayer>,
    pub hidden: DenseDesc,
    pub policy: DenseDesc,
    pub value: DenseDesc,
    pub param_len: usize,
}

/// Loss weights and optimizer constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossCoefficients {
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub learning_rate: f64,
}

impl Default for LossCoefficients {
    fn default() -> Self {
        LossCoefficients {
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            learning_rate: 7e-4,
        }
    }
}

/// Parameters plus RMSprop state for one policy/value network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValueNet {
    config: NetConfig,
    params: Vec<f64>,
    rmsprop_sq: Vec<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u is kept away from zero.
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

/// Orthogonal-style init: orthonormalize the smaller dimension of a gaussian
/// matrix (modified Gram-Schmidt) and scale by `gain`.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    // n vectors of length m, n <= m.
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| gaussian(rng)).collect())
        .collect();
    for i in 0..n {
        for j in 0..i {
            let dot: f64 = v[i].iter().zip(v[j].iter()).map(|(a, b)| a * b).sum();
            let vj = v[j].clone();
            for (a, b) in v[i].iter_mut().zip(vj.iter()) {
                *a -= dot * b;
            }
        }
        let norm: f64 = v[i].iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = if norm > 1e-12 { 1.0 / norm } else { 0.0 };
        for a in v[i].iter_mut() {
            *a *= scale;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let x = if transpose { v[c][r] } else { v[r][c] };
            out[r * cols + c] = gain * x;
        }
    }
    out
}

impl PolicyValueNet {
    /// Fresh network: orthogonal-style scaled weights, zero biases, and a
    /// policy head scaled down so the initial policy is near uniform.
    pub fn new(config: NetConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let plan = config.plan()?;
        let mut params = vec![0.0f64; plan.param_len];
        let sqrt2 = std::f64::consts::SQRT_2;
        for layer in &plan.body {
            match layer {
                BodyLayer::Conv(c) => {
                    let cols = c.in_c * c.kernel * c.kernel;
                    let w = orthogonal(c.filters, cols, sqrt2, rng);
                    params[c.w_off..c.w_off + w.len()].copy_from_slice(&w);
                }
                BodyLayer::Dense(d) => {
                    let w = orthogonal(d.out_dim, d.in_dim, sqrt2, rng);
                    params[d.w_off..d.w_off + w.len()].copy_from_slice(&w);
                }
            }
        }
        let w = orthogonal(plan.hidden.out_dim, plan.hidden.in_dim, sqrt2, rng);
        params[plan.hidden.w_off..plan.hidden.w_off + w.len()].copy_from_slice(&w);
        let w = orthogonal(plan.policy.out_dim, plan.policy.in_dim, 0.01, rng);
        params[plan.policy.w_off..plan.policy.w_off + w.len()].copy_from_slice(&w);
        let w = orthogonal(plan.value.out_dim, plan.value.in_dim, 1.0, rng);
        params[plan.value.w_off..plan.value.w_off + w.len()].copy_from_slice(&w);
        let len = params.len();
        Ok(PolicyValueNet {
            config,
            params,
            rmsprop_sq: vec![0.0; len],
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn param_len(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access, used by gradient checks and custom
    /// initialization.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn state_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.params, &mut self.rmsprop_sq)
    }

    fn check_obs(&self, obs: &Observation) -> Result<()> {
        let s = self.config.input;
        if obs.shape() != (s.channels, s.height, s.width) {
            return Err(Error::contract(format!(
                "observation shape {:?} does not match network input {:?}",
                obs.shape(),
                (s.channels, s.height, s.width)
            )));
        }
        Ok(())
    }

    /// Policy distribution and value estimate for one observation.
    pub fn forward_single(&self, obs: &Observation) -> Result<(Vec<f64>, f64)> {
        self.check_obs(obs)?;
        let plan = self.config.plan()?;
        let acts = forward_acts(&plan, &self.params, &obs.data);
        let logits = &acts.logits;
        Ok((softmax(logits), acts.value))
    }

    /// Batched forward pass; row `i` of the output corresponds to
    /// `observations[i]`. Equivalent to per-sample forwards concatenated.
    pub fn forward(&self, observations: &[&Observation]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut probs = Vec::with_capacity(observations.len());
        let mut values = Vec::with_capacity(observations.len());
        for obs in observations {
            let (p, v) = self.forward_single(obs)?;
            probs.push(p);
            values.push(v);
        }
        Ok((probs, values))
    }
}

/// Per-layer activations kept for the backward pass. `pre` holds each body
/// layer's pre-rectifier output; `hidden_pre` the hidden layer's.
pub(crate) struct ForwardActs {
    pub pre: Vec<Vec<f64>>,
    pub hidden_pre: Vec<f64>,
    pub hidden_post: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

pub(crate) fn dense_forward(desc: &DenseDesc, params: &[f64], input: &[f64], out: &mut [f64]) {
    debug_assert_eq!(input.len(), desc.in_dim);
    debug_assert_eq!(out.len(), desc.out_dim);
    for o in 0..desc.out_dim {
        let row = desc.w_off + o * desc.in_dim;
        let mut acc = params[desc.b_off + o];
        let w = &params[row..row + desc.in_dim];
        for (wi, xi) in w.iter().zip(input.iter()) {
            acc += wi * xi;
        }
        out[o] = acc;
    }
}

pub(crate) fn conv_forward(desc: &ConvDesc, params: &[f64], input: &[f64], out: &mut [f64]) {
    let k = desc.kernel;
    let s = desc.stride;
    let in_plane = desc.in_h * desc.in_w;
    let out_plane = desc.out_h * desc.out_w;
    for f in 0..desc.filters {
        let w_f = desc.w_off + f * desc.in_c * k * k;
        let bias = params[desc.b_off + f];
        for oy in 0..desc.out_h {
            for ox in 0..desc.out_w {
                let mut acc = bias;
                for c in 0..desc.in_c {
                    let i_base = c * in_plane + oy * s * desc.in_w + ox * s;
                    let w_base = w_f + c * k * k;
                    for ky in 0..k {
                        let irow = i_base + ky * desc.in_w;
                        let wrow = w_base + ky * k;
                        for kx in 0..k {
                            acc += params[wrow + kx] * input[irow + kx];
                        }
                    }
                }
                out[f * out_plane + oy * desc.out_w + ox] = acc;
            }
        }
    }
}

fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// Forward pass that keeps the activations needed for backprop.
pub(crate) fn forward_acts(plan: &Plan, params: &[f64], obs: &[f64]) -> ForwardActs {
    let mut pre = Vec::with_capacity(plan.body.len());
    let mut x = obs.to_vec();
    for layer in &plan.body {
        let mut out = match layer {
            BodyLayer::Conv(c) => vec![0.0; c.out_len()],
            BodyLayer::Dense(d) => vec![0.0; d.out_dim],
        };
        match layer {
            BodyLayer::Conv(c) => conv_forward(c, params, &x, &mut out),
            BodyLayer::Dense(d) => dense_forward(d, params, &x, &mut out),
        }
        x = relu(&out);
        pre.push(out);
    }
    let mut hidden_pre = vec![0.0; plan.hidden.out_dim];
    dense_forward(&plan.hidden, params, &x, &mut hidden_pre);
    let hidden_post = relu(&hidden_pre);
    let mut logits = vec![0.0; plan.policy.out_dim];
    dense_forward(&plan.policy, params, &hidden_post, &mut logits);
    let mut value = vec![0.0; 1];
    dense_forward(&plan.value, params, &hidden_post, &mut value);
    ForwardActs {
        pre,
        hidden_pre,
        hidden_post,
        logits,
        value: value[0],
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Sample an action index from a policy row; deterministic given the RNG
/// state.
pub fn sample_action(policy_row: &[f64], rng: &mut ChaCha8Rng) -> usize {
    debug_assert!(policy_row.iter().all(|p| *p >= 0.0));
    let u: f64 = rng.gen::<f64>();
    let mut cum = 0.0;
    for (i, &p) in policy_row.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    policy_row.len() - 1
}
