//! Dense feed-forward networks with hand-written backpropagation.
//!
//! The model zoo used by the algorithms is small and fixed (policy heads,
//! state-value heads, Q heads), so layers carry their own forward/backward
//! code instead of going through an autodiff graph. All arithmetic is `f64`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Rng};

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("layer spec is empty")]
    EmptySpec,
    #[error("layer {layer} has a zero dimension")]
    ZeroDim { layer: usize },
    #[error("layer {layer} expects {got} inputs but the previous layer produces {expected}")]
    DimMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("input has length {got}, network expects {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("structure mismatch: {0}")]
    Structure(String),
    #[error("non-finite gradient in layer {layer}")]
    NonFinite { layer: usize },
    #[error("invalid optimizer setting: {0}")]
    Optimizer(&'static str),
    #[error("logits are empty")]
    EmptyLogits,
    #[error("logits contain a non-finite value")]
    NonFiniteLogits,
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }
}

/// Builds `input -> hidden... -> output` with `hidden_act` on every hidden layer.
pub fn mlp_layers(
    input: usize,
    hidden: &[usize],
    output: usize,
    hidden_act: Activation,
    output_act: Activation,
) -> Vec<LayerSpec> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input);
    dims.extend_from_slice(hidden);
    dims.push(output);
    let last = dims.len() - 2;
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i == last { output_act } else { hidden_act };
            LayerSpec::new(w[0], w[1], act)
        })
        .collect()
}

pub fn validate_layers(spec: &[LayerSpec]) -> Result<()> {
    if spec.is_empty() {
        return Err(NnError::EmptySpec);
    }
    for (i, layer) in spec.iter().enumerate() {
        if layer.in_dim == 0 || layer.out_dim == 0 {
            return Err(NnError::ZeroDim { layer: i });
        }
        if i > 0 && spec[i - 1].out_dim != layer.in_dim {
            return Err(NnError::DimMismatch {
                layer: i,
                expected: spec[i - 1].out_dim,
                got: layer.in_dim,
            });
        }
    }
    Ok(())
}

/// One affine layer. `weights` is `out_dim x in_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(spec: LayerSpec) -> Self {
        Self {
            spec,
            weights: vec![0.0; spec.in_dim * spec.out_dim],
            bias: vec![0.0; spec.out_dim],
        }
    }

    #[inline]
    fn affine(&self, x: &[f64], z: &mut [f64]) {
        let n_in = self.spec.in_dim;
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &self.weights[o * n_in..(o + 1) * n_in];
            let mut acc = self.bias[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *zo = acc;
        }
    }
}

/// Gradient (or Adam moment) storage shaped like a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros(spec: &[LayerSpec]) -> Self {
        Self {
            layers: spec.iter().map(|&s| Dense::zeros(s)).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= factor);
            l.bias.iter_mut().for_each(|b| *b *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    /// Weights then biases, layer by layer.
    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|&g| g == 0.0))
    }
}

fn flatten(layers: &[Dense]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(&l.weights);
        out.extend_from_slice(&l.bias);
    }
    out
}

/// Intermediate values of one forward pass, consumed by [`ParamSet::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn depth(&self) -> usize {
        self.activations.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Network parameters together with their Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    layers: Vec<Dense>,
    m: Gradients,
    v: Gradients,
    step: u64,
}

impl ParamSet {
    /// Uniform `[-sqrt(1/in), sqrt(1/in)]` weights, zero biases, fresh optimizer state.
    pub fn init(spec: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_layers(spec)?;
        let mut rng = rng::seeded(seed);
        let layers = spec
            .iter()
            .map(|&s| {
                let bound = (1.0 / s.in_dim as f64).sqrt();
                let mut layer = Dense::zeros(s);
                for w in &mut layer.weights {
                    *w = rng.random_range(-bound..=bound);
                }
                layer
            })
            .collect();
        Ok(Self::from_parts(layers, spec))
    }

    /// Rebuilds a parameter set from stored layers; optimizer state starts fresh.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let spec: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate_layers(&spec)?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.spec.in_dim * l.spec.out_dim || l.bias.len() != l.spec.out_dim
            {
                return Err(NnError::Structure(format!(
                    "layer {i} payload does not match its {}x{} shape",
                    l.spec.out_dim, l.spec.in_dim
                )));
            }
        }
        Ok(Self::from_parts(layers, &spec))
    }

    fn from_parts(layers: Vec<Dense>, spec: &[LayerSpec]) -> Self {
        Self {
            layers,
            m: Gradients::zeros(spec),
            v: Gradients::zeros(spec),
            step: 0,
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn spec(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    /// Number of Adam steps applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn adam_moments(&self) -> (&Gradients, &Gradients) {
        (&self.m, &self.v)
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients::zeros(&self.spec())
    }

    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Overwrites parameters from the layout produced by [`ParamSet::flat_params`].
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(NnError::Structure(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = post.last().map(Vec::as_slice).unwrap_or(x);
            let mut z = vec![0.0; layer.spec.out_dim];
            layer.affine(input, &mut z);
            let a: Vec<f64> = z.iter().map(|&zi| layer.spec.activation.apply(zi)).collect();
            pre.push(z);
            post.push(a);
        }
        let y = post.last().cloned().unwrap_or_default();
        Ok((
            y,
            ForwardTrace {
                input: x.to_vec(),
                pre_activations: pre,
                activations: post,
            },
        ))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut z = vec![0.0; layer.spec.out_dim];
            layer.affine(&cur, &mut z);
            for zi in &mut z {
                *zi = layer.spec.activation.apply(*zi);
            }
            cur = z;
        }
        Ok(cur)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(NnError::InputLength {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Gradients of `y . grad_y` with respect to every weight and bias.
    pub fn backward(&self, trace: &ForwardTrace, grad_y: &[f64]) -> Result<Gradients> {
        let mut grads = self.zero_grads();
        self.backward_into(trace, grad_y, &mut grads)?;
        Ok(grads)
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the network input.
    pub fn backward_into(
        &self,
        trace: &ForwardTrace,
        grad_y: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        if trace.depth() != self.layers.len() || grads.layers.len() != self.layers.len() {
            return Err(NnError::Structure(
                "trace or gradient depth differs from the network".into(),
            ));
        }
        if grad_y.len() != self.output_dim() {
            return Err(NnError::InputLength {
                expected: self.output_dim(),
                got: grad_y.len(),
            });
        }
        let mut upstream = grad_y.to_vec();
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let z = &trace.pre_activations[idx];
            let a = &trace.activations[idx];
            let input = if idx == 0 {
                &trace.input
            } else {
                &trace.activations[idx - 1]
            };
            if z.len() != layer.spec.out_dim || input.len() != layer.spec.in_dim {
                return Err(NnError::Structure(format!(
                    "trace layer {idx} does not match parameter shapes"
                )));
            }
            let delta: Vec<f64> = upstream
                .iter()
                .zip(z.iter().zip(a))
                .map(|(&g, (&zi, &ai))| g * layer.spec.activation.derivative(zi, ai))
                .collect();
            let n_in = layer.spec.in_dim;
            let g = &mut grads.layers[idx];
            let mut down = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                if d == 0.0 {
                    continue;
                }
                let grow = &mut g.weights[o * n_in..(o + 1) * n_in];
                let wrow = &layer.weights[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += d * input[i];
                    down[i] += wrow[i] * d;
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// Bias-corrected Adam update. The step counter advances only when the
    /// update is accepted.
    pub fn adam_step(&mut self, grads: &Gradients, opt: &Adam) -> Result<()> {
        if !(0.0..1.0).contains(&opt.beta1) || !(0.0..1.0).contains(&opt.beta2) {
            return Err(NnError::Optimizer("betas must lie in [0, 1)"));
        }
        if !(opt.lr.is_finite() && opt.eps > 0.0) {
            return Err(NnError::Optimizer("lr must be finite and eps positive"));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(NnError::Structure("gradient depth differs".into()));
        }
        for (i, (g, l)) in grads.layers.iter().zip(&self.layers).enumerate() {
            if g.spec != l.spec
                || g.weights.len() != l.weights.len()
                || g.bias.len() != l.bias.len()
            {
                return Err(NnError::Structure(format!("gradient layer {i} shape differs")));
            }
            if !g.weights.iter().chain(&g.bias).all(|x| x.is_finite()) {
                return Err(NnError::NonFinite { layer: i });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - opt.beta1.powi(t);
        let bc2 = 1.0 - opt.beta2.powi(t);
        for ((layer, g), (m, v)) in self
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.layers.iter_mut().zip(self.v.layers.iter_mut()))
        {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(&g.bias);
            let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
            for (((p, &gi), mi), vi) in params.zip(gs).zip(ms).zip(vs) {
                *mi = opt.beta1 * *mi + (1.0 - opt.beta1) * gi;
                *vi = opt.beta2 * *vi + (1.0 - opt.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *p -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
            }
        }
        Ok(())
    }

    /// Polyak averaging: `self = (1 - tau) * self + tau * online`.
    pub fn soft_update_from(&mut self, online: &ParamSet, tau: f64) -> Result<()> {
        if self.spec() != online.spec() {
            return Err(NnError::Structure("soft update between different shapes".into()));
        }
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            let dst = t.weights.iter_mut().chain(t.bias.iter_mut());
            let src = o.weights.iter().chain(&o.bias);
            for (d, s) in dst.zip(src) {
                *d = (1.0 - tau) * *d + tau * s;
            }
        }
        Ok(())
    }

    /// Copies parameters from `online` (optimizer state untouched).
    pub fn copy_params_from(&mut self, online: &ParamSet) -> Result<()> {
        self.soft_update_from(online, 1.0)
    }
}

fn check_logits(logits: &[f64]) -> Result<()> {
    if logits.is_empty() {
        return Err(NnError::EmptyLogits);
    }
    if !logits.iter().all(|l| l.is_finite()) {
        return Err(NnError::NonFiniteLogits);
    }
    Ok(())
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// Gradient of `log softmax(logits)[index]` with respect to the logits.
pub fn log_prob_grad(logits: &[f64], index: usize) -> Vec<f64> {
    let mut g: Vec<f64> = softmax(logits).into_iter().map(|p| -p).collect();
    g[index] += 1.0;
    g
}

/// Draws an index from `softmax(logits)` using a single uniform draw.
pub fn sample_categorical(rng: &mut Rng, logits: &[f64]) -> Result<(usize, f64)> {
    check_logits(logits)?;
    let probs = softmax(logits);
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut index = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            index = i;
            break;
        }
    }
    Ok((index, log_softmax(logits)[index]))
}

/// First index of the maximum value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64, b: f64) -> ParamSet {
        let spec = LayerSpec::new(1, 1, Activation::Identity);
        ParamSet::from_layers(vec![Dense {
            spec,
            weights: vec![w],
            bias: vec![b],
        }])
        .unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let spec = [LayerSpec::new(2, 3, Activation::Tanh)];
        let a = ParamSet::init(&spec, 7).unwrap();
        let b = ParamSet::init(&spec, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.layers()[0].bias.iter().all(|&x| x == 0.0));
        assert_eq!(a.step_count(), 0);
        assert!(a.adam_moments().0.is_zero() && a.adam_moments().1.is_zero());
    }

    #[test]
    fn init_respects_bound() {
        let spec = mlp_layers(4, &[8], 2, Activation::Tanh, Activation::Identity);
        let p = ParamSet::init(&spec, 3).unwrap();
        assert!(p.layers()[0].weights.iter().all(|w| w.abs() <= 0.5));
        let bound = (1.0f64 / 8.0).sqrt();
        assert!(p.layers()[1].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn init_rejects_bad_chain() {
        let spec = [
            LayerSpec::new(2, 3, Activation::Tanh),
            LayerSpec::new(4, 1, Activation::Identity),
        ];
        assert!(matches!(
            ParamSet::init(&spec, 1),
            Err(NnError::DimMismatch { layer: 1, .. })
        ));
        assert_eq!(ParamSet::init(&[], 1), Err(NnError::EmptySpec));
    }

    #[test]
    fn forward_hand_arithmetic() {
        let p = single(2.0, 1.0);
        let (y, trace) = p.forward(&[3.0]).unwrap();
        assert_eq!(y, vec![7.0]);
        assert_eq!(trace.depth(), 1);
        assert_eq!(p.forward(&[1.0, 2.0]).unwrap_err(), NnError::InputLength {
            expected: 1,
            got: 2
        });
    }

    #[test]
    fn zero_network_outputs_activation_of_zero() {
        let spec = mlp_layers(3, &[4], 2, Activation::Tanh, Activation::Tanh);
        let mut p = ParamSet::init(&spec, 1).unwrap();
        p.set_flat_params(&vec![0.0; p.param_count()]).unwrap();
        assert_eq!(p.predict(&[1.0, -2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn backward_hand_chain_rule() {
        let p = single(2.0, 1.0);
        let (_, trace) = p.forward(&[3.0]).unwrap();
        let g = p.backward(&trace, &[1.0]).unwrap();
        assert_eq!(g.layers[0].weights, vec![3.0]);
        assert_eq!(g.layers[0].bias, vec![1.0]);
        let zero = p.backward(&trace, &[0.0]).unwrap();
        assert!(zero.is_zero());
    }

    #[test]
    fn adam_hand_arithmetic() {
        let mut p = single(0.0, 0.0);
        let mut g = p.zero_grads();
        g.layers[0].weights[0] = 1.0;
        let opt = Adam::with_lr(0.1);
        p.adam_step(&g, &opt).unwrap();
        assert!((p.layers()[0].weights[0] + 0.1).abs() < 1e-8);
        assert_eq!(p.layers()[0].bias[0], 0.0);
        assert_eq!(p.step_count(), 1);
        p.adam_step(&g, &opt).unwrap();
        assert!((p.layers()[0].weights[0] + 0.2).abs() < 1e-8);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut p = single(0.5, 0.0);
        let mut g = p.zero_grads();
        g.layers[0].bias[0] = f64::NAN;
        assert_eq!(
            p.adam_step(&g, &Adam::default()),
            Err(NnError::NonFinite { layer: 0 })
        );
        assert_eq!(p.layers()[0].weights[0], 0.5);
        assert_eq!(p.step_count(), 0);
    }

    #[test]
    fn soft_update_is_exact_blend() {
        let spec = mlp_layers(2, &[3], 1, Activation::Tanh, Activation::Identity);
        let online = ParamSet::init(&spec, 1).unwrap();
        let mut target = ParamSet::init(&spec, 2).unwrap();
        let before = target.flat_params();
        target.soft_update_from(&online, 0.25).unwrap();
        for ((t, b), o) in target.flat_params().iter().zip(&before).zip(online.flat_params()) {
            assert_eq!(*t, 0.75 * b + 0.25 * o);
        }
    }

    #[test]
    fn categorical_basics() {
        let mut rng = rng::seeded(0);
        let (_, lp) = sample_categorical(&mut rng, &[0.0, 0.0]).unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-15);
        for _ in 0..10_000 {
            assert_eq!(sample_categorical(&mut rng, &[1000.0, 0.0]).unwrap().0, 0);
        }
        let s: f64 = softmax(&[1.0, 2.0, 3.0]).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(sample_categorical(&mut rng, &[]), Err(NnError::EmptyLogits));
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
    }
}
