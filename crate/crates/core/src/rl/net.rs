use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use super::RlError;
use crate::sim::{ObsMode, Observation, FEATURE_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layer {
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize, stride: usize, in_h: usize, in_w: usize },
    Dense { inputs: usize, outputs: usize },
    Relu,
    /// Inverted dropout; identity outside train mode.
    Dropout,
}

impl Layer {
    fn conv_out(len: usize, kernel: usize, stride: usize) -> usize {
        (len - kernel) / stride + 1
    }

    /// Output length for an input of `input_len` elements.
    pub fn output_len(&self, input_len: usize) -> usize {
        match *self {
            Layer::Conv2d { out_channels, kernel, stride, in_h, in_w, .. } => {
                out_channels * Self::conv_out(in_h, kernel, stride) * Self::conv_out(in_w, kernel, stride)
            }
            Layer::Dense { outputs, .. } => outputs,
            Layer::Relu | Layer::Dropout => input_len,
        }
    }

    fn param_shapes(&self) -> Option<[Vec<usize>; 2]> {
        match *self {
            Layer::Conv2d { in_channels, out_channels, kernel, .. } => {
                Some([vec![out_channels, in_channels, kernel, kernel], vec![out_channels]])
            }
            Layer::Dense { inputs, outputs } => Some([vec![outputs, inputs], vec![outputs]]),
            _ => None,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            Layer::Conv2d { in_channels, kernel, .. } => in_channels * kernel * kernel,
            Layer::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub name: String,
    pub tensor: Tensor<F>,
}

/// Per-dropout-layer multiplicative masks (0 or 1/(1−p)).
pub type DropoutMasks<F> = Vec<Vec<F>>;

/// Activations recorded by a forward pass: `acts[i]` is the input to layer
/// `i`, the last entry is the network output.
#[derive(Debug, Clone)]
pub struct Trace<F> {
    acts: Vec<Vec<F>>,
}

impl<F: Scalar> Trace<F> {
    pub fn output(&self) -> &[F] {
        self.acts.last().expect("trace holds at least the input")
    }
}

/// A feed-forward stack of layers. Parameters are stored as one weight and
/// one bias tensor per convolution or dense layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<F> {
    layers: Vec<Layer>,
    params: Vec<Param<F>>,
    input_len: usize,
    dropout_p: f64,
}

impl<F: Scalar> Network<F> {
    pub fn zeros(prefix: &str, input_len: usize, layers: Vec<Layer>, dropout_p: f64) -> Result<Self, RlError> {
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(RlError::Architecture(format!("dropout rate {dropout_p} outside [0, 1)")));
        }
        let mut params = Vec::new();
        let mut len = input_len;
        let mut index = 0;
        for layer in &layers {
            match *layer {
                Layer::Conv2d { in_channels, in_h, in_w, kernel, stride, .. } => {
                    if in_channels * in_h * in_w != len || kernel > in_h || kernel > in_w || stride == 0 {
                        return Err(RlError::Architecture(format!("convolution does not fit input {len}")));
                    }
                }
                Layer::Dense { inputs, .. } if inputs != len => {
                    return Err(RlError::Architecture(format!("dense layer expects {inputs} inputs, got {len}")));
                }
                _ => {}
            }
            if let Some([w, b]) = layer.param_shapes() {
                let kind = if matches!(layer, Layer::Conv2d { .. }) { "conv" } else { "dense" };
                params.push(Param { name: format!("{prefix}.{kind}{index}.weight"), tensor: Tensor::zeros(&w) });
                params.push(Param { name: format!("{prefix}.{kind}{index}.bias"), tensor: Tensor::zeros(&b) });
                index += 1;
            }
            len = layer.output_len(len);
        }
        Ok(Network { layers, params, input_len, dropout_p })
    }

    /// He-uniform weights, zero biases; the last layer's weights are scaled by
    /// `head_gain`.
    pub fn init<R: Rng + ?Sized>(&mut self, head_gain: f64, rng: &mut R) {
        let n_param_layers = self.params.len() / 2;
        let mut k = 0;
        for layer in &self.layers {
            if layer.param_shapes().is_none() {
                continue;
            }
            let gain = if k + 1 == n_param_layers { head_gain } else { 1.0 };
            let bound = gain * (6.0 / layer.fan_in() as f64).sqrt();
            for w in self.params[2 * k].tensor.data_mut() {
                *w = F::of(rng.random_range(-bound..=bound));
            }
            self.params[2 * k + 1].tensor.fill(F::zero());
            k += 1;
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &[Param<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<F>] {
        &mut self.params
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.layers.iter().fold(self.input_len, |len, l| l.output_len(len))
    }

    pub fn dropout_p(&self) -> f64 {
        self.dropout_p
    }

    /// Zero-valued gradient buffers matching the parameters.
    pub fn zero_grads(&self) -> Vec<Tensor<F>> {
        self.params.iter().map(|p| Tensor::zeros(p.tensor.shape())).collect()
    }

    pub fn sample_masks(&self, rng: &mut dyn RngCore) -> DropoutMasks<F> {
        let keep = 1.0 - self.dropout_p;
        let scale = F::of(1.0 / keep);
        let mut len = self.input_len;
        let mut masks = Vec::new();
        for layer in &self.layers {
            if *layer == Layer::Dropout {
                masks.push((0..len).map(|_| if rng.random::<f64>() < keep { scale } else { F::zero() }).collect());
            }
            len = layer.output_len(len);
        }
        masks
    }

    pub fn forward(&self, input: &[F], masks: Option<&DropoutMasks<F>>) -> Result<Vec<F>, RlError> {
        Ok(self.forward_trace(input, masks)?.acts.pop().expect("non-empty trace"))
    }

    pub fn forward_trace(&self, input: &[F], masks: Option<&DropoutMasks<F>>) -> Result<Trace<F>, RlError> {
        if input.len() != self.input_len {
            return Err(RlError::ShapeMismatch { expected: self.input_len, actual: input.len() });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let (mut p, mut m) = (0, 0);
        for layer in &self.layers {
            let x = acts.last().expect("non-empty");
            let y = match *layer {
                Layer::Conv2d { .. } => {
                    let y = conv_forward(layer, x, &self.params[p].tensor, &self.params[p + 1].tensor);
                    p += 2;
                    y
                }
                Layer::Dense { inputs, outputs } => {
                    let (w, b) = (self.params[p].tensor.data(), self.params[p + 1].tensor.data());
                    p += 2;
                    (0..outputs)
                        .map(|o| {
                            let row = &w[o * inputs..(o + 1) * inputs];
                            row.iter().zip(x).fold(b[o], |acc, (&wi, &xi)| acc + wi * xi)
                        })
                        .collect()
                }
                Layer::Relu => x.iter().map(|&v| v.max(F::zero())).collect(),
                Layer::Dropout => {
                    let y = match masks {
                        Some(ms) => {
                            let mask = ms.get(m).ok_or(RlError::ShapeMismatch { expected: m + 1, actual: ms.len() })?;
                            if mask.len() != x.len() {
                                return Err(RlError::ShapeMismatch { expected: x.len(), actual: mask.len() });
                            }
                            x.iter().zip(mask).map(|(&a, &k)| a * k).collect()
                        }
                        None => x.clone(),
                    };
                    m += 1;
                    y
                }
            };
            acts.push(y);
        }
        Ok(Trace { acts })
    }

    /// Back-propagates `grad_out` through a recorded pass, accumulating
    /// parameter gradients into `grads`.
    pub fn backward(
        &self,
        trace: &Trace<F>,
        masks: Option<&DropoutMasks<F>>,
        grad_out: &[F],
        grads: &mut [Tensor<F>],
    ) {
        let mut g = grad_out.to_vec();
        let mut p = self.params.len();
        let mut m = self.layers.iter().filter(|l| **l == Layer::Dropout).count();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.acts[i];
            g = match *layer {
                Layer::Conv2d { .. } => {
                    p -= 2;
                    let (gw, rest) = grads[p..].split_at_mut(1);
                    conv_backward(layer, x, &self.params[p].tensor, &g, &mut gw[0], &mut rest[0], i > 0)
                }
                Layer::Dense { inputs, outputs } => {
                    p -= 2;
                    let w = self.params[p].tensor.data();
                    let (gw, rest) = grads[p..].split_at_mut(1);
                    let (gw, gb) = (gw[0].data_mut(), rest[0].data_mut());
                    let mut gx = vec![F::zero(); inputs];
                    for o in 0..outputs {
                        let go = g[o];
                        gb[o] += go;
                        if go == F::zero() {
                            continue;
                        }
                        let row = o * inputs;
                        for j in 0..inputs {
                            gw[row + j] += go * x[j];
                            gx[j] += go * w[row + j];
                        }
                    }
                    gx
                }
                Layer::Relu => g.iter().zip(x).map(|(&gi, &xi)| if xi > F::zero() { gi } else { F::zero() }).collect(),
                Layer::Dropout => {
                    m -= 1;
                    match masks {
                        Some(ms) => g.iter().zip(&ms[m]).map(|(&gi, &k)| gi * k).collect(),
                        None => g,
                    }
                }
            };
        }
    }

    pub fn cast<G: Scalar>(&self) -> Network<G> {
        Network {
            layers: self.layers.clone(),
            params: self.params.iter().map(|p| Param { name: p.name.clone(), tensor: p.tensor.cast() }).collect(),
            input_len: self.input_len,
            dropout_p: self.dropout_p,
        }
    }
}

fn conv_dims(layer: &Layer) -> (usize, usize, usize, usize, usize, usize, usize, usize) {
    let Layer::Conv2d { in_channels, out_channels, kernel, stride, in_h, in_w } = *layer else {
        unreachable!("conv_dims on a non-convolution layer")
    };
    let oh = Layer::conv_out(in_h, kernel, stride);
    let ow = Layer::conv_out(in_w, kernel, stride);
    (in_channels, out_channels, kernel, stride, in_h, in_w, oh, ow)
}

fn conv_forward<F: Scalar>(layer: &Layer, x: &[F], w: &Tensor<F>, b: &Tensor<F>) -> Vec<F> {
    let (ic, oc, k, s, ih, iw, oh, ow) = conv_dims(layer);
    let (w, b) = (w.data(), b.data());
    let mut y = vec![F::zero(); oc * oh * ow];
    for o in 0..oc {
        let out = &mut y[o * oh * ow..(o + 1) * oh * ow];
        out.iter_mut().for_each(|v| *v = b[o]);
        for c in 0..ic {
            let plane = &x[c * ih * iw..(c + 1) * ih * iw];
            let kern = &w[(o * ic + c) * k * k..(o * ic + c + 1) * k * k];
            for oy in 0..oh {
                for ky in 0..k {
                    let in_row = &plane[(oy * s + ky) * iw..(oy * s + ky + 1) * iw];
                    let krow = &kern[ky * k..(ky + 1) * k];
                    let out_row = &mut out[oy * ow..(oy + 1) * ow];
                    for (ox, acc) in out_row.iter_mut().enumerate() {
                        let base = ox * s;
                        let mut sum = F::zero();
                        for kx in 0..k {
                            sum += krow[kx] * in_row[base + kx];
                        }
                        *acc += sum;
                    }
                }
            }
        }
    }
    y
}

fn conv_backward<F: Scalar>(
    layer: &Layer,
    x: &[F],
    w: &Tensor<F>,
    g: &[F],
    gw: &mut Tensor<F>,
    gb: &mut Tensor<F>,
    want_input_grad: bool,
) -> Vec<F> {
    let (ic, oc, k, s, ih, iw, oh, ow) = conv_dims(layer);
    let w = w.data();
    let (gw, gb) = (gw.data_mut(), gb.data_mut());
    let mut gx = vec![F::zero(); if want_input_grad { ic * ih * iw } else { 0 }];
    for o in 0..oc {
        let go = &g[o * oh * ow..(o + 1) * oh * ow];
        gb[o] += go.iter().copied().sum();
        for c in 0..ic {
            let plane = &x[c * ih * iw..(c + 1) * ih * iw];
            let kidx = (o * ic + c) * k * k;
            for oy in 0..oh {
                for ox in 0..ow {
                    let gv = go[oy * ow + ox];
                    if gv == F::zero() {
                        continue;
                    }
                    for ky in 0..k {
                        let row = (oy * s + ky) * iw + ox * s;
                        for kx in 0..k {
                            gw[kidx + ky * k + kx] += gv * plane[row + kx];
                            if want_input_grad {
                                gx[c * ih * iw + row + kx] += gv * w[kidx + ky * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    gx
}

/// Network input layout selected by the observation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    Features { inputs: usize, hidden: usize },
    Image { width: usize, height: usize, filters: [usize; 3], hidden: usize },
}

impl Architecture {
    pub fn features() -> Self {
        Architecture::Features { inputs: FEATURE_LEN, hidden: 64 }
    }

    pub fn image(width: usize, height: usize) -> Self {
        Architecture::Image { width, height, filters: [8, 16, 16], hidden: 64 }
    }

    pub fn for_observations(mode: ObsMode, width: usize, height: usize) -> Self {
        match mode {
            ObsMode::Features => Self::features(),
            ObsMode::Image => Self::image(width, height),
        }
    }

    pub fn input_len(&self) -> usize {
        match *self {
            Architecture::Features { inputs, .. } => inputs,
            Architecture::Image { width, height, .. } => width * height,
        }
    }

    pub fn obs_mode(&self) -> ObsMode {
        match self {
            Architecture::Features { .. } => ObsMode::Features,
            Architecture::Image { .. } => ObsMode::Image,
        }
    }

    pub fn layers(&self, outputs: usize) -> Vec<Layer> {
        match *self {
            Architecture::Features { inputs, hidden } => vec![
                Layer::Dense { inputs, outputs: hidden },
                Layer::Relu,
                Layer::Dropout,
                Layer::Dense { inputs: hidden, outputs: hidden },
                Layer::Relu,
                Layer::Dropout,
                Layer::Dense { inputs: hidden, outputs },
            ],
            Architecture::Image { width, height, filters, hidden } => {
                let mut layers = Vec::new();
                let (mut c, mut h, mut w) = (1, height, width);
                for (f, (k, s)) in filters.into_iter().zip([(5, 2), (3, 2), (3, 2)]) {
                    layers.push(Layer::Conv2d { in_channels: c, out_channels: f, kernel: k, stride: s, in_h: h, in_w: w });
                    layers.push(Layer::Relu);
                    if h < k || w < k {
                        break;
                    }
                    (c, h, w) = (f, Layer::conv_out(h, k, s), Layer::conv_out(w, k, s));
                }
                layers.extend([
                    Layer::Dense { inputs: c * h * w, outputs: hidden },
                    Layer::Relu,
                    Layer::Dropout,
                    Layer::Dense { inputs: hidden, outputs },
                ]);
                layers
            }
        }
    }
}

/// Dropout behaviour of a forward pass.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput<F> {
    pub logits: Vec<F>,
    pub probs: Vec<F>,
}

/// Separate policy and value networks sharing one input architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueNets<F> {
    pub architecture: Architecture,
    pub action_count: usize,
    pub policy: Network<F>,
    pub value: Network<F>,
}

impl<F: Scalar> PolicyValueNets<F> {
    pub fn zeros(architecture: Architecture, action_count: usize, dropout_p: f64) -> Result<Self, RlError> {
        if action_count == 0 {
            return Err(RlError::Architecture("action count must be positive".into()));
        }
        let n = architecture.input_len();
        Ok(PolicyValueNets {
            architecture,
            action_count,
            policy: Network::zeros("policy", n, architecture.layers(action_count), dropout_p)?,
            value: Network::zeros("value", n, architecture.layers(1), dropout_p)?,
        })
    }

    /// Randomly initialised networks; the policy head starts near uniform.
    pub fn new<R: Rng + ?Sized>(
        architecture: Architecture,
        action_count: usize,
        dropout_p: f64,
        rng: &mut R,
    ) -> Result<Self, RlError> {
        let mut nets = Self::zeros(architecture, action_count, dropout_p)?;
        nets.policy.init(0.01, rng);
        nets.value.init(1.0, rng);
        Ok(nets)
    }

    pub fn dropout_p(&self) -> f64 {
        self.policy.dropout_p()
    }

    /// Converts an observation into network input, checking its mode and size.
    pub fn input(&self, obs: &Observation) -> Result<Vec<F>, RlError> {
        let mode = match obs {
            Observation::Image(_) => ObsMode::Image,
            Observation::Features(_) => ObsMode::Features,
        };
        if mode != self.architecture.obs_mode() {
            return Err(RlError::ObservationMode { expected: self.architecture.obs_mode(), actual: mode });
        }
        let input: Vec<F> = obs.to_input().into_iter().map(|v| F::of(v as f64)).collect();
        if input.len() != self.architecture.input_len() {
            return Err(RlError::ShapeMismatch { expected: self.architecture.input_len(), actual: input.len() });
        }
        Ok(input)
    }

    pub fn forward_policy(&self, input: &[F], mode: Mode<'_>) -> Result<PolicyOutput<F>, RlError> {
        let logits = match mode {
            Mode::Eval => self.policy.forward(input, None)?,
            Mode::Train(rng) => {
                let masks = self.policy.sample_masks(rng);
                self.policy.forward(input, Some(&masks))?
            }
        };
        let probs = softmax(&logits);
        Ok(PolicyOutput { logits, probs })
    }

    pub fn forward_value(&self, input: &[F]) -> Result<F, RlError> {
        Ok(self.value.forward(input, None)?[0])
    }

    pub fn params(&self) -> impl Iterator<Item = &Param<F>> {
        self.policy.params().iter().chain(self.value.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<F>> {
        self.policy.params_mut().iter_mut().chain(self.value.params_mut().iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|p| p.tensor.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.tensor.is_finite())
    }

    pub fn cast<G: Scalar>(&self) -> PolicyValueNets<G> {
        PolicyValueNets {
            architecture: self.architecture,
            action_count: self.action_count,
            policy: self.policy.cast(),
            value: self.value.cast(),
        }
    }
}

pub fn log_softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<F>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn entropy<F: Scalar>(logits: &[F]) -> F {
    let logp = log_softmax(logits);
    -logp.iter().map(|&l| l.exp() * l).sum::<F>()
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax<F: Scalar>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical<F: Scalar, R: Rng + ?Sized>(probs: &[F], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.f64();
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
