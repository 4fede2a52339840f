use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::net::{log_softmax, DropoutMasks, PolicyValueNets};
use super::tensor::{Scalar, Tensor};
use super::RlError;
use crate::config::{ConfigError, KvFile};

pub const SECTION: &str = "trainer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub episodes_per_update: usize,
    pub entropy_coef: f64,
    pub l2_coef: f64,
    pub dropout_p: f64,
    pub value_coef: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            learning_rate: 3e-4,
            epochs_per_update: 4,
            minibatch_size: 64,
            episodes_per_update: 20,
            entropy_coef: 0.1,
            l2_coef: 0.0,
            dropout_p: 0.0,
            value_coef: 0.5,
        }
    }
}

const KEYS: &[&str] = &[
    "gamma",
    "lam",
    "clip_eps",
    "learning_rate",
    "epochs_per_update",
    "minibatch_size",
    "episodes_per_update",
    "entropy_coef",
    "l2_coef",
    "dropout_p",
    "value_coef",
];

impl TrainerConfig {
    /// Weight decay and dropout enabled.
    pub fn regularized() -> Self {
        TrainerConfig { l2_coef: 2e-5, dropout_p: 0.3, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) || !unit(self.lam) {
            return Err(ConfigError::Invalid("gamma and lam must lie in [0, 1]".into()));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(ConfigError::Invalid("clip_eps must lie in (0, 1)".into()));
        }
        if [self.learning_rate, self.entropy_coef, self.l2_coef, self.value_coef].iter().any(|c| !(*c >= 0.0)) {
            return Err(ConfigError::Invalid("coefficients must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(ConfigError::Invalid("dropout_p must lie in [0, 1)".into()));
        }
        if self.epochs_per_update == 0 || self.minibatch_size == 0 || self.episodes_per_update == 0 {
            return Err(ConfigError::Invalid("epoch, minibatch and episode counts must be positive".into()));
        }
        Ok(())
    }

    pub fn from_kv(file: &KvFile) -> Result<Self, ConfigError> {
        let s = file.section(SECTION);
        s.check_keys(KEYS)?;
        let mut c = TrainerConfig::default();
        s.read("gamma", &mut c.gamma)?;
        s.read("lam", &mut c.lam)?;
        s.read("clip_eps", &mut c.clip_eps)?;
        s.read("learning_rate", &mut c.learning_rate)?;
        s.read("epochs_per_update", &mut c.epochs_per_update)?;
        s.read("minibatch_size", &mut c.minibatch_size)?;
        s.read("episodes_per_update", &mut c.episodes_per_update)?;
        s.read("entropy_coef", &mut c.entropy_coef)?;
        s.read("l2_coef", &mut c.l2_coef)?;
        s.read("dropout_p", &mut c.dropout_p)?;
        s.read("value_coef", &mut c.value_coef)?;
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, file: &mut KvFile) {
        file.set(SECTION, "gamma", self.gamma);
        file.set(SECTION, "lam", self.lam);
        file.set(SECTION, "clip_eps", self.clip_eps);
        file.set(SECTION, "learning_rate", self.learning_rate);
        file.set(SECTION, "epochs_per_update", self.epochs_per_update);
        file.set(SECTION, "minibatch_size", self.minibatch_size);
        file.set(SECTION, "episodes_per_update", self.episodes_per_update);
        file.set(SECTION, "entropy_coef", self.entropy_coef);
        file.set(SECTION, "l2_coef", self.l2_coef);
        file.set(SECTION, "dropout_p", self.dropout_p);
        file.set(SECTION, "value_coef", self.value_coef);
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            surrogate: 1.0,
            value: self.value_coef,
            entropy: self.entropy_coef,
            l2: self.l2_coef,
            clip_eps: self.clip_eps,
        }
    }
}

/// One training transition with its behaviour statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<F> {
    pub input: Vec<F>,
    pub action: usize,
    pub old_log_prob: F,
    pub advantage: F,
    pub ret: F,
}

/// Coefficients of the minimised objective
/// `−surrogate·S − entropy·H + value·MSE + l2·‖θ‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub surrogate: f64,
    pub value: f64,
    pub entropy: f64,
    pub l2: f64,
    pub clip_eps: f64,
}

/// Per-sample dropout masks for both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMasks<F> {
    pub policy: DropoutMasks<F>,
    pub value: DropoutMasks<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub total: f64,
    /// Mean clipped surrogate, before negation.
    pub surrogate: f64,
    pub value_mse: f64,
    pub entropy: f64,
    pub l2: f64,
    pub mean_ratio: f64,
    pub clip_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub policy: Vec<Tensor<F>>,
    pub value: Vec<Tensor<F>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn zeros(nets: &PolicyValueNets<F>) -> Self {
        Gradients { policy: nets.policy.zero_grads(), value: nets.value.zero_grads() }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor<F>> {
        self.policy.iter().chain(&self.value)
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(Tensor::is_finite)
    }
}

/// Per-sample clipped surrogate `min(ρA, clip(ρ, 1−ε, 1+ε)A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Rescales advantages to zero mean and unit standard deviation.
pub fn normalize_advantages<F: Scalar>(advantages: &mut [F]) {
    let n = advantages.len();
    if n < 2 {
        return;
    }
    let mean = advantages.iter().map(|a| a.f64()).sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a.f64() - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt().max(1e-8);
    for a in advantages {
        *a = F::of((a.f64() - mean) / std);
    }
}

/// Mean loss over `batch` and its exact gradient with respect to every
/// parameter of both networks.
pub fn loss_and_grad<F: Scalar>(
    nets: &PolicyValueNets<F>,
    batch: &[&Sample<F>],
    weights: &LossWeights,
    masks: Option<&[SampleMasks<F>]>,
) -> Result<(LossTerms, Gradients<F>), RlError> {
    if batch.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let inv_n = F::of(1.0 / n);
    let eps = weights.clip_eps;
    let mut grads = Gradients::zeros(nets);
    let mut terms = LossTerms::default();
    for (i, s) in batch.iter().enumerate() {
        let m = masks.map(|ms| &ms[i]);
        let ptrace = nets.policy.forward_trace(&s.input, m.map(|m| &m.policy))?;
        let logp = log_softmax(ptrace.output());
        let probs: Vec<F> = logp.iter().map(|l| l.exp()).collect();
        let h: F = -probs.iter().zip(&logp).map(|(&p, &l)| p * l).sum::<F>();
        let ratio = (logp[s.action] - s.old_log_prob).exp();
        let (r, a) = (ratio.f64(), s.advantage.f64());
        terms.surrogate += clipped_surrogate(r, a, eps);
        terms.entropy += h.f64();
        terms.mean_ratio += r;
        if (r - 1.0).abs() > eps {
            terms.clip_frac += 1.0;
        }
        // the unclipped branch is active when it is the smaller one
        let unclipped_active = r * a <= r.clamp(1.0 - eps, 1.0 + eps) * a;
        let d_ratio = if unclipped_active { F::of(-weights.surrogate) * s.advantage * inv_n } else { F::zero() };
        let ent_w = F::of(weights.entropy) * inv_n;
        let glogits: Vec<F> = probs
            .iter()
            .zip(&logp)
            .enumerate()
            .map(|(j, (&p, &l))| {
                let onehot = if j == s.action { F::one() } else { F::zero() };
                d_ratio * ratio * (onehot - p) + ent_w * p * (l + h)
            })
            .collect();
        nets.policy.backward(&ptrace, m.map(|m| &m.policy), &glogits, &mut grads.policy);

        let vtrace = nets.value.forward_trace(&s.input, m.map(|m| &m.value))?;
        let err = vtrace.output()[0] - s.ret;
        terms.value_mse += err.f64().powi(2);
        let gv = F::of(2.0 * weights.value) * err * inv_n;
        nets.value.backward(&vtrace, m.map(|m| &m.value), &[gv], &mut grads.value);
    }
    terms.surrogate /= n;
    terms.entropy /= n;
    terms.value_mse /= n;
    terms.mean_ratio /= n;
    terms.clip_frac /= n;
    if weights.l2 > 0.0 {
        let two_l2 = F::of(2.0 * weights.l2);
        for (p, g) in nets.params().zip(grads.policy.iter_mut().chain(grads.value.iter_mut())) {
            terms.l2 += p.tensor.sum_squares().f64();
            for (gi, &pi) in g.data_mut().iter_mut().zip(p.tensor.data()) {
                *gi += two_l2 * pi;
            }
        }
    }
    terms.total = -weights.surrogate * terms.surrogate - weights.entropy * terms.entropy
        + weights.value * terms.value_mse
        + weights.l2 * terms.l2;
    Ok((terms, grads))
}

/// Adam over the concatenated parameters of both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: u64,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(nets: &PolicyValueNets<F>, learning_rate: f64) -> Self {
        let zeros: Vec<Tensor<F>> = nets.params().map(|p| Tensor::zeros(p.tensor.shape())).collect();
        Adam { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8, steps: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, nets: &mut PolicyValueNets<F>, grads: &Gradients<F>) {
        self.steps += 1;
        let t = self.steps as i32;
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let c1 = F::of(1.0 - self.beta1.powi(t));
        let c2 = F::of(1.0 - self.beta2.powi(t));
        let (lr, eps) = (F::of(self.learning_rate), F::of(self.eps));
        let one = F::one();
        for (((p, g), m), v) in nets.params_mut().zip(grads.iter()).zip(&mut self.m).zip(&mut self.v) {
            let pd = p.tensor.data_mut();
            let (md, vd) = (m.data_mut(), v.data_mut());
            for (k, &gk) in g.data().iter().enumerate() {
                md[k] = b1 * md[k] + (one - b1) * gk;
                vd[k] = b2 * vd[k] + (one - b2) * gk * gk;
                let mhat = md[k] / c1;
                let vhat = vd[k] / c2;
                pd[k] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

/// Diagnostics of one PPO update, averaged over its minibatches.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Mean importance ratio before any gradient step, without dropout.
    pub initial_mean_ratio: f64,
    pub mean_ratio: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub minibatches: usize,
}

/// Runs `epochs_per_update` passes of shuffled minibatches over `samples`.
/// Advantages are normalised across the whole batch first. On a non-finite
/// loss or gradient the networks and optimiser are left untouched.
pub fn ppo_update<F: Scalar>(
    nets: &mut PolicyValueNets<F>,
    optimizer: &mut Adam<F>,
    samples: &[Sample<F>],
    cfg: &TrainerConfig,
    rng: &mut dyn RngCore,
) -> Result<UpdateStats, RlError> {
    if samples.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    let mut advantages: Vec<F> = samples.iter().map(|s| s.advantage).collect();
    normalize_advantages(&mut advantages);
    let batch: Vec<Sample<F>> =
        samples.iter().zip(advantages).map(|(s, advantage)| Sample { advantage, ..s.clone() }).collect();

    let mut stats = UpdateStats::default();
    for s in &batch {
        let logits = nets.policy.forward(&s.input, None)?;
        stats.initial_mean_ratio += (log_softmax(&logits)[s.action] - s.old_log_prob).exp().f64();
    }
    stats.initial_mean_ratio /= batch.len() as f64;

    let saved = (nets.clone(), optimizer.clone());
    optimizer.learning_rate = cfg.learning_rate;
    let weights = cfg.loss_weights();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..cfg.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let mb: Vec<&Sample<F>> = chunk.iter().map(|&i| &batch[i]).collect();
            let masks: Option<Vec<SampleMasks<F>>> = (nets.dropout_p() > 0.0).then(|| {
                mb.iter()
                    .map(|_| SampleMasks { policy: nets.policy.sample_masks(rng), value: nets.value.sample_masks(rng) })
                    .collect()
            });
            let (terms, grads) = loss_and_grad(nets, &mb, &weights, masks.as_deref())?;
            if !terms.total.is_finite() || !grads.is_finite() {
                (*nets, *optimizer) = saved;
                return Err(RlError::NonFiniteLoss);
            }
            optimizer.step(nets, &grads);
            stats.mean_ratio += terms.mean_ratio;
            stats.policy_loss += -terms.surrogate;
            stats.value_loss += terms.value_mse;
            stats.entropy += terms.entropy;
            stats.clip_frac += terms.clip_frac;
            stats.minibatches += 1;
        }
    }
    if !nets.is_finite() {
        (*nets, *optimizer) = saved;
        return Err(RlError::NonFiniteLoss);
    }
    let k = stats.minibatches as f64;
    stats.mean_ratio /= k;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_frac /= k;
    Ok(stats)
}
