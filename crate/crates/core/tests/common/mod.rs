#![allow(dead_code)]

use dracer::rl::{
    log_softmax, loss_and_grad, Architecture, LossWeights, PolicyValueNets, Sample, SampleMasks,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Loss recomputed from raw network outputs, without any of the training
/// code's loss assembly.
pub fn reference_loss(
    nets: &PolicyValueNets<f64>,
    batch: &[Sample<f64>],
    w: &LossWeights,
    masks: &[SampleMasks<f64>],
) -> f64 {
    let n = batch.len() as f64;
    let mut total = 0.0;
    for (s, m) in batch.iter().zip(masks) {
        let logits = nets.policy.forward(&s.input, Some(&m.policy)).unwrap();
        let logp = log_softmax(&logits);
        let ratio = (logp[s.action] - s.old_log_prob).exp();
        let clipped = ratio.clamp(1.0 - w.clip_eps, 1.0 + w.clip_eps);
        let surrogate = (ratio * s.advantage).min(clipped * s.advantage);
        let h: f64 = -logp.iter().map(|l| l.exp() * l).sum::<f64>();
        let v = nets.value.forward(&s.input, Some(&m.value)).unwrap()[0];
        total += -w.surrogate * surrogate - w.entropy * h + w.value * (v - s.ret).powi(2);
    }
    let l2: f64 = nets.params().flat_map(|p| p.tensor.data().iter()).map(|x| x * x).sum();
    total / n + w.l2 * l2
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub params_checked: usize,
}

/// Relative error floor: elements whose analytic and numeric gradients are
/// both below it are compared absolutely at that scale.
pub const REL_FLOOR: f64 = 1e-6;

/// Central finite differences over every parameter of a small random
/// network pair and batch.
pub fn gradient_check(seed: u64, arch: Architecture, batch_len: usize, w: &LossWeights) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nets = PolicyValueNets::<f64>::new(arch, 10, 0.3, &mut rng).unwrap();
    // zero biases can leave a pre-activation exactly on a ReLU kink
    for p in nets.params_mut().filter(|p| p.name.ends_with(".bias")) {
        for v in p.tensor.data_mut() {
            *v = rng.random_range(-0.1..0.1);
        }
    }
    // widen the policy head so the softmax is far from uniform
    let head = nets.policy.params().len() - 2;
    for v in nets.policy.params_mut()[head].tensor.data_mut() {
        *v *= 100.0;
    }
    let n_in = arch.input_len();
    let batch: Vec<Sample<f64>> = (0..batch_len)
        .map(|_| {
            let input: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
            let logits = nets.policy.forward(&input, None).unwrap();
            let action = rng.random_range(0..10);
            Sample {
                old_log_prob: log_softmax(&logits)[action] + rng.random_range(-0.4..0.4),
                advantage: rng.random_range(-2.0..2.0),
                ret: rng.random_range(-1.0..1.0),
                action,
                input,
            }
        })
        .collect();
    let masks: Vec<SampleMasks<f64>> = batch
        .iter()
        .map(|_| SampleMasks { policy: nets.policy.sample_masks(&mut rng), value: nets.value.sample_masks(&mut rng) })
        .collect();
    let refs: Vec<&Sample<f64>> = batch.iter().collect();
    let (_, grads) = loss_and_grad(&nets, &refs, w, Some(&masks)).unwrap();
    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.data().to_vec()).collect();

    let h = 1e-5;
    let mut max_rel: f64 = 0.0;
    let mut k = 0;
    let counts: Vec<usize> = nets.params().map(|p| p.tensor.len()).collect();
    for (pi, &len) in counts.iter().enumerate() {
        for j in 0..len {
            let orig = param_mut(&mut nets, pi)[j];
            param_mut(&mut nets, pi)[j] = orig + h;
            let up = reference_loss(&nets, &batch, w, &masks);
            param_mut(&mut nets, pi)[j] = orig - h;
            let down = reference_loss(&nets, &batch, w, &masks);
            param_mut(&mut nets, pi)[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            max_rel = max_rel.max(rel);
            k += 1;
        }
    }
    GradCheck { max_rel_error: max_rel, params_checked: k }
}

fn param_mut(nets: &mut PolicyValueNets<f64>, index: usize) -> &mut [f64] {
    nets.params_mut().nth(index).unwrap().tensor.data_mut()
}

pub fn small_feature_arch() -> Architecture {
    Architecture::Features { inputs: 8, hidden: 16 }
}

pub fn small_image_arch() -> Architecture {
    Architecture::Image { width: 24, height: 20, filters: [2, 3, 3], hidden: 8 }
}

pub fn full_weights() -> LossWeights {
    LossWeights { surrogate: 1.0, value: 0.5, entropy: 0.1, l2: 2e-5, clip_eps: 0.2 }
}
