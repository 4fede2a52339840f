use super::tensor::Scalar;
use super::RlError;

/// Generalised advantage estimates and their value targets.
///
/// `values` carries one bootstrap entry beyond the last reward; a done step
/// neither bootstraps nor propagates the advantage of later steps.
pub fn compute_gae<F: Scalar>(
    rewards: &[F],
    values: &[F],
    dones: &[bool],
    gamma: F,
    lam: F,
) -> Result<(Vec<F>, Vec<F>), RlError> {
    let t = rewards.len();
    if values.len() != t + 1 {
        return Err(RlError::ShapeMismatch { expected: t + 1, actual: values.len() });
    }
    if dones.len() != t {
        return Err(RlError::ShapeMismatch { expected: t, actual: dones.len() });
    }
    let mut advantages = vec![F::zero(); t];
    let mut next = F::zero();
    for i in (0..t).rev() {
        let live = if dones[i] { F::zero() } else { F::one() };
        let delta = rewards[i] + gamma * values[i + 1] * live - values[i];
        next = delta + gamma * lam * live * next;
        advantages[i] = next;
    }
    let returns = advantages.iter().zip(values).map(|(&a, &v)| a + v).collect();
    Ok((advantages, returns))
}
