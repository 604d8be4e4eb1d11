use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::neural::{Adam, Branches, NetworkParams};
use crate::{Error, Result};

use super::gae::standardize;
use super::loss::{total_loss, LossTerms, Sample};
use super::rollout::RolloutBuffer;
use super::PpoConfig;

/// Minibatch means of the loss terms over one update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub total_loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Rescales `grads` in place so the global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// `cfg.epochs` passes of shuffled minibatches over a buffer whose
/// advantages have been computed.
pub fn update<R: Rng + ?Sized>(
    buffer: &RolloutBuffer,
    params: &mut NetworkParams,
    adam: &mut Adam,
    branches: Branches,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if !buffer.has_advantages() {
        return Err(Error::contract("update called before advantages were computed"));
    }
    let n = buffer.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut sum = LossTerms::default();
    let mut grad_norm = 0.0;
    let mut count = 0usize;
    let mut grads = vec![0.0; params.len()];
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let mut adv: Vec<f64> = chunk.iter().map(|&i| buffer.advantages[i]).collect();
            if cfg.normalize_advantages {
                standardize(&mut adv);
            }
            let samples: Vec<Sample<'_>> = chunk
                .iter()
                .zip(&adv)
                .map(|(&i, &a)| {
                    let t = &buffer.transitions[i];
                    Sample {
                        bsm: &t.bsm,
                        img: &t.img,
                        action: &t.action,
                        log_prob_old: t.log_prob_old,
                        advantage: a,
                        ret: buffer.returns[i],
                    }
                })
                .collect();
            grads.iter_mut().for_each(|g| *g = 0.0);
            let terms = total_loss(params, branches, &samples, cfg.clip_eps, cfg.value_coef, cfg.entropy_coef, Some(&mut grads))?;
            grad_norm += match cfg.max_grad_norm {
                Some(m) => clip_grad_norm(&mut grads, m),
                None => grads.iter().map(|g| g * g).sum::<f64>().sqrt(),
            };
            adam.step(&mut params.values, &grads, cfg.lr);
            params.clamp_log_std();
            sum.total += terms.total;
            sum.policy += terms.policy;
            sum.value += terms.value;
            sum.entropy += terms.entropy;
            sum.clip_fraction += terms.clip_fraction;
            sum.approx_kl += terms.approx_kl;
            count += 1;
        }
    }
    params.check_finite()?;
    let k = count.max(1) as f64;
    Ok(UpdateStats {
        total_loss: sum.total / k,
        policy_loss: sum.policy / k,
        value_loss: sum.value / k,
        entropy: sum.entropy / k,
        clip_fraction: sum.clip_fraction / k,
        approx_kl: sum.approx_kl / k,
        grad_norm: grad_norm / k,
        minibatches: count,
    })
}
