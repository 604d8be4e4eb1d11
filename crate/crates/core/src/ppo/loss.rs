use crate::neural::{Branches, NetInput, NetworkParams};
use crate::{Error, Result};

use super::rollout::image_input;

/// Bound on `log_prob_new - log_prob_old` before exponentiation.
pub const RATIO_LOG_CLAMP: f64 = 20.0;

pub fn ratio(log_prob_new: f64, log_prob_old: f64) -> f64 {
    (log_prob_new - log_prob_old).clamp(-RATIO_LOG_CLAMP, RATIO_LOG_CLAMP).exp()
}

pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    unclipped.min(clipped)
}

/// One minibatch element; `advantage` is already standardized.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub bsm: &'a [f64],
    /// Stacked frames as stored (u8); empty when the image branch is off.
    pub img: &'a [u8],
    pub action: &'a [f64],
    pub log_prob_old: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    /// `-mean(clipped_surrogate)`.
    pub policy: f64,
    /// `mean((V - R)^2)`, before the coefficient.
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// `-mean(surrogate) + c1 mean((V-R)^2) - c2 mean(entropy)`. When `grads` is
/// given, the exact gradient is accumulated into it.
pub fn total_loss(
    params: &NetworkParams,
    branches: Branches,
    samples: &[Sample<'_>],
    clip_eps: f64,
    value_coef: f64,
    entropy_coef: f64,
    mut grads: Option<&mut [f64]>,
) -> Result<LossTerms> {
    if samples.is_empty() {
        return Err(Error::contract("empty minibatch"));
    }
    let arch = params.arch();
    let b = samples.len() as f64;
    let zeros_img = vec![0.0; arch.image_input_len()];
    let log_std_range = params.layout().log_std_range();
    let mut terms = LossTerms::default();
    let mut clipped = 0usize;
    for s in samples {
        let img_owned;
        let img: &[f64] = if branches.image && !s.img.is_empty() {
            img_owned = image_input(s.img);
            &img_owned
        } else {
            &zeros_img
        };
        let fp = params.forward(NetInput { bsm: s.bsm, img }, branches)?;
        let policy = params.policy(&fp);
        let lp = policy.log_prob(s.action);
        let log_ratio = lp - s.log_prob_old;
        let r = ratio(lp, s.log_prob_old);
        let surr = clipped_surrogate(r, s.advantage, clip_eps);
        let entropy = policy.entropy();
        let verr = fp.value - s.ret;
        terms.policy -= surr / b;
        terms.value += verr * verr / b;
        terms.entropy += entropy / b;
        terms.approx_kl += ((r - 1.0) - log_ratio.clamp(-RATIO_LOG_CLAMP, RATIO_LOG_CLAMP)) / b;
        if (r - 1.0).abs() > clip_eps {
            clipped += 1;
        }

        if let Some(g) = grads.as_deref_mut() {
            // d(-surr)/dlogp: nonzero only where the unclipped branch is the min
            // and the exponent clamp is inactive.
            let unclipped_active = r * s.advantage <= r.clamp(1.0 - clip_eps, 1.0 + clip_eps) * s.advantage;
            let in_range = log_ratio.abs() < RATIO_LOG_CLAMP;
            let dlogp = if unclipped_active && in_range { -s.advantage * r / b } else { 0.0 };
            let (dlp_dmean, dlp_dls) = policy.log_prob_grad(s.action);
            let dmean: Vec<f64> = dlp_dmean.iter().map(|d| dlogp * d).collect();
            let dvalue = 2.0 * value_coef * verr / b;
            params.backward(&fp, &dmean, dvalue, g);
            for (k, i) in log_std_range.clone().enumerate() {
                g[i] += dlogp * dlp_dls[k] - entropy_coef / b;
            }
        }
    }
    terms.clip_fraction = clipped as f64 / b;
    terms.total = terms.policy + value_coef * terms.value - entropy_coef * terms.entropy;
    if !terms.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss (policy {}, value {}, entropy {})",
            terms.policy, terms.value, terms.entropy
        )));
    }
    if let Some(g) = grads {
        params.check_gradients(g)?;
    }
    Ok(terms)
}
