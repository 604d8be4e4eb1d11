use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::mdp_env::EnvConfig;
use crate::neural::{Adam, AdamConfig, ArchConfig, Branches, ConvSpec, LogStdInit, GaussianPolicy, NetInput, NetworkParams};
use crate::observation::Modality;

fn tiny_arch() -> ArchConfig {
    ArchConfig {
        image_height: 10,
        image_width: 10,
        frames: 4,
        conv1: ConvSpec { out_channels: 2, kernel: 4, stride: 2 },
        conv2: ConvSpec { out_channels: 2, kernel: 2, stride: 1 },
        image_features: 4,
        bsm_hidden: 4,
        trunk: 5,
        action_dim: 2,
        log_std_init: LogStdInit::Shared(-0.5),
        policy_head_gain: 1.0,
    }
}

fn tiny_env() -> EnvConfig {
    let mut cfg = EnvConfig::default();
    cfg.window.width_px = 10;
    cfg.window.height_px = 10;
    cfg.warmup_steps = 100;
    cfg
}

fn brute_force_gae(rewards: &[f64], values: &[f64], dones: &[bool], last: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let delta = |t: usize| {
        let next = if t + 1 < n { values[t + 1] } else { last };
        rewards[t] + gamma * next * if dones[t] { 0.0 } else { 1.0 } - values[t]
    };
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut weight = 1.0;
            for l in 0..(n - t) {
                total += weight * delta(t + l);
                if dones[t + l] {
                    break;
                }
                weight *= gamma * lambda;
            }
            total
        })
        .collect()
}

fn random_episode_data(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>, f64) {
    let r = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let v = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let d = (0..n).map(|_| rng.gen_bool(0.08)).collect();
    (r, v, d, rng.gen_range(-5.0..5.0))
}

#[test]
fn gae_matches_brute_force_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..100 {
        let (r, v, d, last) = random_episode_data(&mut rng, 50);
        let gamma = rng.gen_range(0.8..1.0);
        let lambda = [0.0, 1.0, 0.95, rng.gen_range(0.0..1.0)][case % 4];
        let (adv, ret) = gae(&r, &v, &d, last, gamma, lambda);
        let oracle = brute_force_gae(&r, &v, &d, last, gamma, lambda);
        for t in 0..50 {
            assert!((adv[t] - oracle[t]).abs() < 1e-10, "case {case} t {t}");
            assert!((ret[t] - (adv[t] + v[t])).abs() < 1e-12);
        }
    }
}

#[test]
fn gae_lambda_zero_is_one_step_td() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (r, v, d, last) = random_episode_data(&mut rng, 50);
    let (adv, _) = gae(&r, &v, &d, last, 0.99, 0.0);
    for t in 0..50 {
        let next = if t + 1 < 50 { v[t + 1] } else { last };
        let delta = r[t] + 0.99 * next * if d[t] { 0.0 } else { 1.0 } - v[t];
        assert_eq!(adv[t], delta);
    }
}

#[test]
fn gae_lambda_one_is_discounted_return_to_go() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40;
    let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut d = vec![false; n];
    d[n - 1] = true;
    for gamma in [0.9, 1.0] {
        let (adv, ret) = gae(&r, &v, &d, 123.0, gamma, 1.0);
        for t in 0..n {
            let g: f64 = (t..n).map(|k| gamma.powi((k - t) as i32) * r[k]).sum();
            assert!((adv[t] - (g - v[t])).abs() < 1e-10);
            if gamma == 1.0 {
                let undiscounted: f64 = r[t..].iter().sum();
                assert!((ret[t] - undiscounted).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn ratio_examples() {
    assert_eq!(ratio(-1.3, -1.3), 1.0);
    assert!((ratio(2f64.ln(), 0.0) - 2.0).abs() < 1e-15);
    assert_eq!(ratio(1000.0, 0.0), 20f64.exp());
    assert_eq!(ratio(-1000.0, 0.0), (-20f64).exp());
}

#[test]
fn ratio_matches_density_quotient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let p = GaussianPolicy::new(vec![rng.gen_range(-1.0..1.0), 0.1], vec![rng.gen_range(-1.0..0.5), -0.4]);
        let q = GaussianPolicy::new(vec![rng.gen_range(-1.0..1.0), -0.2], vec![rng.gen_range(-1.0..0.5), -0.1]);
        let density = |pol: &GaussianPolicy| -> f64 {
            (0..2)
                .map(|d| {
                    let s = pol.log_std[d].exp();
                    (-(a[d] - pol.mean[d]).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
                })
                .product()
        };
        let direct = density(&p) / density(&q);
        let r = ratio(p.log_prob(&a), q.log_prob(&a));
        assert!((r - direct).abs() < 1e-9 * direct.max(1.0));
    }
}

#[test]
fn clipped_surrogate_examples() {
    for eps in [0.1, 0.2, 0.3] {
        assert_eq!(clipped_surrogate(1.0, 1.7, eps), 1.7);
        assert_eq!(clipped_surrogate(1.0, -0.4, eps), -0.4);
        let a = 2.5;
        assert!((clipped_surrogate(1.0 + 2.0 * eps, a, eps) - (1.0 + eps) * a).abs() < 1e-12);
    }
    assert!((clipped_surrogate(0.5, -1.0, 0.2) - -0.8).abs() < 1e-15);
}

proptest! {
    #[test]
    fn surrogate_is_pessimistic(r in 0.0f64..5.0, a in -10.0f64..10.0, eps in 0.01f64..0.99) {
        prop_assert!(clipped_surrogate(r, a, eps) <= r * a + 1e-12);
    }

    #[test]
    fn standardized_batch_has_zero_mean_unit_std(v in prop::collection::vec(-1e3f64..1e3, 2..200)) {
        let spread = v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 1e-3);
        let mut v = v;
        standardize(&mut v);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-6);
        prop_assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gae_matches_double_sum(
        steps in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 1..40),
        last in -5.0f64..5.0,
        gamma in 0.0f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let r: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let v: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let d: Vec<bool> = steps.iter().map(|s| s.2).collect();
        let (adv, ret) = gae(&r, &v, &d, last, gamma, lambda);
        let oracle = brute_force_gae(&r, &v, &d, last, gamma, lambda);
        for t in 0..r.len() {
            prop_assert!((adv[t] - oracle[t]).abs() < 1e-10);
            prop_assert!((ret[t] - adv[t] - v[t]).abs() < 1e-12);
        }
    }
}

struct OwnedSample {
    bsm: Vec<f64>,
    img: Vec<u8>,
    action: Vec<f64>,
    log_prob_old: f64,
    advantage: f64,
    ret: f64,
}

impl OwnedSample {
    fn view(&self) -> Sample<'_> {
        Sample {
            bsm: &self.bsm,
            img: &self.img,
            action: &self.action,
            log_prob_old: self.log_prob_old,
            advantage: self.advantage,
            ret: self.ret,
        }
    }
}

fn random_params(arch: &ArchConfig, seed: u64) -> NetworkParams {
    let mut p = NetworkParams::init(arch, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151);
    for v in p.values.iter_mut() {
        *v = 0.7 * *v + rng.gen_range(-0.2..0.2);
    }
    let r = p.layout().log_std_range();
    for v in &mut p.values[r] {
        *v = rng.gen_range(-1.0..0.0);
    }
    p
}

/// Samples whose current ratios sit at chosen values away from the clip kinks.
fn random_batch(p: &NetworkParams, br: Branches, n: usize, eps: f64, rng: &mut ChaCha8Rng) -> Vec<OwnedSample> {
    let arch = p.arch();
    (0..n)
        .map(|_| {
            let bsm: Vec<f64> = (0..arch.bsm_input_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let img: Vec<u8> = (0..arch.image_input_len()).map(|_| rng.gen()).collect();
            let img_f = image_input(&img);
            let fp = p.forward(NetInput { bsm: &bsm, img: &img_f }, br).unwrap();
            let pol = p.policy(&fp);
            let action = pol.sample(rng);
            let lp = pol.log_prob(&action);
            let target_ratio = match rng.gen_range(0..3) {
                0 => rng.gen_range(0.5..(1.0 - eps - 0.02)),
                1 => rng.gen_range((1.0 - eps + 0.02)..(1.0 + eps - 0.02)),
                _ => rng.gen_range((1.0 + eps + 0.02)..1.8),
            };
            OwnedSample {
                bsm,
                img,
                action,
                log_prob_old: lp - f64::ln(target_ratio),
                advantage: rng.gen_range(-2.0..2.0),
                ret: fp.value + rng.gen_range(-1.0..1.0),
            }
        })
        .collect()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Max relative error between analytic and central-difference gradients of
/// the full PPO loss on a random tiny network.
pub(crate) fn ppo_loss_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = tiny_arch();
    let br = [Branches::BOTH, Branches { image: false, bsm: true }, Branches { image: true, bsm: false }][seed as usize % 3];
    let p = random_params(&arch, seed);
    let (eps, c1, c2) = (0.2, rng.gen_range(0.1..1.0), rng.gen_range(0.0..0.1));
    let batch = random_batch(&p, br, 6, eps, &mut rng);
    let views: Vec<Sample<'_>> = batch.iter().map(|s| s.view()).collect();
    let mut grads = vec![0.0; p.len()];
    total_loss(&p, br, &views, eps, c1, c2, Some(&mut grads)).unwrap();
    let h = 1e-5;
    let mut q = p.clone();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        q.values[i] = p.values[i] + h;
        let lp = total_loss(&q, br, &views, eps, c1, c2, None).unwrap().total;
        q.values[i] = p.values[i] - h;
        let lm = total_loss(&q, br, &views, eps, c1, c2, None).unwrap().total;
        q.values[i] = p.values[i];
        worst = worst.max(rel_err(grads[i], (lp - lm) / (2.0 * h)));
    }
    worst
}

#[test]
fn ppo_loss_gradient_matches_finite_differences() {
    for seed in 0..21 {
        let err = ppo_loss_fd_error(seed);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn loss_reduces_to_negative_mean_advantage() {
    let arch = tiny_arch();
    let p = random_params(&arch, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut batch = random_batch(&p, Branches::BOTH, 8, 0.2, &mut rng);
    // ratio = 1 exactly: old log-prob equals the current one
    for s in batch.iter_mut() {
        let fp = p.forward(NetInput { bsm: &s.bsm, img: &image_input(&s.img) }, Branches::BOTH).unwrap();
        s.log_prob_old = p.policy(&fp).log_prob(&s.action);
        s.ret = fp.value;
    }
    let views: Vec<Sample<'_>> = batch.iter().map(|s| s.view()).collect();
    let terms = total_loss(&p, Branches::BOTH, &views, 0.2, 0.0, 0.0, None).unwrap();
    let mean_adv = batch.iter().map(|s| s.advantage).sum::<f64>() / 8.0;
    assert!((terms.total + mean_adv).abs() < 1e-12);
    assert_eq!(terms.value, 0.0);
    assert_eq!(terms.clip_fraction, 0.0);
    assert!(terms.approx_kl.abs() < 1e-10);
}

#[test]
fn loss_equals_term_by_term_recomputation() {
    let arch = tiny_arch();
    for seed in 0..5 {
        let p = random_params(&arch, 40 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = random_batch(&p, Branches::BOTH, 16, 0.2, &mut rng);
        let views: Vec<Sample<'_>> = batch.iter().map(|s| s.view()).collect();
        let (c1, c2) = (0.5, 0.01);
        let terms = total_loss(&p, Branches::BOTH, &views, 0.2, c1, c2, None).unwrap();
        let (mut surr, mut vl, mut ent) = (0.0, 0.0, 0.0);
        for s in &batch {
            let fp = p.forward(NetInput { bsm: &s.bsm, img: &image_input(&s.img) }, Branches::BOTH).unwrap();
            let mean = fp.mean.clone();
            let ls = p.log_std().to_vec();
            let mut lp = 0.0;
            for d in 0..2 {
                let var = (2.0 * ls[d]).exp();
                lp += -(s.action[d] - mean[d]).powi(2) / (2.0 * var) - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
            }
            let r = (lp - s.log_prob_old).exp();
            surr += (r * s.advantage).min(r.max(0.8).min(1.2) * s.advantage);
            vl += (fp.value - s.ret).powi(2);
            ent += ls.iter().map(|l| 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + l).sum::<f64>();
        }
        let n = batch.len() as f64;
        let expect = -surr / n + c1 * vl / n - c2 * ent / n;
        assert!((terms.total - expect).abs() < 1e-8, "{} vs {expect}", terms.total);
    }
}

#[test]
fn clip_grad_norm_caps_global_norm() {
    let mut g = vec![3.0, 4.0];
    assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
    assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    let mut g = vec![0.3, 0.4];
    clip_grad_norm(&mut g, 1.0);
    assert_eq!(g, vec![0.3, 0.4]);
}

#[test]
fn action_space_maps_halves_to_bounds() {
    let space = ActionSpace { acc_min: -4.5, acc_max: 2.6, theta_min: -0.2, theta_max: 0.2 };
    assert_eq!(space.to_physical(&[0.0, 0.0]), (0.0, 0.0));
    assert_eq!(space.to_physical(&[1.0, -1.0]), (2.6, -0.2));
    assert_eq!(space.to_physical(&[-1.0, 1.0]), (-4.5, 0.2));
    assert_eq!(space.to_physical(&[7.0, -3.0]), (2.6, -0.2));
    assert_eq!(space.to_physical(&[-0.5, 0.5]), (-2.25, 0.1));
}

#[test]
fn config_validation() {
    assert!(PpoConfig::default().validate().is_ok());
    for bad in [
        PpoConfig { gamma: 0.0, ..Default::default() },
        PpoConfig { gae_lambda: 1.5, ..Default::default() },
        PpoConfig { clip_eps: 1.0, ..Default::default() },
        PpoConfig { n_envs: 0, ..Default::default() },
        PpoConfig { minibatch_size: 0, ..Default::default() },
    ] {
        assert!(bad.validate().is_err());
    }
    let cfg = PpoConfig { n_steps: 2048, n_envs: 4, total_steps: 100_000, ..Default::default() };
    assert_eq!(cfg.n_updates(), 13);
    assert_eq!(PpoConfig { total_steps: 0, ..Default::default() }.n_updates(), 0);
}

fn rollout(seed: u64, n_steps: usize, n_envs: usize, zero_std: bool) -> (RolloutBuffer, NetworkParams) {
    let arch = tiny_arch();
    let mut p = NetworkParams::init(&arch, 5).unwrap();
    if zero_std {
        let r = p.layout().log_std_range();
        p.values[r].iter_mut().for_each(|v| *v = -300.0);
    }
    let env = tiny_env();
    let mut venv = VecEnv::new(&env, Modality::Multi, None, n_envs, seed).unwrap();
    let space = ActionSpace::from_ego(&env.sim.ego);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buf = collect_rollout(&mut venv, &p, Branches::BOTH, &space, n_steps, &mut rng).unwrap();
    (buf, p)
}

#[test]
fn single_step_rollout_has_one_transition() {
    let (buf, _) = rollout(1, 1, 1, false);
    assert_eq!(buf.len(), 1);
    assert_eq!(buf.last_values.len(), 1);
}

#[test]
fn rollout_reproducible() {
    let (a, _) = rollout(3, 30, 2, true);
    let (b, _) = rollout(3, 30, 2, true);
    assert_eq!(a, b);
    let (c, _) = rollout(3, 30, 2, false);
    let (d, _) = rollout(3, 30, 2, false);
    assert_eq!(c, d);
}

#[test]
fn rollout_rewards_match_environment_log() {
    let arch = tiny_arch();
    let p = NetworkParams::init(&arch, 5).unwrap();
    let env = tiny_env();
    let mut venv = VecEnv::new(&env, Modality::Multi, None, 2, 8).unwrap();
    for e in 0..2 {
        venv.env_mut(e).set_logging(true);
    }
    let space = ActionSpace::from_ego(&env.sim.ego);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let buf = collect_rollout(&mut venv, &p, Branches::BOTH, &space, 400, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for e in 0..2 {
        let path = dir.path().join(format!("env{e}.jsonl"));
        let lines: Vec<String> = venv.env_mut(e).drain_log().iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        std::fs::write(&path, lines.join("\n")).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let logged: Vec<crate::mdp_env::StepRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(logged.len(), 400);
        for (t, rec) in logged.iter().enumerate() {
            let tr = buf.get(t, e);
            assert_eq!(rec.reward, tr.reward);
            assert_eq!(rec.outcome.is_terminal(), tr.done);
            let (acc, theta) = space.to_physical(&tr.action);
            assert_eq!((rec.acc_target, rec.theta_target), (acc, theta));
        }
    }
}

#[test]
fn timeouts_bootstrap_from_final_observation() {
    let p = NetworkParams::init(&tiny_arch(), 5).unwrap();
    let env = EnvConfig { max_steps: 7, ..tiny_env() };
    let mut venv = VecEnv::new(&env, Modality::Multi, None, 2, 4).unwrap();
    let space = ActionSpace::from_ego(&env.sim.ego);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut buf = collect_rollout(&mut venv, &p, Branches::BOTH, &space, 30, &mut rng).unwrap();
    let mut timeouts = 0;
    for tr in &buf.transitions {
        if let Some(v) = tr.timeout_value {
            assert!(tr.done && v.is_finite());
            timeouts += 1;
        }
    }
    assert!(timeouts >= 4, "{timeouts}");
    let (gamma, lambda) = (0.9, 0.8);
    buf.compute_gae(gamma, lambda);
    for e in 0..2 {
        let col: Vec<&Transition> = (0..30).map(|t| buf.get(t, e)).collect();
        let rewards: Vec<f64> = col.iter().map(|x| x.reward + x.timeout_value.map_or(0.0, |v| gamma * v)).collect();
        let values: Vec<f64> = col.iter().map(|x| x.value_old).collect();
        let dones: Vec<bool> = col.iter().map(|x| x.done).collect();
        let oracle = brute_force_gae(&rewards, &values, &dones, buf.last_values[e], gamma, lambda);
        for t in 0..30 {
            assert!((buf.advantages[t * 2 + e] - oracle[t]).abs() < 1e-10);
        }
    }
}

fn trace_setup(lr: f64) -> (RolloutBuffer, NetworkParams, PpoConfig) {
    let (mut buf, p) = rollout(11, 16, 2, false);
    let cfg = PpoConfig { n_steps: 16, n_envs: 2, epochs: 1, minibatch_size: 32, lr, ..Default::default() };
    buf.compute_gae(cfg.gamma, cfg.gae_lambda);
    (buf, p, cfg)
}

#[test]
fn zero_learning_rate_leaves_params_and_reports_stats() {
    let (buf, p, mut cfg) = trace_setup(0.0);
    cfg.epochs = 3;
    cfg.minibatch_size = 8;
    let mut q = p.clone();
    let mut adam = Adam::new(q.len(), AdamConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let stats = update(&buf, &mut q, &mut adam, Branches::BOTH, &cfg, &mut rng).unwrap();
    assert_eq!(q, p);
    assert_eq!(stats.minibatches, 12);
    assert!(stats.total_loss.is_finite());
    assert!(stats.clip_fraction == 0.0 && stats.approx_kl.abs() < 1e-10);
}

#[test]
fn single_minibatch_update_is_one_adam_step() {
    let (buf, p, cfg) = trace_setup(1e-3);
    let mut q = p.clone();
    let mut adam = Adam::new(q.len(), AdamConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    update(&buf, &mut q, &mut adam, Branches::BOTH, &cfg, &mut rng).unwrap();

    // oracle: same minibatch order, manual loss gradient, clip, adam step
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut adv: Vec<f64> = order.iter().map(|&i| buf.advantages[i]).collect();
    standardize(&mut adv);
    let samples: Vec<Sample<'_>> = order
        .iter()
        .zip(&adv)
        .map(|(&i, &a)| {
            let t = &buf.transitions[i];
            Sample { bsm: &t.bsm, img: &t.img, action: &t.action, log_prob_old: t.log_prob_old, advantage: a, ret: buf.returns[i] }
        })
        .collect();
    let mut grads = vec![0.0; p.len()];
    total_loss(&p, Branches::BOTH, &samples, cfg.clip_eps, cfg.value_coef, cfg.entropy_coef, Some(&mut grads)).unwrap();
    clip_grad_norm(&mut grads, cfg.max_grad_norm.unwrap());
    let mut expect = p.values.clone();
    let mut m = vec![0.0; p.len()];
    let mut v = vec![0.0; p.len()];
    crate::neural::adam_update(&mut expect, &grads, &mut m, &mut v, cfg.lr, &AdamConfig::default(), 1);
    assert_eq!(q.values, expect);
}

#[test]
fn update_is_deterministic() {
    let (buf, p, mut cfg) = trace_setup(1e-3);
    cfg.epochs = 2;
    cfg.minibatch_size = 8;
    let run = || {
        let mut q = p.clone();
        let mut adam = Adam::new(q.len(), AdamConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let stats = update(&buf, &mut q, &mut adam, Branches::BOTH, &cfg, &mut rng).unwrap();
        (q, stats)
    };
    let (a, sa) = run();
    let (b, sb) = run();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert_ne!(a, p);
}

#[test]
fn update_before_gae_is_contract_error() {
    let (buf, mut p) = rollout(1, 4, 1, false);
    let mut adam = Adam::new(p.len(), AdamConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cfg = PpoConfig::default();
    assert!(update(&buf, &mut p, &mut adam, Branches::BOTH, &cfg, &mut rng).is_err());
}
