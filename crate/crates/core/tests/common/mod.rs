#![allow(dead_code)]

use ramp_merge::harness::ExperimentConfig;
use ramp_merge::neural::{ConvSpec, LogStdInit};
use ramp_merge::observation::Modality;

/// The shipped desk-scale settings (42 px window, small network).
pub fn desk_config(modality: Modality, seed: u64) -> ExperimentConfig {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/example.toml")).unwrap();
    let mut cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    cfg.modality = modality;
    cfg.seed = seed;
    cfg
}

/// Desk config shrunk further for quick plumbing tests.
pub fn tiny_config(modality: Modality, seed: u64, total_steps: usize) -> ExperimentConfig {
    let mut cfg = desk_config(modality, seed);
    cfg.arch.conv1 = ConvSpec { out_channels: 2, kernel: 6, stride: 3 };
    cfg.arch.conv2 = ConvSpec { out_channels: 2, kernel: 3, stride: 2 };
    cfg.arch.image_features = 8;
    cfg.arch.bsm_hidden = 8;
    cfg.arch.trunk = 8;
    cfg.arch.log_std_init = LogStdInit::Shared(-0.5);
    cfg.ppo.n_steps = 64;
    cfg.ppo.n_envs = 2;
    cfg.ppo.epochs = 2;
    cfg.ppo.minibatch_size = 32;
    cfg.ppo.total_steps = total_steps;
    cfg.env.max_steps = 300;
    cfg.eval.n_episodes = 3;
    cfg
}
