//! On-ramp merging testbed.
//!
//! A deterministic microscopic highway simulator with an on-ramp, wrapped as an
//! episodic MDP with a two-stage reward; a multi-modal (BSM vector + top-down
//! image) observation pipeline with noise augmentation; a small from-scratch
//! actor-critic network; and a PPO trainer plus evaluation harness.

pub mod error;
pub mod harness;
pub mod mdp_env;
pub mod neural;
pub mod observation;
pub mod ppo;
pub mod traffic_sim;

pub use error::{Error, Result};
