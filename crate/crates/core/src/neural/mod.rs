//! Fixed-architecture actor-critic network with analytic backpropagation,
//! diagonal-Gaussian policy head, Adam optimizer and binary checkpoints.

mod adam;
mod checkpoint;
pub mod layers;
mod network;
mod policy;

use serde::{Deserialize, Serialize};

pub use adam::{adam_update, Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{Branches, ForwardPass, Layout, NetInput, NetworkParams, TensorSpec};
pub use policy::{GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};

use crate::observation::{BSM_LEN, STACK_DEPTH};
use crate::{Error, Result};

/// Shape-tagged row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {n} values, got {}", values.len())));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub image_height: usize,
    pub image_width: usize,
    pub frames: usize,
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub image_features: usize,
    pub bsm_hidden: usize,
    pub trunk: usize,
    pub action_dim: usize,
    pub log_std_init: LogStdInit,
    /// Orthogonal-init gain of the policy mean head.
    pub policy_head_gain: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            image_height: 84,
            image_width: 84,
            frames: STACK_DEPTH,
            conv1: ConvSpec { out_channels: 16, kernel: 8, stride: 4 },
            conv2: ConvSpec { out_channels: 32, kernel: 4, stride: 2 },
            image_features: 128,
            bsm_hidden: 64,
            trunk: 128,
            action_dim: 2,
            log_std_init: LogStdInit::Shared(-0.5),
            policy_head_gain: 1.0,
        }
    }
}

/// Initial log standard deviation: one value for every action dimension, or
/// one per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogStdInit {
    Shared(f64),
    PerDim(Vec<f64>),
}

impl LogStdInit {
    pub fn value(&self, dim: usize) -> f64 {
        match self {
            LogStdInit::Shared(v) => *v,
            LogStdInit::PerDim(v) => v[dim],
        }
    }
}

impl From<f64> for LogStdInit {
    fn from(v: f64) -> Self {
        LogStdInit::Shared(v)
    }
}

impl ArchConfig {
    pub fn bsm_input_len(&self) -> usize {
        self.frames * BSM_LEN
    }

    pub fn image_input_len(&self) -> usize {
        self.frames * self.image_height * self.image_width
    }

    pub fn conv1_geom(&self) -> layers::ConvGeom {
        layers::ConvGeom {
            in_channels: self.frames,
            in_h: self.image_height,
            in_w: self.image_width,
            out_channels: self.conv1.out_channels,
            kernel: self.conv1.kernel,
            stride: self.conv1.stride,
        }
    }

    pub fn conv2_geom(&self) -> layers::ConvGeom {
        let g1 = self.conv1_geom();
        layers::ConvGeom {
            in_channels: self.conv1.out_channels,
            in_h: g1.out_h(),
            in_w: g1.out_w(),
            out_channels: self.conv2.out_channels,
            kernel: self.conv2.kernel,
            stride: self.conv2.stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("image_height", self.image_height),
            ("image_width", self.image_width),
            ("frames", self.frames),
            ("conv1.out_channels", self.conv1.out_channels),
            ("conv1.kernel", self.conv1.kernel),
            ("conv1.stride", self.conv1.stride),
            ("conv2.out_channels", self.conv2.out_channels),
            ("conv2.kernel", self.conv2.kernel),
            ("conv2.stride", self.conv2.stride),
            ("image_features", self.image_features),
            ("bsm_hidden", self.bsm_hidden),
            ("trunk", self.trunk),
            ("action_dim", self.action_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("arch.{name} must be positive")));
            }
        }
        if self.conv1.kernel > self.image_height || self.conv1.kernel > self.image_width {
            return Err(Error::config("arch.conv1.kernel larger than the image"));
        }
        let g1 = self.conv1_geom();
        if self.conv2.kernel > g1.out_h() || self.conv2.kernel > g1.out_w() {
            return Err(Error::config(format!(
                "arch.conv2.kernel {} larger than conv1 output {}x{}",
                self.conv2.kernel,
                g1.out_h(),
                g1.out_w()
            )));
        }
        if !(self.policy_head_gain > 0.0 && self.policy_head_gain.is_finite()) {
            return Err(Error::config("arch.policy_head_gain must be positive"));
        }
        let inits: Vec<f64> = match &self.log_std_init {
            LogStdInit::Shared(v) => vec![*v],
            LogStdInit::PerDim(v) => {
                if v.len() != self.action_dim {
                    return Err(Error::config(format!(
                        "arch.log_std_init has {} entries, action_dim is {}",
                        v.len(),
                        self.action_dim
                    )));
                }
                v.clone()
            }
        };
        if inits.iter().any(|v| !(LOG_STD_MIN..=LOG_STD_MAX).contains(v)) {
            return Err(Error::config("arch.log_std_init outside [-5, 2]"));
        }
        Ok(())
    }
}
