use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use super::layers::{conv_backward, conv_forward, dense_backward, dense_forward, tanh_backward, tanh_inplace, ConvGeom};
use super::policy::{GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
use super::{ArchConfig, Tensor};
use crate::observation::Modality;
use crate::{Error, Result};

/// Which encoder branches are active; an inactive branch contributes zeros.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Branches {
    pub image: bool,
    pub bsm: bool,
}

impl Branches {
    pub const BOTH: Branches = Branches { image: true, bsm: true };
}

impl From<Modality> for Branches {
    fn from(m: Modality) -> Self {
        Branches { image: m.uses_image(), bsm: m.uses_bsm() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named tensors packed into one flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
}

const CONV1_W: usize = 0;
const CONV1_B: usize = 1;
const CONV2_W: usize = 2;
const CONV2_B: usize = 3;
const IMG_W: usize = 4;
const IMG_B: usize = 5;
const BSM1_W: usize = 6;
const BSM1_B: usize = 7;
const BSM2_W: usize = 8;
const BSM2_B: usize = 9;
const TRUNK_W: usize = 10;
const TRUNK_B: usize = 11;
const MEAN_W: usize = 12;
const MEAN_B: usize = 13;
const LOG_STD: usize = 14;
const VALUE_W: usize = 15;
const VALUE_B: usize = 16;

impl Layout {
    pub fn new(arch: &ArchConfig) -> Self {
        let g1 = arch.conv1_geom();
        let g2 = arch.conv2_geom();
        let k1 = arch.conv1.kernel;
        let k2 = arch.conv2.kernel;
        let fused = arch.image_features + arch.bsm_hidden;
        let shapes: Vec<(&'static str, Vec<usize>)> = vec![
            ("conv1.weight", vec![g1.out_channels, g1.in_channels, k1, k1]),
            ("conv1.bias", vec![g1.out_channels]),
            ("conv2.weight", vec![g2.out_channels, g2.in_channels, k2, k2]),
            ("conv2.bias", vec![g2.out_channels]),
            ("image_fc.weight", vec![arch.image_features, g2.out_len()]),
            ("image_fc.bias", vec![arch.image_features]),
            ("bsm1.weight", vec![arch.bsm_hidden, arch.bsm_input_len()]),
            ("bsm1.bias", vec![arch.bsm_hidden]),
            ("bsm2.weight", vec![arch.bsm_hidden, arch.bsm_hidden]),
            ("bsm2.bias", vec![arch.bsm_hidden]),
            ("trunk.weight", vec![arch.trunk, fused]),
            ("trunk.bias", vec![arch.trunk]),
            ("mean.weight", vec![arch.action_dim, arch.trunk]),
            ("mean.bias", vec![arch.action_dim]),
            ("log_std", vec![arch.action_dim]),
            ("value.weight", vec![1, arch.trunk]),
            ("value.bias", vec![1]),
        ];
        let mut offset = 0;
        let tensors = shapes
            .into_iter()
            .map(|(name, shape)| {
                let spec = TensorSpec { name, shape, offset };
                offset += spec.len();
                spec
            })
            .collect();
        Self { tensors, total: offset }
    }

    pub fn range(&self, idx: usize) -> std::ops::Range<usize> {
        self.tensors[idx].range()
    }

    pub fn log_std_range(&self) -> std::ops::Range<usize> {
        self.range(LOG_STD)
    }

    /// Name of the tensor owning flat index `i`.
    pub fn owner(&self, i: usize) -> &'static str {
        self.tensors.iter().find(|t| t.range().contains(&i)).map(|t| t.name).unwrap_or("?")
    }
}

/// One observation in network input units: BSM stack and image stack in [0, 1].
#[derive(Clone, Copy, Debug)]
pub struct NetInput<'a> {
    pub bsm: &'a [f64],
    pub img: &'a [f64],
}

/// Activations retained for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub mean: Vec<f64>,
    pub value: f64,
    branches: Branches,
    bsm_in: Vec<f64>,
    img_in: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    img_feat: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    fused: Vec<f64>,
    trunk: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    arch: ArchConfig,
    layout: Layout,
    g1: ConvGeom,
    g2: ConvGeom,
    pub values: Vec<f64>,
}

fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n, m) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain * if rows <= cols { q[r][c] } else { q[c][r] };
        }
    }
    out
}

impl NetworkParams {
    pub fn zeros(arch: &ArchConfig) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::new(arch);
        Ok(Self {
            arch: arch.clone(),
            g1: arch.conv1_geom(),
            g2: arch.conv2_geom(),
            values: vec![0.0; layout.total],
            layout,
        })
    }

    /// Orthogonal weights (gain sqrt(2) hidden, 1 for the value head,
    /// `policy_head_gain` for the mean head), zero biases.
    pub fn init(arch: &ArchConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = std::f64::consts::SQRT_2;
        for (idx, gain) in [
            (CONV1_W, hidden),
            (CONV2_W, hidden),
            (IMG_W, hidden),
            (BSM1_W, hidden),
            (BSM2_W, hidden),
            (TRUNK_W, hidden),
            (MEAN_W, arch.policy_head_gain),
            (VALUE_W, 1.0),
        ] {
            let spec = &p.layout.tensors[idx];
            let rows = spec.shape[0];
            let cols = spec.len() / rows;
            let w = orthogonal(rows, cols, gain, &mut rng);
            let range = spec.range();
            p.values[range].copy_from_slice(&w);
        }
        let ls = p.layout.log_std_range();
        p.values[ls]
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = arch.log_std_init.value(i));
        Ok(p)
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn t(&self, idx: usize) -> &[f64] {
        &self.values[self.layout.range(idx)]
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor> {
        self.layout.tensors.iter().find(|t| t.name == name).map(|t| Tensor {
            shape: t.shape.clone(),
            values: self.values[t.range()].to_vec(),
        })
    }

    pub fn log_std(&self) -> &[f64] {
        self.t(LOG_STD)
    }

    pub fn clamp_log_std(&mut self) {
        let r = self.layout.log_std_range();
        self.values[r].iter_mut().for_each(|v| *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.layout, &self.values, "parameter")
    }

    pub fn forward(&self, input: NetInput<'_>, branches: Branches) -> Result<ForwardPass> {
        let arch = &self.arch;
        if input.bsm.len() != arch.bsm_input_len() {
            return Err(Error::contract(format!(
                "bsm input has {} values, network expects {}",
                input.bsm.len(),
                arch.bsm_input_len()
            )));
        }
        if input.img.len() != arch.image_input_len() {
            return Err(Error::contract(format!(
                "image input has {} values, network expects {}",
                input.img.len(),
                arch.image_input_len()
            )));
        }

        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        let mut img_feat = vec![0.0; arch.image_features];
        let mut img_in = Vec::new();
        if branches.image {
            img_in = input.img.to_vec();
            c1 = vec![0.0; self.g1.out_len()];
            conv_forward(&self.g1, self.t(CONV1_W), self.t(CONV1_B), &img_in, &mut c1);
            tanh_inplace(&mut c1);
            c2 = vec![0.0; self.g2.out_len()];
            conv_forward(&self.g2, self.t(CONV2_W), self.t(CONV2_B), &c1, &mut c2);
            tanh_inplace(&mut c2);
            dense_forward(self.t(IMG_W), self.t(IMG_B), &c2, &mut img_feat);
            tanh_inplace(&mut img_feat);
        }

        let mut b1 = Vec::new();
        let mut b2 = vec![0.0; arch.bsm_hidden];
        let mut bsm_in = Vec::new();
        if branches.bsm {
            bsm_in = input.bsm.to_vec();
            b1 = vec![0.0; arch.bsm_hidden];
            dense_forward(self.t(BSM1_W), self.t(BSM1_B), &bsm_in, &mut b1);
            tanh_inplace(&mut b1);
            dense_forward(self.t(BSM2_W), self.t(BSM2_B), &b1, &mut b2);
            tanh_inplace(&mut b2);
        }

        let mut fused = img_feat.clone();
        fused.extend_from_slice(&b2);
        let mut trunk = vec![0.0; arch.trunk];
        dense_forward(self.t(TRUNK_W), self.t(TRUNK_B), &fused, &mut trunk);
        tanh_inplace(&mut trunk);

        let mut mean = vec![0.0; arch.action_dim];
        dense_forward(self.t(MEAN_W), self.t(MEAN_B), &trunk, &mut mean);
        let mut value = [0.0];
        dense_forward(self.t(VALUE_W), self.t(VALUE_B), &trunk, &mut value);

        Ok(ForwardPass {
            mean,
            value: value[0],
            branches,
            bsm_in,
            img_in,
            c1,
            c2,
            img_feat,
            b1,
            b2,
            fused,
            trunk,
        })
    }

    pub fn policy(&self, fp: &ForwardPass) -> GaussianPolicy {
        GaussianPolicy::new(
            fp.mean.clone(),
            self.log_std().iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect(),
        )
    }

    /// Accumulates into `grads` the gradient of a scalar loss whose partials
    /// with respect to the mean head output and value are `dmean`, `dvalue`.
    /// The log_std gradient is not touched; callers add it directly.
    pub fn backward(&self, fp: &ForwardPass, dmean: &[f64], dvalue: f64, grads: &mut [f64]) {
        let arch = &self.arch;
        let l = &self.layout;
        let mut dtrunk = vec![0.0; arch.trunk];
        {
            let (lo, hi) = grads.split_at_mut(l.tensors[MEAN_B].offset);
            let dw = &mut lo[l.range(MEAN_W)];
            let db = &mut hi[..arch.action_dim];
            dense_backward(self.t(MEAN_W), &fp.trunk, dmean, dw, db, Some(&mut dtrunk));
        }
        {
            let mut dtv = vec![0.0; arch.trunk];
            let (lo, hi) = grads.split_at_mut(l.tensors[VALUE_B].offset);
            dense_backward(self.t(VALUE_W), &fp.trunk, &[dvalue], &mut lo[l.range(VALUE_W)], &mut hi[..1], Some(&mut dtv));
            dtrunk.iter_mut().zip(&dtv).for_each(|(a, b)| *a += b);
        }
        tanh_backward(&fp.trunk, &mut dtrunk);
        let mut dfused = vec![0.0; fp.fused.len()];
        {
            let (lo, hi) = grads.split_at_mut(l.tensors[TRUNK_B].offset);
            dense_backward(self.t(TRUNK_W), &fp.fused, &dtrunk, &mut lo[l.range(TRUNK_W)], &mut hi[..arch.trunk], Some(&mut dfused));
        }
        let (dimg, dbsm) = dfused.split_at_mut(arch.image_features);

        if fp.branches.bsm {
            tanh_backward(&fp.b2, dbsm);
            let mut db1 = vec![0.0; arch.bsm_hidden];
            {
                let (lo, hi) = grads.split_at_mut(l.tensors[BSM2_B].offset);
                dense_backward(self.t(BSM2_W), &fp.b1, dbsm, &mut lo[l.range(BSM2_W)], &mut hi[..arch.bsm_hidden], Some(&mut db1));
            }
            tanh_backward(&fp.b1, &mut db1);
            let (lo, hi) = grads.split_at_mut(l.tensors[BSM1_B].offset);
            dense_backward(self.t(BSM1_W), &fp.bsm_in, &db1, &mut lo[l.range(BSM1_W)], &mut hi[..arch.bsm_hidden], None);
        }

        if fp.branches.image {
            tanh_backward(&fp.img_feat, dimg);
            let mut dc2 = vec![0.0; fp.c2.len()];
            {
                let (lo, hi) = grads.split_at_mut(l.tensors[IMG_B].offset);
                dense_backward(self.t(IMG_W), &fp.c2, dimg, &mut lo[l.range(IMG_W)], &mut hi[..arch.image_features], Some(&mut dc2));
            }
            tanh_backward(&fp.c2, &mut dc2);
            let mut dc1 = vec![0.0; fp.c1.len()];
            {
                let (lo, hi) = grads.split_at_mut(l.tensors[CONV2_B].offset);
                conv_backward(&self.g2, self.t(CONV2_W), &fp.c1, &dc2, &mut lo[l.range(CONV2_W)], &mut hi[..self.g2.out_channels], Some(&mut dc1));
            }
            tanh_backward(&fp.c1, &mut dc1);
            let (lo, hi) = grads.split_at_mut(l.tensors[CONV1_B].offset);
            conv_backward(&self.g1, self.t(CONV1_W), &fp.img_in, &dc1, &mut lo[l.range(CONV1_W)], &mut hi[..self.g1.out_channels], None);
        }
    }
}

/// Fails on the first NaN/Inf, naming the tensor it belongs to.
pub(crate) fn check_finite(layout: &Layout, values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite(format!("{what} of {} (index {i})", layout.owner(i)))),
    }
}

impl NetworkParams {
    pub fn check_gradients(&self, grads: &[f64]) -> Result<()> {
        check_finite(&self.layout, grads, "gradient")
    }
}
