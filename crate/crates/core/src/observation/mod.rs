//! Agent-side observation pipeline: BSM vectors, top-down frames, frame
//! stacking and noise augmentation.

mod augment;
mod bsm;
mod image;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use augment::{
    augment_bsm, augment_image, blur_with_sigma, gaussian_blur_f64, gaussian_kernel, scale_noise,
    GaussianNoise, NoiseSpec,
};
pub use bsm::{decode_bsm, encode_bsm, encode_slots, BsmScales, BsmVector, BSM_LEN};
pub use image::{rasterize, ImageFrame, WindowConfig, BACKGROUND, EGO, MARKING, ROAD, VEHICLE};

use crate::mdp_env::RawState;

pub const STACK_DEPTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "bsm")]
    BsmOnly,
    #[serde(rename = "image")]
    ImageOnly,
    #[serde(rename = "multi")]
    Multi,
    #[serde(rename = "multi-aug")]
    MultiAugmented,
}

impl Modality {
    pub fn uses_bsm(self) -> bool {
        self != Modality::ImageOnly
    }

    pub fn uses_image(self) -> bool {
        self != Modality::BsmOnly
    }

    pub const ALL: [Modality; 4] = [Modality::BsmOnly, Modality::ImageOnly, Modality::Multi, Modality::MultiAugmented];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::BsmOnly => "bsm",
            Modality::ImageOnly => "image",
            Modality::Multi => "multi",
            Modality::MultiAugmented => "multi-aug",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bsm" => Some(Modality::BsmOnly),
            "image" => Some(Modality::ImageOnly),
            "multi" => Some(Modality::Multi),
            "multi-aug" => Some(Modality::MultiAugmented),
            _ => None,
        }
    }
}

/// Last four BSM vectors and frames, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedObservation {
    pub bsm: Vec<BsmVector>,
    pub img: Vec<ImageFrame>,
}

impl StackedObservation {
    pub fn reset(bsm: BsmVector, img: ImageFrame) -> Self {
        Self { bsm: vec![bsm; STACK_DEPTH], img: vec![img; STACK_DEPTH] }
    }

    /// Drops the oldest frame and appends the newest.
    pub fn push(&mut self, bsm: BsmVector, img: ImageFrame) {
        self.bsm.remove(0);
        self.bsm.push(bsm);
        self.img.remove(0);
        self.img.push(img);
    }

    pub fn bsm_flat(&self) -> Vec<f64> {
        self.bsm.iter().flat_map(|b| b.0.iter().copied()).collect()
    }

    pub fn img_flat(&self) -> Vec<u8> {
        self.img.iter().flat_map(|f| f.data.iter().copied()).collect()
    }
}

/// Per-environment observation builder with its own noise generator.
#[derive(Clone, Debug)]
pub struct ObservationPipeline {
    scales: BsmScales,
    modality: Modality,
    noise: Option<NoiseSpec>,
    rng: ChaCha8Rng,
    stack: Option<StackedObservation>,
}

impl ObservationPipeline {
    pub fn new(scales: BsmScales, modality: Modality, noise: Option<NoiseSpec>, seed: u64) -> Self {
        let noise = noise.filter(|n| n.level > 0.0);
        Self { scales, modality, noise, rng: ChaCha8Rng::seed_from_u64(seed), stack: None }
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    /// Perturbs (if noisy), encodes and zero-fills the unused modality.
    pub fn frame(&mut self, raw: &RawState) -> (BsmVector, ImageFrame) {
        let (w, h) = (raw.img.width, raw.img.height);
        let bsm = if self.modality.uses_bsm() {
            match &self.noise {
                Some(spec) => {
                    let mut noisy = raw.clone();
                    augment_bsm(&mut noisy, spec, &mut self.rng);
                    encode_bsm(&noisy, &self.scales)
                }
                None => encode_bsm(raw, &self.scales),
            }
        } else {
            BsmVector::zeros()
        };
        let img = if self.modality.uses_image() {
            match &self.noise {
                Some(spec) => augment_image(&raw.img, spec, &mut self.rng),
                None => raw.img.clone(),
            }
        } else {
            ImageFrame::blank(w, h)
        };
        (bsm, img)
    }

    pub fn reset(&mut self, raw: &RawState) -> &StackedObservation {
        let (bsm, img) = self.frame(raw);
        self.stack.insert(StackedObservation::reset(bsm, img))
    }

    pub fn push(&mut self, raw: &RawState) -> &StackedObservation {
        let (bsm, img) = self.frame(raw);
        if let Some(stack) = self.stack.as_mut() {
            stack.push(bsm, img);
        } else {
            self.stack = Some(StackedObservation::reset(bsm, img));
        }
        self.stack.as_ref().expect("stack initialized above")
    }

    pub fn current(&self) -> Option<&StackedObservation> {
        self.stack.as_ref()
    }
}

#[cfg(test)]
mod tests;
