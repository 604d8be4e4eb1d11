use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ImageFrame;
use crate::mdp_env::RawState;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNoise {
    pub mean: f64,
    pub std: f64,
}

/// Observation noise at full strength plus the active `level` in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub pos: GaussianNoise,
    pub speed: GaussianNoise,
    pub accel: GaussianNoise,
    /// Upper bound of the uniformly drawn blur standard deviation (pixels).
    pub image_std_max: f64,
    pub level: f64,
    /// Drop the bias terms for controlled studies.
    pub zero_mean: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            pos: GaussianNoise { mean: 1.5, std: 1.0 },
            speed: GaussianNoise { mean: 0.2777, std: 1.0 },
            accel: GaussianNoise { mean: 0.3, std: 1.0 },
            image_std_max: 1.0,
            level: 1.0,
            zero_mean: false,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for g in [self.pos, self.speed, self.accel] {
            if !(g.std >= 0.0) || !g.mean.is_finite() {
                return Err(Error::config("noise std must be >= 0 and mean finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.level) {
            return Err(Error::config(format!("noise level must lie in [0, 1], got {}", self.level)));
        }
        if !(self.image_std_max >= 0.0) {
            return Err(Error::config("image_std_max must be >= 0"));
        }
        Ok(())
    }

    /// Distribution actually sampled for a field at the current level.
    pub fn scaled(&self, g: GaussianNoise) -> GaussianNoise {
        let mean = if self.zero_mean { 0.0 } else { g.mean };
        GaussianNoise { mean: self.level * mean, std: self.level * g.std }
    }
}

/// Same spec at `percent`% of full strength.
pub fn scale_noise(spec: &NoiseSpec, percent: f64) -> Result<NoiseSpec> {
    if !(0.0..=100.0).contains(&percent) {
        return Err(Error::config(format!("noise percent must lie in [0, 100], got {percent}")));
    }
    Ok(NoiseSpec { level: percent / 100.0, ..spec.clone() })
}

fn sample<R: Rng + ?Sized>(g: GaussianNoise, rng: &mut R) -> f64 {
    Normal::new(g.mean, g.std).expect("validated std").sample(rng)
}

/// Adds independent Gaussian noise to every position, speed and acceleration
/// field of the broadcasting vehicles. Sentinel slots are left alone.
pub fn augment_bsm<R: Rng + ?Sized>(raw: &mut RawState, spec: &NoiseSpec, rng: &mut R) {
    if spec.level == 0.0 {
        return;
    }
    let pos = spec.scaled(spec.pos);
    let speed = spec.scaled(spec.speed);
    let accel = spec.scaled(spec.accel);
    for slot in raw.slots_mut().filter(|s| s.present) {
        slot.x += sample(pos, rng);
        slot.y += sample(pos, rng);
        slot.v += sample(speed, rng);
        slot.acc += sample(accel, rng);
    }
}

pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (2.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable blur with clamp-to-edge borders, in floating point.
pub fn gaussian_blur_f64(data: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; data.len()];
    for row in 0..height {
        for col in 0..width {
            tmp[row * width + col] = k
                .iter()
                .enumerate()
                .map(|(j, w)| w * data[row * width + clamp(col as i64 + j as i64 - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; data.len()];
    for row in 0..height {
        for col in 0..width {
            out[row * width + col] = k
                .iter()
                .enumerate()
                .map(|(j, w)| w * tmp[clamp(row as i64 + j as i64 - r, height) * width + col])
                .sum();
        }
    }
    out
}

/// Blurs with a fixed sigma; below 0.05 px the frame is returned unchanged.
pub fn blur_with_sigma(img: &ImageFrame, sigma: f64) -> ImageFrame {
    if sigma < 0.05 {
        return img.clone();
    }
    let data: Vec<f64> = img.data.iter().map(|&v| v as f64).collect();
    let blurred = gaussian_blur_f64(&data, img.width, img.height, sigma);
    ImageFrame {
        width: img.width,
        height: img.height,
        data: blurred.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect(),
    }
}

/// Gaussian blur whose standard deviation is drawn from `U[0, level * image_std_max]`.
pub fn augment_image<R: Rng + ?Sized>(img: &ImageFrame, spec: &NoiseSpec, rng: &mut R) -> ImageFrame {
    let upper = spec.level * spec.image_std_max;
    if upper <= 0.0 {
        return img.clone();
    }
    let sigma = rng.gen_range(0.0..upper);
    blur_with_sigma(img, sigma)
}
