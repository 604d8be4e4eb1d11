use rand::Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Diagonal Gaussian over the action vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Self {
        assert_eq!(mean.len(), log_std.len(), "mean and log_std dims differ");
        Self { mean, log_std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, action: &[f64]) -> f64 {
        assert_eq!(action.len(), self.dim(), "action dim mismatch");
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(action)
            .map(|((m, ls), a)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (1.0 + LN_2PI)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * z
            })
            .collect()
    }

    /// Partials of `log_prob(action)` w.r.t. mean and log_std.
    pub fn log_prob_grad(&self, action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dmean = Vec::with_capacity(self.dim());
        let mut dls = Vec::with_capacity(self.dim());
        for ((m, ls), a) in self.mean.iter().zip(&self.log_std).zip(action) {
            let var = (2.0 * ls).exp();
            dmean.push((a - m) / var);
            dls.push((a - m) * (a - m) / var - 1.0);
        }
        (dmean, dls)
    }
}
