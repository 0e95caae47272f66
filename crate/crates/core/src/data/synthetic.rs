use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LogitRecord, Split};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{softmax, Scalar};

/// Parameters of the synthetic miscalibrated-logit generator.
///
/// Ground-truth logits are drawn around per-class Gaussian means
/// `separation * e_k`, labels are sampled from `softmax(z)` (so `z` is
/// calibrated by construction), and the emitted logits are
/// `true_temp * z`. Temperature scaling with `a = true_temp` therefore
/// recovers the calibrated model exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub n_samples: usize,
    pub true_temp: f64,
    /// Mixture weights over the latent class means; uniform when empty.
    pub class_weights: Vec<f64>,
    /// Distance of each class mean from the origin along its own axis.
    pub separation: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_classes: 10,
            n_samples: 10_000,
            true_temp: 3.0,
            class_weights: Vec::new(),
            separation: 3.0,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::invalid("synthetic data needs at least two classes"));
        }
        if self.n_samples < 1 {
            return Err(Error::invalid("synthetic data needs at least one sample"));
        }
        if !(self.true_temp > 0.0 && self.true_temp.is_finite()) {
            return Err(Error::invalid("true_temp must be positive"));
        }
        if !(self.noise_std >= 0.0) || !self.separation.is_finite() {
            return Err(Error::invalid("separation and noise_std must be finite, noise_std >= 0"));
        }
        if !self.class_weights.is_empty() {
            if self.class_weights.len() != self.n_classes {
                return Err(Error::ShapeMismatch {
                    expected: self.n_classes,
                    found: self.class_weights.len(),
                });
            }
            if self.class_weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite())
                || self.class_weights.iter().sum::<f64>() <= 0.0
            {
                return Err(Error::invalid("class weights must be nonnegative with a positive sum"));
            }
        }
        Ok(())
    }
}

/// Generates `n_samples` records (tagged `Train`; splitting happens later).
pub fn synthetic_miscalibrated_generate<T: Scalar>(spec: &SyntheticSpec) -> Result<Vec<LogitRecord<T>>> {
    spec.validate()?;
    let c = spec.n_classes;
    let weights: Vec<f64> = if spec.class_weights.is_empty() {
        vec![1.0; c]
    } else {
        spec.class_weights.clone()
    };
    let total: f64 = weights.iter().sum();
    let mut rng = rng::stream(spec.seed, &[rng::tags::DATA]);
    let mut out = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut latent = c - 1;
        for (k, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                latent = k;
                break;
            }
        }
        let z: Vec<f64> = (0..c)
            .map(|j| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let mean = if j == latent { spec.separation } else { 0.0 };
                mean + spec.noise_std * eps
            })
            .collect();
        let p = softmax(&z);
        let u = rng.random::<f64>();
        let mut acc = 0.0;
        let mut label = c - 1;
        for (j, &pj) in p.iter().enumerate() {
            acc += pj;
            if u < acc {
                label = j;
                break;
            }
        }
        let logits = z.iter().map(|&x| T::lit(spec.true_temp * x)).collect();
        out.push(LogitRecord::new(label, logits, Split::Train)?);
    }
    Ok(out)
}
