//! Per-class blending of a binning calibrator with the base confidences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{argmax, normalize_or, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    None,
    /// Blend every prediction.
    AllWeight,
    /// Blend only predictions whose argmax the calibrator would change.
    ChangedWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec<T> {
    pub mode: WeightMode,
    pub alphas: Vec<T>,
}

/// `clip(aggregated / total, 1)`; a class with no examples gets 0.
pub fn alpha_nonprivate<T: Scalar>(aggregated: T, total: T) -> Result<T> {
    if aggregated < T::zero() || total < T::zero() {
        return Err(Error::invalid("class counts must be nonnegative"));
    }
    if total == T::zero() {
        return Ok(T::zero());
    }
    Ok((aggregated / total).min(T::one()))
}

/// `clip(aggregated / (sqrt(2/pi) * sigma * hist_len), 1)`: the noisy class
/// count relative to the expected absolute noise mass of the histogram.
/// Negative noisy counts are clamped to 0.
pub fn alpha_private<T: Scalar>(aggregated: T, sigma: T, hist_len: usize) -> Result<T> {
    if !(sigma > T::zero()) || hist_len == 0 {
        return Err(Error::invalid("sigma and histogram length must be positive"));
    }
    let expected_noise = T::lit((2.0 / std::f64::consts::PI).sqrt()) * sigma * T::from_usize_lossy(hist_len);
    Ok((aggregated.max(T::zero()) / expected_noise).min(T::one()))
}

impl<T: Scalar> WeightSpec<T> {
    pub fn new(mode: WeightMode, alphas: Vec<T>) -> Self {
        let alphas = alphas
            .into_iter()
            .map(|a| if a.is_nan() { T::zero() } else { a.max(T::zero()).min(T::one()) })
            .collect();
        Self { mode, alphas }
    }

    /// Combines base confidences with the inner calibrator's unnormalized
    /// one-vs-all scores.
    pub fn apply(&self, base: &[T], scores: Vec<T>) -> Vec<T> {
        match self.mode {
            WeightMode::None => normalize_or(scores, base),
            WeightMode::AllWeight => self.blend(base, &scores),
            WeightMode::ChangedWeight => {
                let calibrated = normalize_or(scores.clone(), base);
                if argmax(&calibrated) != argmax(base) {
                    self.blend(base, &scores)
                } else {
                    calibrated
                }
            }
        }
    }

    fn blend(&self, base: &[T], scores: &[T]) -> Vec<T> {
        if self.alphas.iter().all(|a| a.is_zero()) {
            return base.to_vec();
        }
        let mixed = base
            .iter()
            .zip(scores)
            .zip(&self.alphas)
            .map(|((&p, &g), &a)| a * g + (T::one() - a) * p)
            .collect();
        normalize_or(mixed, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nonprivate_alpha_cases() {
        assert_eq!(alpha_nonprivate(40.0, 40.0).unwrap(), 1.0);
        assert_eq!(alpha_nonprivate(0.0, 40.0).unwrap(), 0.0);
        assert_eq!(alpha_nonprivate(80.0, 40.0).unwrap(), 1.0);
        assert_eq!(alpha_nonprivate(5.0, 0.0).unwrap(), 0.0);
        assert!(alpha_nonprivate(-1.0, 4.0).is_err());
    }

    #[test]
    fn private_alpha_cases() {
        let direct = 100.0 / ((2.0 / std::f64::consts::PI).sqrt() * 5.0 * 128.0);
        assert_abs_diff_eq!(direct, 0.1958, epsilon = 1e-4);
        assert_abs_diff_eq!(alpha_private(100.0, 5.0, 128).unwrap(), direct, epsilon = 1e-15);
        let boundary = (2.0 / std::f64::consts::PI).sqrt() * 5.0 * 128.0;
        assert_abs_diff_eq!(alpha_private(boundary, 5.0, 128).unwrap(), 1.0, epsilon = 1e-12);
        assert!(alpha_private(100.0, 1e12, 128).unwrap() < 1e-9);
        assert_eq!(alpha_private(-30.0, 5.0, 128).unwrap(), 0.0);
        assert!(alpha_private(1.0, 0.0, 4).is_err());
    }

    #[test]
    fn zero_alpha_is_identity_one_alpha_is_inner() {
        let base = [0.2, 0.5, 0.3];
        let scores = vec![0.9, 0.1, 0.4];
        let zero = WeightSpec::new(WeightMode::AllWeight, vec![0.0; 3]);
        assert_eq!(zero.apply(&base, scores.clone()), base.to_vec());
        let one = WeightSpec::new(WeightMode::AllWeight, vec![1.0; 3]);
        let inner = normalize_or(scores.clone(), &base);
        for (a, b) in one.apply(&base, scores).iter().zip(&inner) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn mixed_alpha_convex_combination() {
        let base = [0.2, 0.5, 0.3];
        let scores = vec![0.9, 0.1, 0.4];
        let spec = WeightSpec::new(WeightMode::AllWeight, vec![0.5, 0.25, 1.0]);
        let mixed = [0.5 * 0.9 + 0.5 * 0.2, 0.25 * 0.1 + 0.75 * 0.5, 0.4];
        let total: f64 = mixed.iter().sum();
        let out = spec.apply(&base, scores);
        for (o, m) in out.iter().zip(mixed) {
            assert_abs_diff_eq!(*o, m / total, epsilon = 1e-15);
        }
    }

    #[test]
    fn changed_weight_only_blends_flipped_predictions() {
        let spec = WeightSpec::new(WeightMode::ChangedWeight, vec![0.0, 0.0]);
        // calibrator keeps argmax 0: unweighted output
        let kept = spec.apply(&[0.7, 0.3], vec![0.6, 0.2]);
        assert_abs_diff_eq!(kept[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(kept[1], 0.25, epsilon = 1e-15);
        // calibrator flips argmax: weighted (alpha 0 -> base)
        assert_eq!(spec.apply(&[0.7, 0.3], vec![0.1, 0.3]), vec![0.7, 0.3]);
    }

    #[test]
    fn alphas_are_clipped() {
        let spec = WeightSpec::new(WeightMode::AllWeight, vec![-0.5, 1.5, f64::NAN]);
        assert_eq!(spec.alphas, vec![0.0, 1.0, 0.0]);
    }
}
