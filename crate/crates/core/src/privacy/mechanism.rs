//! Clipping and the Gaussian mechanism.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::calibrators::ClassHistogramPair;
use crate::scalar::{l2_norm, Scalar};

/// Projects `v` onto the L2 ball of radius `bound`.
pub fn clip_l2<T: Scalar>(v: &[T], bound: T) -> Vec<T> {
    let norm = l2_norm(v);
    if norm <= bound {
        v.to_vec()
    } else {
        let factor = bound / norm;
        v.iter().map(|&x| x * factor).collect()
    }
}

/// Clips the positive and negative histograms of one class independently.
pub fn clip_histogram_pair<T: Scalar>(pair: &ClassHistogramPair<T>, clip_pos: T, clip_neg: T) -> ClassHistogramPair<T> {
    ClassHistogramPair {
        pos: clip_l2(&pair.pos, clip_pos),
        neg: clip_l2(&pair.neg, clip_neg),
    }
}

/// `v + sensitivity * N(0, sigma^2 I)`, where `sigma` is the unitless noise
/// multiplier. One call satisfies `1/(2 sigma^2)`-zCDP.
pub fn gaussian_mechanism<T: Scalar, R: Rng + ?Sized>(v: &[T], sensitivity: f64, sigma: f64, rng: &mut R) -> Vec<T> {
    let scale = sensitivity * sigma;
    v.iter()
        .map(|&x| {
            let draw: f64 = rng.sample(StandardNormal);
            x + T::lit(scale * draw)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn clip_cases() {
        let v = [0.3_f64, 0.0];
        assert_eq!(clip_l2(&v, 1.0), v.to_vec());
        let clipped = clip_l2(&[3.0_f64, 4.0], 1.0);
        assert!((clipped[0] - 0.6).abs() < 1e-15 && (clipped[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn histogram_clip_is_per_side() {
        let pair = ClassHistogramPair {
            pos: vec![6.0_f64, 8.0],
            neg: vec![1.0, 1.0],
        };
        let out = clip_histogram_pair(&pair, 5.0, 50.0);
        assert_eq!(out.pos, vec![3.0, 4.0]);
        assert_eq!(out.neg, pair.neg);
        let zero = ClassHistogramPair::<f64>::zeros(4);
        assert_eq!(clip_histogram_pair(&zero, 1.0, 1.0), zero);
    }

    #[test]
    fn tiny_sigma_is_nearly_identity() {
        let v = vec![1.0_f64, -2.0, 3.5];
        let mut rng = stream(1, &[0]);
        let out = gaussian_mechanism(&v, 2.0, 1e-12, &mut rng);
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b).abs() < 1e-9 * 2.0);
        }
    }

    #[test]
    fn fixed_seed_reproduces_noise() {
        let v = vec![0.0_f64; 5];
        let a = gaussian_mechanism(&v, 1.0, 1.0, &mut stream(9, &[1]));
        let b = gaussian_mechanism(&v, 1.0, 1.0, &mut stream(9, &[1]));
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_noise_std() {
        let n = 100_000;
        let v = vec![0.0_f64; n];
        let out = gaussian_mechanism(&v, 2.5, 1.3, &mut stream(3, &[7]));
        let mean: f64 = out.iter().sum::<f64>() / n as f64;
        let var: f64 = out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected = 2.5 * 1.3;
        assert!((var.sqrt() - expected).abs() / expected < 0.02);
    }

    proptest! {
        #[test]
        fn clip_bounds_norm_and_is_idempotent(v in prop::collection::vec(-100.0f64..100.0, 1..20), c in 0.01f64..50.0) {
            let once = clip_l2(&v, c);
            prop_assert!(l2_norm(&once) <= c * (1.0 + 1e-12));
            let twice = clip_l2(&once, c);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12 * c.max(1.0));
            }
        }
    }
}
