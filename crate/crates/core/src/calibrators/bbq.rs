//! Bayesian averaging of binning calibrators at several granularities.
//!
//! A single `2^M`-bin histogram per class is merged into coarser
//! histograms with `2, 4, ..., 2^M` bins. Each granularity gets a Bayesian
//! score from its positive/negative counts and the per-class outputs are
//! averaged with weights proportional to those scores.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::binning::{merge_pair, BinningModel, ClassHistogramPair};
use crate::error::{Error, Result};
use crate::scalar::{normalize_or, softmax, Scalar};

/// `ln Gamma(x) - ln Gamma(x + n)`; zero when `n == 0`.
fn ln_gamma_ratio(x: f64, n: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        ln_gamma(x) - ln_gamma(x + n)
    }
}

/// Log of the BBQ score of one class histogram pair.
///
/// Noisy negative counts are clamped to zero first. `N'` is the total
/// sample count of the histogram; `alpha_b = (2/B) p_b` and
/// `beta_b = (2/B)(1 - p_b)` with `p_b` the bin midpoint.
pub fn bbq_log_score<T: Scalar>(pair: &ClassHistogramPair<T>) -> Result<T> {
    let bins = pair.bins();
    if bins == 0 || pair.neg.len() != bins {
        return Err(Error::invalid("histogram pair must have matching nonzero length"));
    }
    if pair.pos.iter().chain(&pair.neg).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("histogram"));
    }
    let pos: Vec<f64> = pair.pos.iter().map(|x| x.as_f64().max(0.0)).collect();
    let neg: Vec<f64> = pair.neg.iter().map(|x| x.as_f64().max(0.0)).collect();
    let b_count = bins as f64;
    let n_prime: f64 = pos.iter().chain(&neg).sum();
    let prior = n_prime / b_count;
    let mut total = 0.0;
    for b in 0..bins {
        let mid = (b as f64 + 0.5) / b_count;
        let alpha = 2.0 / b_count * mid;
        let beta = 2.0 / b_count * (1.0 - mid);
        total += ln_gamma_ratio(prior, pos[b] + neg[b]);
        total -= ln_gamma_ratio(alpha, pos[b]);
        total -= ln_gamma_ratio(beta, neg[b]);
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("BBQ score"));
    }
    Ok(T::lit(total))
}

/// One granularity: merged histograms and per-class log scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbqLevel<T> {
    pub bin_exponent: u32,
    pub per_class: Vec<ClassHistogramPair<T>>,
    pub log_scores: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbqModel<T> {
    base: BinningModel<T>,
    levels: Vec<BbqLevel<T>>,
}

impl<T: Scalar> BbqModel<T> {
    /// Builds levels with `2^1, ..., 2^M` bins from a `2^M`-bin model.
    pub fn from_binning(base: BinningModel<T>) -> Result<Self> {
        let m = base.bin_exponent();
        let exponents: Vec<u32> = if m == 0 { vec![0] } else { (1..=m).collect() };
        Self::with_levels(base, &exponents)
    }

    /// Builds the listed granularities (each exponent at most the base's).
    pub fn with_levels(base: BinningModel<T>, exponents: &[u32]) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::invalid("BBQ needs at least one granularity"));
        }
        let levels = exponents
            .iter()
            .map(|&e| {
                if e > base.bin_exponent() {
                    return Err(Error::invalid(format!(
                        "granularity 2^{e} exceeds base 2^{}",
                        base.bin_exponent()
                    )));
                }
                let per_class = base
                    .histograms()
                    .iter()
                    .map(|pair| merge_pair(pair, 1 << e))
                    .collect::<Result<Vec<_>>>()?;
                let log_scores = per_class.iter().map(bbq_log_score).collect::<Result<Vec<_>>>()?;
                Ok(BbqLevel {
                    bin_exponent: e,
                    per_class,
                    log_scores,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { base, levels })
    }

    pub fn base(&self) -> &BinningModel<T> {
        &self.base
    }

    pub fn levels(&self) -> &[BbqLevel<T>] {
        &self.levels
    }

    pub fn n_classes(&self) -> usize {
        self.base.n_classes()
    }

    /// Normalized level weights for class `j` (softmax of log scores).
    pub fn level_weights(&self, class: usize) -> Vec<T> {
        let logs: Vec<T> = self.levels.iter().map(|l| l.log_scores[class]).collect();
        softmax(&logs)
    }

    /// Unnormalized per-class score-weighted averages.
    pub fn class_scores(&self, probs: &[T]) -> Vec<T> {
        probs
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                self.level_weights(j)
                    .into_iter()
                    .zip(&self.levels)
                    .map(|(w, level)| w * level.per_class[j].rate(p))
                    .sum()
            })
            .collect()
    }
}

pub fn bbq_predict<T: Scalar>(model: &BbqModel<T>, probs: &[T]) -> Vec<T> {
    normalize_or(model.class_scores(probs), probs)
}
