//! One-vs-all histogram binning over `2^M` fixed-width bins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{bin_index, PredictionSet};
use crate::scalar::{normalize_or, Scalar};

/// Largest supported bin exponent (2^20 bins per histogram).
pub const MAX_BIN_EXPONENT: u32 = 20;

/// Positive and negative count histograms for one class. Counts are reals
/// so that clipped or noised histograms share the representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogramPair<T> {
    pub pos: Vec<T>,
    pub neg: Vec<T>,
}

impl<T: Scalar> ClassHistogramPair<T> {
    pub fn zeros(bins: usize) -> Self {
        Self {
            pos: vec![T::zero(); bins],
            neg: vec![T::zero(); bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.pos.len()
    }

    pub fn total(&self) -> T {
        self.pos.iter().chain(&self.neg).copied().sum()
    }

    pub fn positive_total(&self) -> T {
        self.pos.iter().copied().sum()
    }

    /// Elementwise accumulation of another pair with the same bin count.
    pub fn accumulate(&mut self, other: &Self) -> Result<()> {
        if other.bins() != self.bins() {
            return Err(Error::ShapeMismatch {
                expected: self.bins(),
                found: other.bins(),
            });
        }
        for (a, &b) in self.pos.iter_mut().zip(&other.pos) {
            *a = *a + b;
        }
        for (a, &b) in self.neg.iter_mut().zip(&other.neg) {
            *a = *a + b;
        }
        Ok(())
    }

    /// Calibrated confidence for `p`: the positive rate of its bin, clamped
    /// to `[0, 1]`. Falls back to `p` itself when the bin holds no mass.
    pub fn rate(&self, p: T) -> T {
        let b = bin_index(p, self.bins());
        let denom = self.pos[b] + self.neg[b];
        if denom > T::zero() {
            (self.pos[b] / denom).max(T::zero()).min(T::one())
        } else {
            p
        }
    }
}

/// `c` one-vs-all binning calibrators sharing one bin exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningModel<T> {
    bin_exponent: u32,
    per_class: Vec<ClassHistogramPair<T>>,
}

pub(crate) fn check_exponent(bin_exponent: u32) -> Result<usize> {
    if bin_exponent > MAX_BIN_EXPONENT {
        return Err(Error::invalid(format!(
            "bin exponent {bin_exponent} exceeds {MAX_BIN_EXPONENT}"
        )));
    }
    Ok(1usize << bin_exponent)
}

impl<T: Scalar> BinningModel<T> {
    pub fn new(bin_exponent: u32, per_class: Vec<ClassHistogramPair<T>>) -> Result<Self> {
        let bins = check_exponent(bin_exponent)?;
        if per_class.len() < 2 {
            return Err(Error::invalid("binning needs at least two classes"));
        }
        for pair in &per_class {
            for len in [pair.pos.len(), pair.neg.len()] {
                if len != bins {
                    return Err(Error::ShapeMismatch {
                        expected: bins,
                        found: len,
                    });
                }
            }
            if pair.pos.iter().chain(&pair.neg).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("histogram"));
            }
        }
        Ok(Self {
            bin_exponent,
            per_class,
        })
    }

    pub fn bin_exponent(&self) -> u32 {
        self.bin_exponent
    }

    pub fn n_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn histograms(&self) -> &[ClassHistogramPair<T>] {
        &self.per_class
    }

    /// Unnormalized one-vs-all outputs `g_j(p_j)`.
    pub fn class_scores(&self, probs: &[T]) -> Vec<T> {
        self.per_class
            .iter()
            .zip(probs)
            .map(|(pair, &p)| pair.rate(p))
            .collect()
    }
}

/// Local positive/negative histograms for every class of `preds`.
///
/// Each sample lands in exactly one bin per class, so the total mass across
/// all histograms is `c * n`. An empty prediction set yields zeros.
pub fn binning_fit_local<T: Scalar>(
    preds: &PredictionSet<T>,
    bin_exponent: u32,
) -> Result<Vec<ClassHistogramPair<T>>> {
    let bins = check_exponent(bin_exponent)?;
    let c = preds.n_classes();
    let mut out = vec![ClassHistogramPair::zeros(bins); c];
    for (row, &y) in preds.rows().zip(preds.labels()) {
        for (j, &p) in row.iter().enumerate() {
            let b = bin_index(p, bins);
            let hist = if y == j { &mut out[j].pos } else { &mut out[j].neg };
            hist[b] = hist[b] + T::one();
        }
    }
    Ok(out)
}

/// Calibrated distribution: one-vs-all rates normalized across classes.
/// Returns the input unchanged if every rate is zero.
pub fn binning_predict<T: Scalar>(model: &BinningModel<T>, probs: &[T]) -> Vec<T> {
    normalize_or(model.class_scores(probs), probs)
}

/// Sums adjacent bins down to `target_bins`, which must divide the length.
pub fn merge_bins<T: Scalar>(hist: &[T], target_bins: usize) -> Result<Vec<T>> {
    if target_bins == 0 || hist.is_empty() || !hist.len().is_multiple_of(target_bins) {
        return Err(Error::invalid(format!(
            "cannot merge {} bins into {target_bins}",
            hist.len()
        )));
    }
    let width = hist.len() / target_bins;
    Ok(hist.chunks(width).map(|c| c.iter().copied().sum()).collect())
}

pub(crate) fn merge_pair<T: Scalar>(pair: &ClassHistogramPair<T>, target_bins: usize) -> Result<ClassHistogramPair<T>> {
    Ok(ClassHistogramPair {
        pos: merge_bins(&pair.pos, target_bins)?,
        neg: merge_bins(&pair.neg, target_bins)?,
    })
}
