//! Simulated secure aggregation. Contributions go in one at a time and only
//! their sum comes out.

use crate::error::{Error, Result};
use crate::scalar::{l2_norm, Scalar};

#[derive(Debug)]
pub struct SecureAggregator<T> {
    sum: Vec<T>,
    count: usize,
    norm_bound: Option<T>,
    max_norm: T,
}

impl<T: Scalar> SecureAggregator<T> {
    pub fn new(len: usize) -> Self {
        Self {
            sum: vec![T::zero(); len],
            count: 0,
            norm_bound: None,
            max_norm: T::zero(),
        }
    }

    /// Rejects any contribution whose L2 norm exceeds `bound`.
    pub fn with_norm_bound(len: usize, bound: T) -> Self {
        Self {
            norm_bound: Some(bound),
            ..Self::new(len)
        }
    }

    pub fn submit(&mut self, contribution: &[T]) -> Result<()> {
        if contribution.len() != self.sum.len() {
            return Err(Error::ShapeMismatch {
                expected: self.sum.len(),
                found: contribution.len(),
            });
        }
        let norm = l2_norm(contribution);
        if let Some(bound) = self.norm_bound {
            if norm > bound * T::lit(1.0 + 1e-9) {
                return Err(Error::ClipViolation {
                    norm: norm.as_f64(),
                    bound: bound.as_f64(),
                });
            }
        }
        self.max_norm = self.max_norm.max(norm);
        for (s, &x) in self.sum.iter_mut().zip(contribution) {
            *s = *s + x;
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Largest L2 norm among accepted contributions.
    pub fn max_norm(&self) -> T {
        self.max_norm
    }

    pub fn finish(self) -> Vec<T> {
        self.sum
    }
}

/// Elementwise sum of `contributions`, each of length `len`.
pub fn secure_agg_sum<T: Scalar>(contributions: &[Vec<T>], len: usize) -> Result<Vec<T>> {
    let mut agg = SecureAggregator::new(len);
    for c in contributions {
        agg.submit(c)?;
    }
    Ok(agg.finish())
}
