//! Poisson client sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, tags};

/// Includes each of `n_clients` independently with probability `p`. The
/// draw depends only on `(seed, round)`. An empty draw is retried once;
/// a second empty draw is returned as is.
pub fn sample_participants(n_clients: usize, p: f64, seed: u64, round: usize) -> Result<Vec<usize>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("participation must lie in (0, 1], got {p}")));
    }
    let mut rng = stream(seed, &[tags::SAMPLING, round as u64]);
    let mut draw = || -> Vec<usize> { (0..n_clients).filter(|_| p >= 1.0 || rng.random::<f64>() < p).collect() };
    let first = draw();
    if first.is_empty() {
        Ok(draw())
    } else {
        Ok(first)
    }
}
