use rand::Rng;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{common_class_count, ClientDataset, LogitRecord, Split};
use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::scalar::Scalar;

/// Dirichlet label-skew parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    /// Concentration; smaller means more skew.
    pub beta: f64,
    pub clients: usize,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if self.clients < 1 {
            return Err(Error::invalid("at least one client is required"));
        }
        Ok(())
    }
}

/// Draws `Dirichlet(beta * 1^k)` in log space so that tiny concentrations do
/// not underflow every component to zero.
fn dirichlet_symmetric(beta: f64, k: usize, rng: &mut SimRng) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    // G(beta) = G(beta + 1) * U^(1 / beta)
    let gamma = Gamma::new(beta + 1.0, 1.0).expect("positive shape");
    let logs: Vec<f64> = (0..k)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let u = 1.0 - rng.random::<f64>();
            g.ln() + u.ln() / beta
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn categorical(weights: &[f64], rng: &mut SimRng) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

/// Splits `records` across `spec.clients` clients with Dirichlet label skew.
///
/// One allocation vector `p_j ~ Dir(beta)` is drawn per class; each record of
/// class `j` then goes to client `k` with probability `p_jk`. Records keep
/// their input order within each client.
pub fn dirichlet_label_skew_partition<T: Scalar>(
    records: &[LogitRecord<T>],
    spec: &PartitionSpec,
) -> Result<Vec<ClientDataset<T>>> {
    spec.validate()?;
    let c = common_class_count(records)?.unwrap_or(0);
    let mut rng = rng::stream(spec.seed, &[rng::tags::PARTITION]);
    let allocation: Vec<Vec<f64>> = (0..c)
        .map(|_| dirichlet_symmetric(spec.beta, spec.clients, &mut rng))
        .collect();
    let mut clients: Vec<ClientDataset<T>> = (0..spec.clients)
        .map(|k| ClientDataset::new(k, Vec::new()))
        .collect();
    for r in records {
        let k = categorical(&allocation[r.label], &mut rng);
        clients[k].records.push(r.clone());
    }
    Ok(clients)
}

/// Train / calibration / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub calibration: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            calibration: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.calibration, self.test];
        if parts.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::invalid("split fractions must be positive"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split fractions must sum to 1"));
        }
        Ok(())
    }
}

/// Split sizes by largest remainder: every part gets `floor(n * f)`, then
/// leftover records go to the parts with the largest fractional remainder,
/// Train first on ties.
pub fn split_sizes(n: usize, fractions: &SplitFractions) -> [usize; 3] {
    let exact = [
        n as f64 * fractions.train,
        n as f64 * fractions.calibration,
        n as f64 * fractions.test,
    ];
    let mut sizes = exact.map(|x| x.floor() as usize);
    let mut leftover = n.saturating_sub(sizes.iter().sum());
    let mut order = [0usize, 1, 2];
    // stable sort keeps Train ahead of equal remainders
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }
    sizes
}

/// Shuffles a client's records deterministically by `(seed, client_id)` and
/// tags them train / calibration / test.
pub fn split_local<T: Scalar>(
    client: &ClientDataset<T>,
    fractions: &SplitFractions,
    seed: u64,
) -> Result<ClientDataset<T>> {
    fractions.validate()?;
    if client.is_empty() {
        log::warn!("client {} has no records; all splits empty", client.client_id);
        return Ok(client.clone());
    }
    let mut records = client.records.clone();
    let mut rng = rng::stream(seed, &[rng::tags::SPLIT, client.client_id as u64]);
    records.shuffle(&mut rng);
    let [n_train, n_cal, _] = split_sizes(records.len(), fractions);
    for (i, r) in records.iter_mut().enumerate() {
        r.split = if i < n_train {
            Split::Train
        } else if i < n_train + n_cal {
            Split::Calibration
        } else {
            Split::Test
        };
    }
    Ok(ClientDataset::new(client.client_id, records))
}
