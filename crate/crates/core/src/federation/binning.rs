//! Federated histogram binning and BBQ: clients send per-class positive and
//! negative histograms, the server sums them across participants and rounds.

use serde::{Deserialize, Serialize};

use crate::calibrators::{
    alpha_nonprivate, alpha_private, binning_fit_local, BbqModel, BinningModel, Calibrator, ClassHistogramPair,
    WeightMode, WeightSpec,
};
use crate::data::{common_class_count, ClientDataset, Split};
use crate::error::{Error, Result};
use crate::metrics::PredictionSet;
use crate::privacy::{clip_histogram_pair, gaussian_mechanism, ClipSpec};
use crate::rng::{stream, tags};
use crate::scalar::Scalar;

use super::report::{AlphaSummary, EvalSet, RoundConfig, RoundReport};
use super::sampling::sample_participants;
use super::secagg::SecureAggregator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningVariant {
    Histogram,
    Bbq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedBinningOptions {
    pub bin_exponent: u32,
    pub variant: BinningVariant,
    pub weighting: WeightMode,
}

impl Default for FedBinningOptions {
    fn default() -> Self {
        Self {
            bin_exponent: 7,
            variant: BinningVariant::Histogram,
            weighting: WeightMode::None,
        }
    }
}

/// Server-side running sum of per-class histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateState<T> {
    pub per_class: Vec<ClassHistogramPair<T>>,
    /// Rounds folded in so far.
    pub rounds: usize,
}

impl<T: Scalar> AggregateState<T> {
    pub fn empty(n_classes: usize, bins: usize) -> Self {
        Self {
            per_class: vec![ClassHistogramPair::zeros(bins); n_classes],
            rounds: 0,
        }
    }

    /// Adds one round's aggregated histograms.
    pub fn accumulate(&mut self, round: &[ClassHistogramPair<T>]) -> Result<()> {
        if round.len() != self.per_class.len() {
            return Err(Error::ShapeMismatch {
                expected: self.per_class.len(),
                found: round.len(),
            });
        }
        for (acc, pair) in self.per_class.iter_mut().zip(round) {
            acc.accumulate(pair)?;
        }
        self.rounds += 1;
        Ok(())
    }

    /// Combines two states; associative and commutative.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        let rounds = other.rounds;
        self.accumulate(&other.per_class)?;
        self.rounds = self.rounds - 1 + rounds;
        Ok(())
    }

    /// Estimated positive count per class, clamped below at 0.
    pub fn class_counts(&self) -> Vec<T> {
        self.per_class.iter().map(|p| p.positive_total().max(T::zero())).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FedBinningOutcome<T> {
    pub calibrator: Calibrator<T>,
    pub state: AggregateState<T>,
    pub alphas: Vec<T>,
    pub reports: Vec<RoundReport>,
}

fn client_histograms<T: Scalar>(
    client: &ClientDataset<T>,
    n_classes: usize,
    bin_exponent: u32,
) -> Result<Vec<ClassHistogramPair<T>>> {
    let (logits, labels) = client.split_arrays(Split::Calibration);
    let preds = if logits.is_empty() {
        PredictionSet::from_flat(n_classes, Vec::new(), Vec::new())?
    } else {
        PredictionSet::from_logits(&logits, labels)?
    };
    binning_fit_local(&preds, bin_exponent)
}

/// Builds the calibrator from the accumulated histograms.
pub fn build_binning_calibrator<T: Scalar>(
    state: &AggregateState<T>,
    opts: &FedBinningOptions,
    alphas: &[T],
) -> Result<Calibrator<T>> {
    let model = BinningModel::new(opts.bin_exponent, state.per_class.clone())?;
    let inner = match opts.variant {
        BinningVariant::Histogram => Calibrator::Binning { model },
        BinningVariant::Bbq => Calibrator::Bbq {
            model: BbqModel::from_binning(model)?,
        },
    };
    Ok(match opts.weighting {
        WeightMode::None => inner,
        mode => Calibrator::Weighted {
            inner: Box::new(inner),
            weights: WeightSpec::new(mode, alphas.to_vec()),
        },
    })
}

/// Multi-round federated binning. Histograms accumulate across rounds;
/// under a privacy plan each client's histograms are clipped and the server
/// adds Gaussian noise once per aggregated histogram per round.
pub fn run_fed_binning<T: Scalar>(
    clients: &[ClientDataset<T>],
    opts: &FedBinningOptions,
    cfg: &RoundConfig,
) -> Result<FedBinningOutcome<T>> {
    cfg.validate()?;
    let n_classes = common_class_count(clients.iter().flat_map(|c| c.records.iter()))?.ok_or(Error::EmptyInput)?;
    let bins = 1usize << opts.bin_exponent;
    let (clip_pos, clip_neg, multiplier) = match &cfg.privacy {
        Some(plan) => match plan.clip {
            ClipSpec::Binning { c_plus, c_minus } => {
                if plan.n_classes != n_classes {
                    return Err(Error::InconsistentPlan(format!(
                        "plan covers {} classes, data has {n_classes}",
                        plan.n_classes
                    )));
                }
                (c_plus, c_minus, Some(plan.noise_multiplier))
            }
            ClipSpec::Scaling { .. } => {
                return Err(Error::InconsistentPlan("binning needs binning clip norms".into()))
            }
        },
        None => (0.0, 0.0, None),
    };

    // Total class counts over every client's calibration split, used by the
    // non-private weights.
    let mut class_totals = vec![T::zero(); n_classes];
    for client in clients {
        for r in client.split(Split::Calibration) {
            class_totals[r.label] = class_totals[r.label] + T::one();
        }
    }

    let eval = EvalSet::from_clients(clients, Split::Test);
    let mut state = AggregateState::empty(n_classes, bins);
    let mut reports = Vec::with_capacity(cfg.rounds);
    let mut alphas = vec![T::zero(); n_classes];
    let mut calibrator = None;

    for t in 0..cfg.rounds {
        let participants = sample_participants(clients.len(), cfg.participation, cfg.seed, t)?;
        let mut pos_aggs: Vec<SecureAggregator<T>> = (0..n_classes)
            .map(|_| match multiplier {
                Some(_) => SecureAggregator::with_norm_bound(bins, T::lit(clip_pos)),
                None => SecureAggregator::new(bins),
            })
            .collect();
        let mut neg_aggs: Vec<SecureAggregator<T>> = (0..n_classes)
            .map(|_| match multiplier {
                Some(_) => SecureAggregator::with_norm_bound(bins, T::lit(clip_neg)),
                None => SecureAggregator::new(bins),
            })
            .collect();
        for &k in &participants {
            let hists = client_histograms(&clients[k], n_classes, opts.bin_exponent)?;
            for (j, pair) in hists.iter().enumerate() {
                let pair = match multiplier {
                    Some(_) => clip_histogram_pair(pair, T::lit(clip_pos), T::lit(clip_neg)),
                    None => pair.clone(),
                };
                pos_aggs[j].submit(&pair.pos)?;
                neg_aggs[j].submit(&pair.neg)?;
            }
        }
        let max_norm = pos_aggs
            .iter()
            .chain(&neg_aggs)
            .map(|a| a.max_norm().as_f64())
            .fold(0.0, f64::max);
        let mut round_hists = Vec::with_capacity(n_classes);
        for (j, (pa, na)) in pos_aggs.into_iter().zip(neg_aggs).enumerate() {
            let (mut pos, mut neg) = (pa.finish(), na.finish());
            if let Some(z) = multiplier {
                let mut rng = stream(cfg.seed, &[tags::NOISE, t as u64, j as u64]);
                pos = gaussian_mechanism(&pos, clip_pos, z, &mut rng);
                neg = gaussian_mechanism(&neg, clip_neg, z, &mut rng);
            }
            round_hists.push(ClassHistogramPair { pos, neg });
        }
        state.accumulate(&round_hists)?;

        let counts = state.class_counts();
        alphas = match multiplier {
            None => counts
                .iter()
                .zip(&class_totals)
                .map(|(&n_tilde, &n)| alpha_nonprivate(n_tilde, n))
                .collect::<Result<_>>()?,
            Some(z) => {
                // Noise accumulated in the positive histogram sum so far.
                let sigma = T::lit(clip_pos * z * (state.rounds as f64).sqrt());
                counts
                    .iter()
                    .map(|&n_tilde| alpha_private(n_tilde, sigma, bins))
                    .collect::<Result<_>>()?
            }
        };
        let cal = build_binning_calibrator(&state, opts, &alphas)?;
        let metrics = eval.evaluate(&cal, cfg.eval_bins)?;
        reports.push(RoundReport {
            round: t + 1,
            participants,
            cwece: metrics.cwece,
            ece: metrics.ece,
            accuracy: metrics.accuracy,
            alpha_summary: if opts.weighting == WeightMode::None {
                None
            } else {
                AlphaSummary::of(&alphas)
            },
            noise_sigma: cfg.privacy.as_ref().map(|p| p.sigma),
            max_contribution_norm: max_norm,
        });
        calibrator = Some(cal);
    }

    Ok(FedBinningOutcome {
        calibrator: calibrator.expect("at least one round"),
        state,
        alphas,
        reports,
    })
}
