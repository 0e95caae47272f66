//! Federated scaling: participants fit locally from the current global
//! parameters and the server averages the results.

use serde::{Deserialize, Serialize};

use crate::calibrators::{
    order_preserving_fit_local, scaler_fit_local, Calibrator, FitOptions, LocalFit, ScalerParams, ScalingStructure,
};
use crate::data::{common_class_count, ClientDataset, Split};
use crate::error::{Error, Result};
use crate::privacy::{clip_l2, gaussian_mechanism, ClipSpec};
use crate::rng::{stream, tags};
use crate::scalar::{softmax, Scalar};

use super::report::{EvalSet, RoundConfig, RoundReport};
use super::sampling::sample_participants;
use super::secagg::SecureAggregator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedScalingOptions {
    pub structure: ScalingStructure,
    pub order_preserving: bool,
    pub fit: FitOptions,
}

impl FedScalingOptions {
    pub fn new(structure: ScalingStructure, order_preserving: bool) -> Self {
        Self {
            structure,
            order_preserving,
            fit: FitOptions::default(),
        }
    }

    pub fn initial_params<T: Scalar>(&self, n_classes: usize) -> ScalerParams<T> {
        if self.order_preserving {
            ScalerParams::zeros(self.structure, n_classes)
        } else {
            ScalerParams::identity(self.structure, n_classes)
        }
    }

    pub fn calibrator<T: Scalar>(&self, params: ScalerParams<T>) -> Calibrator<T> {
        if self.order_preserving {
            Calibrator::OrderPreserving { params }
        } else {
            Calibrator::Scaling { params }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FedScalingOutcome<T> {
    pub params: ScalerParams<T>,
    pub calibrator: Calibrator<T>,
    pub reports: Vec<RoundReport>,
}

/// Server update from client parameters: `u_k = w - w_k`, optionally
/// clipped to `clip`, then `w <- w - server_lr * mean(u_k)`. With
/// `server_lr = 1` and no clipping this is the plain parameter average.
pub fn fedavg_update<T: Scalar>(
    global: &ScalerParams<T>,
    locals: &[ScalerParams<T>],
    server_lr: T,
    clip: Option<T>,
) -> Result<ScalerParams<T>> {
    if locals.is_empty() {
        return Ok(global.clone());
    }
    let w = global.to_flat();
    let mut agg = SecureAggregator::new(w.len());
    for local in locals {
        if local.structure() != global.structure() {
            return Err(Error::invalid("client parameters have a different structure"));
        }
        let wk = local.to_flat();
        if wk.len() != w.len() {
            return Err(Error::ShapeMismatch {
                expected: w.len(),
                found: wk.len(),
            });
        }
        let u: Vec<T> = w.iter().zip(&wk).map(|(&a, &b)| a - b).collect();
        let u = match clip {
            Some(c) => clip_l2(&u, c),
            None => u,
        };
        agg.submit(&u)?;
    }
    let n = T::from_usize_lossy(locals.len());
    let sum = agg.finish();
    let next: Vec<T> = w.iter().zip(&sum).map(|(&a, &s)| a - server_lr * s / n).collect();
    global.with_flat(&next)
}

fn local_fit<T: Scalar>(
    client: &ClientDataset<T>,
    n_classes: usize,
    opts: &FedScalingOptions,
    global: &ScalerParams<T>,
) -> Result<LocalFit<T>> {
    let (logits, labels) = client.split_arrays(Split::Calibration);
    if opts.order_preserving {
        let probs: Vec<Vec<T>> = logits.iter().map(|z| softmax(z)).collect();
        order_preserving_fit_local(&probs, &labels, n_classes, opts.structure, Some(global), &opts.fit)
    } else {
        scaler_fit_local(&logits, &labels, n_classes, opts.structure, Some(global), &opts.fit)
    }
}

/// Multi-round federated scaling. Without privacy the global parameters
/// move by `server_lr` times the mean participant update. Under a privacy
/// plan, clipped updates are summed, noised once, and divided by the
/// expected participant count `p K`.
pub fn run_fed_scaling<T: Scalar>(
    clients: &[ClientDataset<T>],
    opts: &FedScalingOptions,
    cfg: &RoundConfig,
) -> Result<FedScalingOutcome<T>> {
    cfg.validate()?;
    let n_classes = common_class_count(clients.iter().flat_map(|c| c.records.iter()))?.ok_or(Error::EmptyInput)?;
    let dp = match &cfg.privacy {
        Some(plan) => match plan.clip {
            ClipSpec::Scaling { c } => Some((c, plan.noise_multiplier, plan.sigma)),
            ClipSpec::Binning { .. } => {
                return Err(Error::InconsistentPlan("scaling needs a scaling clip norm".into()))
            }
        },
        None => None,
    };
    let eval = EvalSet::from_clients(clients, Split::Test);
    let server_lr = T::lit(cfg.server_lr);
    let mut global = opts.initial_params::<T>(n_classes);
    let mut reports = Vec::with_capacity(cfg.rounds);
    let mut any_update = false;

    for t in 0..cfg.rounds {
        let participants = sample_participants(clients.len(), cfg.participation, cfg.seed, t)?;
        let mut locals = Vec::with_capacity(participants.len());
        for &k in &participants {
            let fit = local_fit(&clients[k], n_classes, opts, &global)?;
            if !fit.no_data {
                locals.push(fit.params);
            }
        }
        let w = global.to_flat();
        let mut max_norm = 0.0f64;
        match dp {
            None => {
                for local in &locals {
                    let d: Vec<T> = w.iter().zip(local.to_flat()).map(|(&a, b)| a - b).collect();
                    max_norm = max_norm.max(crate::scalar::l2_norm(&d).as_f64());
                }
                if !locals.is_empty() {
                    global = fedavg_update(&global, &locals, server_lr, None)?;
                    any_update = true;
                }
            }
            Some((clip, z, _)) => {
                let mut agg = SecureAggregator::with_norm_bound(w.len(), T::lit(clip));
                for local in &locals {
                    let u: Vec<T> = w.iter().zip(local.to_flat()).map(|(&a, b)| a - b).collect();
                    agg.submit(&clip_l2(&u, T::lit(clip)))?;
                }
                max_norm = agg.max_norm().as_f64();
                let sum = agg.finish();
                let mut rng = stream(cfg.seed, &[tags::NOISE, t as u64]);
                let noisy = gaussian_mechanism(&sum, clip, z, &mut rng);
                let expected = T::lit(cfg.participation * clients.len() as f64);
                let next: Vec<T> = w
                    .iter()
                    .zip(&noisy)
                    .map(|(&a, &s)| a - server_lr * s / expected)
                    .collect();
                global = global.with_flat(&next)?;
                any_update = true;
            }
        }
        let cal = opts.calibrator(global.clone());
        let metrics = eval.evaluate(&cal, cfg.eval_bins)?;
        reports.push(RoundReport {
            round: t + 1,
            participants,
            cwece: metrics.cwece,
            ece: metrics.ece,
            accuracy: metrics.accuracy,
            alpha_summary: None,
            noise_sigma: dp.map(|(_, _, sigma)| sigma),
            max_contribution_norm: max_norm,
        });
    }
    if !any_update {
        log::warn!("no client contributed in any round; returning the initial parameters");
    }
    Ok(FedScalingOutcome {
        calibrator: opts.calibrator(global.clone()),
        params: global,
        reports,
    })
}
