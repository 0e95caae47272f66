//! Order-preserving wrapper around a scaling calibrator.
//!
//! Probabilities are sorted descending (ties by class index) into `y`. The
//! inner scaler maps the sorted log-probabilities to a distribution `m`, and
//! the output in sorted order is `v = U w` with `w_i = (y_i - y_{i+1}) m_i`,
//! `y_{c+1} = 0` and `U` upper-triangular ones. Since every `w_i >= 0`, `v`
//! is non-increasing and the input ranking survives. When `m` is uniform the
//! output equals the input.

use crate::error::Result;
use crate::scalar::{softmax, Scalar};

use super::scaling::{gradient_descent, FitOptions, LocalFit, ScalerParams, ScalingStructure};

/// Class indices ordered by descending probability, ties by index.
pub fn descending_order<T: Scalar>(probs: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn safe_ln<T: Scalar>(p: T) -> T {
    p.max(T::min_positive_value()).ln()
}

struct Forward<T> {
    order: Vec<usize>,
    sorted_log: Vec<T>,
    gaps: Vec<T>,
    m: Vec<T>,
    /// Unnormalized output in sorted order.
    v: Vec<T>,
    total: T,
}

fn forward<T: Scalar>(params: &ScalerParams<T>, probs: &[T]) -> Forward<T> {
    let order = descending_order(probs);
    let y: Vec<T> = order.iter().map(|&j| probs[j]).collect();
    let sorted_log: Vec<T> = y.iter().map(|&p| safe_ln(p)).collect();
    let m = softmax(&params.transform(&sorted_log));
    let c = y.len();
    let gaps: Vec<T> = (0..c)
        .map(|i| {
            let next = if i + 1 < c { y[i + 1] } else { T::zero() };
            (y[i] - next).max(T::zero())
        })
        .collect();
    let mut v = vec![T::zero(); c];
    let mut acc = T::zero();
    for i in (0..c).rev() {
        acc = acc + gaps[i] * m[i];
        v[i] = acc;
    }
    let total = v.iter().copied().sum();
    Forward {
        order,
        sorted_log,
        gaps,
        m,
        v,
        total,
    }
}

/// Smallest representable step above a nonnegative `x`.
fn bump<T: Scalar>(x: T) -> T {
    (x * (T::one() + T::epsilon())).max(x + T::min_positive_value())
}

/// Order-preserving calibrated distribution. Falls back to the input when
/// the construction degenerates (all weights underflow).
///
/// A tiny `m_i` can be absorbed when added to the tail sum, turning a strict
/// input order into a tie; such outputs are nudged up by one ulp so that
/// strict order is kept as well as ties.
pub fn order_preserving_predict<T: Scalar>(params: &ScalerParams<T>, probs: &[T]) -> Vec<T> {
    let f = forward(params, probs);
    if !(f.total > T::zero()) || !f.total.is_finite() {
        return probs.to_vec();
    }
    let mut sorted: Vec<T> = f.v.iter().map(|&v| v / f.total).collect();
    for i in (0..sorted.len().saturating_sub(1)).rev() {
        if f.gaps[i] == T::zero() {
            sorted[i] = sorted[i + 1];
        } else if sorted[i] <= sorted[i + 1] {
            sorted[i] = bump(sorted[i + 1]);
        }
    }
    let mut out = vec![T::zero(); probs.len()];
    for (rank, &class) in f.order.iter().enumerate() {
        out[class] = sorted[rank];
    }
    out
}

/// Mean NLL of the order-preserving output and its gradient with respect to
/// the flat inner parameters.
pub(crate) fn op_nll_grad<T: Scalar>(params: &ScalerParams<T>, probs: &[Vec<T>], labels: &[usize]) -> (T, Vec<T>) {
    let n = T::from_usize_lossy(probs.len().max(1));
    let mut grad = vec![T::zero(); params.to_flat().len()];
    let mut loss = T::zero();
    let tiny = T::min_positive_value();
    for (p, &y) in probs.iter().zip(labels) {
        let f = forward(params, p);
        let c = p.len();
        let r = f.order.iter().position(|&j| j == y).unwrap_or(0);
        let vr = f.v[r].max(tiny);
        let total = f.total.max(tiny);
        loss = loss - vr.ln() + total.ln();
        // dL/dw_k = -[k >= r] / v_r + (k + 1) / Z
        let d_m: Vec<T> = (0..c)
            .map(|k| {
                let hit = if k >= r { vr.recip() } else { T::zero() };
                let dw = T::from_usize_lossy(k + 1) / total - hit;
                f.gaps[k] * dw
            })
            .collect();
        let mean: T = f.m.iter().zip(&d_m).map(|(&mk, &g)| mk * g).sum();
        let d_u: Vec<T> = f.m.iter().zip(&d_m).map(|(&mk, &g)| mk * (g - mean)).collect();
        params.accumulate_grad(&f.sorted_log, &d_u, &mut grad);
    }
    for g in &mut grad {
        *g = *g / n;
    }
    (loss / n, grad)
}

pub fn order_preserving_nll<T: Scalar>(params: &ScalerParams<T>, probs: &[Vec<T>], labels: &[usize]) -> T {
    op_nll_grad(params, probs, labels).0
}

/// Trains the inner scaler of the order-preserving wrapper on one client by
/// gradient descent on the wrapped NLL. Starts from `init`, or from all-zero
/// parameters (the identity wrapper) when absent.
pub fn order_preserving_fit_local<T: Scalar>(
    probs: &[Vec<T>],
    labels: &[usize],
    n_classes: usize,
    structure: ScalingStructure,
    init: Option<&ScalerParams<T>>,
    opts: &FitOptions,
) -> Result<LocalFit<T>> {
    let init = init
        .cloned()
        .unwrap_or_else(|| ScalerParams::zeros(structure, n_classes));
    if probs.is_empty() {
        return Ok(LocalFit {
            params: init,
            nll: T::zero(),
            iterations: 0,
            no_data: true,
        });
    }
    let (params, nll, iterations) = gradient_descent(&init, opts, |p| op_nll_grad(p, probs, labels))?;
    Ok(LocalFit {
        params,
        nll,
        iterations,
        no_data: false,
    })
}
