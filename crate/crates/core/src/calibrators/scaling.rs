//! Temperature, vector and matrix scaling: `softmax(A z + b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::golden_section;
use crate::scalar::{log_softmax_at, softmax, Scalar};

pub const TEMPERATURE_MIN: f64 = 0.05;
pub const TEMPERATURE_MAX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingStructure {
    Temperature,
    Vector,
    Matrix,
}

impl ScalingStructure {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Temperature => "temperature",
            Self::Vector => "vector",
            Self::Matrix => "matrix",
        }
    }
}

/// Scaling parameters. Matrix weights are `c x c`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "snake_case")]
pub enum ScalerParams<T> {
    Temperature { temperature: T },
    Vector { scale: Vec<T>, bias: Vec<T> },
    Matrix { weights: Vec<T>, bias: Vec<T> },
}

impl<T: Scalar> ScalerParams<T> {
    /// Parameters for which `transform` is the identity map.
    pub fn identity(structure: ScalingStructure, n_classes: usize) -> Self {
        match structure {
            ScalingStructure::Temperature => Self::Temperature { temperature: T::one() },
            ScalingStructure::Vector => Self::Vector {
                scale: vec![T::one(); n_classes],
                bias: vec![T::zero(); n_classes],
            },
            ScalingStructure::Matrix => {
                let mut weights = vec![T::zero(); n_classes * n_classes];
                for i in 0..n_classes {
                    weights[i * n_classes + i] = T::one();
                }
                Self::Matrix {
                    weights,
                    bias: vec![T::zero(); n_classes],
                }
            }
        }
    }

    /// All-zero linear map and bias; a temperature has no zero, so the
    /// maximum temperature stands in.
    pub fn zeros(structure: ScalingStructure, n_classes: usize) -> Self {
        match structure {
            ScalingStructure::Temperature => Self::Temperature {
                temperature: T::lit(TEMPERATURE_MAX),
            },
            ScalingStructure::Vector => Self::Vector {
                scale: vec![T::zero(); n_classes],
                bias: vec![T::zero(); n_classes],
            },
            ScalingStructure::Matrix => Self::Matrix {
                weights: vec![T::zero(); n_classes * n_classes],
                bias: vec![T::zero(); n_classes],
            },
        }
    }

    pub fn structure(&self) -> ScalingStructure {
        match self {
            Self::Temperature { .. } => ScalingStructure::Temperature,
            Self::Vector { .. } => ScalingStructure::Vector,
            Self::Matrix { .. } => ScalingStructure::Matrix,
        }
    }

    /// Number of classes, if fixed by the parameters.
    pub fn n_classes(&self) -> Option<usize> {
        match self {
            Self::Temperature { .. } => None,
            Self::Vector { bias, .. } | Self::Matrix { bias, .. } => Some(bias.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        match self {
            Self::Temperature { temperature } => {
                let a = temperature.as_f64();
                if !(TEMPERATURE_MIN..=TEMPERATURE_MAX).contains(&a) {
                    return Err(Error::invalid(format!(
                        "temperature {a} outside [{TEMPERATURE_MIN}, {TEMPERATURE_MAX}]"
                    )));
                }
            }
            Self::Vector { scale, bias } => {
                if scale.len() != bias.len() {
                    return Err(Error::ShapeMismatch {
                        expected: bias.len(),
                        found: scale.len(),
                    });
                }
                if !finite(scale) || !finite(bias) {
                    return Err(Error::NonFinite("vector scaling parameters"));
                }
            }
            Self::Matrix { weights, bias } => {
                let c = bias.len();
                if weights.len() != c * c {
                    return Err(Error::ShapeMismatch {
                        expected: c * c,
                        found: weights.len(),
                    });
                }
                if !finite(weights) || !finite(bias) {
                    return Err(Error::NonFinite("matrix scaling parameters"));
                }
            }
        }
        Ok(())
    }

    /// `A z + b`.
    pub fn transform(&self, z: &[T]) -> Vec<T> {
        match self {
            Self::Temperature { temperature } => z.iter().map(|&x| x / *temperature).collect(),
            Self::Vector { scale, bias } => z
                .iter()
                .zip(scale)
                .zip(bias)
                .map(|((&x, &s), &b)| s * x + b)
                .collect(),
            Self::Matrix { weights, bias } => {
                let c = bias.len();
                (0..c)
                    .map(|i| {
                        weights[i * c..(i + 1) * c]
                            .iter()
                            .zip(z)
                            .map(|(&w, &x)| w * x)
                            .sum::<T>()
                            + bias[i]
                    })
                    .collect()
            }
        }
    }

    /// Flat parameter vector. A temperature is represented by its inverse,
    /// the coefficient `A` actually applied to the logits.
    pub fn to_flat(&self) -> Vec<T> {
        match self {
            Self::Temperature { temperature } => vec![temperature.recip()],
            Self::Vector { scale, bias } => scale.iter().chain(bias).copied().collect(),
            Self::Matrix { weights, bias } => weights.iter().chain(bias).copied().collect(),
        }
    }

    /// Rebuilds parameters of the same shape from a flat vector. The
    /// temperature is projected back into its bounds.
    pub fn with_flat(&self, flat: &[T]) -> Result<Self> {
        let expected = self.to_flat().len();
        if flat.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: flat.len(),
            });
        }
        Ok(match self {
            Self::Temperature { .. } => Self::Temperature {
                temperature: temperature_from_inverse(flat[0]),
            },
            Self::Vector { scale, .. } => {
                let c = scale.len();
                Self::Vector {
                    scale: flat[..c].to_vec(),
                    bias: flat[c..].to_vec(),
                }
            }
            Self::Matrix { bias, .. } => {
                let c = bias.len();
                Self::Matrix {
                    weights: flat[..c * c].to_vec(),
                    bias: flat[c * c..].to_vec(),
                }
            }
        })
    }

    /// Adds the gradient with respect to the flat parameters, given
    /// `d_out = dL/d(A z + b)`.
    pub(crate) fn accumulate_grad(&self, z: &[T], d_out: &[T], grad: &mut [T]) {
        match self {
            Self::Temperature { .. } => {
                grad[0] = grad[0] + z.iter().zip(d_out).map(|(&x, &g)| x * g).sum::<T>();
            }
            Self::Vector { scale, .. } => {
                let c = scale.len();
                for i in 0..c {
                    grad[i] = grad[i] + d_out[i] * z[i];
                    grad[c + i] = grad[c + i] + d_out[i];
                }
            }
            Self::Matrix { bias, .. } => {
                let c = bias.len();
                for i in 0..c {
                    for l in 0..c {
                        grad[i * c + l] = grad[i * c + l] + d_out[i] * z[l];
                    }
                    grad[c * c + i] = grad[c * c + i] + d_out[i];
                }
            }
        }
    }
}

/// Temperature for an inverse temperature, projected onto the bounds in
/// inverse space so that a nonpositive value maps to the maximum.
fn temperature_from_inverse<T: Scalar>(beta: T) -> T {
    if beta.is_nan() {
        return T::one();
    }
    if beta <= T::lit(1.0 / TEMPERATURE_MAX) {
        return T::lit(TEMPERATURE_MAX);
    }
    if beta >= T::lit(1.0 / TEMPERATURE_MIN) {
        return T::lit(TEMPERATURE_MIN);
    }
    beta.recip()
}

pub fn scaler_predict<T: Scalar>(params: &ScalerParams<T>, logits: &[T]) -> Vec<T> {
    softmax(&params.transform(logits))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub temperature_bounds: (f64, f64),
    pub initial_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-8,
            temperature_bounds: (TEMPERATURE_MIN, TEMPERATURE_MAX),
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit<T> {
    pub params: ScalerParams<T>,
    /// Mean NLL at `params`; zero when there was no data.
    pub nll: T,
    pub iterations: usize,
    /// Set when the client had no calibration samples and `params` is the
    /// untouched initialization.
    pub no_data: bool,
}

/// Mean NLL of `softmax(A z + b)`.
pub fn scaler_nll<T: Scalar>(params: &ScalerParams<T>, logits: &[Vec<T>], labels: &[usize]) -> T {
    let n = T::from_usize_lossy(logits.len().max(1));
    logits
        .iter()
        .zip(labels)
        .map(|(z, &y)| -log_softmax_at(&params.transform(z), y))
        .sum::<T>()
        / n
}

fn scaler_nll_grad<T: Scalar>(params: &ScalerParams<T>, logits: &[Vec<T>], labels: &[usize]) -> (T, Vec<T>) {
    let n = T::from_usize_lossy(logits.len().max(1));
    let mut grad = vec![T::zero(); params.to_flat().len()];
    let mut loss = T::zero();
    for (z, &y) in logits.iter().zip(labels) {
        let u = params.transform(z);
        loss = loss - log_softmax_at(&u, y);
        let mut d = softmax(&u);
        d[y] = d[y] - T::one();
        params.accumulate_grad(z, &d, &mut grad);
    }
    for g in &mut grad {
        *g = *g / n;
    }
    (loss / n, grad)
}

fn check_inputs<T: Scalar>(logits: &[Vec<T>], labels: &[usize], n_classes: usize) -> Result<()> {
    if logits.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: logits.len(),
            found: labels.len(),
        });
    }
    for (z, &y) in logits.iter().zip(labels) {
        if z.len() != n_classes {
            return Err(Error::ShapeMismatch {
                expected: n_classes,
                found: z.len(),
            });
        }
        if y >= n_classes {
            return Err(Error::invalid(format!("label {y} out of range for {n_classes} classes")));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
    }
    Ok(())
}

/// Deterministic full-batch gradient descent: a fixed step, halved whenever
/// the candidate does not improve the objective. Stops when an accepted step
/// improves by less than `tol`, the step vanishes, or after `max_iters`.
pub(crate) fn gradient_descent<T, F>(
    init: &ScalerParams<T>,
    opts: &FitOptions,
    mut objective: F,
) -> Result<(ScalerParams<T>, T, usize)>
where
    T: Scalar,
    F: FnMut(&ScalerParams<T>) -> (T, Vec<T>),
{
    let mut params = init.clone();
    let (mut loss, mut grad) = objective(&params);
    if !loss.is_finite() {
        return Err(Error::NonFinite("calibration objective"));
    }
    let tol = T::lit(opts.tol);
    let mut step = T::lit(opts.initial_step);
    let min_step = T::lit(1e-12);
    let mut iterations = 0;
    while iterations < opts.max_iters && step > min_step {
        iterations += 1;
        let flat: Vec<T> = params
            .to_flat()
            .iter()
            .zip(&grad)
            .map(|(&w, &g)| w - step * g)
            .collect();
        let candidate = params.with_flat(&flat)?;
        let (c_loss, c_grad) = objective(&candidate);
        if c_loss.is_finite() && c_loss < loss {
            let improvement = loss - c_loss;
            params = candidate;
            loss = c_loss;
            grad = c_grad;
            if improvement < tol {
                break;
            }
        } else {
            step = step / T::lit(2.0);
        }
    }
    Ok((params, loss, iterations))
}

/// Fits scaling parameters on one client's calibration split by minimizing
/// NLL. Temperature uses a bracketed line search followed by Newton polish;
/// vector and matrix use gradient descent from `init` (identity if absent).
pub fn scaler_fit_local<T: Scalar>(
    logits: &[Vec<T>],
    labels: &[usize],
    n_classes: usize,
    structure: ScalingStructure,
    init: Option<&ScalerParams<T>>,
    opts: &FitOptions,
) -> Result<LocalFit<T>> {
    let init = match init {
        Some(p) => {
            if p.structure() != structure {
                return Err(Error::invalid("initial parameters have a different structure"));
            }
            p.clone()
        }
        None => ScalerParams::identity(structure, n_classes),
    };
    if let Some(c) = init.n_classes() {
        if c != n_classes {
            return Err(Error::ShapeMismatch {
                expected: n_classes,
                found: c,
            });
        }
    }
    check_inputs(logits, labels, n_classes)?;
    if logits.is_empty() {
        return Ok(LocalFit {
            params: init,
            nll: T::zero(),
            iterations: 0,
            no_data: true,
        });
    }
    let (params, nll, iterations) = match structure {
        ScalingStructure::Temperature => fit_temperature(logits, labels, opts)?,
        _ => gradient_descent(&init, opts, |p| scaler_nll_grad(p, logits, labels))?,
    };
    if !nll.is_finite() {
        return Err(Error::NonFinite("calibration objective"));
    }
    Ok(LocalFit {
        params,
        nll,
        iterations,
        no_data: false,
    })
}

/// NLL as a function of the inverse temperature `beta`, with its first and
/// second derivatives.
fn beta_objective<T: Scalar>(beta: T, logits: &[Vec<T>], labels: &[usize]) -> (T, T, T) {
    let n = T::from_usize_lossy(logits.len());
    let (mut f, mut d1, mut d2) = (T::zero(), T::zero(), T::zero());
    for (z, &y) in logits.iter().zip(labels) {
        let u: Vec<T> = z.iter().map(|&x| beta * x).collect();
        f = f - log_softmax_at(&u, y);
        let p = softmax(&u);
        let mean: T = p.iter().zip(z).map(|(&pi, &x)| pi * x).sum();
        let second: T = p.iter().zip(z).map(|(&pi, &x)| pi * x * x).sum();
        d1 = d1 + mean - z[y];
        d2 = d2 + (second - mean * mean).max(T::zero());
    }
    (f / n, d1 / n, d2 / n)
}

fn fit_temperature<T: Scalar>(
    logits: &[Vec<T>],
    labels: &[usize],
    opts: &FitOptions,
) -> Result<(ScalerParams<T>, T, usize)> {
    let (t_min, t_max) = opts.temperature_bounds;
    if !(t_min > 0.0 && t_min <= t_max && t_max.is_finite()) {
        return Err(Error::invalid("temperature bounds must satisfy 0 < min <= max"));
    }
    if t_min == t_max {
        let params = ScalerParams::Temperature { temperature: T::lit(t_min) };
        let nll = scaler_nll(&params, logits, labels);
        return Ok((params, nll, 0));
    }
    // NLL is convex in beta = 1/a, so search there.
    let lo = T::lit(1.0 / t_max);
    let hi = T::lit(1.0 / t_min);
    let found = golden_section(
        |b| beta_objective(b, logits, labels).0,
        lo,
        hi,
        T::lit(1e-6),
        200,
    );
    if !found.value.is_finite() {
        return Err(Error::NonFinite("calibration objective"));
    }
    let mut beta = found.x;
    let mut iterations = found.iterations;
    if beta > lo && beta < hi {
        for _ in 0..20 {
            let (_, d1, d2) = beta_objective(beta, logits, labels);
            if !(d2 > T::zero()) {
                break;
            }
            let next = (beta - d1 / d2).max(lo).min(hi);
            iterations += 1;
            let moved = (next - beta).abs();
            beta = next;
            if moved <= T::epsilon() * beta.abs() * T::lit(4.0) {
                break;
            }
        }
        let polished = beta_objective(beta, logits, labels).0;
        if polished > found.value {
            beta = found.x;
        }
    }
    let a = if beta == lo {
        T::lit(t_max)
    } else if beta == hi {
        T::lit(t_min)
    } else {
        beta.recip()
    };
    let params = ScalerParams::Temperature { temperature: a };
    let nll = scaler_nll(&params, logits, labels);
    Ok((params, nll, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn temperature_predict_cases() {
        let one = ScalerParams::Temperature { temperature: 1.0 };
        assert_eq!(scaler_predict(&one, &[2.0, 0.0]), softmax(&[2.0, 0.0]));
        let two = ScalerParams::Temperature { temperature: 2.0 };
        assert_eq!(scaler_predict(&two, &[2.0, 0.0]), softmax(&[1.0, 0.0]));
    }

    #[test]
    fn matrix_predict_matches_hand_product() {
        let params = ScalerParams::Matrix {
            weights: vec![1.0, 2.0, 0.0, -1.0],
            bias: vec![0.5, 0.0],
        };
        // [1*1 + 2*3 + 0.5, 0*1 - 1*3 + 0] = [7.5, -3]
        let out = scaler_predict(&params, &[1.0, 3.0]);
        let e = (-10.5f64).exp();
        assert_abs_diff_eq!(out[0], 1.0 / (1.0 + e), epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], e / (1.0 + e), epsilon = 1e-15);
    }

    #[test]
    fn flat_round_trip() {
        let v = ScalerParams::Vector {
            scale: vec![1.0, 2.0],
            bias: vec![3.0, 4.0],
        };
        assert_eq!(v.with_flat(&v.to_flat()).unwrap(), v);
        let t = ScalerParams::Temperature { temperature: 4.0 };
        assert_eq!(t.to_flat(), vec![0.25]);
        assert_eq!(t.with_flat(&[0.25]).unwrap(), t);
        assert_eq!(
            t.with_flat(&[1000.0]).unwrap(),
            ScalerParams::Temperature { temperature: TEMPERATURE_MIN }
        );
        assert_eq!(
            t.with_flat(&[-0.3]).unwrap(),
            ScalerParams::Temperature { temperature: TEMPERATURE_MAX }
        );
        assert!(t.with_flat(&[1.0, 2.0]).is_err());
    }

    fn sample_logits(n: usize, c: usize, temp: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut logits = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let z: Vec<f64> = (0..c).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = softmax(&z);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut y = c - 1;
            for (j, &pj) in p.iter().enumerate() {
                acc += pj;
                if u < acc {
                    y = j;
                    break;
                }
            }
            logits.push(z.iter().map(|x| x * temp).collect());
            labels.push(y);
        }
        (logits, labels)
    }

    fn grid_temperature(logits: &[Vec<f64>], labels: &[usize]) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut a = 0.05;
        while a <= 20.0 {
            let nll: f64 = logits
                .iter()
                .zip(labels)
                .map(|(z, &y)| {
                    let s: Vec<f64> = z.iter().map(|x| x / a).collect();
                    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = s.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + m;
                    lse - s[y]
                })
                .sum();
            if nll < best.0 {
                best = (nll, a);
            }
            a += 0.01;
        }
        best.1
    }

    #[test]
    fn temperature_fit_matches_grid_oracle() {
        let (logits, labels) = sample_logits(200, 4, 2.5, 11);
        let fit = scaler_fit_local(&logits, &labels, 4, ScalingStructure::Temperature, None, &FitOptions::default())
            .unwrap();
        let ScalerParams::Temperature { temperature } = fit.params else {
            panic!("wrong structure")
        };
        let oracle = grid_temperature(&logits, &labels);
        assert!((temperature - oracle).abs() <= 0.05, "{temperature} vs {oracle}");
    }

    #[test]
    fn doubled_logits_double_temperature() {
        let (logits, labels) = sample_logits(300, 3, 1.0, 5);
        let opts = FitOptions::default();
        let base = scaler_fit_local(&logits, &labels, 3, ScalingStructure::Temperature, None, &opts).unwrap();
        let doubled: Vec<Vec<f64>> = logits.iter().map(|z| z.iter().map(|x| 2.0 * x).collect()).collect();
        let fit = scaler_fit_local(&doubled, &labels, 3, ScalingStructure::Temperature, None, &opts).unwrap();
        let (ScalerParams::Temperature { temperature: a1 }, ScalerParams::Temperature { temperature: a2 }) =
            (base.params, fit.params)
        else {
            panic!()
        };
        assert_abs_diff_eq!(a2, 2.0 * a1, epsilon = 1e-6);
    }

    #[test]
    fn separable_data_hits_lower_bound() {
        let logits = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, -1.0]];
        let labels = vec![0, 1, 0];
        let fit = scaler_fit_local(&logits, &labels, 2, ScalingStructure::Temperature, None, &FitOptions::default())
            .unwrap();
        assert_eq!(fit.params, ScalerParams::Temperature { temperature: TEMPERATURE_MIN });
    }

    #[test]
    fn temperature_fit_is_stationary() {
        let (logits, labels) = sample_logits(250, 5, 3.0, 21);
        let fit = scaler_fit_local(&logits, &labels, 5, ScalingStructure::Temperature, None, &FitOptions::default())
            .unwrap();
        let ScalerParams::Temperature { temperature: a } = fit.params else {
            panic!()
        };
        let at = |t: f64| scaler_nll(&ScalerParams::Temperature { temperature: t }, &logits, &labels);
        let h = 1e-5;
        let deriv = (at(a + h) - at(a - h)) / (2.0 * h);
        assert!(deriv.abs() <= 1e-6, "gradient {deriv} at a = {a}");
    }

    #[test]
    fn empty_client_returns_flagged_identity() {
        let fit = scaler_fit_local::<f64>(&[], &[], 3, ScalingStructure::Vector, None, &FitOptions::default()).unwrap();
        assert!(fit.no_data);
        assert_eq!(fit.params, ScalerParams::identity(ScalingStructure::Vector, 3));
    }

    #[test]
    fn vector_and_matrix_fits_do_not_increase_nll() {
        let (logits, labels) = sample_logits(200, 3, 2.0, 8);
        for structure in [ScalingStructure::Vector, ScalingStructure::Matrix] {
            let start = ScalerParams::identity(structure, 3);
            let before = scaler_nll(&start, &logits, &labels);
            let fit = scaler_fit_local(&logits, &labels, 3, structure, None, &FitOptions::default()).unwrap();
            assert!(fit.nll < before - 1e-3, "{structure:?}: {} vs {before}", fit.nll);
            assert_abs_diff_eq!(fit.nll, scaler_nll(&fit.params, &logits, &labels), epsilon = 1e-12);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_difference() {
        let (logits, labels) = sample_logits(30, 3, 1.5, 2);
        let params = ScalerParams::Matrix {
            weights: vec![0.9, 0.1, -0.2, 0.05, 1.1, 0.0, 0.3, -0.1, 0.7],
            bias: vec![0.1, -0.2, 0.05],
        };
        let (_, grad) = scaler_nll_grad(&params, &logits, &labels);
        let flat = params.to_flat();
        for k in 0..flat.len() {
            let h = 1e-6;
            let mut up = flat.clone();
            up[k] += h;
            let mut down = flat.clone();
            down[k] -= h;
            let fd = (scaler_nll(&params.with_flat(&up).unwrap(), &logits, &labels)
                - scaler_nll(&params.with_flat(&down).unwrap(), &logits, &labels))
                / (2.0 * h);
            assert_abs_diff_eq!(grad[k], fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn temperature_preserves_argmax() {
        let z = [0.3, 2.0, -1.0, 2.0];
        for a in [0.05, 0.5, 1.0, 7.0, 20.0] {
            let out = scaler_predict(&ScalerParams::Temperature { temperature: a }, &z);
            assert_eq!(crate::scalar::argmax(&out), 1);
        }
    }

    #[test]
    fn serde_uses_structure_tag() {
        let p = ScalerParams::Temperature { temperature: 2.0 };
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"structure":"temperature","temperature":2.0}"#);
    }
}
