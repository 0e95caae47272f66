//! zCDP accounting and noise calibration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::golden_section;

pub const DEFAULT_CLIP_SCALING: f64 = 0.5;
pub const DEFAULT_CLIP_POS: f64 = 10.0;
pub const DEFAULT_CLIP_NEG: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let budget = Self { epsilon, delta };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive and finite, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZcdpBudget {
    pub rho: f64,
}

impl ZcdpBudget {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { rho })
    }
}

/// L2 clipping norms. Binning clips positive and negative histograms with
/// separate norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClipSpec {
    Scaling { c: f64 },
    Binning { c_plus: f64, c_minus: f64 },
}

impl ClipSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        let valid = match *self {
            Self::Scaling { c } => ok(c),
            Self::Binning { c_plus, c_minus } => ok(c_plus) && ok(c_minus),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::invalid("clipping norms must be positive"))
        }
    }

    /// Largest clipping norm.
    pub fn max_norm(&self) -> f64 {
        match *self {
            Self::Scaling { c } => c,
            Self::Binning { c_plus, c_minus } => c_plus.max(c_minus),
        }
    }

    /// Gaussian-mechanism invocations over `rounds` rounds: one per round
    /// for scaling, one per class and histogram side per round for binning.
    pub fn mechanism_count(&self, rounds: usize, n_classes: usize) -> usize {
        match self {
            Self::Scaling { .. } => rounds,
            Self::Binning { .. } => 2 * n_classes * rounds,
        }
    }
}

fn log_delta_objective(alpha: f64, rho: f64, epsilon: f64) -> f64 {
    (alpha - 1.0) * (alpha * rho - epsilon) - (alpha - 1.0).ln() + alpha * (-1.0 / alpha).ln_1p()
}

/// Smallest `delta` such that a `rho`-zCDP mechanism is
/// `(epsilon, delta)`-DP, minimizing the conversion bound over the order
/// `alpha > 1` in log space.
pub fn delta_from_rho_epsilon(rho: f64, epsilon: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) || !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("rho and epsilon must be positive and finite"));
    }
    let lo = 1.0 + 1e-6;
    let hi = (10.0 * epsilon / rho).max(500.0);
    let found = golden_section(|a| log_delta_objective(a, rho, epsilon), lo, hi, 1e-13, 1000);
    if found.value.is_nan() {
        return Err(Error::NonFinite("zCDP conversion"));
    }
    Ok(found.value.exp().clamp(f64::MIN_POSITIVE, 1.0))
}

/// Largest `rho` whose conversion meets `delta` at `epsilon`, by bisection.
pub fn rho_from_epsilon_delta(epsilon: f64, delta: f64) -> Result<f64> {
    PrivacyBudget::new(epsilon, delta)?;
    let meets = |rho: f64| -> Result<bool> { Ok(delta_from_rho_epsilon(rho, epsilon)? <= delta) };
    let mut lo = epsilon.min(1.0) * 1e-3;
    while !meets(lo)? {
        lo /= 2.0;
        if lo < 1e-300 {
            return Err(Error::invalid("no positive rho meets the budget"));
        }
    }
    let mut hi = lo * 2.0;
    while meets(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(lo);
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if meets(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Unitless noise multiplier `sqrt(k / (2 rho))` that splits `rho` evenly
/// over `k` Gaussian-mechanism invocations.
pub fn noise_multiplier(mechanism_count: usize, rho: f64) -> Result<f64> {
    if mechanism_count == 0 {
        return Err(Error::invalid("at least one mechanism invocation is required"));
    }
    ZcdpBudget::new(rho)?;
    Ok((mechanism_count as f64 / (2.0 * rho)).sqrt())
}

/// Absolute noise standard deviation for the largest clipping norm:
/// `C sqrt(T / 2 rho)` for scaling, `C sqrt(2 c T / 2 rho)` for binning.
pub fn noise_sigma(clip: &ClipSpec, rounds: usize, n_classes: usize, rho: f64) -> Result<f64> {
    clip.validate()?;
    Ok(clip.max_norm() * noise_multiplier(clip.mechanism_count(rounds, n_classes), rho)?)
}

/// Noise calibration for a full federated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyPlan {
    pub budget: PrivacyBudget,
    pub rho: ZcdpBudget,
    pub clip: ClipSpec,
    pub rounds: usize,
    pub n_classes: usize,
    pub mechanism_count: usize,
    /// Noise standard deviation relative to the sensitivity of each
    /// invocation.
    pub noise_multiplier: f64,
    /// Absolute noise standard deviation at the largest clipping norm.
    pub sigma: f64,
}

impl PrivacyPlan {
    pub fn new(budget: PrivacyBudget, clip: ClipSpec, rounds: usize, n_classes: usize) -> Result<Self> {
        budget.validate()?;
        clip.validate()?;
        if rounds == 0 || n_classes == 0 {
            return Err(Error::invalid("rounds and classes must be positive"));
        }
        let rho = rho_from_epsilon_delta(budget.epsilon, budget.delta)?;
        let mechanism_count = clip.mechanism_count(rounds, n_classes);
        let multiplier = noise_multiplier(mechanism_count, rho)?;
        Ok(Self {
            budget,
            rho: ZcdpBudget::new(rho)?,
            clip,
            rounds,
            n_classes,
            mechanism_count,
            noise_multiplier: multiplier,
            sigma: clip.max_norm() * multiplier,
        })
    }

    /// Absolute noise standard deviation for a query with the given
    /// sensitivity.
    pub fn sigma_for(&self, sensitivity: f64) -> f64 {
        sensitivity * self.noise_multiplier
    }
}

/// zCDP consumed by every invocation in `plan`; errors unless it matches
/// the plan's target within `1e-9` (relative).
pub fn total_rho(plan: &PrivacyPlan) -> Result<f64> {
    // Each invocation adds noise of std sensitivity * z, i.e. 1/(2 z^2)-zCDP.
    let per_mechanism = 1.0 / (2.0 * plan.noise_multiplier * plan.noise_multiplier);
    let expected_count = plan.clip.mechanism_count(plan.rounds, plan.n_classes);
    if plan.mechanism_count != expected_count {
        return Err(Error::InconsistentPlan(format!(
            "mechanism count {} but {} expected",
            plan.mechanism_count, expected_count
        )));
    }
    let implied_sigma = plan.clip.max_norm() * plan.noise_multiplier;
    if (implied_sigma - plan.sigma).abs() > 1e-9 * plan.sigma.abs().max(1.0) {
        return Err(Error::InconsistentPlan(format!(
            "sigma {} does not match multiplier {}",
            plan.sigma, plan.noise_multiplier
        )));
    }
    let total = plan.mechanism_count as f64 * per_mechanism;
    if (total - plan.rho.rho).abs() > 1e-9 * plan.rho.rho {
        return Err(Error::InconsistentPlan(format!(
            "plan consumes rho = {total}, target {}",
            plan.rho.rho
        )));
    }
    Ok(total)
}
