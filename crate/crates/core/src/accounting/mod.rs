//! Privacy calibration for the multi-level Gaussian release.
//!
//! The whole extraction is the composition of one Gaussian mechanism per
//! n-gram length (each with ℓ₂ sensitivity 1) plus a (0, δ/2) event coming
//! from the unigram threshold. Gaussian mechanisms compose exactly:
//! noise levels σ₁..σ_T behave like a single mechanism with
//! `1/σ*² = Σ 1/σₖ²`. The effective σ* is chosen so that the analytic
//! Gaussian bound gives δ/2 at the target ε, and the unigram threshold ρ₁
//! absorbs the remaining δ/2.

mod normal;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub(crate) use normal::{cdf, quantile, upper_quantile};
pub use normal::{erfc, std_normal_cdf, std_normal_inv_cdf, std_normal_upper_quantile};

/// Target (ε, δ) for a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyTarget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyTarget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// δ(ε, σ) of the Gaussian mechanism with ℓ₂ sensitivity 1 (analytic bound):
/// `Φ(−εσ + 1/(2σ)) − e^ε Φ(−εσ − 1/(2σ))`.
pub fn gaussian_delta(epsilon: f64, sigma: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!(
            "gaussian_delta needs positive finite epsilon and sigma, got ({epsilon}, {sigma})"
        )));
    }
    Ok(delta_unchecked(epsilon, sigma))
}

fn delta_unchecked(epsilon: f64, sigma: f64) -> f64 {
    let a = -epsilon * sigma + 0.5 / sigma;
    let b = -epsilon * sigma - 0.5 / sigma;
    let tail = cdf(b);
    let second = if tail == 0.0 {
        0.0
    } else if epsilon < 700.0 {
        epsilon.exp() * tail
    } else {
        (epsilon + tail.ln()).exp()
    };
    (cdf(a) - second).max(0.0)
}

/// Solves `gaussian_delta(ε, σ*) = δ/2` for σ* by bisection.
///
/// δ(ε, ·) is strictly decreasing, so the root is unique. The upper end of
/// the bracket is grown geometrically from 1e-3.
pub fn solve_sigma_star(target: PrivacyTarget) -> f64 {
    let eps = target.epsilon();
    let goal = target.delta() / 2.0;

    let mut lo = 1e-3;
    let mut hi = 1e-3;
    while delta_unchecked(eps, hi) > goal {
        lo = hi;
        hi *= 2.0;
    }
    if lo == hi {
        // δ(1e-3) is already below the goal; grow downwards instead
        while delta_unchecked(eps, lo) <= goal && lo > 1e-300 {
            hi = lo;
            lo /= 2.0;
        }
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if delta_unchecked(eps, mid) > goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever end lands closer in δ
    let dl = (delta_unchecked(eps, lo) - goal).abs();
    let dh = (delta_unchecked(eps, hi) - goal).abs();
    if dl < dh {
        lo
    } else {
        hi
    }
}

/// ρ₁ = max over t in 1..=Δ₁ of `1/√t + σ₁ Φ⁻¹((1 − δ/2)^{1/t})`.
pub fn compute_rho1(sigma1: f64, delta: f64, delta1_cap: usize) -> Result<f64> {
    if !(sigma1 >= 0.0 && sigma1.is_finite()) {
        return Err(invalid(format!(
            "sigma1 must be non-negative, got {sigma1}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if delta1_cap == 0 {
        return Err(invalid("unigram contribution cap must be at least 1"));
    }
    let log_keep = (-delta / 2.0).ln_1p();
    let rho = (1..=delta1_cap)
        .map(|t| {
            let t = t as f64;
            // 1 − (1 − δ/2)^{1/t}, without the cancellation
            let tail = -(log_keep / t).exp_m1();
            1.0 / t.sqrt() + sigma1 * upper_quantile(tail)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(rho)
}

/// ρₖ = σₖ Φ⁻¹(1 − η min(1, |Sₖ₋₁| / |Vₖ|)) for k ≥ 2.
///
/// Returns +∞ when either count is zero: nothing can be released at that
/// level. With σₖ = 0 (non-private debug runs) the threshold is 0.
pub fn compute_rho_k(sigma_k: f64, eta: f64, size_prev: u64, size_valid: u64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    if !(sigma_k >= 0.0 && sigma_k.is_finite()) {
        return Err(invalid(format!(
            "sigma_k must be non-negative, got {sigma_k}"
        )));
    }
    if size_prev == 0 || size_valid == 0 {
        return Ok(f64::INFINITY);
    }
    let ratio = (size_prev as f64 / size_valid as f64).min(1.0);
    Ok(sigma_k * upper_quantile(eta * ratio))
}

/// Pr[N(0, σ²) > ρ], the chance that a zero-weight candidate is released.
pub fn spurious_probability(rho: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if rho < 0.0 { 1.0 } else { 0.0 };
    }
    cdf(-rho / sigma)
}

/// Every knob of one extraction: noise per level, thresholds, caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    /// Maximum n-gram length T.
    pub max_len: usize,
    /// `None` for non-private debug schedules.
    pub target: Option<PrivacyTarget>,
    pub sigma_star: f64,
    /// σ₁..σ_T.
    pub sigmas: Vec<f64>,
    pub rho1: f64,
    /// Δ₁..Δ_T.
    pub caps: Vec<usize>,
    pub eta: f64,
    /// Geometric decay c: σₖ = c·σₖ₋₁.
    pub decay: f64,
    /// Validity-estimation sampling probability. `None` picks
    /// min(1, 10⁶ / (|S₁|·|Sₖ₋₁|)) per level.
    pub sample_p: Option<f64>,
    /// False when σ = 0 was requested; such output carries no guarantee.
    pub private: bool,
}

/// Splits σ* geometrically across levels: σₖ = c·σₖ₋₁, with σ₁ chosen so
/// that Σ 1/σₖ² = 1/σ*². ρ₁ is computed from σ₁, δ and Δ₁.
pub fn allocate_schedule(
    target: PrivacyTarget,
    max_len: usize,
    decay: f64,
    caps: &[usize],
    eta: f64,
    sample_p: Option<f64>,
) -> Result<NoiseSchedule> {
    if max_len == 0 {
        return Err(invalid("maximum n-gram length must be at least 1"));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(invalid(format!("decay must lie in (0, 1], got {decay}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    if let Some(p) = sample_p {
        if !(p > 0.0 && p <= 1.0) {
            return Err(invalid(format!(
                "sampling probability must lie in (0, 1], got {p}"
            )));
        }
    }
    let caps = expand_caps(caps, max_len)?;

    let sigma_star = solve_sigma_star(target);
    let sigmas = geometric_split(sigma_star, max_len, decay);
    let rho1 = compute_rho1(sigmas[0], target.delta(), caps[0])?;

    Ok(NoiseSchedule {
        max_len,
        target: Some(target),
        sigma_star,
        sigmas,
        rho1,
        caps,
        eta,
        decay,
        sample_p,
        private: true,
    })
}

pub(crate) fn geometric_split(sigma_star: f64, levels: usize, decay: f64) -> Vec<f64> {
    // Σ_{k<T} c^{−2k}; inverse-square weights of σₖ relative to σ₁
    let weight: f64 = (0..levels).map(|k| decay.powi(-2 * k as i32)).sum();
    let mut sigmas = Vec::with_capacity(levels);
    let mut sigma = sigma_star * weight.sqrt();
    for _ in 0..levels {
        sigmas.push(sigma);
        sigma *= decay;
    }
    sigmas
}

/// A single cap applies to every level; otherwise one per level.
pub(crate) fn expand_caps(caps: &[usize], max_len: usize) -> Result<Vec<usize>> {
    let caps = match caps.len() {
        1 => vec![caps[0]; max_len],
        n if n == max_len => caps.to_vec(),
        n => {
            return Err(invalid(format!(
                "expected 1 or {max_len} contribution caps, got {n}"
            )))
        }
    };
    if caps.contains(&0) {
        return Err(invalid("contribution caps must be at least 1"));
    }
    Ok(caps)
}

impl NoiseSchedule {
    /// A σ = 0 schedule for oracle testing. Not differentially private.
    pub fn noiseless(max_len: usize, rho1: f64, caps: &[usize], eta: f64) -> Result<Self> {
        if max_len == 0 {
            return Err(invalid("maximum n-gram length must be at least 1"));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1), got {eta}")));
        }
        Ok(Self {
            max_len,
            target: None,
            sigma_star: 0.0,
            sigmas: vec![0.0; max_len],
            rho1,
            caps: expand_caps(caps, max_len)?,
            eta,
            decay: 1.0,
            sample_p: None,
            private: false,
        })
    }

    pub fn sigma(&self, k: usize) -> f64 {
        self.sigmas[k - 1]
    }

    pub fn cap(&self, k: usize) -> usize {
        self.caps[k - 1]
    }

    /// |1/σ*² − Σ 1/σₖ²| relative to 1/σ*². Zero for debug schedules.
    pub fn composition_residual(&self) -> f64 {
        if !self.private {
            return 0.0;
        }
        composition_residual(self.sigma_star, &self.sigmas)
    }
}

/// Relative mismatch between 1/σ*² and Σ 1/σₖ².
pub fn composition_residual(sigma_star: f64, sigmas: &[f64]) -> f64 {
    let want = 1.0 / (sigma_star * sigma_star);
    let got: f64 = sigmas.iter().map(|s| 1.0 / (s * s)).sum();
    ((got - want) / want).abs()
}

/// σ of the single Gaussian mechanism equivalent to composing `sigmas`.
pub fn composed_sigma(sigmas: &[f64]) -> f64 {
    let inv: f64 = sigmas.iter().map(|s| 1.0 / (s * s)).sum();
    1.0 / inv.sqrt()
}
