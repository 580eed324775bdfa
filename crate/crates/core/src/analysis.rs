//! Closed-form and semi-analytic error predictors for the binary problem.
//!
//! Under `H0` with the sign attack of strength `kappa`, coordinate `i`
//! contributes `C = g(2|mu| + N - kappa)^2 - g(N - kappa)^2` to the GLRT
//! cost difference (`g` the shrinkage at budget `eps`), and the decision is
//! wrong when the sum is negative. The lower bound
//! `Y = (t + N)^2 1{N >= -t} - N^2` with `t = 2|mu| - kappa - eps` satisfies
//! `Y <= C` pointwise.

use std::collections::HashMap;

use serde::Serialize;

use crate::classifiers::ClassifierKind;
use crate::error::{Error, Result};
use crate::model::{AttackMode, AttackSpec, HypothesisModel, TwoLevelProfile};
use crate::numerics::{gaussian_pdf, q_function, truncated_poly_expectation, Budget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    ExactC,
    LowerBoundY,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoordinateMoments {
    pub mean: f64,
    pub variance: f64,
    pub kind: MomentKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimateMethod {
    MonteCarlo { trials: u64, ci_halfwidth: f64 },
    CltExact,
    CltLowerBound,
    QOfSnr,
}

impl EstimateMethod {
    /// Tag used in tabular output.
    pub fn tag(&self) -> &'static str {
        match self {
            EstimateMethod::MonteCarlo { .. } => "monte_carlo",
            EstimateMethod::CltExact => "clt_exact",
            EstimateMethod::CltLowerBound => "clt_lower_bound",
            EstimateMethod::QOfSnr => "q_of_snr",
        }
    }

    pub fn ci_halfwidth(&self) -> Option<f64> {
        match self {
            EstimateMethod::MonteCarlo { ci_halfwidth, .. } => Some(*ci_halfwidth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub value: f64,
    #[serde(flatten)]
    pub method: EstimateMethod,
}

impl ErrorEstimate {
    pub fn new(value: f64, method: EstimateMethod) -> Self {
        ErrorEstimate {
            value: value.clamp(0.0, 1.0),
            method,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

fn check_kappa(eps: f64, kappa: f64) -> Result<f64> {
    let eps = Budget::new(eps)?.value();
    if !(kappa.is_finite() && (0.0..=eps).contains(&kappa)) {
        return Err(Error::invalid(format!(
            "attack strength must lie in [0, {eps}], got {kappa}"
        )));
    }
    Ok(eps)
}

/// Moments of `Y` for a given offset `t`.
pub fn y_moments_from_offset(t: f64, sigma: f64) -> Result<CoordinateMoments> {
    check_sigma(sigma)?;
    if !t.is_finite() {
        return Err(Error::invalid(format!("offset must be finite, got {t}")));
    }
    let s2 = sigma * sigma;
    let u = t / sigma;
    let phi_term = sigma * t * gaussian_pdf(u);
    let (mean, variance) = if t >= 0.0 {
        // Written around t^2 and 4 sigma^2 t^2 so the large-t limit does not
        // cancel: with q = Q(t / sigma), mean = t^2 + delta.
        let q = q_function(u);
        let quartic = t.powi(4) + 4.0 * t * t * s2 - 3.0 * s2 * s2;
        let delta = phi_term - q * (t * t + s2);
        let var = 4.0 * t * t * s2 - q * quartic + phi_term * (t * t + 3.0 * s2)
            - 2.0 * t * t * delta
            - delta * delta;
        (t * t + delta, var)
    } else {
        let p = q_function(-u);
        let mean = p * (t * t + s2) - s2 + phi_term;
        let second = 3.0 * s2 * s2
            + p * (t.powi(4) + 4.0 * t * t * s2 - 3.0 * s2 * s2)
            + phi_term * (t * t + 3.0 * s2);
        (mean, second - mean * mean)
    };
    Ok(CoordinateMoments {
        mean,
        variance: variance.max(0.0),
        kind: MomentKind::LowerBoundY,
    })
}

/// Closed-form moments of the lower bound `Y` with `t = 2|mu| - kappa - eps`.
pub fn y_bound_moments(mu: f64, eps: f64, kappa: f64, sigma: f64) -> Result<CoordinateMoments> {
    let eps = check_kappa(eps, kappa)?;
    y_moments_from_offset(2.0 * mu.abs() - kappa - eps, sigma)
}

/// Coefficients (constant first) of `g(shift + N)^2` on a region where the
/// shrinkage is in the given branch.
fn squared_branch(shift: f64, eps: f64, at: f64) -> [f64; 3] {
    let z = shift + at;
    let c = if z > eps {
        shift - eps
    } else if z < -eps {
        shift + eps
    } else {
        return [0.0; 3];
    };
    [c * c, 2.0 * c, 1.0]
}

/// Exact mean and variance of `C = g(2|mu| + N - kappa)^2 - g(N - kappa)^2`.
///
/// The shrinkage breakpoints of both terms split the line into at most five
/// intervals on which `C` is a quadratic in `N`; each piece is integrated
/// against the Gaussian with truncated moments.
pub fn cost_difference_moments(mu: f64, eps: f64, kappa: f64, sigma: f64) -> Result<CoordinateMoments> {
    let eps = check_kappa(eps, kappa)?;
    check_sigma(sigma)?;
    if !mu.is_finite() {
        return Err(Error::invalid(format!("mean must be finite, got {mu}")));
    }
    let a = 2.0 * mu.abs() - kappa;
    let mut cuts = vec![eps - a, -eps - a, eps + kappa, -eps + kappa];
    cuts.sort_by(f64::total_cmp);
    let mut edges = Vec::with_capacity(6);
    edges.push(f64::NEG_INFINITY);
    edges.extend(cuts);
    edges.push(f64::INFINITY);

    let pieces: Vec<(f64, f64, [f64; 3])> = edges
        .windows(2)
        .filter(|w| w[0] < w[1])
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let at = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 1.0,
                (false, true) => hi - 1.0,
                (false, false) => 0.0,
            };
            let p = squared_branch(a, eps, at);
            let n = squared_branch(-kappa, eps, at);
            (lo, hi, [p[0] - n[0], p[1] - n[1], p[2] - n[2]])
        })
        .collect();

    let mut mean = 0.0;
    for (lo, hi, c) in &pieces {
        mean += truncated_poly_expectation(c, sigma, *lo, *hi)?;
    }
    // Central second moment piecewise, which avoids E[C^2] - E[C]^2.
    let mut variance = 0.0;
    for (lo, hi, c) in &pieces {
        let d = [c[0] - mean, c[1], c[2]];
        let sq = [
            d[0] * d[0],
            2.0 * d[0] * d[1],
            d[1] * d[1] + 2.0 * d[0] * d[2],
            2.0 * d[1] * d[2],
            d[2] * d[2],
        ];
        variance += truncated_poly_expectation(&sq, sigma, *lo, *hi)?;
    }
    Ok(CoordinateMoments {
        mean,
        variance: variance.max(0.0),
        kind: MomentKind::ExactC,
    })
}

/// `Q(sum m / sqrt(sum rho^2))`, with the deterministic limits taken when
/// every variance vanishes.
pub fn clt_from_moments<I>(moments: I) -> f64
where
    I: IntoIterator<Item = CoordinateMoments>,
{
    let (m, v) = moments
        .into_iter()
        .fold((0.0, 0.0), |(m, v), c| (m + c.mean, v + c.variance));
    if v > 0.0 {
        q_function(m / v.sqrt())
    } else if m > 0.0 {
        0.0
    } else if m < 0.0 {
        1.0
    } else {
        // C == 0 identically: the tie goes to the true class.
        0.0
    }
}

/// CLT error prediction for a binary model under the sign attack of strength
/// `kappa`. With `use_lower_bound` the `Y` moments are used, which predicts
/// an upper bound on the error.
pub fn clt_error(model: &HypothesisModel, eps: f64, kappa: f64, use_lower_bound: bool) -> Result<ErrorEstimate> {
    check_kappa(eps, kappa)?;
    let half = model.binary_half_difference()?;
    let sigma = model.sigma();
    let mut cache: HashMap<u64, CoordinateMoments> = HashMap::new();
    let mut all = Vec::with_capacity(half.len());
    for mu in &half {
        let key = mu.abs().to_bits();
        let m = match cache.get(&key) {
            Some(m) => *m,
            None => {
                let m = if use_lower_bound {
                    y_bound_moments(*mu, eps, kappa, sigma)?
                } else {
                    cost_difference_moments(*mu, eps, kappa, sigma)?
                };
                cache.insert(key, m);
                m
            }
        };
        all.push(m);
    }
    let method = if use_lower_bound {
        EstimateMethod::CltLowerBound
    } else {
        EstimateMethod::CltExact
    };
    Ok(ErrorEstimate::new(clt_from_moments(all), method))
}

fn check_profile_args(d: usize, p: f64, sigma: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("fraction p must lie in [0, 1], got {p}")));
    }
    check_sigma(sigma)
}

/// `(a - k)^2 d p (eps / sigma)^2`, the minimax SNR on a two-level profile
/// where only the `a eps` coordinates survive the shrinkage.
pub fn snr_minimax(d: usize, p: f64, a: f64, kappa_ratio: f64, eps: f64, sigma: f64) -> Result<f64> {
    check_profile_args(d, p, sigma)?;
    Budget::new(eps)?;
    if !(a.is_finite() && kappa_ratio.is_finite() && kappa_ratio >= 0.0) {
        return Err(Error::invalid("profile level and kappa ratio must be finite"));
    }
    Ok((a - kappa_ratio).powi(2) * d as f64 * p * (eps / sigma).powi(2))
}

/// `d (p m_a + (1 - p) m_b)^2 / (p rho_a^2 + (1 - p) rho_b^2)`.
pub fn snr_glrt(d: usize, p: f64, strong: CoordinateMoments, weak: CoordinateMoments) -> Result<f64> {
    check_profile_args(d, p, 1.0)?;
    let var = p * strong.variance + (1.0 - p) * weak.variance;
    if var <= 0.0 {
        return Err(Error::DegenerateModel(
            "GLRT SNR undefined: per-coordinate variances are zero".into(),
        ));
    }
    let mean = p * strong.mean + (1.0 - p) * weak.mean;
    Ok(d as f64 * mean * mean / var)
}

pub fn error_from_snr(snr: f64) -> ErrorEstimate {
    ErrorEstimate::new(q_function(snr.max(0.0).sqrt()), EstimateMethod::QOfSnr)
}

/// Exact error of the binary minimax rule under the sign attack of strength
/// `kappa`, for any `kappa >= 0`:
/// `Q((g(mu)^T mu - kappa ||g(mu)||_1) / (sigma ||g(mu)||))` on the
/// half-difference `mu`.
pub fn minimax_error(model: &HypothesisModel, eps: f64, kappa: f64) -> Result<ErrorEstimate> {
    let b = Budget::new(eps)?;
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::invalid(format!("attack strength must be >= 0, got {kappa}")));
    }
    let mu = model.binary_half_difference()?;
    let w: Vec<f64> = mu.iter().map(|v| b.shrink(*v)).collect();
    let l2 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if l2 == 0.0 {
        // The rule ignores the data and always answers class 0.
        return Ok(ErrorEstimate::new(0.0, EstimateMethod::QOfSnr));
    }
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let signal: f64 = w.iter().zip(&mu).map(|(a, m)| a * m).sum();
    let margin = (signal - kappa * l1) / (model.sigma() * l2);
    Ok(ErrorEstimate::new(q_function(margin), EstimateMethod::QOfSnr))
}

/// Exact error of the minimum distance rule under the sign attack of
/// strength `kappa`: `Q((||mu||^2 - kappa ||mu||_1) / (sigma ||mu||))`.
pub fn min_distance_error(model: &HypothesisModel, kappa: f64) -> Result<ErrorEstimate> {
    minimax_error(model, 0.0, kappa)
}

/// Low-noise breakdown thresholds `(||mu||_inf, ||mu||^2 / ||mu||_1)` of the
/// binary half-difference: GLRT error vanishes as `sigma -> 0` iff
/// `eps < ||mu||_inf`; the minimum distance rule errs with probability at
/// least one half once `eps > ||mu||^2 / ||mu||_1`.
pub fn low_noise_thresholds(model: &HypothesisModel) -> Result<(f64, f64)> {
    let mu = model.binary_half_difference()?;
    let l1: f64 = mu.iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        return Err(Error::invalid("binary means coincide"));
    }
    let linf = mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l2sq: f64 = mu.iter().map(|v| v * v).sum();
    Ok((linf, l2sq / l1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSearch {
    CltExact,
    MonteCarlo { trials: u64, seed: u64 },
}

const BRACKET_STEPS: usize = 60;
const BISECTION_STEPS: usize = 200;

/// Noise level at which the binary GLRT under the sign attack of strength
/// `kappa` reaches `target` error. `template` supplies the means; its sigma
/// is only the starting point of the bracket search.
///
/// Bisection runs on `log sigma` after a geometric bracket; the result is
/// within `1e-3` relative error of the target (CLT) or within the Monte Carlo
/// resolution.
pub fn sigma_for_target_error(
    template: &HypothesisModel,
    eps: f64,
    kappa: f64,
    target: f64,
    method: SigmaSearch,
) -> Result<f64> {
    check_kappa(eps, kappa)?;
    if !(target > 0.0 && target < 0.5) {
        return Err(Error::invalid(format!("target error must lie in (0, 0.5), got {target}")));
    }
    if template.num_classes() != 2 {
        return Err(Error::invalid("sigma search needs a binary model"));
    }
    let eval = |sigma: f64| -> Result<f64> {
        let m = template.with_sigma(sigma)?;
        match method {
            SigmaSearch::CltExact => Ok(clt_error(&m, eps, kappa, false)?.value),
            SigmaSearch::MonteCarlo { trials, seed } => {
                let spec = AttackSpec::new(eps, kappa, AttackMode::NoiseAgnosticHeuristic)?;
                let out = crate::sim::monte_carlo_error(
                    &m,
                    ClassifierKind::Glrt,
                    eps,
                    &spec,
                    crate::sim::ClassSelection::Class(0),
                    trials,
                    seed,
                )?;
                Ok(out.error)
            }
        }
    };

    let start = template.sigma();
    let f0 = eval(start)?;
    let (mut lo, mut hi) = (start, start);
    if f0 < target {
        for _ in 0..BRACKET_STEPS {
            lo = hi;
            hi *= 2.0;
            if eval(hi)? >= target {
                break;
            }
        }
        if eval(hi)? < target {
            return Err(Error::BracketExhausted(format!(
                "error stays below {target} up to sigma = {hi}"
            )));
        }
    } else {
        for _ in 0..BRACKET_STEPS {
            hi = lo;
            lo /= 2.0;
            if eval(lo)? < target {
                break;
            }
        }
        if eval(lo)? >= target {
            return Err(Error::BracketExhausted(format!(
                "error stays above {target} down to sigma = {lo}"
            )));
        }
    }

    for _ in 0..BISECTION_STEPS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-10 {
            break;
        }
    }
    let sigma = (lo * hi).sqrt();
    if method == SigmaSearch::CltExact {
        let got = eval(sigma)?;
        if (got - target).abs() > 1e-3 * target {
            return Err(Error::BracketExhausted(format!(
                "CLT error is discontinuous near sigma = {sigma}: {got} vs target {target}"
            )));
        }
    }
    Ok(sigma)
}

/// Per-level exact moments of a two-level profile: `(strong, weak)`.
pub fn profile_moments(profile: &TwoLevelProfile, kappa: f64, sigma: f64) -> Result<(CoordinateMoments, CoordinateMoments)> {
    profile.validate()?;
    Ok((
        cost_difference_moments(profile.a * profile.eps, profile.eps, kappa, sigma)?,
        cost_difference_moments(profile.b * profile.eps, profile.eps, kappa, sigma)?,
    ))
}
