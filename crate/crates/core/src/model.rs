//! Problem instances: class templates, noise level, priors, attack settings,
//! and the seeded observation generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Budget;

/// Upper bound on the signal dimension accepted from configs.
pub const MAX_DIM: usize = 1 << 20;
/// Upper bound on the number of classes accepted from configs.
pub const MAX_CLASSES: usize = 256;

const PRIOR_TOLERANCE: f64 = 1e-12;

/// `M` Gaussian hypotheses `X = mu_k + e + N`, `N ~ N(0, sigma^2 I_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct HypothesisModel {
    means: Vec<Vec<f64>>,
    sigma: f64,
    priors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    means: Vec<Vec<f64>>,
    sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    priors: Option<Vec<f64>>,
}

impl TryFrom<RawModel> for HypothesisModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        match raw.priors {
            Some(priors) => HypothesisModel::new(raw.means, raw.sigma, priors),
            None => HypothesisModel::uniform(raw.means, raw.sigma),
        }
    }
}

impl From<HypothesisModel> for RawModel {
    fn from(m: HypothesisModel) -> Self {
        RawModel {
            means: m.means,
            sigma: m.sigma,
            priors: Some(m.priors),
        }
    }
}

impl HypothesisModel {
    pub fn new(means: Vec<Vec<f64>>, sigma: f64, priors: Vec<f64>) -> Result<Self> {
        let m = means.len();
        if m < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {m}")));
        }
        if m > MAX_CLASSES {
            return Err(Error::invalid(format!("at most {MAX_CLASSES} classes supported, got {m}")));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::invalid("mean vectors must be non-empty"));
        }
        if d > MAX_DIM {
            return Err(Error::UnsupportedDimension { dim: d, max: MAX_DIM });
        }
        for mean in &means {
            if mean.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: mean.len(),
                });
            }
            if mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("mean entries must be finite"));
            }
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")));
        }
        if priors.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: priors.len(),
            });
        }
        if priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("priors must be finite and non-negative"));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(Error::invalid(format!("priors must sum to 1, got {total}")));
        }
        Ok(HypothesisModel { means, sigma, priors })
    }

    pub fn uniform(means: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let m = means.len().max(1);
        let priors = vec![1.0 / m as f64; means.len()];
        Self::new(means, sigma, priors)
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn is_uniform(&self) -> bool {
        let p = 1.0 / self.num_classes() as f64;
        self.priors.iter().all(|q| (q - p).abs() <= PRIOR_TOLERANCE)
    }

    /// Same templates and priors at a different noise level.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.means.clone(), sigma, self.priors.clone())
    }

    pub fn check_class(&self, k: usize) -> Result<()> {
        if k >= self.num_classes() {
            return Err(Error::invalid(format!(
                "class index {k} out of range for {} classes",
                self.num_classes()
            )));
        }
        Ok(())
    }

    /// `(mu_j - mu_k) / 2`.
    pub fn pairwise_half_difference(&self, j: usize, k: usize) -> Result<Vec<f64>> {
        self.check_class(j)?;
        self.check_class(k)?;
        if j == k {
            return Err(Error::invalid("pairwise difference needs two distinct classes"));
        }
        Ok(self.means[j]
            .iter()
            .zip(&self.means[k])
            .map(|(a, b)| (a - b) / 2.0)
            .collect())
    }

    /// Half-difference of a binary model, i.e. the template of the equivalent
    /// symmetric problem after recentring.
    pub fn binary_half_difference(&self) -> Result<Vec<f64>> {
        if self.num_classes() != 2 {
            return Err(Error::invalid(format!(
                "binary analysis needs M = 2, got {}",
                self.num_classes()
            )));
        }
        self.pairwise_half_difference(0, 1)
    }
}

/// Symmetric binary template: a fraction `p` of the coordinates at `a * eps`,
/// the rest at `b * eps`; classes are `+mu` and `-mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelProfile {
    pub d: usize,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
}

impl TwoLevelProfile {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return Err(Error::config("d", format!("must be in 1..={MAX_DIM}")));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::config("p", "must satisfy 0 < p < 1"));
        }
        if !(self.a.is_finite() && self.a > 1.0) {
            return Err(Error::config("a", "must satisfy a > 1"));
        }
        if !(self.b.is_finite() && (0.0..=1.0).contains(&self.b)) {
            return Err(Error::config("b", "must satisfy 0 <= b <= 1"));
        }
        Budget::new(self.eps).map_err(|e| Error::config("eps", e.to_string()))?;
        Ok(())
    }

    pub fn with_dim(&self, d: usize) -> Self {
        TwoLevelProfile { d, ..*self }
    }

    /// Number of coordinates at the `a` level.
    pub fn strong_count(&self) -> usize {
        ((self.p * self.d as f64).round() as usize).min(self.d)
    }

    pub fn template(&self) -> Vec<f64> {
        let na = self.strong_count();
        (0..self.d)
            .map(|i| if i < na { self.a * self.eps } else { self.b * self.eps })
            .collect()
    }

    pub fn model(&self, sigma: f64) -> Result<HypothesisModel> {
        self.validate()?;
        let mu = self.template();
        let neg = mu.iter().map(|v| -v).collect();
        HypothesisModel::uniform(vec![mu, neg], sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    None,
    NoiseAgnosticHeuristic,
    NoiseAwareOptimal,
    FixedVector(Vec<f64>),
}

/// Designed budget `eps`, employed strength `kappa <= eps`, and how the
/// attack direction is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    budget: Budget,
    strength: f64,
    mode: AttackMode,
}

impl AttackSpec {
    pub fn new(budget: f64, strength: f64, mode: AttackMode) -> Result<Self> {
        let budget = Budget::new(budget)?;
        if !(strength.is_finite() && strength >= 0.0 && strength <= budget.value()) {
            return Err(Error::invalid(format!(
                "attack strength must lie in [0, {}], got {strength}",
                budget.value()
            )));
        }
        if let AttackMode::FixedVector(e) = &mode {
            check_within_budget(e, budget.value())?;
        }
        Ok(AttackSpec {
            budget,
            strength,
            mode,
        })
    }

    pub fn none() -> Self {
        AttackSpec {
            budget: Budget::ZERO,
            strength: 0.0,
            mode: AttackMode::None,
        }
    }

    pub fn budget(&self) -> f64 {
        self.budget.value()
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn mode(&self) -> &AttackMode {
        &self.mode
    }
}

pub(crate) fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Rejects perturbations outside the l-infinity ball of radius `eps`.
pub fn check_within_budget(e: &[f64], eps: f64) -> Result<()> {
    let norm = linf_norm(e);
    if e.iter().any(|v| !v.is_finite()) || norm > eps {
        return Err(Error::invalid(format!(
            "perturbation l-inf norm {norm} exceeds budget {eps}"
        )));
    }
    Ok(())
}

/// Decision outcome: a class index, or a PRL rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Class(usize),
    Reject,
}

impl Label {
    pub fn is_class(self, k: usize) -> bool {
        self == Label::Class(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub label: Label,
    /// Per-class costs (GLRT, minimum distance) or, for PRL, the number of
    /// pairwise tests lost by each class.
    pub costs: Option<Vec<f64>>,
}

/// A received sample together with the noise realisation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub true_class: usize,
    pub noise: Vec<f64>,
}

impl Observation {
    /// `x = mu_k + e + N`.
    pub fn compose(
        model: &HypothesisModel,
        true_class: usize,
        attack: &[f64],
        noise: Vec<f64>,
    ) -> Result<Self> {
        model.check_class(true_class)?;
        let d = model.dim();
        for len in [attack.len(), noise.len()] {
            if len != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: len,
                });
            }
        }
        let x = model
            .mean(true_class)
            .iter()
            .zip(attack)
            .zip(&noise)
            .map(|((m, e), n)| m + e + n)
            .collect();
        Ok(Observation {
            x,
            true_class,
            noise,
        })
    }
}

/// Counter-based random substreams: one independent ChaCha stream per trial
/// index under a common key derived from the run seed. A trial's draws do not
/// depend on which thread runs it or on how many other trials exist.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    key: [u8; 32],
}

impl NoiseStreams {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill(&mut key);
        NoiseStreams { key }
    }

    pub fn trial(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }

    /// Standard normal draws for one trial, written into `out`.
    pub fn standard_normals(&self, index: u64, out: &mut [f64]) {
        let mut rng = self.trial(index);
        for z in out.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
    }
}

/// `N ~ N(0, sigma^2 I_d)` drawn from `rng`.
pub fn draw_noise<R: Rng + ?Sized>(model: &HypothesisModel, rng: &mut R) -> Vec<f64> {
    let sigma = model.sigma();
    (0..model.dim())
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Draws fresh noise and composes `x = mu_k + e + N` after checking the
/// perturbation against the attack budget.
pub fn generate_observation<R: Rng + ?Sized>(
    model: &HypothesisModel,
    true_class: usize,
    attack_vector: &[f64],
    budget: f64,
    rng: &mut R,
) -> Result<Observation> {
    Budget::new(budget)?;
    check_within_budget(attack_vector, budget)?;
    model.check_class(true_class)?;
    let noise = draw_noise(model, rng);
    Observation::compose(model, true_class, attack_vector, noise)
}
