//! Seeded parallel Monte Carlo engine.
//!
//! Trial `t` draws its noise from substream `t` of the run seed, so every
//! configuration evaluated with the same seed sees the same noise (common
//! random numbers), and results are aggregated as integer counts so they do
//! not depend on the thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{ErrorEstimate, EstimateMethod};
use crate::attacks::{heuristic_agnostic_attack, AwareAttacker};
use crate::classifiers::{Classifier, ClassifierKind};
use crate::error::{Error, Result};
use crate::model::{check_within_budget, AttackMode, AttackSpec, HypothesisModel, Label, NoiseStreams};
use crate::numerics::Budget;

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Upper bound on trials per evaluation.
pub const MAX_TRIALS: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassSelection {
    /// Class-conditional error under one true class.
    Class(usize),
    /// Prior-weighted error over all classes.
    PriorWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McOutcome {
    pub error: f64,
    pub ci_halfwidth: f64,
    pub reject_rate: f64,
    pub trials: u64,
    /// `(class, errors, rejects)` for every simulated class.
    pub per_class: Vec<(usize, u64, u64)>,
}

impl McOutcome {
    pub fn estimate(&self) -> ErrorEstimate {
        ErrorEstimate::new(
            self.error,
            EstimateMethod::MonteCarlo {
                trials: self.trials,
                ci_halfwidth: self.ci_halfwidth,
            },
        )
    }

    /// Class-conditional error frequency of `class`, if it was simulated.
    pub fn class_error(&self, class: usize) -> Option<f64> {
        self.per_class
            .iter()
            .find(|c| c.0 == class)
            .map(|c| c.1 as f64 / self.trials as f64)
    }
}

/// 95% normal-approximation half-width for an error frequency.
pub fn ci_halfwidth(p: f64, trials: u64) -> f64 {
    Z_95 * (p * (1.0 - p) / trials as f64).sqrt()
}

enum Policy {
    Fixed(Vec<f64>),
    Aware(AwareAttacker),
}

struct Counts {
    errors: Vec<u64>,
    rejects: Vec<u64>,
}

impl Counts {
    fn zero(n: usize) -> Self {
        Counts {
            errors: vec![0; n],
            rejects: vec![0; n],
        }
    }

    fn merge(mut self, other: Counts) -> Self {
        for (a, b) in self.errors.iter_mut().zip(other.errors) {
            *a += b;
        }
        for (a, b) in self.rejects.iter_mut().zip(other.rejects) {
            *a += b;
        }
        self
    }
}

fn build_policy(
    model: &HypothesisModel,
    kind: ClassifierKind,
    class: usize,
    attack: &AttackSpec,
) -> Result<Policy> {
    let d = model.dim();
    Ok(match attack.mode() {
        AttackMode::None => Policy::Fixed(vec![0.0; d]),
        AttackMode::FixedVector(v) => {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: v.len(),
                });
            }
            check_within_budget(v, attack.budget())?;
            Policy::Fixed(v.clone())
        }
        AttackMode::NoiseAgnosticHeuristic => Policy::Fixed(
            heuristic_agnostic_attack(model, kind, class, attack.budget(), attack.strength())?.vector,
        ),
        AttackMode::NoiseAwareOptimal => {
            Policy::Aware(AwareAttacker::new(model, class, attack.budget(), attack.strength())?)
        }
    })
}

/// Error frequency of classifier `kind` (designed budget `eps`) under
/// `attack`. Noise-aware attacks see each trial's noise before choosing.
/// A PRL rejection counts as an error and is also reported separately.
///
/// Prior-weighted runs simulate every class on the same noise draws and
/// combine the class-conditional frequencies with the priors; the CI treats
/// the classes as independent.
pub fn monte_carlo_error(
    model: &HypothesisModel,
    kind: ClassifierKind,
    eps: f64,
    attack: &AttackSpec,
    selection: ClassSelection,
    trials: u64,
    seed: u64,
) -> Result<McOutcome> {
    let classifier = kind.build(model, eps)?;
    monte_carlo_with(model, classifier.as_ref(), kind, attack, selection, trials, seed)
}

/// As [`monte_carlo_error`] with a prebuilt classifier; `kind` selects the
/// nearest-neighbour rule for heuristic attacks.
pub fn monte_carlo_with(
    model: &HypothesisModel,
    classifier: &dyn Classifier,
    kind: ClassifierKind,
    attack: &AttackSpec,
    selection: ClassSelection,
    trials: u64,
    seed: u64,
) -> Result<McOutcome> {
    Budget::new(attack.budget())?;
    if trials == 0 || trials > MAX_TRIALS {
        return Err(Error::invalid(format!("trials must be in 1..={MAX_TRIALS}, got {trials}")));
    }
    let (classes, weights): (Vec<usize>, Vec<f64>) = match selection {
        ClassSelection::Class(j) => {
            model.check_class(j)?;
            (vec![j], vec![1.0])
        }
        ClassSelection::PriorWeighted => ((0..model.num_classes()).collect(), model.priors().to_vec()),
    };
    let policies = classes
        .iter()
        .map(|&j| build_policy(model, kind, j, attack))
        .collect::<Result<Vec<_>>>()?;

    let d = model.dim();
    let sigma = model.sigma();
    let streams = NoiseStreams::new(seed);
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || (Counts::zero(classes.len()), vec![0.0; d], vec![0.0; d]),
            |(mut acc, mut noise, mut x), t| {
                streams.standard_normals(t, &mut noise);
                for n in noise.iter_mut() {
                    *n *= sigma;
                }
                for (slot, (&j, policy)) in classes.iter().zip(&policies).enumerate() {
                    let mean = model.mean(j);
                    let label = match policy {
                        Policy::Fixed(e) => {
                            for i in 0..d {
                                x[i] = mean[i] + e[i] + noise[i];
                            }
                            classifier.label(&x)
                        }
                        Policy::Aware(a) => match a.search(model, classifier, &noise, &mut x) {
                            // x still holds the successful observation
                            Some(_) => classifier.label(&x),
                            None => Label::Class(j),
                        },
                    };
                    if !label.is_class(j) {
                        acc.errors[slot] += 1;
                        if label == Label::Reject {
                            acc.rejects[slot] += 1;
                        }
                    }
                }
                (acc, noise, x)
            },
        )
        .map(|(c, _, _)| c)
        .reduce(|| Counts::zero(classes.len()), Counts::merge);

    let n = trials as f64;
    let mut error = 0.0;
    let mut reject_rate = 0.0;
    let mut var = 0.0;
    for (slot, w) in weights.iter().enumerate() {
        let p = counts.errors[slot] as f64 / n;
        error += w * p;
        reject_rate += w * counts.rejects[slot] as f64 / n;
        var += w * w * p * (1.0 - p) / n;
    }
    Ok(McOutcome {
        error: error.clamp(0.0, 1.0),
        ci_halfwidth: Z_95 * var.sqrt(),
        reject_rate: reject_rate.clamp(0.0, 1.0),
        trials,
        per_class: classes
            .iter()
            .enumerate()
            .map(|(slot, &j)| (j, counts.errors[slot], counts.rejects[slot]))
            .collect(),
    })
}

const MOMENT_CHUNK: u64 = 4096;

/// Sample moments of a scalar statistic of one standard normal draw per
/// trial, centred at `centre`: returns `(mean, variance, se_mean, se_variance)`.
/// Partial sums are formed over fixed chunks and combined in order, so the
/// result is bit-identical for any thread count.
pub fn sample_moments<F>(trials: u64, seed: u64, centre: f64, stat: F) -> Result<(f64, f64, f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    if trials < 2 || trials > MAX_TRIALS {
        return Err(Error::invalid(format!("trials must be in 2..={MAX_TRIALS}, got {trials}")));
    }
    let streams = NoiseStreams::new(seed);
    let chunks = trials.div_ceil(MOMENT_CHUNK);
    let partial: Vec<[f64; 4]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = [0.0; 4];
            let mut z = [0.0];
            for t in c * MOMENT_CHUNK..((c + 1) * MOMENT_CHUNK).min(trials) {
                streams.standard_normals(t, &mut z);
                let v = stat(z[0]) - centre;
                let v2 = v * v;
                s[0] += v;
                s[1] += v2;
                s[2] += v2 * v;
                s[3] += v2 * v2;
            }
            s
        })
        .collect();
    let mut s = [0.0; 4];
    for p in &partial {
        for k in 0..4 {
            s[k] += p[k];
        }
    }
    let n = trials as f64;
    let (r1, r2, r3, r4) = (s[0] / n, s[1] / n, s[2] / n, s[3] / n);
    let var = (r2 - r1 * r1) * n / (n - 1.0);
    // fourth central moment from raw moments about the centre
    let m4 = r4 - 4.0 * r1 * r3 + 6.0 * r1 * r1 * r2 - 3.0 * r1.powi(4);
    let se_mean = (var / n).sqrt();
    let se_var = ((m4 - var * var).max(0.0) / n).sqrt();
    Ok((centre + r1, var, se_mean, se_var))
}
