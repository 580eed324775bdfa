//! Adversary constructions.
//!
//! * sign attacks `-kappa * sign(mu_j - mu_k)`, the worst case for every
//!   binary rule in this crate;
//! * nearest-neighbour (NN) class selection, which turns the binary attack
//!   into a noise-agnostic multi-class heuristic;
//! * the noise-aware search over the `M - 1` binary sign attacks;
//! * an exhaustive grid oracle for `d <= 3`.

use rayon::prelude::*;
use serde::Serialize;

use crate::classifiers::{Classifier, ClassifierKind};
use crate::error::{Error, Result};
use crate::model::{check_within_budget, HypothesisModel, Label, NoiseStreams};
use crate::numerics::{sign, Budget};

/// Largest dimension the grid oracle accepts.
pub const ORACLE_MAX_DIM: usize = 3;
const ORACLE_MAX_POINTS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackResult {
    pub vector: Vec<f64>,
    /// Noise-aware mode: whether the returned attack causes an error.
    /// Always true for agnostic attacks, which never certify anything.
    pub feasible: bool,
    pub target_class: Option<usize>,
}

fn check_strength(kappa: f64) -> Result<()> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::invalid(format!("attack strength must be >= 0, got {kappa}")));
    }
    Ok(())
}

fn check_strength_within(kappa: f64, eps: f64) -> Result<()> {
    check_strength(kappa)?;
    if kappa > eps {
        return Err(Error::invalid(format!(
            "attack strength {kappa} exceeds budget {eps}"
        )));
    }
    Ok(())
}

/// `-kappa * sign(mu_j - mu_k)` with `sign(0) = 0`: pushes class `j`
/// toward class `k` along every informative coordinate.
pub fn binary_sign_attack(
    model: &HypothesisModel,
    true_class: usize,
    other_class: usize,
    strength: f64,
) -> Result<Vec<f64>> {
    check_strength(strength)?;
    let half = model.pairwise_half_difference(true_class, other_class)?;
    Ok(half.iter().map(|v| -strength * sign(*v)).collect())
}

/// Outcome of a nearest-neighbour class search under hypothesis `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NnChoice {
    pub class: usize,
    /// `(candidate, score)` for every `k != j`; the NN class has the
    /// smallest score.
    pub scores: Vec<(usize, f64)>,
    /// Every candidate scored zero, so the choice carries no information.
    pub degenerate: bool,
}

fn pick_lowest(scores: Vec<(usize, f64)>) -> NnChoice {
    let mut best = scores[0];
    for s in &scores[1..] {
        if s.1 < best.1 {
            best = *s;
        }
    }
    let degenerate = scores.iter().all(|s| s.1 == 0.0);
    NnChoice {
        class: best.0,
        scores,
        degenerate,
    }
}

fn candidate_halves(model: &HypothesisModel, j: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    model.check_class(j)?;
    (0..model.num_classes())
        .filter(|k| *k != j)
        .map(|k| {
            let h = model.pairwise_half_difference(j, k)?;
            if h.iter().all(|v| *v == 0.0) {
                return Err(Error::invalid(format!("classes {j} and {k} share the same mean")));
            }
            Ok((k, h))
        })
        .collect()
}

/// NN class for the minimum distance rule:
/// `argmin_k ||mu_jk|| - eps ||mu_jk||_1 / ||mu_jk||`.
pub fn nn_class_min_distance(model: &HypothesisModel, j: usize, eps: f64) -> Result<NnChoice> {
    Budget::new(eps)?;
    let scores = candidate_halves(model, j)?
        .into_iter()
        .map(|(k, h)| {
            let l2 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            let l1 = h.iter().map(|v| v.abs()).sum::<f64>();
            (k, l2 - eps * l1 / l2)
        })
        .collect();
    Ok(pick_lowest(scores))
}

/// NN class for GLRT (and PRL) facing an attack of strength `kappa` designed
/// against budget `eps`: `argmin_k sum_{|m_i| >= c} (|m_i| - c)^2` with
/// `m = mu_jk` and `c = (kappa + eps) / 2`. At `kappa = eps` this is the
/// full-budget score `sum (|m_i| - eps)^2` over coordinates with
/// `|m_i| >= eps`.
pub fn nn_class_glrt(model: &HypothesisModel, j: usize, eps: f64, kappa: f64) -> Result<NnChoice> {
    let eps = Budget::new(eps)?.value();
    check_strength_within(kappa, eps)?;
    let cut = (kappa + eps) / 2.0;
    let scores = candidate_halves(model, j)?
        .into_iter()
        .map(|(k, h)| {
            let s = h
                .iter()
                .map(|v| v.abs())
                .filter(|a| *a >= cut)
                .map(|a| (a - cut) * (a - cut))
                .sum();
            (k, s)
        })
        .collect();
    Ok(pick_lowest(scores))
}

/// Noise-agnostic heuristic: the binary worst-case attack against the NN
/// class matched to the classifier.
pub fn heuristic_agnostic_attack(
    model: &HypothesisModel,
    kind: ClassifierKind,
    true_class: usize,
    eps: f64,
    kappa: f64,
) -> Result<AttackResult> {
    let eps = Budget::new(eps)?.value();
    check_strength_within(kappa, eps)?;
    let nn = match kind {
        ClassifierKind::MinDistance => nn_class_min_distance(model, true_class, kappa)?,
        ClassifierKind::Glrt | ClassifierKind::PairwiseRobustLinear | ClassifierKind::MinimaxLinear => {
            nn_class_glrt(model, true_class, eps, kappa)?
        }
    };
    let vector = binary_sign_attack(model, true_class, nn.class, kappa)?;
    check_within_budget(&vector, eps)?;
    Ok(AttackResult {
        vector,
        feasible: true,
        target_class: Some(nn.class),
    })
}

/// Precomputed candidate set for repeated noise-aware attacks on one class.
#[derive(Debug, Clone)]
pub struct AwareAttacker {
    true_class: usize,
    candidates: Vec<(usize, Vec<f64>)>,
}

impl AwareAttacker {
    pub fn new(model: &HypothesisModel, true_class: usize, eps: f64, kappa: f64) -> Result<Self> {
        let eps = Budget::new(eps)?.value();
        check_strength_within(kappa, eps)?;
        model.check_class(true_class)?;
        let candidates = (0..model.num_classes())
            .filter(|k| *k != true_class)
            .map(|k| Ok((k, binary_sign_attack(model, true_class, k, kappa)?)))
            .collect::<Result<_>>()?;
        Ok(AwareAttacker {
            true_class,
            candidates,
        })
    }

    /// Tries each candidate in class order and returns the index of the
    /// first that causes a misclassification. `x` is scratch space of
    /// length `d`.
    pub fn search(
        &self,
        model: &HypothesisModel,
        classifier: &dyn Classifier,
        noise: &[f64],
        x: &mut [f64],
    ) -> Option<usize> {
        let mean = model.mean(self.true_class);
        self.candidates.iter().position(|(_, e)| {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = mean[i] + e[i] + noise[i];
            }
            !classifier.label(x).is_class(self.true_class)
        })
    }

    pub fn result(&self, found: Option<usize>, dim: usize) -> AttackResult {
        match found {
            Some(i) => AttackResult {
                vector: self.candidates[i].1.clone(),
                feasible: true,
                target_class: Some(self.candidates[i].0),
            },
            None => AttackResult {
                vector: vec![0.0; dim],
                feasible: false,
                target_class: None,
            },
        }
    }
}

/// Noise-aware attack: checks each binary sign attack of strength `kappa`
/// against the realised noise and returns the first that makes the
/// classifier err (a wrong class or a PRL rejection). Returns the zero
/// attack with `feasible = false` when none does.
pub fn noise_aware_attack(
    model: &HypothesisModel,
    classifier: &dyn Classifier,
    noise: &[f64],
    true_class: usize,
    eps: f64,
    kappa: f64,
) -> Result<AttackResult> {
    if noise.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: noise.len(),
        });
    }
    let attacker = AwareAttacker::new(model, true_class, eps, kappa)?;
    let mut x = vec![0.0; model.dim()];
    let found = attacker.search(model, classifier, noise, &mut x);
    Ok(attacker.result(found, model.dim()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub attack: Vec<f64>,
    pub error: f64,
}

/// Class-conditional error over a uniform grid on `[-eps, eps]^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSurface {
    pub axis: Vec<f64>,
    pub points: Vec<SurfacePoint>,
    pub argmax: Vec<f64>,
    pub max_error: f64,
    pub trials: u64,
}

impl ErrorSurface {
    /// Binomial standard error of an error frequency on this surface.
    pub fn standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Error at the grid point nearest to `attack`.
    pub fn error_near(&self, attack: &[f64]) -> f64 {
        self.points
            .iter()
            .min_by(|a, b| {
                let da: f64 = a.attack.iter().zip(attack).map(|(p, q)| (p - q).powi(2)).sum();
                let db: f64 = b.attack.iter().zip(attack).map(|(p, q)| (p - q).powi(2)).sum();
                da.total_cmp(&db)
            })
            .map(|p| p.error)
            .unwrap_or(f64::NAN)
    }

    pub fn cell_width(&self) -> f64 {
        if self.axis.len() < 2 {
            0.0
        } else {
            self.axis[1] - self.axis[0]
        }
    }
}

/// Exhaustive grid search for the noise-agnostic worst case. All grid points
/// share the same `trials` noise draws (common random numbers), taken from
/// the substreams of `seed`; the result does not depend on thread count.
pub fn brute_force_attack_oracle(
    model: &HypothesisModel,
    classifier: &dyn Classifier,
    true_class: usize,
    eps: f64,
    grid_points_per_axis: usize,
    trials: u64,
    seed: u64,
) -> Result<ErrorSurface> {
    let eps = Budget::new(eps)?.value();
    model.check_class(true_class)?;
    let d = model.dim();
    if d > ORACLE_MAX_DIM {
        return Err(Error::UnsupportedDimension {
            dim: d,
            max: ORACLE_MAX_DIM,
        });
    }
    if trials == 0 {
        return Err(Error::invalid("oracle needs at least one trial"));
    }
    let axis: Vec<f64> = if eps == 0.0 {
        vec![0.0]
    } else {
        if grid_points_per_axis < 2 {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        let n = grid_points_per_axis;
        (0..n)
            .map(|i| {
                // exact endpoints, and an exact zero for odd n
                if 2 * i + 1 == n {
                    0.0
                } else {
                    -eps + 2.0 * eps * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    };
    let n_points = axis
        .len()
        .checked_pow(d as u32)
        .filter(|n| *n <= ORACLE_MAX_POINTS)
        .ok_or_else(|| Error::invalid(format!("grid too large: {} points per axis in {d} dimensions", axis.len())))?;

    let sigma = model.sigma();
    let streams = NoiseStreams::new(seed);
    let noise: Vec<f64> = (0..trials)
        .into_par_iter()
        .flat_map_iter(|t| {
            let mut z = vec![0.0; d];
            streams.standard_normals(t, &mut z);
            z.into_iter().map(move |v| sigma * v)
        })
        .collect();

    let mean = model.mean(true_class);
    let grid_attack = |index: usize| -> Vec<f64> {
        let mut rem = index;
        let mut e = vec![0.0; d];
        for slot in e.iter_mut().rev() {
            *slot = axis[rem % axis.len()];
            rem /= axis.len();
        }
        e
    };
    let points: Vec<SurfacePoint> = (0..n_points)
        .into_par_iter()
        .map(|p| {
            let e = grid_attack(p);
            let base: Vec<f64> = mean.iter().zip(&e).map(|(m, v)| m + v).collect();
            let mut x = vec![0.0; d];
            let mut errors = 0u64;
            for n in noise.chunks_exact(d) {
                for i in 0..d {
                    x[i] = base[i] + n[i];
                }
                if classifier.label(&x) != Label::Class(true_class) {
                    errors += 1;
                }
            }
            SurfacePoint {
                attack: e,
                error: errors as f64 / trials as f64,
            }
        })
        .collect();

    let best = points
        .iter()
        .enumerate()
        .fold(0, |b, (i, p)| if p.error > points[b].error { i } else { b });
    Ok(ErrorSurface {
        argmax: points[best].attack.clone(),
        max_error: points[best].error,
        axis,
        points,
        trials,
    })
}
