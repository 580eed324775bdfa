//! Decision rules: minimum distance, binary minimax linear, GLRT, and the
//! pairwise robust linear (PRL) classifier.
//!
//! Every rule breaks ties toward the lowest class index. PRL is the only rule
//! that can return [`Label::Reject`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Decision, HypothesisModel, Label};
use crate::numerics::Budget;

pub trait Classifier: Send + Sync {
    fn num_classes(&self) -> usize;

    /// Full decision with per-class costs. `x` must have the model dimension.
    fn decide(&self, x: &[f64]) -> Decision;

    /// Label only; implementations skip building the cost vector.
    fn label(&self, x: &[f64]) -> Label {
        self.decide(x).label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "min_distance")]
    MinDistance,
    #[serde(rename = "minimax")]
    MinimaxLinear,
    #[serde(rename = "glrt")]
    Glrt,
    #[serde(rename = "prl")]
    PairwiseRobustLinear,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::MinDistance,
        ClassifierKind::MinimaxLinear,
        ClassifierKind::Glrt,
        ClassifierKind::PairwiseRobustLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::MinDistance => "min_distance",
            ClassifierKind::MinimaxLinear => "minimax",
            ClassifierKind::Glrt => "glrt",
            ClassifierKind::PairwiseRobustLinear => "prl",
        }
    }

    /// Instantiates the rule for `model` with designed budget `eps`.
    /// `eps` is ignored by the minimum distance rule.
    pub fn build<'a>(self, model: &'a HypothesisModel, eps: f64) -> Result<Box<dyn Classifier + 'a>> {
        Ok(match self {
            ClassifierKind::MinDistance => Box::new(MinDistance::new(model)),
            ClassifierKind::Glrt => Box::new(Glrt::new(model, eps)?),
            ClassifierKind::PairwiseRobustLinear => Box::new(Prl::new(model, eps)?),
            ClassifierKind::MinimaxLinear => {
                if model.num_classes() != 2 {
                    return Err(Error::invalid(
                        "the minimax linear rule is binary; use prl for M > 2",
                    ));
                }
                Box::new(minimax_linear_rule(model, 0, 1, eps)?)
            }
        })
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown classifier `{s}`")))
    }
}

fn argmin_lowest(costs: &[f64]) -> usize {
    let mut best = 0;
    for (k, c) in costs.iter().enumerate().skip(1) {
        if *c < costs[best] {
            best = k;
        }
    }
    best
}

fn squared_distance(x: &[f64], mean: &[f64]) -> f64 {
    x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Nearest template in Euclidean distance.
#[derive(Debug, Clone, Copy)]
pub struct MinDistance<'a> {
    model: &'a HypothesisModel,
}

impl<'a> MinDistance<'a> {
    pub fn new(model: &'a HypothesisModel) -> Self {
        MinDistance { model }
    }
}

impl Classifier for MinDistance<'_> {
    fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    fn decide(&self, x: &[f64]) -> Decision {
        assert_eq!(x.len(), self.model.dim(), "observation dimension");
        let costs: Vec<f64> = self
            .model
            .means()
            .iter()
            .map(|m| squared_distance(x, m))
            .collect();
        Decision {
            label: Label::Class(argmin_lowest(&costs)),
            costs: Some(costs),
        }
    }

    fn label(&self, x: &[f64]) -> Label {
        let mut best = (0, f64::INFINITY);
        for (k, m) in self.model.means().iter().enumerate() {
            let c = squared_distance(x, m);
            if c < best.1 {
                best = (k, c);
            }
        }
        Label::Class(best.0)
    }
}

pub fn classify_min_distance(model: &HypothesisModel, x: &[f64]) -> Result<Decision> {
    check_dim(model, x)?;
    Ok(MinDistance::new(model).decide(x))
}

fn check_dim(model: &HypothesisModel, x: &[f64]) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: x.len(),
        });
    }
    Ok(())
}

/// GLRT over the class and an l-infinity bounded perturbation:
/// `C_k = || g_eps(x - mu_k) ||^2`, `k_hat = argmin_k C_k`.
#[derive(Debug, Clone, Copy)]
pub struct Glrt<'a> {
    model: &'a HypothesisModel,
    budget: Budget,
}

impl<'a> Glrt<'a> {
    pub fn new(model: &'a HypothesisModel, eps: f64) -> Result<Self> {
        Ok(Glrt {
            model,
            budget: Budget::new(eps)?,
        })
    }

    pub fn budget(&self) -> f64 {
        self.budget.value()
    }

    /// Maximum-likelihood perturbation under hypothesis `k`:
    /// `f_eps(x - mu_k)` coordinate-wise.
    pub fn estimate_perturbation(&self, x: &[f64], k: usize) -> Result<Vec<f64>> {
        self.model.check_class(k)?;
        check_dim(self.model, x)?;
        Ok(x.iter()
            .zip(self.model.mean(k))
            .map(|(a, m)| self.budget.clip(a - m))
            .collect())
    }

    pub fn cost(&self, x: &[f64], k: usize) -> Result<f64> {
        self.model.check_class(k)?;
        check_dim(self.model, x)?;
        Ok(self.cost_unchecked(x, self.model.mean(k)))
    }

    #[inline]
    fn cost_unchecked(&self, x: &[f64], mean: &[f64]) -> f64 {
        x.iter()
            .zip(mean)
            .map(|(a, m)| {
                let g = self.budget.shrink(a - m);
                g * g
            })
            .sum()
    }

    pub fn classify(&self, x: &[f64]) -> Result<Decision> {
        check_dim(self.model, x)?;
        Ok(self.decide(x))
    }
}

impl Classifier for Glrt<'_> {
    fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    fn decide(&self, x: &[f64]) -> Decision {
        assert_eq!(x.len(), self.model.dim(), "observation dimension");
        let costs: Vec<f64> = self
            .model
            .means()
            .iter()
            .map(|m| self.cost_unchecked(x, m))
            .collect();
        Decision {
            label: Label::Class(argmin_lowest(&costs)),
            costs: Some(costs),
        }
    }

    fn label(&self, x: &[f64]) -> Label {
        let mut best = (0, f64::INFINITY);
        for (k, m) in self.model.means().iter().enumerate() {
            let c = self.cost_unchecked(x, m);
            if c < best.1 {
                best = (k, c);
            }
        }
        Label::Class(best.0)
    }
}

/// `w^T x + b`; decides `positive` when the statistic is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRule {
    pub weight: Vec<f64>,
    pub offset: f64,
    pub positive: usize,
    pub negative: usize,
    /// Every weight was nulled by the soft threshold. The rule then carries
    /// no information and always answers the lower class index.
    pub degenerate: bool,
}

impl LinearRule {
    #[inline]
    pub fn statistic(&self, x: &[f64]) -> f64 {
        self.weight.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.offset
    }

    pub fn decide_pair(&self, x: &[f64]) -> usize {
        if self.degenerate {
            self.positive.min(self.negative)
        } else if self.statistic(x) > 0.0 {
            self.positive
        } else {
            self.negative
        }
    }
}

impl Classifier for LinearRule {
    fn num_classes(&self) -> usize {
        self.positive.max(self.negative) + 1
    }

    fn decide(&self, x: &[f64]) -> Decision {
        assert_eq!(x.len(), self.weight.len(), "observation dimension");
        let s = self.statistic(x);
        let mut costs = vec![f64::INFINITY; self.num_classes()];
        costs[self.positive] = -s;
        costs[self.negative] = s;
        Decision {
            label: Label::Class(self.decide_pair(x)),
            costs: Some(costs),
        }
    }

    fn label(&self, x: &[f64]) -> Label {
        Label::Class(self.decide_pair(x))
    }
}

/// Minimax rule for the pair `(j, k)`:
/// `g_eps((mu_j - mu_k)/2)^T (x - (mu_j + mu_k)/2) > 0` decides `j`.
pub fn minimax_linear_rule(
    model: &HypothesisModel,
    j: usize,
    k: usize,
    eps: f64,
) -> Result<LinearRule> {
    let budget = Budget::new(eps)?;
    let half = model.pairwise_half_difference(j, k)?;
    let weight: Vec<f64> = half.iter().map(|v| budget.shrink(*v)).collect();
    let offset = -weight
        .iter()
        .zip(model.mean(j).iter().zip(model.mean(k)))
        .map(|(w, (a, b))| w * (a + b) / 2.0)
        .sum::<f64>();
    let degenerate = weight.iter().all(|w| *w == 0.0);
    Ok(LinearRule {
        weight,
        offset,
        positive: j,
        negative: k,
        degenerate,
    })
}

/// Pairwise robust linear classifier: class `k` only if it strictly wins all
/// `M - 1` pairwise minimax tests it takes part in, otherwise reject.
#[derive(Debug, Clone)]
pub struct Prl {
    classes: usize,
    rules: Vec<LinearRule>,
}

impl Prl {
    pub fn new(model: &HypothesisModel, eps: f64) -> Result<Self> {
        let m = model.num_classes();
        let mut rules = Vec::with_capacity(m * (m - 1) / 2);
        for j in 0..m {
            for k in j + 1..m {
                rules.push(minimax_linear_rule(model, j, k, eps)?);
            }
        }
        Ok(Prl { classes: m, rules })
    }

    pub fn rules(&self) -> &[LinearRule] {
        &self.rules
    }

    fn wins(&self, x: &[f64]) -> Vec<usize> {
        let mut wins = vec![0usize; self.classes];
        for rule in &self.rules {
            let s = rule.statistic(x);
            if s > 0.0 {
                wins[rule.positive] += 1;
            } else if s < 0.0 {
                wins[rule.negative] += 1;
            }
        }
        wins
    }

    fn label_from_wins(&self, wins: &[usize]) -> Label {
        wins.iter()
            .position(|w| *w == self.classes - 1)
            .map_or(Label::Reject, Label::Class)
    }
}

impl Classifier for Prl {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn decide(&self, x: &[f64]) -> Decision {
        let wins = self.wins(x);
        let label = self.label_from_wins(&wins);
        let losses = wins
            .iter()
            .map(|w| (self.classes - 1 - w) as f64)
            .collect();
        Decision {
            label,
            costs: Some(losses),
        }
    }

    fn label(&self, x: &[f64]) -> Label {
        self.label_from_wins(&self.wins(x))
    }
}

pub fn classify_prl(model: &HypothesisModel, x: &[f64], eps: f64) -> Result<Decision> {
    check_dim(model, x)?;
    Ok(Prl::new(model, eps)?.decide(x))
}

/// Per-coordinate GLRT cost difference `C_1[i] - C_0[i]` under `H0` for the
/// symmetric problem with template `mu`: `g(2 mu + N + e)^2 - g(N + e)^2`.
#[inline]
pub fn coordinate_cost_difference(mu: f64, noise: f64, attack: f64, budget: Budget) -> f64 {
    let wrong = budget.shrink(2.0 * mu + noise + attack);
    let right = budget.shrink(noise + attack);
    wrong * wrong - right * right
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoiseStreams;
    use proptest::prelude::*;
    use rand::Rng;

    fn ternary() -> HypothesisModel {
        HypothesisModel::uniform(
            vec![vec![0.0, 0.0], vec![2.5, 0.25], vec![-1.75, -2.25]],
            0.1f64.sqrt(),
        )
        .unwrap()
    }

    #[test]
    fn glrt_perturbation_estimate() {
        let m = ternary();
        let g = Glrt::new(&m, 1.0).unwrap();
        assert_eq!(g.estimate_perturbation(&[2.5, 0.25], 1).unwrap(), vec![0.0, 0.0]);
        assert_eq!(g.estimate_perturbation(&[2.0, -2.0], 0).unwrap(), vec![1.0, -1.0]);
        let g0 = Glrt::new(&m, 0.0).unwrap();
        assert_eq!(g0.estimate_perturbation(&[3.0, -7.0], 2).unwrap(), vec![0.0, 0.0]);
        assert!(g.estimate_perturbation(&[0.0, 0.0], 3).is_err());
    }

    #[test]
    fn glrt_cost_examples() {
        let m = HypothesisModel::uniform(vec![vec![0.0, 0.0], vec![5.0, 5.0]], 1.0).unwrap();
        let g = Glrt::new(&m, 1.0).unwrap();
        assert_eq!(g.cost(&[0.0, 0.0], 0).unwrap(), 0.0);
        // g_1(2) = 1, g_1(0.5) = 0.
        assert_eq!(g.cost(&[2.0, 0.5], 0).unwrap(), 1.0);
    }

    #[test]
    fn glrt_classify_examples() {
        let m = ternary();
        let g = Glrt::new(&m, 0.1).unwrap();
        for j in 0..3 {
            assert_eq!(g.classify(m.mean(j)).unwrap().label, Label::Class(j));
        }
        // Budget covering every spread: all costs vanish, lowest index wins.
        let big = Glrt::new(&m, 10.0).unwrap();
        let d = big.classify(&[1.0, -1.0]).unwrap();
        assert_eq!(d.label, Label::Class(0));
        assert_eq!(d.costs.unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn min_distance_examples() {
        let m = ternary();
        for j in 0..3 {
            assert_eq!(classify_min_distance(&m, m.mean(j)).unwrap().label, Label::Class(j));
        }
        let sym = HypothesisModel::uniform(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 1.0).unwrap();
        assert_eq!(classify_min_distance(&sym, &[0.0, 3.0]).unwrap().label, Label::Class(0));
        assert!(classify_min_distance(&sym, &[0.0]).is_err());
    }

    #[test]
    fn minimax_rule_examples() {
        let sym = HypothesisModel::uniform(vec![vec![1.5, -0.5], vec![-1.5, 0.5]], 1.0).unwrap();
        let r = minimax_linear_rule(&sym, 0, 1, 0.0).unwrap();
        assert_eq!(r.weight, vec![1.5, -0.5]);
        assert_eq!(r.offset, 0.0);
        assert!(!r.degenerate);

        let r = minimax_linear_rule(&sym, 0, 1, 2.0).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.weight, vec![0.0, 0.0]);
        assert_eq!(r.decide_pair(&[-100.0, 0.0]), 0);

        let mut mu = vec![0.5; 10];
        mu[0] = 2.0;
        let neg = mu.iter().map(|v| -v).collect();
        let m = HypothesisModel::uniform(vec![mu, neg], 1.0).unwrap();
        let r = minimax_linear_rule(&m, 0, 1, 1.0).unwrap();
        let mut want = vec![0.0; 10];
        want[0] = 1.0;
        assert_eq!(r.weight, want);
        assert!(minimax_linear_rule(&m, 1, 1, 1.0).is_err());
    }

    #[test]
    fn prl_examples() {
        let m = ternary();
        let prl = Prl::new(&m, 0.2).unwrap();
        for j in 0..3 {
            assert_eq!(prl.decide(m.mean(j)).label, Label::Class(j));
        }
        assert!(ClassifierKind::MinimaxLinear.build(&m, 1.0).is_err());
    }

    /// Searches small integer 3-class instances for a point whose pairwise
    /// outcomes form a cycle, then checks PRL rejects it.
    #[test]
    fn prl_rejects_cycles() {
        let eps = 0.0;
        let mut found = false;
        'search: for a in -2..=2 {
            for b in -2..=2 {
                for c in -2..=2 {
                    for e in -2..=2 {
                        let means = vec![vec![0.0, 0.0], vec![a as f64, b as f64], vec![c as f64, e as f64]];
                        let Ok(model) = HypothesisModel::uniform(means, 1.0) else { continue };
                        let Ok(prl) = Prl::new(&model, eps) else { continue };
                        for xi in -4..=4 {
                            for yi in -4..=4 {
                                let x = [xi as f64 * 0.5, yi as f64 * 0.5];
                                let st: Vec<f64> = prl.rules().iter().map(|r| r.statistic(&x)).collect();
                                // rules are (0,1), (0,2), (1,2)
                                let cyc1 = st[0] > 0.0 && st[2] > 0.0 && st[1] < 0.0;
                                let cyc2 = st[0] < 0.0 && st[2] < 0.0 && st[1] > 0.0;
                                if cyc1 || cyc2 {
                                    assert_eq!(prl.decide(&x).label, Label::Reject);
                                    found = true;
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
        }
        // With eps = 0 the pairwise rules are nearest-mean comparisons,
        // which are transitive; cycles need a positive budget.
        assert!(!found);
        let mut found = false;
        'search2: for a in -3..=3 {
            for b in -3..=3 {
                for c in -3..=3 {
                    for e in -3..=3 {
                        let means = vec![vec![0.0, 0.0], vec![a as f64, b as f64], vec![c as f64, e as f64]];
                        let Ok(model) = HypothesisModel::uniform(means, 1.0) else { continue };
                        let Ok(prl) = Prl::new(&model, 1.0) else { continue };
                        if prl.rules().iter().any(|r| r.degenerate) {
                            continue;
                        }
                        for xi in -8..=8 {
                            for yi in -8..=8 {
                                let x = [xi as f64 * 0.5, yi as f64 * 0.5];
                                let st: Vec<f64> = prl.rules().iter().map(|r| r.statistic(&x)).collect();
                                let cyc1 = st[0] > 0.0 && st[2] > 0.0 && st[1] < 0.0;
                                let cyc2 = st[0] < 0.0 && st[2] < 0.0 && st[1] > 0.0;
                                if cyc1 || cyc2 {
                                    let d = prl.decide(&x);
                                    assert_eq!(d.label, Label::Reject);
                                    assert_eq!(d.costs.unwrap(), vec![1.0, 1.0, 1.0]);
                                    found = true;
                                    break 'search2;
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(found, "no cyclic instance found");
    }

    #[test]
    fn prl_zero_statistic_rejects() {
        let m = HypothesisModel::uniform(vec![vec![2.0], vec![-2.0]], 1.0).unwrap();
        let prl = Prl::new(&m, 0.5).unwrap();
        assert_eq!(prl.decide(&[0.0]).label, Label::Reject);
        assert_eq!(prl.decide(&[0.1]).label, Label::Class(0));
    }

    #[test]
    fn glrt_zero_budget_equals_min_distance() {
        let streams = NoiseStreams::new(5);
        for t in 0..100_000u64 {
            let mut rng = streams.trial(t);
            let m = rng.random_range(2..5usize);
            let d = rng.random_range(1..6usize);
            let means: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
            let model = HypothesisModel::uniform(means, 1.0).unwrap();
            let a = Glrt::new(&model, 0.0).unwrap();
            let b = MinDistance::new(&model);
            assert_eq!(a.label(&x), b.label(&x));
            assert_eq!(a.decide(&x).label, a.label(&x));
        }
    }

    proptest! {
        #[test]
        fn glrt_cost_is_residual_norm(
            x in proptest::collection::vec(-5.0f64..5.0, 4),
            eps in 0.0f64..2.0,
        ) {
            let m = HypothesisModel::uniform(vec![vec![1.0, -1.0, 0.5, 0.0], vec![-1.0, 2.0, 0.0, 0.3]], 1.0).unwrap();
            let g = Glrt::new(&m, eps).unwrap();
            for k in 0..2 {
                let e = g.estimate_perturbation(&x, k).unwrap();
                prop_assert!(e.iter().all(|v| v.abs() <= eps));
                let resid: f64 = x.iter().zip(m.mean(k)).zip(&e).map(|((a, mu), e)| (a - mu - e).powi(2)).sum();
                prop_assert!((resid - g.cost(&x, k).unwrap()).abs() < 1e-9);
            }
        }

        #[test]
        fn binary_glrt_matches_symmetric_comparison(
            mu in proptest::collection::vec(-3.0f64..3.0, 1..6),
            shift in proptest::collection::vec(-3.0f64..3.0, 6),
            eps in 0.0f64..1.5,
        ) {
            let x: Vec<f64> = shift[..mu.len()].to_vec();
            let neg: Vec<f64> = mu.iter().map(|v| -v).collect();
            let m = HypothesisModel::uniform(vec![mu.clone(), neg], 1.0).unwrap();
            let b = Budget::new(eps).unwrap();
            let c1: f64 = x.iter().zip(&mu).map(|(a, u)| b.shrink(a + u).powi(2)).sum();
            let c0: f64 = x.iter().zip(&mu).map(|(a, u)| b.shrink(a - u).powi(2)).sum();
            let want = if c1 < c0 { 1 } else { 0 };
            prop_assert_eq!(Glrt::new(&m, eps).unwrap().label(&x), Label::Class(want));
        }

        #[test]
        fn binary_min_distance_is_matched_filter(
            mu in proptest::collection::vec(-3.0f64..3.0, 1..6),
            noise in proptest::collection::vec(-3.0f64..3.0, 6),
        ) {
            let x: Vec<f64> = noise[..mu.len()].to_vec();
            let neg: Vec<f64> = mu.iter().map(|v| -v).collect();
            let m = HypothesisModel::uniform(vec![mu.clone(), neg], 1.0).unwrap();
            let corr: f64 = mu.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assume!(corr.abs() > 1e-9);
            let want = if corr > 0.0 { 0 } else { 1 };
            prop_assert_eq!(MinDistance::new(&m).label(&x), Label::Class(want));
        }

        #[test]
        fn glrt_shift_invariant(
            a in proptest::collection::vec(-3.0f64..3.0, 3),
            b in proptest::collection::vec(-3.0f64..3.0, 3),
            x in proptest::collection::vec(-3.0f64..3.0, 3),
            s in proptest::collection::vec(-10.0f64..10.0, 3),
            eps in 0.0f64..1.5,
        ) {
            let shifted = |v: &[f64]| v.iter().zip(&s).map(|(p, q)| p + q).collect::<Vec<_>>();
            let m1 = HypothesisModel::uniform(vec![a.clone(), b.clone()], 1.0).unwrap();
            let m2 = HypothesisModel::uniform(vec![shifted(&a), shifted(&b)], 1.0).unwrap();
            let (g1, g2) = (Glrt::new(&m1, eps).unwrap(), Glrt::new(&m2, eps).unwrap());
            for k in 0..2 {
                let c1 = g1.cost(&x, k).unwrap();
                let c2 = g2.cost(&shifted(&x), k).unwrap();
                prop_assert!((c1 - c2).abs() < 1e-9 * (1.0 + c1));
            }
        }

        #[test]
        fn minimax_generic_form_matches_symmetric(
            a in proptest::collection::vec(-3.0f64..3.0, 4),
            b in proptest::collection::vec(-3.0f64..3.0, 4),
            x in proptest::collection::vec(-4.0f64..4.0, 4),
            eps in 0.0f64..1.0,
        ) {
            let m = HypothesisModel::uniform(vec![a.clone(), b.clone()], 1.0).unwrap();
            let rule = minimax_linear_rule(&m, 0, 1, eps).unwrap();
            // Recentre to the symmetric problem and correlate with g_eps(mu).
            let bud = Budget::new(eps).unwrap();
            let centred: Vec<f64> = x.iter().zip(a.iter().zip(&b)).map(|(v, (p, q))| v - (p + q) / 2.0).collect();
            let mu = m.binary_half_difference().unwrap();
            let sym: f64 = mu.iter().zip(&centred).map(|(u, v)| bud.shrink(*u) * v).sum();
            prop_assert!((sym - rule.statistic(&x)).abs() < 1e-9);
        }

        #[test]
        fn prl_binary_matches_minimax(
            a in proptest::collection::vec(-3.0f64..3.0, 3),
            b in proptest::collection::vec(-3.0f64..3.0, 3),
            x in proptest::collection::vec(-4.0f64..4.0, 3),
            eps in 0.0f64..1.0,
        ) {
            let m = HypothesisModel::uniform(vec![a, b], 1.0).unwrap();
            let rule = minimax_linear_rule(&m, 0, 1, eps).unwrap();
            prop_assume!(!rule.degenerate && rule.statistic(&x) != 0.0);
            let prl = Prl::new(&m, eps).unwrap();
            prop_assert_eq!(prl.label(&x), rule.label(&x));
        }

        #[test]
        fn decision_label_attains_min_cost(
            x in proptest::collection::vec(-4.0f64..4.0, 2),
            eps in 0.0f64..1.5,
        ) {
            let m = ternary();
            for kind in [ClassifierKind::Glrt, ClassifierKind::MinDistance] {
                let c = kind.build(&m, eps).unwrap();
                let d = c.decide(&x);
                let costs = d.costs.unwrap();
                let Label::Class(k) = d.label else { unreachable!() };
                prop_assert!(costs.iter().all(|c| costs[k] <= *c));
                prop_assert_eq!(c.label(&x), d.label);
            }
        }

        #[test]
        fn coordinate_cost_difference_monotone(
            mu in -3.0f64..3.0,
            n in -4.0f64..4.0,
            e1 in -1.0f64..1.0,
            e2 in -1.0f64..1.0,
        ) {
            let b = Budget::new(1.0).unwrap();
            let (hi, lo) = if e1 >= e2 { (e1, e2) } else { (e2, e1) };
            let (c_hi, c_lo) = (coordinate_cost_difference(mu, n, hi, b), coordinate_cost_difference(mu, n, lo, b));
            if mu >= 0.0 {
                prop_assert!(c_hi >= c_lo - 1e-12);
            } else {
                prop_assert!(c_hi <= c_lo + 1e-12);
            }
        }
    }
}
