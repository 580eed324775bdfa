//! Declarative experiment descriptions and the built-in figure presets.
//!
//! Configs are JSON documents. Parsing never panics on untrusted input:
//! every size that drives an allocation is bounded before use.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::ClassifierKind;
use crate::error::{Error, Result};
use crate::model::{AttackMode, HypothesisModel, TwoLevelProfile, MAX_DIM};
use crate::numerics::Budget;
use crate::sim::MAX_TRIALS;

pub const MAX_SWEEP_POINTS: usize = 10_000;
pub const MAX_KAPPAS: usize = 1_000;
pub const MAX_GRID_POINTS_PER_AXIS: usize = 1_001;
pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SURFACE_TRIALS: u64 = 10_000;
pub const DEFAULT_MOMENT_TRIALS: u64 = 1_000_000;

/// Symmetric two-level binary model at a given noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelSpec {
    pub d: usize,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub sigma: f64,
}

impl TwoLevelSpec {
    pub fn profile(&self) -> TwoLevelProfile {
        TwoLevelProfile {
            d: self.d,
            p: self.p,
            a: self.a,
            b: self.b,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Explicit(HypothesisModel),
    TwoLevel(TwoLevelSpec),
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<HypothesisModel> {
        self.build_with(None, None)
    }

    /// Builds the model, optionally replacing its noise level or (two-level
    /// only) its dimension.
    pub fn build_with(&self, sigma: Option<f64>, dim: Option<usize>) -> Result<HypothesisModel> {
        match self {
            ModelSpec::Explicit(m) => {
                if dim.is_some() {
                    return Err(Error::config("model", "a dimension sweep needs a two_level model"));
                }
                match sigma {
                    Some(s) => m.with_sigma(s),
                    None => Ok(m.clone()),
                }
            }
            ModelSpec::TwoLevel(t) => {
                let profile = match dim {
                    Some(d) => t.profile().with_dim(d),
                    None => t.profile(),
                };
                profile.model(sigma.unwrap_or(t.sigma))
            }
        }
    }

    /// Budget implied by the model description, if any.
    pub fn default_eps(&self) -> Option<f64> {
        match self {
            ModelSpec::Explicit(_) => None,
            ModelSpec::TwoLevel(t) => Some(t.eps),
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            ModelSpec::Explicit(m) => m.sigma(),
            ModelSpec::TwoLevel(t) => t.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    Agnostic,
    Aware,
    Fixed(Vec<f64>),
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Agnostic => "agnostic",
            AttackKind::Aware => "aware",
            AttackKind::Fixed(_) => "fixed",
        }
    }

    pub fn mode(&self) -> AttackMode {
        match self {
            AttackKind::None => AttackMode::None,
            AttackKind::Agnostic => AttackMode::NoiseAgnosticHeuristic,
            AttackKind::Aware => AttackMode::NoiseAwareOptimal,
            AttackKind::Fixed(v) => AttackMode::FixedVector(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    Kappa {
        values: Vec<f64>,
    },
    EpsOverSigmaSq {
        values: Vec<f64>,
    },
    Sigma {
        values: Vec<f64>,
    },
    /// Dimension sweep of a two-level model. With `target_snr` (one entry per
    /// kappa), sigma is re-chosen at every point so that the CLT prediction
    /// equals `Q(sqrt(target_snr))`.
    Dim {
        values: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_snr: Option<Vec<f64>>,
    },
}

impl Sweep {
    pub fn axis(&self) -> &'static str {
        match self {
            Sweep::Kappa { .. } => "kappa",
            Sweep::EpsOverSigmaSq { .. } => "eps_over_sigma_sq",
            Sweep::Sigma { .. } => "sigma",
            Sweep::Dim { .. } => "dim",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::Kappa { values } | Sweep::EpsOverSigmaSq { values } | Sweep::Sigma { values } => values.len(),
            Sweep::Dim { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    CltExact,
    CltLowerBound,
    QOfSnr,
}

fn default_attacks() -> Vec<AttackKind> {
    vec![AttackKind::Agnostic]
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    /// Designed budget of the classifiers and the attacker. Defaults to the
    /// two-level profile's `eps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default = "default_attacks")]
    pub attacks: Vec<AttackKind>,
    /// Employed attack strengths. Defaults to `[eps]`; replaced by the sweep
    /// values on a kappa sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predictors: Vec<Predictor>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// Class-conditional runs under this class; prior-weighted otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_class: Option<usize>,
}

fn field_err(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(field, other.to_string()),
    }
}

fn check_finite_list(field: &str, values: &[f64], max: usize) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    if values.len() > max {
        return Err(Error::config(field, format!("at most {max} entries allowed")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::config(field, format!("non-finite value {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eps(&self) -> Result<f64> {
        let eps = self
            .eps
            .or_else(|| self.model.default_eps())
            .ok_or_else(|| Error::config("eps", "required for explicit models"))?;
        Budget::new(eps).map_err(field_err("eps"))?;
        Ok(eps)
    }

    pub fn kappas(&self) -> Result<Vec<f64>> {
        let list = match (&self.sweep, &self.kappa) {
            (Some(Sweep::Kappa { values }), _) => values.clone(),
            (_, Some(k)) => k.clone(),
            (_, None) => vec![self.eps()?],
        };
        let field = if matches!(self.sweep, Some(Sweep::Kappa { .. })) { "sweep.values" } else { "kappa" };
        check_finite_list(field, &list, MAX_KAPPAS)?;
        if let Some(k) = list.iter().find(|k| **k < 0.0) {
            return Err(Error::config(field, format!("attack strength must be >= 0, got {k}")));
        }
        Ok(list)
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let model = self.model.build().map_err(field_err("model"))?;
        let eps = self.eps()?;
        if self.classifiers.is_empty() {
            return Err(Error::config("classifiers", "must not be empty"));
        }
        if self.classifiers.len() > 16 {
            return Err(Error::config("classifiers", "at most 16 entries allowed"));
        }
        if self.attacks.is_empty() || self.attacks.len() > 16 {
            return Err(Error::config("attacks", "must list between 1 and 16 attack modes"));
        }
        if !(1..=MAX_TRIALS).contains(&self.trials) {
            return Err(Error::config("trials", format!("must be in 1..={MAX_TRIALS}")));
        }
        if let Some(j) = self.true_class {
            if j >= model.num_classes() {
                return Err(Error::config(
                    "true_class",
                    format!("class {j} out of range for {} classes", model.num_classes()),
                ));
            }
        }
        let binary = model.num_classes() == 2;
        if !binary && self.classifiers.contains(&ClassifierKind::MinimaxLinear) {
            return Err(Error::config("classifiers", "minimax needs a binary model; use prl"));
        }
        if !binary && !self.predictors.is_empty() {
            return Err(Error::config("predictors", "analytic predictors need a binary model"));
        }
        let kappas = self.kappas()?;
        for a in &self.attacks {
            if let AttackKind::Fixed(v) = a {
                if v.len() != model.dim() {
                    return Err(Error::config(
                        "attacks.fixed",
                        format!("expected {} coordinates, got {}", model.dim(), v.len()),
                    ));
                }
                if v.iter().any(|x| !(x.is_finite() && x.abs() <= eps)) {
                    return Err(Error::config("attacks.fixed", format!("coordinates must lie in [-{eps}, {eps}]")));
                }
                if matches!(self.sweep, Some(Sweep::Dim { .. })) {
                    return Err(Error::config("attacks.fixed", "not allowed with a dimension sweep"));
                }
            }
        }
        if let Some(sweep) = &self.sweep {
            self.validate_sweep(sweep, eps, kappas.len())?;
        }
        Ok(())
    }

    /// Simulated attacks must stay within the budget; analytic predictions
    /// may go beyond it.
    pub fn check_simulation(&self) -> Result<()> {
        let eps = self.eps()?;
        if self.attacks.iter().any(|a| *a != AttackKind::None) {
            if let Some(k) = self.kappas()?.iter().find(|k| **k > eps) {
                return Err(Error::config(
                    "kappa",
                    format!("attack strength {k} exceeds the budget {eps}"),
                ));
            }
        }
        Ok(())
    }

    fn validate_sweep(&self, sweep: &Sweep, eps: f64, n_kappas: usize) -> Result<()> {
        match sweep {
            Sweep::Kappa { .. } => Ok(()),
            Sweep::EpsOverSigmaSq { values } => {
                check_finite_list("sweep.values", values, MAX_SWEEP_POINTS)?;
                if eps == 0.0 {
                    return Err(Error::config("sweep", "eps_over_sigma_sq needs eps > 0"));
                }
                if values.iter().any(|v| *v <= 0.0) {
                    return Err(Error::config("sweep.values", "must be positive"));
                }
                Ok(())
            }
            Sweep::Sigma { values } => {
                check_finite_list("sweep.values", values, MAX_SWEEP_POINTS)?;
                if values.iter().any(|v| *v <= 0.0) {
                    return Err(Error::config("sweep.values", "must be positive"));
                }
                Ok(())
            }
            Sweep::Dim { values, target_snr } => {
                if values.is_empty() || values.len() > MAX_SWEEP_POINTS {
                    return Err(Error::config("sweep.values", format!("must have 1..={MAX_SWEEP_POINTS} entries")));
                }
                if !matches!(self.model, ModelSpec::TwoLevel(_)) {
                    return Err(Error::config("model", "a dimension sweep needs a two_level model"));
                }
                if values.iter().any(|d| *d == 0 || *d > MAX_DIM) {
                    return Err(Error::config("sweep.values", format!("dimensions must be in 1..={MAX_DIM}")));
                }
                if let Some(t) = target_snr {
                    check_finite_list("sweep.target_snr", t, MAX_KAPPAS)?;
                    if t.len() != n_kappas {
                        return Err(Error::config("sweep.target_snr", "needs one entry per kappa"));
                    }
                    if t.iter().any(|v| *v <= 0.0) {
                        return Err(Error::config("sweep.target_snr", "must be positive"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// First 16 hex digits of the SHA-256 of the canonical JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).unwrap_or_default();
    Sha256::digest(&bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn default_true_class() -> usize {
    0
}

fn default_grid() -> usize {
    41
}

fn default_surface_trials() -> u64 {
    DEFAULT_SURFACE_TRIALS
}

/// Brute-force class-conditional error surface over `[-eps, eps]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub classifier: ClassifierKind,
    pub eps: f64,
    #[serde(default = "default_true_class")]
    pub true_class: usize,
    #[serde(default = "default_grid")]
    pub points_per_axis: usize,
    #[serde(default = "default_surface_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
}

impl SurfaceConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SurfaceConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.build().map_err(field_err("model"))?;
        Budget::new(self.eps).map_err(field_err("eps"))?;
        if model.dim() > crate::attacks::ORACLE_MAX_DIM {
            return Err(Error::UnsupportedDimension {
                dim: model.dim(),
                max: crate::attacks::ORACLE_MAX_DIM,
            });
        }
        if self.true_class >= model.num_classes() {
            return Err(Error::config("true_class", "out of range"));
        }
        if !(2..=MAX_GRID_POINTS_PER_AXIS).contains(&self.points_per_axis) {
            return Err(Error::config(
                "points_per_axis",
                format!("must be in 2..={MAX_GRID_POINTS_PER_AXIS}"),
            ));
        }
        if !(1..=MAX_TRIALS).contains(&self.trials) {
            return Err(Error::config("trials", format!("must be in 1..={MAX_TRIALS}")));
        }
        if self.classifier == ClassifierKind::MinimaxLinear && model.num_classes() != 2 {
            return Err(Error::config("classifier", "minimax needs a binary model; use prl"));
        }
        Ok(())
    }
}

/// Exact versus sampled moments of the per-coordinate cost difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub eps: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub mu: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
}

impl MomentsConfig {
    pub fn validate(&self) -> Result<()> {
        let eps = Budget::new(self.eps).map_err(field_err("eps"))?.value();
        if !(self.kappa.is_finite() && (0.0..=eps).contains(&self.kappa)) {
            return Err(Error::config("kappa", format!("must lie in [0, {eps}]")));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::config("sigma", "must be positive"));
        }
        check_finite_list("mu", &self.mu, MAX_SWEEP_POINTS)?;
        if !(2..=MAX_TRIALS).contains(&self.trials) {
            return Err(Error::config("trials", format!("must be in 2..={MAX_TRIALS}")));
        }
        Ok(())
    }
}

/// A built-in figure recipe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Preset {
    Experiment(ExperimentConfig),
    Surface(SurfaceConfig),
    Moments(MomentsConfig),
}

impl Preset {
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Preset::Experiment(c) => c.seed = seed,
            Preset::Surface(c) => c.seed = seed,
            Preset::Moments(c) => c.seed = seed,
        }
    }

    pub fn set_trials(&mut self, trials: u64) {
        match self {
            Preset::Experiment(c) => c.trials = trials,
            Preset::Surface(c) => c.trials = trials,
            Preset::Moments(c) => c.trials = trials,
        }
    }
}

pub const FIGURES: [&str; 7] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"];

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            // round to 12 decimals so the printed values are the intended ones
            let v = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (v * 1e12).round() / 1e12
        })
        .collect()
}

/// The three 2-D means of the ternary example.
pub fn ternary_means_2d() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![2.5, 0.25], vec![-1.75, -2.25]]
}

/// The 20-dimensional ternary means: class `k` puts its first fraction
/// `p_k` of coordinates at one level and the rest at another.
pub fn ternary_means_20d() -> Vec<Vec<f64>> {
    let level = |n: usize, head: f64, tail: f64| -> Vec<f64> {
        (0..20).map(|i| if i < n { head } else { tail }).collect()
    };
    vec![level(3, 0.0, 1.0), level(2, -2.1, 0.9), level(4, -1.8, 1.75)]
}

fn ternary_model(means: Vec<Vec<f64>>) -> ModelSpec {
    let m = HypothesisModel::uniform(means, 0.1f64.sqrt()).expect("valid built-in model");
    ModelSpec::Explicit(m)
}

/// Built-in recipe for one of [`FIGURES`].
pub fn builtin(name: &str) -> Result<Preset> {
    let glrt = ClassifierKind::Glrt;
    let binary3 = vec![glrt, ClassifierKind::MinimaxLinear, ClassifierKind::MinDistance];
    Ok(match name {
        "fig2" => Preset::Moments(MomentsConfig {
            eps: 1.0,
            kappa: 1.0,
            sigma: 1.0,
            mu: grid(0.0, 3.0, 31),
            trials: DEFAULT_MOMENT_TRIALS,
            seed: 0,
        }),
        "fig3" => Preset::Experiment(ExperimentConfig {
            name: Some("fig3".into()),
            model: ModelSpec::TwoLevel(TwoLevelSpec { d: 20, p: 0.1, a: 1.1, b: 0.9, eps: 1.0, sigma: 1.0 }),
            eps: None,
            classifiers: binary3,
            attacks: default_attacks(),
            kappa: None,
            sweep: Some(Sweep::Kappa { values: grid(0.0, 1.0, 11) }),
            predictors: vec![Predictor::CltExact, Predictor::QOfSnr],
            trials: DEFAULT_TRIALS,
            seed: 0,
            true_class: Some(0),
        }),
        "fig4" => Preset::Experiment(ExperimentConfig {
            name: Some("fig4".into()),
            model: ModelSpec::TwoLevel(TwoLevelSpec { d: 10, p: 0.1, a: 2.0, b: 0.5, eps: 1.0, sigma: 0.5 }),
            eps: None,
            classifiers: binary3,
            attacks: default_attacks(),
            kappa: Some(vec![0.0, 0.5, 0.8, 1.0]),
            sweep: Some(Sweep::EpsOverSigmaSq { values: grid(1.0, 20.0, 20) }),
            predictors: vec![Predictor::CltExact, Predictor::QOfSnr],
            trials: DEFAULT_TRIALS,
            seed: 0,
            true_class: Some(0),
        }),
        "fig5" => Preset::Experiment(ExperimentConfig {
            name: Some("fig5".into()),
            model: ModelSpec::TwoLevel(TwoLevelSpec { d: 50, p: 0.3, a: 1.1, b: 0.9, eps: 1.0, sigma: 1.0 }),
            eps: None,
            classifiers: vec![glrt],
            attacks: default_attacks(),
            kappa: Some(vec![1.0, 0.8]),
            sweep: Some(Sweep::Dim {
                values: vec![50, 100, 200, 400],
                target_snr: Some(vec![5.0, 8.0]),
            }),
            predictors: vec![Predictor::CltExact],
            trials: 1_000_000,
            seed: 0,
            true_class: Some(0),
        }),
        "fig6" | "fig7" => Preset::Surface(SurfaceConfig {
            name: Some(name.into()),
            model: ternary_model(ternary_means_2d()),
            classifier: if name == "fig6" { glrt } else { ClassifierKind::PairwiseRobustLinear },
            eps: 1.0,
            true_class: 0,
            points_per_axis: default_grid(),
            trials: DEFAULT_SURFACE_TRIALS,
            seed: 0,
        }),
        "fig8" => Preset::Experiment(ExperimentConfig {
            name: Some("fig8".into()),
            model: ternary_model(ternary_means_20d()),
            eps: Some(1.0),
            classifiers: vec![glrt, ClassifierKind::PairwiseRobustLinear, ClassifierKind::MinDistance],
            attacks: vec![AttackKind::Agnostic, AttackKind::Aware],
            kappa: None,
            sweep: Some(Sweep::Kappa { values: grid(0.0, 1.0, 9) }),
            predictors: Vec::new(),
            trials: DEFAULT_TRIALS,
            seed: 0,
            true_class: None,
        }),
        other => {
            return Err(Error::invalid(format!(
                "unknown figure `{other}`; expected one of {}",
                FIGURES.join(", ")
            )))
        }
    })
}
