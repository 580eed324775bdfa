//! Running experiment configs and writing their results.

use std::io::Write;

use serde::Serialize;

use crate::analysis::{
    clt_error, cost_difference_moments, min_distance_error, minimax_error, sigma_for_target_error,
    y_bound_moments, SigmaSearch,
};
use crate::attacks::{brute_force_attack_oracle, ErrorSurface};
use crate::classifiers::ClassifierKind;
use crate::config::{config_hash, AttackKind, ExperimentConfig, MomentsConfig, Predictor, SurfaceConfig, Sweep};
use crate::error::{Error, Result};
use crate::model::{AttackSpec, HypothesisModel};
use crate::numerics::{q_function, Budget};
use crate::sim::{monte_carlo_with, sample_moments, ClassSelection};

pub const CSV_HEADER: &str = "sweep_axis,sweep_value,classifier,attack_mode,kappa,error,ci,reject_rate,method,seed";

/// Shortest round-trip form; switches to exponent notation for tiny and huge
/// magnitudes instead of printing long runs of zeros.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub sweep_axis: &'static str,
    pub sweep_value: Option<f64>,
    pub classifier: ClassifierKind,
    pub attack_mode: &'static str,
    pub kappa: f64,
    pub error: f64,
    pub ci: Option<f64>,
    pub reject_rate: Option<f64>,
    pub method: &'static str,
    pub seed: u64,
}

impl Row {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.sweep_axis,
            fmt_opt(self.sweep_value),
            self.classifier,
            self.attack_mode,
            fmt_f64(self.kappa),
            fmt_f64(self.error),
            fmt_opt(self.ci),
            fmt_opt(self.reject_rate),
            self.method,
            self.seed
        )
    }
}

/// Noise level and dimension actually used at one (sweep point, kappa).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointInfo {
    pub sweep_value: Option<f64>,
    pub kappa: f64,
    pub sigma: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub config_hash: String,
    pub seed: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub meta: RunMeta,
    pub points: Vec<PointInfo>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Monte Carlo rows plus the configured predictors.
    Simulate,
    /// Analytic rows only; every applicable predictor when none is listed.
    PredictOnly,
}

struct Point {
    value: Option<f64>,
    dim: Option<usize>,
    /// `(kappa, sigma)` pairs evaluated at this point.
    runs: Vec<(f64, f64)>,
}

fn plan(cfg: &ExperimentConfig, eps: f64, kappas: &[f64]) -> Result<Vec<Point>> {
    let base_sigma = cfg.model.sigma();
    let fixed = |value, dim, sigma: f64| Point {
        value,
        dim,
        runs: kappas.iter().map(|k| (*k, sigma)).collect(),
    };
    Ok(match &cfg.sweep {
        None => vec![fixed(None, None, base_sigma)],
        Some(Sweep::Kappa { values }) => values
            .iter()
            .map(|k| Point {
                value: Some(*k),
                dim: None,
                runs: vec![(*k, base_sigma)],
            })
            .collect(),
        Some(Sweep::EpsOverSigmaSq { values }) => values
            .iter()
            .map(|v| fixed(Some(*v), None, eps / v.sqrt()))
            .collect(),
        Some(Sweep::Sigma { values }) => values.iter().map(|s| fixed(Some(*s), None, *s)).collect(),
        Some(Sweep::Dim { values, target_snr }) => {
            let mut points = Vec::with_capacity(values.len());
            for &d in values {
                let runs = match target_snr {
                    None => kappas.iter().map(|k| (*k, base_sigma)).collect(),
                    Some(snrs) => {
                        let template = cfg.model.build_with(None, Some(d))?;
                        kappas
                            .iter()
                            .zip(snrs)
                            .map(|(k, snr)| {
                                let target = q_function(snr.sqrt());
                                let s = sigma_for_target_error(&template, eps, *k, target, SigmaSearch::CltExact)?;
                                Ok((*k, s))
                            })
                            .collect::<Result<_>>()?
                    }
                };
                points.push(Point {
                    value: Some(d as f64),
                    dim: Some(d),
                    runs,
                });
            }
            points
        }
    })
}

fn predictor_rows(
    model: &HypothesisModel,
    kind: ClassifierKind,
    predictors: &[Predictor],
    eps: f64,
    kappa: f64,
    base: &Row,
) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for p in predictors {
        let est = match (kind, p) {
            (ClassifierKind::Glrt, Predictor::CltExact) if kappa <= eps => clt_error(model, eps, kappa, false)?,
            (ClassifierKind::Glrt, Predictor::CltLowerBound) if kappa <= eps => clt_error(model, eps, kappa, true)?,
            (ClassifierKind::MinimaxLinear, Predictor::QOfSnr) => minimax_error(model, eps, kappa)?,
            (ClassifierKind::MinDistance, Predictor::QOfSnr) => min_distance_error(model, kappa)?,
            _ => continue,
        };
        rows.push(Row {
            error: est.value,
            ci: None,
            reject_rate: None,
            method: est.method.tag(),
            ..base.clone()
        });
    }
    Ok(rows)
}

/// Runs `cfg`, handing each row to `sink` as soon as it is computed.
///
/// Rows are ordered by sweep point, kappa, classifier, then attack mode, with
/// analytic rows after the Monte Carlo rows of their classifier. All Monte
/// Carlo runs share the config seed. Analytic rows describe the sign attack
/// under class 0.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    mode: RunMode,
    sink: &mut dyn FnMut(&Row) -> Result<()>,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    if mode == RunMode::Simulate {
        cfg.check_simulation()?;
    }
    let eps = cfg.eps()?;
    let kappas = cfg.kappas()?;
    let predictors: Vec<Predictor> = match mode {
        RunMode::Simulate => cfg.predictors.clone(),
        RunMode::PredictOnly if cfg.predictors.is_empty() => {
            vec![Predictor::CltExact, Predictor::CltLowerBound, Predictor::QOfSnr]
        }
        RunMode::PredictOnly => cfg.predictors.clone(),
    };
    if mode == RunMode::PredictOnly && cfg.model.build()?.num_classes() != 2 {
        return Err(Error::config("model", "analytic predictors need a binary model"));
    }
    let selection = match cfg.true_class {
        Some(j) => ClassSelection::Class(j),
        None => ClassSelection::PriorWeighted,
    };
    let axis = cfg.sweep.as_ref().map(Sweep::axis).unwrap_or("none");

    let mut rows = Vec::new();
    let mut infos = Vec::new();
    let mut emit = |row: Row, rows: &mut Vec<Row>| -> Result<()> {
        sink(&row)?;
        rows.push(row);
        Ok(())
    };
    for point in plan(cfg, eps, &kappas)? {
        for (run_index, &(kappa, sigma)) in point.runs.iter().enumerate() {
            let model = cfg.model.build_with(Some(sigma), point.dim)?;
            infos.push(PointInfo {
                sweep_value: point.value,
                kappa,
                sigma,
                dim: model.dim(),
            });
            for &kind in &cfg.classifiers {
                let base = Row {
                    sweep_axis: axis,
                    sweep_value: point.value,
                    classifier: kind,
                    attack_mode: "agnostic",
                    kappa,
                    error: 0.0,
                    ci: None,
                    reject_rate: None,
                    method: "",
                    seed: cfg.seed,
                };
                if mode == RunMode::Simulate {
                    let classifier = kind.build(&model, eps)?;
                    for attack in &cfg.attacks {
                        // the unattacked baseline does not depend on kappa
                        let row_kappa = match attack {
                            AttackKind::None if run_index > 0 => continue,
                            AttackKind::None => 0.0,
                            _ => kappa,
                        };
                        let spec = AttackSpec::new(eps, row_kappa, attack.mode())?;
                        let out = monte_carlo_with(&model, classifier.as_ref(), kind, &spec, selection, cfg.trials, cfg.seed)?;
                        let row = Row {
                            attack_mode: attack.name(),
                            kappa: row_kappa,
                            error: out.error,
                            ci: Some(out.ci_halfwidth),
                            reject_rate: (kind == ClassifierKind::PairwiseRobustLinear).then_some(out.reject_rate),
                            method: "monte_carlo",
                            ..base.clone()
                        };
                        emit(row, &mut rows)?;
                    }
                }
                for row in predictor_rows(&model, kind, &predictors, eps, kappa, &base)? {
                    emit(row, &mut rows)?;
                }
            }
        }
    }
    Ok(ExperimentResult {
        meta: RunMeta {
            kind: "experiment",
            name: cfg.name.clone(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            trials: cfg.trials,
        },
        points: infos,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceResult {
    pub meta: RunMeta,
    pub classifier: ClassifierKind,
    pub true_class: usize,
    pub eps: f64,
    pub sigma: f64,
    pub surface: ErrorSurface,
}

pub fn run_surface(cfg: &SurfaceConfig) -> Result<SurfaceResult> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let classifier = cfg.classifier.build(&model, cfg.eps)?;
    let surface = brute_force_attack_oracle(
        &model,
        classifier.as_ref(),
        cfg.true_class,
        cfg.eps,
        cfg.points_per_axis,
        cfg.trials,
        cfg.seed,
    )?;
    Ok(SurfaceResult {
        meta: RunMeta {
            kind: "attack_surface",
            name: cfg.name.clone(),
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            trials: cfg.trials,
        },
        classifier: cfg.classifier,
        true_class: cfg.true_class,
        eps: cfg.eps,
        sigma: model.sigma(),
        surface,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub mu: f64,
    pub c_mean: f64,
    pub c_variance: f64,
    pub c_mean_mc: f64,
    pub c_variance_mc: f64,
    pub c_mean_se: f64,
    pub c_variance_se: f64,
    pub y_mean: f64,
    pub y_variance: f64,
}

pub const MOMENTS_HEADER: &str =
    "mu,c_mean,c_variance,c_mean_mc,c_variance_mc,c_mean_se,c_variance_se,y_mean,y_variance";

impl MomentRow {
    pub fn to_csv(&self) -> String {
        [
            self.mu,
            self.c_mean,
            self.c_variance,
            self.c_mean_mc,
            self.c_variance_mc,
            self.c_mean_se,
            self.c_variance_se,
            self.y_mean,
            self.y_variance,
        ]
        .map(fmt_f64)
        .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsResult {
    pub meta: RunMeta,
    pub rows: Vec<MomentRow>,
}

/// Exact, sampled and lower-bound moments of the per-coordinate cost
/// difference for every `mu` in the config. Each `mu` uses the same draws.
pub fn run_moments(cfg: &MomentsConfig) -> Result<MomentsResult> {
    cfg.validate()?;
    let b = Budget::new(cfg.eps)?;
    let mut rows = Vec::with_capacity(cfg.mu.len());
    for &mu in &cfg.mu {
        let exact = cost_difference_moments(mu, cfg.eps, cfg.kappa, cfg.sigma)?;
        let y = y_bound_moments(mu, cfg.eps, cfg.kappa, cfg.sigma)?;
        let (kappa, sigma, shift) = (cfg.kappa, cfg.sigma, 2.0 * mu.abs());
        let (m, v, se_m, se_v) = sample_moments(cfg.trials, cfg.seed, exact.mean, |z| {
            let n = sigma * z;
            b.shrink(shift + n - kappa).powi(2) - b.shrink(n - kappa).powi(2)
        })?;
        rows.push(MomentRow {
            mu,
            c_mean: exact.mean,
            c_variance: exact.variance,
            c_mean_mc: m,
            c_variance_mc: v,
            c_mean_se: se_m,
            c_variance_se: se_v,
            y_mean: y.mean,
            y_variance: y.variance,
        });
    }
    Ok(MomentsResult {
        meta: RunMeta {
            kind: "moments",
            name: None,
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            trials: cfg.trials,
        },
        rows,
    })
}

/// Incremental CSV writer for experiment rows: header first, one flushed
/// line per row.
pub struct CsvRowWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvRowWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(CsvRowWriter { out })
    }

    pub fn write(&mut self, row: &Row) -> Result<()> {
        writeln!(self.out, "{}", row.to_csv())?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_surface_csv<W: Write + ?Sized>(out: &mut W, surface: &ErrorSurface) -> Result<()> {
    let d = surface.points.first().map(|p| p.attack.len()).unwrap_or(0);
    let mut header: Vec<String> = (1..=d).map(|i| format!("e{i}")).collect();
    header.push("error".into());
    writeln!(out, "{}", header.join(","))?;
    for p in &surface.points {
        let mut cells: Vec<String> = p.attack.iter().map(|v| fmt_f64(*v)).collect();
        cells.push(fmt_f64(p.error));
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_moments_csv<W: Write + ?Sized>(out: &mut W, rows: &[MomentRow]) -> Result<()> {
    writeln!(out, "{MOMENTS_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(())
}
