//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use glrt_robust::analysis::y_moments_from_offset;
use glrt_robust::attacks::{
    binary_sign_attack, brute_force_attack_oracle, heuristic_agnostic_attack, nn_class_glrt, noise_aware_attack,
};
use glrt_robust::classifiers::{coordinate_cost_difference, Classifier, ClassifierKind, Glrt};
use glrt_robust::config::{builtin, ternary_means_20d, ternary_means_2d, Preset};
use glrt_robust::experiment::{run_experiment, run_moments, run_surface, Row, RunMode};
use glrt_robust::model::{AttackMode, AttackSpec, HypothesisModel, Label, NoiseStreams, Observation, TwoLevelProfile};
use glrt_robust::numerics::Budget;
use glrt_robust::sim::{monte_carlo_error, monte_carlo_with, sample_moments, ClassSelection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn se_of(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Binary sign attack is the worst case for GLRT.
fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (trials, grid) = (10_000, 41);
    let mut worst: f64 = f64::NEG_INFINITY;
    for inst in 0..20u64 {
        let d = 1 + (inst % 3) as usize;
        let eps = rng.random_range(0.3..1.5);
        let sigma = eps * rng.random_range(0.3..3.0);
        let mu0: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mu1: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let model = HypothesisModel::uniform(vec![mu0, mu1], sigma).map_err(|e| e.to_string())?;
        let glrt = Glrt::new(&model, eps).map_err(|e| e.to_string())?;
        let seed = 100 + inst;
        let surface = brute_force_attack_oracle(&model, &glrt, 0, eps, grid, trials, seed).map_err(|e| e.to_string())?;
        let sign = binary_sign_attack(&model, 0, 1, eps).map_err(|e| e.to_string())?;
        let spec = AttackSpec::new(eps, eps, AttackMode::FixedVector(sign)).map_err(|e| e.to_string())?;
        let mc = monte_carlo_with(&model, &glrt, ClassifierKind::Glrt, &spec, ClassSelection::Class(0), trials, seed)
            .map_err(|e| e.to_string())?;
        let combined = (se_of(surface.max_error, trials).powi(2) + se_of(mc.error, trials).powi(2)).sqrt();
        let excess = surface.max_error - mc.error;
        worst = worst.max(excess / combined.max(f64::MIN_POSITIVE));
        ensure(excess < 2.0 * combined, || {
            format!("instance {inst} (d={d}): oracle {} vs sign attack {} (2 SE = {})", surface.max_error, mc.error, 2.0 * combined)
        })?;
    }
    Ok(format!("20 instances, largest excess {worst:.2} combined SE"))
}

/// Per-coordinate cost difference is monotone in the attack.
fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0u64;
    for _ in 0..1_000_000 {
        let eps = rng.random_range(0.0..2.0);
        let b = Budget::new(eps).unwrap();
        let mu: f64 = rng.random_range(-3.0..3.0);
        let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * rng.random_range(0.05..3.0);
        let (x, y) = (rng.random_range(-eps..=eps), rng.random_range(-eps..=eps));
        let (e1, e2) = if x >= y { (x, y) } else { (y, x) };
        let c1 = coordinate_cost_difference(mu, noise, e1, b);
        let c2 = coordinate_cost_difference(mu, noise, e2, b);
        let ok = if mu >= 0.0 { c1 >= c2 - 1e-12 } else { c1 <= c2 + 1e-12 };
        if !ok {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok("1e6 tuples, 0 violations".into())
}

/// Closed-form Y moments against sampling.
fn criterion_3() -> Outcome {
    let base = y_moments_from_offset(0.0, 1.0).map_err(|e| e.to_string())?;
    ensure((base.mean + 0.5).abs() < 1e-12 && (base.variance - 1.25).abs() < 1e-12, || {
        format!("t=0: ({}, {})", base.mean, base.variance)
    })?;
    let mut worst: f64 = 0.0;
    for sigma in [1.0, 0.6] {
        for (i, r) in [-4.0, -2.0, 0.0, 1.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
            let t = r * sigma;
            let exact = y_moments_from_offset(t, sigma).map_err(|e| e.to_string())?;
            let (m, v, se_m, se_v) = sample_moments(1_000_000, 30 + i as u64, exact.mean, |z| {
                let n = sigma * z;
                if n >= -t { (t + n).powi(2) - n * n } else { -n * n }
            })
            .map_err(|e| e.to_string())?;
            let zm = (m - exact.mean).abs() / se_m;
            let zv = (v - exact.variance).abs() / se_v;
            worst = worst.max(zm).max(zv);
            ensure(zm < 4.0 && zv < 4.0, || {
                format!("t/sigma={r}, sigma={sigma}: mean {m} vs {} ({zm:.1} SE), var {v} vs {} ({zv:.1} SE)", exact.mean, exact.variance)
            })?;
        }
    }
    Ok(format!("t=0 gives (-0.5, 1.25); grid agrees within {worst:.2} SE"))
}

/// Exact C moments against sampling, and convergence to the Y bound.
fn criterion_4() -> Outcome {
    let Preset::Moments(cfg) = builtin("fig2").map_err(|e| e.to_string())? else {
        return Err("fig2 is not a moments preset".into());
    };
    let res = run_moments(&cfg).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for r in &res.rows {
        let zm = if r.c_mean_se > 0.0 { (r.c_mean - r.c_mean_mc).abs() / r.c_mean_se } else { (r.c_mean - r.c_mean_mc).abs() * f64::INFINITY };
        let zv = if r.c_variance_se > 0.0 { (r.c_variance - r.c_variance_mc).abs() / r.c_variance_se } else { 0.0 };
        let zm = if zm.is_nan() { 0.0 } else { zm };
        worst = worst.max(zm).max(zv);
        ensure(zm < 4.0 && zv < 4.0, || format!("mu={}: exact vs sampled differ by ({zm:.1}, {zv:.1}) SE", r.mu))?;
        ensure(r.c_mean >= r.y_mean, || format!("mu={}: E[C] {} < E[Y] {}", r.mu, r.c_mean, r.y_mean))?;
    }
    let mut gaps = Vec::new();
    for r in res.rows.iter().filter(|r| r.mu >= 2.5 - 1e-9) {
        let gm = (r.c_mean - r.y_mean).abs() / r.y_mean.abs();
        let gv = (r.c_variance - r.y_variance).abs() / r.y_variance.abs();
        gaps.push(format!("mu={}: mean {:.1}%, var {:.1}%", r.mu, 100.0 * gm, 100.0 * gv));
        ensure(gm < 0.05 && gv < 0.05, || {
            format!(
                "exact vs sampled within {worst:.2} SE, but gap to Y bound is not < 5%: mu={} mean {:.3} vs {:.3} ({:.1}%), var {:.2} vs {:.2} ({:.1}%)",
                r.mu, r.c_mean, r.y_mean, 100.0 * gm, r.c_variance, r.y_variance, 100.0 * gv
            )
        })?;
    }
    Ok(format!("exact vs sampled within {worst:.2} SE; {}", gaps.join("; ")))
}

fn find<'a>(rows: &'a [Row], kind: ClassifierKind, kappa: f64, method: &str, mode: &str) -> Result<&'a Row, String> {
    rows.iter()
        .find(|r| r.classifier == kind && (r.kappa - kappa).abs() < 1e-9 && r.method == method && r.attack_mode == mode)
        .ok_or_else(|| format!("missing row {kind} kappa={kappa} {method} {mode}"))
}

/// GLRT dominates minimax for weaker attacks and matches it at full strength.
fn criterion_5() -> Outcome {
    let Preset::Experiment(cfg) = builtin("fig3").map_err(|e| e.to_string())? else {
        return Err("fig3 is not an experiment preset".into());
    };
    let res = run_experiment(&cfg, RunMode::Simulate, &mut |_| Ok(())).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for kappa in [0.0, 0.2, 0.4, 0.6, 0.8] {
        let g = find(&res.rows, ClassifierKind::Glrt, kappa, "monte_carlo", "agnostic")?;
        let m = find(&res.rows, ClassifierKind::MinimaxLinear, kappa, "monte_carlo", "agnostic")?;
        summary.push(format!("k={kappa}: {:.4}<={:.4}", g.error, m.error));
        ensure(g.error <= m.error, || format!("kappa={kappa}: GLRT {} > minimax {}", g.error, m.error))?;
    }
    let g = find(&res.rows, ClassifierKind::Glrt, 1.0, "monte_carlo", "agnostic")?;
    let m = find(&res.rows, ClassifierKind::MinimaxLinear, 1.0, "monte_carlo", "agnostic")?;
    let joint = (g.ci.unwrap_or(0.0).powi(2) + m.ci.unwrap_or(0.0).powi(2)).sqrt();
    ensure((g.error - m.error).abs() <= 3.0 * joint, || {
        format!(
            "ordering holds ({}), but at kappa=1 GLRT {:.4} vs minimax {:.4} differ by {:.4} > 3 joint CI {:.4}",
            summary.join(", "),
            g.error,
            m.error,
            (g.error - m.error).abs(),
            3.0 * joint
        )
    })?;
    Ok(format!("{}; kappa=1: {:.4} vs {:.4}", summary.join(", "), g.error, m.error))
}

/// Minimum distance errs at least half the time past its threshold.
fn criterion_6() -> Outcome {
    let profile = TwoLevelProfile { d: 10, p: 0.1, a: 2.0, b: 0.5, eps: 1.0 };
    let model = profile.model(0.5).map_err(|e| e.to_string())?;
    let spec = AttackSpec::new(1.0, 1.0, AttackMode::NoiseAgnosticHeuristic).map_err(|e| e.to_string())?;
    let out = monte_carlo_error(&model, ClassifierKind::MinDistance, 1.0, &spec, ClassSelection::Class(0), 200_000, 6)
        .map_err(|e| e.to_string())?;
    ensure(out.ci_halfwidth <= 5e-3, || format!("CI {} too wide", out.ci_halfwidth))?;
    ensure(out.error >= 0.5, || format!("error {} < 0.5", out.error))?;
    Ok(format!("error {:.4} +- {:.4}", out.error, out.ci_halfwidth))
}

/// CLT prediction approaches the simulated error as d grows.
fn criterion_7() -> Outcome {
    let Preset::Experiment(cfg) = builtin("fig5").map_err(|e| e.to_string())? else {
        return Err("fig5 is not an experiment preset".into());
    };
    let res = run_experiment(&cfg, RunMode::Simulate, &mut |_| Ok(())).map_err(|e| e.to_string())?;
    let gap = |d: f64, kappa: f64| -> Result<f64, String> {
        let pick = |method: &str| {
            res.rows
                .iter()
                .find(|r| r.sweep_value == Some(d) && (r.kappa - kappa).abs() < 1e-9 && r.method == method)
                .map(|r| r.error)
                .ok_or_else(|| format!("missing {method} row at d={d}, kappa={kappa}"))
        };
        Ok((pick("clt_exact")? - pick("monte_carlo")?).abs())
    };
    let mut parts = Vec::new();
    for kappa in [1.0, 0.8] {
        let (g50, g400) = (gap(50.0, kappa)?, gap(400.0, kappa)?);
        parts.push(format!("kappa={kappa}: gap {g50:.5} -> {g400:.5}"));
        ensure(g400 < 0.5 * g50, || format!("kappa={kappa}: gap at d=400 {g400} not below half of {g50}"))?;
    }
    Ok(parts.join("; "))
}

/// Ternary nearest-neighbour class and the matching worst-case direction.
fn criterion_8() -> Outcome {
    let model = HypothesisModel::uniform(ternary_means_2d(), 0.1f64.sqrt()).map_err(|e| e.to_string())?;
    let nn = nn_class_glrt(&model, 0, 1.0, 1.0).map_err(|e| e.to_string())?;
    ensure(nn.class == 2 && nn.scores == vec![(1, 0.0625), (2, 0.015625)], || format!("nn table {:?}", nn))?;
    let attack = heuristic_agnostic_attack(&model, ClassifierKind::Glrt, 0, 1.0, 1.0).map_err(|e| e.to_string())?;
    ensure(attack.vector == vec![-1.0, -1.0], || format!("heuristic attack {:?}", attack.vector))?;
    let Preset::Surface(cfg) = builtin("fig6").map_err(|e| e.to_string())? else {
        return Err("fig6 is not a surface preset".into());
    };
    let res = run_surface(&cfg).map_err(|e| e.to_string())?;
    let cell = res.surface.cell_width();
    let argmax = &res.surface.argmax;
    ensure(argmax.iter().all(|v| (v + 1.0).abs() <= cell + 1e-12), || {
        format!("surface argmax {argmax:?} more than one cell ({cell}) from [-1, -1]")
    })?;
    Ok(format!("NN class 2 with scores (0.0625, 0.015625); surface argmax {argmax:?}, max error {:.4}", res.surface.max_error))
}

/// Noise-aware attacks are at least as damaging as noise-agnostic ones.
fn criterion_9() -> Outcome {
    let model = HypothesisModel::uniform(ternary_means_20d(), 0.1f64.sqrt()).map_err(|e| e.to_string())?;
    let kinds = [ClassifierKind::Glrt, ClassifierKind::PairwiseRobustLinear, ClassifierKind::MinDistance];
    let mut parts = Vec::new();
    for kind in kinds {
        let classifier = kind.build(&model, 1.0).map_err(|e| e.to_string())?;
        for kappa in [0.25, 0.5, 0.75, 1.0] {
            let run = |mode| -> Result<f64, String> {
                let spec = AttackSpec::new(1.0, kappa, mode).map_err(|e| e.to_string())?;
                monte_carlo_with(&model, classifier.as_ref(), kind, &spec, ClassSelection::PriorWeighted, 100_000, 8)
                    .map(|o| o.error)
                    .map_err(|e| e.to_string())
            };
            let agnostic = run(AttackMode::NoiseAgnosticHeuristic)?;
            let aware = run(AttackMode::NoiseAwareOptimal)?;
            ensure(aware >= agnostic, || format!("{kind} kappa={kappa}: aware {aware} < agnostic {agnostic}"))?;
            if kappa == 1.0 {
                parts.push(format!("{kind} {agnostic:.4}/{aware:.4}"));
            }
            replay(&model, classifier.as_ref(), kappa)?;
        }
    }
    Ok(format!("agnostic/aware at kappa=1: {}; feasible attacks replay", parts.join(", ")))
}

fn replay(model: &HypothesisModel, classifier: &dyn Classifier, kappa: f64) -> Result<(), String> {
    let streams = NoiseStreams::new(99);
    let mut z = vec![0.0; model.dim()];
    for t in 0..3_000u64 {
        streams.standard_normals(t, &mut z);
        let noise: Vec<f64> = z.iter().map(|v| v * model.sigma()).collect();
        let j = (t % 3) as usize;
        let r = noise_aware_attack(model, classifier, &noise, j, 1.0, kappa).map_err(|e| e.to_string())?;
        if r.feasible {
            let obs = Observation::compose(model, j, &r.vector, noise).map_err(|e| e.to_string())?;
            ensure(classifier.label(&obs.x) != Label::Class(j), || format!("trial {t}: feasible attack did not replay"))?;
        }
    }
    Ok(())
}

/// Output bytes do not depend on the thread count.
fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("fig6_{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_glrt"))
            .args(["reproduce", "fig6", "--seed", "7", "--threads", threads, "--out"])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("reproduce exited with {status}"))?;
        let csv = std::fs::read(&out).map_err(|e| e.to_string())?;
        let meta = std::fs::read(dir.path().join(format!("fig6_{threads}.csv.meta.json"))).map_err(|e| e.to_string())?;
        outputs.push((csv, meta));
    }
    ensure(outputs[0] == outputs[1], || "outputs differ between 1 and 8 threads".into())?;
    Ok(format!("{} CSV bytes identical, metadata identical", outputs[0].0.len()))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = Vec::new();
    for (n, check) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("CRITERION {n}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                println!("CRITERION {n}: FAIL ({secs:.1}s) {detail}");
                failed.push(n);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
    } else {
        println!("acceptance: {} of 10 criteria failed: {:?}", failed.len(), failed);
        std::process::exit(1);
    }
}
