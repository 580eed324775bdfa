//! Command-line front end. [`cli_main`] returns the process exit code:
//! 0 on success, 1 for invalid input, 2 for failures while running.
//! Errors are reported on stderr as a single JSON object.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{clt_error, sigma_for_target_error, SigmaSearch};
use crate::attacks::{nn_class_glrt, nn_class_min_distance};
use crate::classifiers::ClassifierKind;
use crate::config::{
    builtin, ternary_means_2d, ExperimentConfig, ModelSpec, Preset, SurfaceConfig, TwoLevelSpec,
    DEFAULT_SURFACE_TRIALS, DEFAULT_TRIALS,
};
use crate::error::{Error, Result};
use crate::experiment::{
    fmt_f64, run_experiment, run_moments, run_surface, write_moments_csv, write_surface_csv, CsvRowWriter,
    ExperimentResult, RunMode,
};
use crate::model::{AttackMode, AttackSpec, HypothesisModel};
use crate::numerics::q_function;
use crate::sim::{monte_carlo_error, ClassSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "glrt", version, about = "Adversarially robust Gaussian hypothesis testing experiments")]
pub struct Cli {
    /// Seed for all random draws (overrides the config)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per point (overrides the config)
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker threads; defaults to one per core
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment config with Monte Carlo
    Simulate {
        config: PathBuf,
    },
    /// Analytic error predictions for a binary experiment config
    Predict {
        config: Option<PathBuf>,
        /// Use a built-in figure config instead of a file
        #[arg(long, conflicts_with = "config")]
        figure: Option<String>,
        /// Replace the attack strengths (comma separated)
        #[arg(long, value_delimiter = ',')]
        kappa: Option<Vec<f64>>,
    },
    /// Brute-force error surface over all attacks on a grid (d <= 3)
    AttackSurface(SurfaceArgs),
    /// Nearest-neighbour class tables
    NnClass {
        /// Model JSON; the 2-D ternary example when omitted
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// Employed attack strength; defaults to eps
        #[arg(long)]
        kappa: Option<f64>,
        /// Only this true class
        #[arg(long = "class")]
        class: Option<usize>,
    },
    /// Noise level at which the binary GLRT reaches a target error
    SigmaSearch(SigmaArgs),
    /// Regenerate the data behind a figure
    Reproduce {
        #[arg(value_parser = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"])]
        figure: String,
    },
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    /// Surface config JSON
    pub config: Option<PathBuf>,
    /// Model JSON (instead of a config)
    #[arg(long, conflicts_with = "config")]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "glrt")]
    pub classifier: String,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long = "class", default_value_t = 0)]
    pub class: usize,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SigmaArgs {
    /// Binary model JSON; otherwise a two-level profile from the flags below
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub d: usize,
    #[arg(long, default_value_t = 0.3)]
    pub p: f64,
    #[arg(long, default_value_t = 1.1)]
    pub a: f64,
    #[arg(long, default_value_t = 0.9)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Employed attack strength; defaults to eps
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Target error probability
    #[arg(long, conflicts_with = "target_snr", required_unless_present = "target_snr")]
    pub target: Option<f64>,
    /// Target given as an SNR, error Q(sqrt(snr))
    #[arg(long)]
    pub target_snr: Option<f64>,
    #[arg(long, value_enum, default_value = "clt")]
    pub method: SearchMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchMethod {
    Clt,
    MonteCarlo,
}

/// Parses arguments without running anything.
pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(args)
}

fn report(kind: &str, message: &str) {
    let body = json!({ "error": { "kind": kind, "message": message } });
    let _ = writeln!(io::stderr(), "{body}");
}

/// Entry point of the `glrt` binary. `args` includes the program name.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    report("usage", e.render().to_string().trim_end());
                    1
                }
            };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        // A closed downstream pipe (e.g. `| head`) is not a failure.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            report(e.kind(), &e.to_string());
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Io(io::Error::other(e.to_string())))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn check_trials(trials: Option<u64>) -> Result<()> {
    if trials == Some(0) {
        return Err(Error::invalid("--trials must be at least 1"));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    check_trials(cli.trials)?;
    match &cli.command {
        Command::Simulate { config } => {
            let mut cfg = ExperimentConfig::from_json(&read(config)?)?;
            apply_overrides(&mut cfg, cli);
            experiment(cli, &cfg, RunMode::Simulate)
        }
        Command::Predict { config, figure, kappa } => {
            let mut cfg = match (config, figure) {
                (Some(path), _) => ExperimentConfig::from_json(&read(path)?)?,
                (None, Some(f)) => match builtin(f)? {
                    Preset::Experiment(c) => c,
                    _ => return Err(Error::invalid(format!("{f} is not an experiment figure"))),
                },
                (None, None) => return Err(Error::invalid("predict needs a config file or --figure")),
            };
            apply_overrides(&mut cfg, cli);
            if let Some(k) = kappa {
                cfg.kappa = Some(k.clone());
                if matches!(cfg.sweep, Some(crate::config::Sweep::Kappa { .. })) {
                    cfg.sweep = None;
                }
            }
            experiment(cli, &cfg, RunMode::PredictOnly)
        }
        Command::AttackSurface(args) => {
            let mut cfg = match (&args.config, &args.model) {
                (Some(path), _) => SurfaceConfig::from_json(&read(path)?)?,
                (None, Some(model)) => SurfaceConfig {
                    name: None,
                    model: ModelSpec::from_json(&read(model)?)?,
                    classifier: args.classifier.parse()?,
                    eps: args.eps,
                    true_class: args.class,
                    points_per_axis: args.points,
                    trials: DEFAULT_SURFACE_TRIALS,
                    seed: 0,
                },
                (None, None) => return Err(Error::invalid("attack-surface needs a config file or --model")),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = cli.trials {
                cfg.trials = t;
            }
            surface(cli, &cfg)
        }
        Command::NnClass { model, eps, kappa, class } => {
            let model = match model {
                Some(p) => ModelSpec::from_json(&read(p)?)?.build()?,
                None => HypothesisModel::uniform(ternary_means_2d(), 0.1f64.sqrt())?,
            };
            nn_table(cli, &model, *eps, kappa.unwrap_or(*eps), *class)
        }
        Command::SigmaSearch(args) => sigma_search(cli, args),
        Command::Reproduce { figure } => {
            let mut preset = builtin(figure)?;
            if let Some(s) = cli.seed {
                preset.set_seed(s);
            }
            if let Some(t) = cli.trials {
                preset.set_trials(t);
            }
            match preset {
                Preset::Experiment(cfg) => experiment(cli, &cfg, RunMode::Simulate),
                Preset::Surface(cfg) => surface(cli, &cfg),
                Preset::Moments(cfg) => {
                    let res = run_moments(&cfg)?;
                    emit(cli, &res.meta, &cfg, |w| write_moments_csv(w, &res.rows), &res)
                }
            }
        }
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, cli: &Cli) {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
}

fn open_out(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// `<out>.meta.json` next to a CSV output file.
fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_sidecar<M: Serialize, C: Serialize>(cli: &Cli, meta: &M, config: &C, extra: serde_json::Value) -> Result<()> {
    if let (Some(out), Format::Csv) = (&cli.out, cli.format) {
        let mut doc = json!({ "meta": meta, "config": config });
        if let (Some(obj), serde_json::Value::Object(more)) = (doc.as_object_mut(), extra) {
            obj.extend(more);
        }
        let mut f = io::BufWriter::new(fs::File::create(sidecar_path(out))?);
        serde_json::to_writer_pretty(&mut f, &doc)?;
        writeln!(f)?;
        f.flush()?;
    }
    Ok(())
}

/// Writes a finished result as CSV (through `csv`) or as one JSON document.
fn emit<M, C, R, F>(cli: &Cli, meta: &M, config: &C, csv: F, result: &R) -> Result<()>
where
    M: Serialize,
    C: Serialize,
    R: Serialize,
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let mut out = open_out(cli)?;
    match cli.format {
        Format::Csv => {
            csv(&mut out)?;
            out.flush()?;
            write_sidecar(cli, meta, config, json!({}))
        }
        Format::Json => {
            let mut doc = serde_json::to_value(result)?;
            if let Some(obj) = doc.as_object_mut() {
                obj.insert("config".into(), serde_json::to_value(config)?);
            }
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn experiment(cli: &Cli, cfg: &ExperimentConfig, mode: RunMode) -> Result<()> {
    let result: ExperimentResult = match cli.format {
        Format::Csv => {
            let mut writer = CsvRowWriter::new(open_out(cli)?)?;
            run_experiment(cfg, mode, &mut |row| writer.write(row))?
        }
        Format::Json => run_experiment(cfg, mode, &mut |_| Ok(()))?,
    };
    match cli.format {
        Format::Csv => write_sidecar(cli, &result.meta, cfg, json!({ "points": result.points })),
        Format::Json => emit(cli, &result.meta, cfg, |_| Ok(()), &result),
    }
}

fn surface(cli: &Cli, cfg: &SurfaceConfig) -> Result<()> {
    let res = run_surface(cfg)?;
    let extra = json!({
        "argmax": res.surface.argmax,
        "max_error": res.surface.max_error,
        "cell_width": res.surface.cell_width(),
    });
    let mut out = open_out(cli)?;
    match cli.format {
        Format::Csv => {
            write_surface_csv(&mut out, &res.surface)?;
            out.flush()?;
            write_sidecar(cli, &res.meta, cfg, extra)
        }
        Format::Json => {
            let mut doc = serde_json::to_value(&res)?;
            if let Some(obj) = doc.as_object_mut() {
                obj.insert("config".into(), serde_json::to_value(cfg)?);
            }
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct NnRow {
    classifier: &'static str,
    true_class: usize,
    candidate: usize,
    score: f64,
    nn_class: usize,
    degenerate: bool,
}

fn nn_table(cli: &Cli, model: &HypothesisModel, eps: f64, kappa: f64, class: Option<usize>) -> Result<()> {
    let classes: Vec<usize> = match class {
        Some(j) => {
            model.check_class(j)?;
            vec![j]
        }
        None => (0..model.num_classes()).collect(),
    };
    let mut rows = Vec::new();
    for &j in &classes {
        for (name, nn) in [
            ("glrt", nn_class_glrt(model, j, eps, kappa)?),
            ("min_distance", nn_class_min_distance(model, j, kappa)?),
        ] {
            for (k, score) in &nn.scores {
                rows.push(NnRow {
                    classifier: name,
                    true_class: j,
                    candidate: *k,
                    score: *score,
                    nn_class: nn.class,
                    degenerate: nn.degenerate,
                });
            }
        }
    }
    let mut out = open_out(cli)?;
    match cli.format {
        Format::Csv => {
            writeln!(out, "classifier,true_class,candidate,score,nn_class,degenerate")?;
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.classifier,
                    r.true_class,
                    r.candidate,
                    fmt_f64(r.score),
                    r.nn_class,
                    r.degenerate
                )?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &json!({ "eps": eps, "kappa": kappa, "rows": rows }))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn sigma_search(cli: &Cli, args: &SigmaArgs) -> Result<()> {
    let template = match &args.model {
        Some(p) => ModelSpec::from_json(&read(p)?)?.build()?,
        None => ModelSpec::TwoLevel(TwoLevelSpec {
            d: args.d,
            p: args.p,
            a: args.a,
            b: args.b,
            eps: args.eps,
            sigma: 1.0,
        })
        .build()?,
    };
    let kappa = args.kappa.unwrap_or(args.eps);
    let target = match (args.target, args.target_snr) {
        (Some(t), _) => t,
        (None, Some(snr)) if snr.is_finite() && snr > 0.0 => q_function(snr.sqrt()),
        _ => return Err(Error::invalid("target SNR must be positive")),
    };
    let trials = cli.trials.unwrap_or(DEFAULT_TRIALS);
    let seed = cli.seed.unwrap_or(0);
    let method = match args.method {
        SearchMethod::Clt => SigmaSearch::CltExact,
        SearchMethod::MonteCarlo => SigmaSearch::MonteCarlo { trials, seed },
    };
    let sigma = sigma_for_target_error(&template, args.eps, kappa, target, method)?;
    let model = template.with_sigma(sigma)?;
    let (achieved, ci) = match method {
        SigmaSearch::CltExact => (clt_error(&model, args.eps, kappa, false)?.value, None),
        SigmaSearch::MonteCarlo { trials, seed } => {
            let spec = AttackSpec::new(args.eps, kappa, AttackMode::NoiseAgnosticHeuristic)?;
            let o = monte_carlo_error(&model, ClassifierKind::Glrt, args.eps, &spec, ClassSelection::Class(0), trials, seed)?;
            (o.error, Some(o.ci_halfwidth))
        }
    };
    let tag = match method {
        SigmaSearch::CltExact => "clt_exact",
        SigmaSearch::MonteCarlo { .. } => "monte_carlo",
    };
    let mut out = open_out(cli)?;
    match cli.format {
        Format::Csv => {
            writeln!(out, "dim,kappa,target,sigma,sigma_sq,achieved,ci,method")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                model.dim(),
                fmt_f64(kappa),
                fmt_f64(target),
                fmt_f64(sigma),
                fmt_f64(sigma * sigma),
                fmt_f64(achieved),
                ci.map(fmt_f64).unwrap_or_default(),
                tag
            )?;
        }
        Format::Json => {
            let doc = json!({
                "dim": model.dim(), "kappa": kappa, "target": target, "sigma": sigma,
                "sigma_sq": sigma * sigma, "achieved": achieved, "ci": ci, "method": tag,
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}
