use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mimo_ce::channel::ScenarioConfig;
use mimo_ce::cnn::{train, Activation, TrainConfig, TrainInit};
use mimo_ce::harness::{
    presets, run_sweep, simulate, write_csv, write_jsonl, CnnSource, EstimatorKind, PilotSource, SweepKind, SweepSpec,
};

#[derive(Parser)]
#[command(name = "mimo-ce", version, about = "MIMO channel estimation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw channels and observations, one JSON object per line.
    Simulate(SimulateArgs),
    /// Train a CNN estimator and write the model file.
    Train(TrainArgs),
    /// Evaluate estimators (by default the given CNN model) at one scenario.
    Evaluate(EvaluateArgs),
    /// Monte-Carlo NMSE sweep over SNR, pilot count or BS antennas.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// `dft` or `file:<path>`.
    #[arg(long, default_value = "dft", value_parser = parse_pilots)]
    pilots: PilotSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    draws: usize,
    /// Output path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Fe,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Training config JSON; unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_activation)]
    activation: Option<Activation>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    init: InitArg,
    /// Per-epoch training NMSE as CSV (`epoch,nmse`).
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated subset of genie,ge,fe,ml,ls,omp,cnn.
    #[arg(long, default_value = "cnn", value_parser = parse_estimators)]
    estimators: EstimatorList,
    #[arg(long, default_value_t = presets::DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long)]
    timing: bool,
    /// CSV output path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Complete sweep JSON; the flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    kind: Option<SweepKind>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Comma-separated sweep values (default SNR grid −15..20 dB).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_estimators)]
    estimators: Option<EstimatorList>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_pilots)]
    pilots: Option<PilotSource>,
    /// One CNN model for all points.
    #[arg(long, conflicts_with_all = ["model_template", "train_config"])]
    model: Option<PathBuf>,
    /// Per-point CNN model path containing `{value}`.
    #[arg(long, conflicts_with = "train_config")]
    model_template: Option<String>,
    /// Train a CNN per point with this config JSON.
    #[arg(long)]
    train_config: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
    /// CSV output path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pilots(s: &str) -> Result<PilotSource, String> {
    s.parse().map_err(|e: mimo_ce::Error| e.to_string())
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    s.parse().map_err(|e: mimo_ce::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<SweepKind, String> {
    s.parse().map_err(|e: mimo_ce::Error| e.to_string())
}

/// Comma-separated estimator names as one flag value.
#[derive(Clone)]
struct EstimatorList(Vec<EstimatorKind>);

fn parse_estimators(s: &str) -> Result<EstimatorList, String> {
    EstimatorKind::parse_list(s).map(EstimatorList).map_err(|e| e.to_string())
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json_file(path).with_context(|| format!("reading scenario {}", path.display()))
}

fn load_train_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: TrainConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let cfg = load_scenario(&a.common.scenario)?;
    let draws = simulate(&cfg, &a.common.pilots, a.draws, a.common.seed)?;
    write_jsonl(&draws, output(a.out.as_deref())?)?;
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let scenario = load_scenario(&a.common.scenario)?;
    let mut cfg = match &a.config {
        Some(p) => load_train_config(p)?,
        None => TrainConfig::default(),
    };
    cfg.seed = a.common.seed;
    if let Some(act) = a.activation {
        cfg.activation = act;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let pilots = a.common.pilots.build(scenario.s, scenario.u, scenario.n)?;
    let init = match a.init {
        InitArg::Random => TrainInit::Random,
        InitArg::Fe => TrainInit::Fe,
    };
    let outcome = train(&cfg, &scenario, &pilots, init)?;
    outcome.params.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.history {
        let mut w = output(Some(path))?;
        writeln!(w, "epoch,nmse")?;
        for (i, v) in outcome.loss_history.iter().enumerate() {
            writeln!(w, "{},{v:.16e}", i + 1)?;
        }
        w.flush()?;
    }
    let last = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
    eprintln!("trained {} epochs, final training NMSE {last:.6e}, model written to {}", cfg.epochs, a.out.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = load_scenario(&a.common.scenario)?;
    let mut spec = SweepSpec::new(SweepKind::Snr, vec![cfg.snr_db], cfg, a.estimators.0, a.draws, a.common.seed);
    spec.pilots = a.common.pilots;
    spec.record_timing = a.timing;
    if spec.estimators.contains(&EstimatorKind::Cnn) {
        let Some(model) = a.model else {
            bail!("--model is required when evaluating `cnn`");
        };
        spec.cnn = Some(CnnSource::Model(model));
    }
    let rows = run_sweep(&spec)?;
    write_csv(&rows, output(a.out.as_deref())?)?;
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => SweepSpec::from_json_file(p).with_context(|| format!("reading sweep spec {}", p.display()))?,
        None => {
            let (Some(kind), Some(scenario)) = (a.kind, a.scenario.as_deref()) else {
                bail!("either --spec or both --kind and --scenario are required");
            };
            let values = match (&a.values, kind) {
                (Some(v), _) => v.clone(),
                (None, SweepKind::Snr) => presets::default_snr_values(),
                (None, _) => bail!("--values is required for a {kind} sweep"),
            };
            SweepSpec::new(
                kind,
                values,
                load_scenario(scenario)?,
                vec![EstimatorKind::Genie, EstimatorKind::Ls],
                presets::DEFAULT_DRAWS,
                0,
            )
        }
    };
    if a.spec.is_some() {
        if let Some(k) = a.kind {
            spec.kind = k;
        }
        if let Some(p) = &a.scenario {
            spec.fixed = load_scenario(p)?;
        }
        if let Some(v) = &a.values {
            spec.values = v.clone();
        }
    }
    if let Some(e) = a.estimators {
        spec.estimators = e.0;
    }
    if let Some(d) = a.draws {
        spec.num_draws = d;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(p) = a.pilots {
        spec.pilots = p;
    }
    if let Some(m) = a.model {
        spec.cnn = Some(CnnSource::Model(m));
    }
    if let Some(t) = a.model_template {
        spec.cnn = Some(CnnSource::Template(t));
    }
    if let Some(p) = &a.train_config {
        spec.cnn = Some(CnnSource::Train(load_train_config(p)?));
    }
    spec.record_timing |= a.timing;
    let rows = run_sweep(&spec)?;
    write_csv(&rows, output(a.out.as_deref())?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
