//! Batch front end: `run`, `compare` and `train` over a scenario file.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{run_with_model, train_from_warmup, TrainingOutcome};
use crate::error::{Error, Result};
use crate::metrics::{compare_reports, comparison_csv, ComparisonRow, Format, MetricsReport};
use crate::pipeline::ClassifierModel;
use crate::scenario::{parse_scenario, Mode, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(
    name = "sensornet",
    version,
    about = "Round-based WSN simulator with in-network staircase filtering"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write its report.
    Run(Invocation),
    /// Simulate baseline and framework modes on the same seed and compare them.
    Compare(Invocation),
    /// Train the forward/discard classifier on a labelled warm-up run.
    Train(Invocation),
}

#[derive(Debug, Clone, Args)]
pub struct Invocation {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Report file for `run`, output directory for `compare`, model file for `train`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: Format,
    /// Trained classifier weights to use instead of a warm-up run.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

/// Reads the scenario file and applies command-line overrides.
pub fn load_scenario(inv: &Invocation) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(&inv.scenario)
        .map_err(|e| Error::Io(format!("{}: {e}", inv.scenario.display())))?;
    let mut cfg = parse_scenario(&text)?;
    if let Some(seed) = inv.seed {
        cfg.seed = seed;
    }
    if let Some(rounds) = inv.rounds {
        cfg.rounds = rounds;
    }
    if let Some(mode) = inv.mode {
        cfg.mode = mode;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_model(inv: &Invocation) -> Result<Option<ClassifierModel>> {
    inv.model.as_deref().map(ClassifierModel::load).transpose()
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.4}"))
}

pub fn summary_line(r: &MetricsReport) -> String {
    format!(
        "{}: rounds={} generated={} delivered={} bits={} energy={:.6e}J selectivity={} first_death={} network_death={}",
        r.mode.as_str(),
        r.rounds_completed,
        r.readings_generated,
        r.readings_delivered_to_sink,
        r.total_bits_transmitted,
        r.total_energy_consumed,
        fmt_opt(r.selectivity),
        r.first_node_death_round.map_or("none".into(), |x| x.to_string()),
        r.network_death_round.map_or("none".into(), |x| x.to_string()),
    )
}

pub fn cmd_run(inv: &Invocation, stdout: &mut dyn Write) -> Result<MetricsReport> {
    let cfg = load_scenario(inv)?;
    let report = run_with_model(&cfg, load_model(inv)?)?;
    let text = report.serialize(inv.format);
    match &inv.out {
        Some(path) => write_atomic(path, &text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    if !inv.quiet {
        writeln!(stdout, "{}", summary_line(&report))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline: MetricsReport,
    pub framework: MetricsReport,
    pub rows: Vec<ComparisonRow>,
}

pub fn cmd_compare(inv: &Invocation, stdout: &mut dyn Write) -> Result<Comparison> {
    let cfg = load_scenario(inv)?;
    let model = load_model(inv)?;
    let baseline = run_with_model(
        &ScenarioConfig {
            mode: Mode::Baseline,
            ..cfg.clone()
        },
        None,
    )?;
    let framework = run_with_model(
        &ScenarioConfig {
            mode: Mode::Framework,
            ..cfg
        },
        model,
    )?;
    let rows = compare_reports(&baseline, &framework);
    let table = comparison_csv(&rows);
    if let Some(dir) = &inv.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let ext = inv.format.extension();
        write_atomic(
            &dir.join(format!("baseline.{ext}")),
            &baseline.serialize(inv.format),
        )?;
        write_atomic(
            &dir.join(format!("framework.{ext}")),
            &framework.serialize(inv.format),
        )?;
        write_atomic(&dir.join("comparison.csv"), &table)?;
    }
    if !inv.quiet {
        stdout.write_all(table.as_bytes())?;
    }
    Ok(Comparison {
        baseline,
        framework,
        rows,
    })
}

pub fn cmd_train(inv: &Invocation, stdout: &mut dyn Write) -> Result<TrainingOutcome> {
    let cfg = load_scenario(inv)?;
    let outcome = train_from_warmup(&cfg)?;
    let text = outcome.model.to_text();
    match &inv.out {
        Some(path) => write_atomic(path, &text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    if !inv.quiet {
        writeln!(
            stdout,
            "trained on {} examples, training accuracy {:.4}",
            outcome.examples.len(),
            outcome.accuracy
        )?;
    }
    Ok(outcome)
}

/// Dispatches a parsed command line; the binary maps `Err` to a non-zero exit.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Run(inv) => cmd_run(inv, stdout).map(drop),
        Command::Compare(inv) => cmd_compare(inv, stdout).map(drop),
        Command::Train(inv) => cmd_train(inv, stdout).map(drop),
    }
}
