//! `roe` — train, evaluate, and inspect rarity-of-events experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use roe_core::a2c::RewardMode;
use roe_core::env::{build_def, scenario_taxonomy, Scenario, WeaponVariant};
use roe_core::error::Error as RoeError;
use roe_core::harness::{
    adaptation_study, evaluate, heatmap_export, read_csv_column, AdaptationReport, Checkpoint,
    EvalReport, RunConfig,
};

/// Training, evaluation, heat maps, event traces, and the adaptation study
/// for rarity-of-events reinforcement learning.
#[derive(Parser)]
#[command(name = "roe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write checkpoints, diagnostics, and event traces.
    Train(TrainArgs),
    /// Evaluate a checkpoint over fresh episodes and write a report plus
    /// heat map files.
    Eval(EvalArgs),
    /// Re-export a heat map from an evaluation report.
    Heatmap(HeatmapArgs),
    /// Print one event's mean-occurrence curve from a run's events.csv.
    Trace(TraceArgs),
    /// Compare two arena-trained checkpoints across all weapon variants.
    Adapt(AdaptArgs),
    /// List built-in scenarios, their dimensions, actions, and events.
    ListScenarios,
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration JSON; omitted keys use canonical defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Resume from a checkpoint file instead of starting fresh.
    #[arg(long, conflicts_with = "config")]
    resume: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    /// Custom scenario definition JSON (see docs/scenarios.md).
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    /// `roe` or `extrinsic_baseline`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total environment transitions to train on.
    #[arg(long)]
    steps: Option<u64>,
    /// Run directory; defaults to $ROE_OUT_ROOT/<scenario>_<mode>_seed<N>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory containing checkpoints/.
    #[arg(long)]
    run: PathBuf,
    /// `best`, `final`, or a checkpoint path.
    #[arg(long, default_value = "best")]
    checkpoint: String,
    /// Scenario to evaluate on; defaults to the run's own.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Heat map ceiling.
    #[arg(long, default_value_t = 0.025)]
    clip: f64,
    /// Output directory; defaults to <run>/eval.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the report as JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct HeatmapArgs {
    /// Evaluation report JSON.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 0.025)]
    clip: f64,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_pgm: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Run directory containing logs/events.csv.
    #[arg(long)]
    run: PathBuf,
    /// Event name, e.g. `kill_any`.
    #[arg(long)]
    event: String,
    /// Write the slice to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdaptArgs {
    /// Run directory of the intrinsically trained policy.
    #[arg(long)]
    roe_run: PathBuf,
    /// Run directory of the extrinsic baseline policy.
    #[arg(long)]
    baseline_run: PathBuf,
    /// `best`, `final`, or a checkpoint path (applies to both runs).
    #[arg(long, default_value = "best")]
    checkpoint: String,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; defaults to <roe_run>/adapt/comparison.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the comparison as JSON on stdout.
    #[arg(long)]
    json: bool,
}

fn resolve_checkpoint(run: &Path, which: &str) -> PathBuf {
    match which {
        "best" => run.join("checkpoints/best.json"),
        "final" => run.join("checkpoints/final.json"),
        other => PathBuf::from(other),
    }
}

fn run_train(args: TrainArgs) -> anyhow::Result<()> {
    if let Some(ckpt) = &args.resume {
        let artifacts = roe_core::harness::resume(ckpt)?;
        println!(
            "resumed run complete: {} updates, final checkpoint {}",
            artifacts.updates,
            artifacts.final_checkpoint.display()
        );
        return Ok(());
    }
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = &args.scenario {
        config.scenario = Scenario::parse(s)?;
    }
    if let Some(v) = &args.variant {
        config.variant = Some(WeaponVariant::parse(v)?);
    }
    if let Some(f) = &args.scenario_file {
        config.scenario_file = Some(f.clone());
    }
    if let Some(m) = &args.mode {
        config.mode = RewardMode::parse(m)?;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(steps) = args.steps {
        config.total_steps = steps;
    }
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
    match (&args.out, args.config.is_some()) {
        (Some(out), _) => config.out_dir = out.clone(),
        (None, true) => {} // keep the config file's out_dir
        (None, false) => {
            let root = std::env::var("ROE_OUT_ROOT").unwrap_or_else(|_| "runs".to_string());
            let variant = config
                .variant
                .map(|v| format!("_{}", v.name()))
                .unwrap_or_default();
            config.out_dir = PathBuf::from(root).join(format!(
                "{}{}_{}_seed{}",
                config.scenario.name(),
                variant,
                config.mode.name(),
                config.master_seed
            ));
        }
    }
    config.validate()?;
    println!("{}", config.to_json_pretty()?);
    let artifacts = roe_core::harness::train(&config)?;
    println!(
        "run complete: {} updates, artifacts in {}",
        artifacts.updates,
        artifacts.run_dir.display()
    );
    if let Some(best) = artifacts.best_checkpoint {
        println!("best checkpoint: {}", best.display());
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> anyhow::Result<()> {
    let ckpt_path = resolve_checkpoint(&args.run, &args.checkpoint);
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let scenario = match &args.scenario {
        Some(s) => Scenario::parse(s)?,
        None => ckpt.run_config.scenario,
    };
    let variant = match &args.variant {
        Some(v) => Some(WeaponVariant::parse(v)?),
        None => None,
    };
    let report = evaluate(&ckpt, scenario, variant, args.episodes, args.seed)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.run.join("eval"));
    std::fs::create_dir_all(&out_dir)?;
    report.save(&out_dir.join("report.json"))?;
    heatmap_export(
        &report,
        args.clip,
        &out_dir.join("heatmap.csv"),
        &out_dir.join("heatmap.pgm"),
    )?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "{} episodes on {}{}: mean extrinsic score {:.2} +/- {:.2}, mean length {:.0} ticks",
            report.episodes,
            scenario.name(),
            variant.map(|v| format!(" ({})", v.name())).unwrap_or_default(),
            report.mean,
            report.std,
            report.mean_episode_ticks,
        );
        println!("report written to {}", out_dir.join("report.json").display());
    }
    Ok(())
}

fn run_heatmap(args: HeatmapArgs) -> anyhow::Result<()> {
    let report = EvalReport::load(&args.report)?;
    let dir = args
        .report
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let csv = args.out_csv.unwrap_or_else(|| dir.join("heatmap.csv"));
    let pgm = args.out_pgm.unwrap_or_else(|| dir.join("heatmap.pgm"));
    heatmap_export(&report, args.clip, &csv, &pgm)?;
    println!("wrote {} and {}", csv.display(), pgm.display());
    Ok(())
}

fn run_trace(args: TraceArgs) -> anyhow::Result<()> {
    let events_csv = args.run.join("logs/events.csv");
    let column = read_csv_column(&events_csv, &args.event)?;
    let mut out = String::with_capacity(column.len() * 16);
    out.push_str(&format!("step,{}\n", args.event));
    for (step, value) in column {
        let v = value.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{step},{v}\n"));
    }
    match &args.out {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}

fn run_adapt(args: AdaptArgs) -> anyhow::Result<()> {
    let roe = Checkpoint::load(&resolve_checkpoint(&args.roe_run, &args.checkpoint))?;
    let baseline = Checkpoint::load(&resolve_checkpoint(&args.baseline_run, &args.checkpoint))?;
    let report = adaptation_study(&roe, &baseline, args.episodes, args.seed)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.roe_run.join("adapt/comparison.json"));
    report.save(&out)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_adaptation_table(&report);
        println!("comparison written to {}", out.display());
    }
    Ok(())
}

fn print_adaptation_table(report: &AdaptationReport) {
    println!(
        "{:<22} {:>18} {:>18} {:>10}",
        "variant", "roe", "baseline", "p-value"
    );
    for row in &report.rows {
        println!(
            "{:<22} {:>9.1} +/- {:<6.1} {:>9.1} +/- {:<6.1} {:>8.4}",
            format!("deathmatch_{}", row.variant.name()),
            row.roe_mean,
            row.roe_std,
            row.baseline_mean,
            row.baseline_std,
            row.p_value,
        );
    }
    println!(
        "roe mean beats baseline on {}/{} variants",
        report.roe_wins(),
        report.rows.len()
    );
}

fn run_list_scenarios() -> anyhow::Result<()> {
    println!(
        "{:<26} {:>7} {:>9} {:>8} {:>7}  events",
        "scenario", "grid", "max_ticks", "actions", "workers"
    );
    for scenario in Scenario::ALL {
        let def = build_def(scenario, None, None, None, None)?;
        let tax = scenario_taxonomy(scenario);
        let workers = if scenario == Scenario::Deathmatch { 16 } else { 4 };
        println!(
            "{:<26} {:>7} {:>9} {:>8} {:>7}  {}",
            scenario.name(),
            format!("{}x{}", def.width(), def.height()),
            def.max_ticks,
            def.action_count(),
            workers,
            tax.size(),
        );
    }
    println!("\ndeathmatch variants: chainsaw, shotgun, chaingun, plasma, rocket");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Heatmap(args) => run_heatmap(args),
        Command::Trace(args) => run_trace(args),
        Command::Adapt(args) => run_adapt(args),
        Command::ListScenarios => run_list_scenarios(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            // Bad flags or configuration exit distinctly from runtime
            // failures.
            let config_error = err
                .downcast_ref::<RoeError>()
                .map_or(false, |e| matches!(e, RoeError::Config(_)));
            if config_error {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
