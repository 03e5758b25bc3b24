use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use lsimab_cli::plot::{default_columns, render_plot};
use lsimab_cli::preset::PRESET_NAMES;
use lsimab_cli::{run_preset_with, Overrides, Setting};

/// Run multi-agent bandit experiments and write CSV summaries and SVG plots.
#[derive(Parser, Debug)]
#[command(name = "lsimab", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a summary CSV as an SVG line plot.
    Plot(PlotArgs),
    /// List the named presets.
    Presets,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Named experiment preset.
    #[arg(long)]
    preset: Option<String>,
    /// Flat `key = value` file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Agent counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    agents: Option<Vec<usize>>,
    /// Number of arms (staircase means).
    #[arg(long)]
    arms: Option<usize>,
    /// Horizons, comma separated.
    #[arg(long, value_delimiter = ',')]
    horizon: Option<Vec<u64>>,
    #[arg(long)]
    balance_threshold: Option<f64>,
    /// balanced, imbalanced, random or paired.
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Dump a per-pull JSON-lines trace of the first replication per grid point.
    #[arg(long)]
    trace: bool,
    /// Leave an agent's own broadcasts out of its cost.
    #[arg(long)]
    exclude_own_shares: bool,
    /// Skip the default SVG plot.
    #[arg(long)]
    no_plot: bool,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Summary CSV to read.
    csv: PathBuf,
    /// Column for the x axis.
    #[arg(long, default_value = "M")]
    x: String,
    /// Columns to draw, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    y: Vec<String>,
    /// Output SVG path.
    #[arg(long, short)]
    output: PathBuf,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.preset.clone(),
            setting: self.setting,
            agents: self.agents.clone(),
            arms: self.arms,
            horizon: self.horizon.clone(),
            balance_threshold: self.balance_threshold,
            replications: self.replications,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            trace: self.trace.then_some(true),
            exclude_own_shares: self.exclude_own_shares.then_some(true),
        }
    }
}

fn run(args: &RunArgs) -> anyhow::Result<()> {
    let base = match &args.config {
        Some(path) => Overrides::from_file(path)?,
        None => Overrides::default(),
    };
    let (preset, dir) = base.merged(args.overrides()).resolve()?;
    eprintln!(
        "{}: {} grid point(s), {} replication(s) each",
        preset.name,
        preset.grid().len(),
        preset.replications
    );
    let out = run_preset_with(&preset, &dir, |p| {
        eprintln!(
            "  M={} T={} overall={:.3} avg={:.4} ucb={:.3}",
            p.agents, p.horizon, p.overall_regret_mean, p.avg_individual_regret_mean, p.ucb_regret_mean
        );
    })?;
    println!("{}", out.summary_csv.display());
    println!("{}", out.runs_csv.display());
    if !args.no_plot {
        let (x, ys) = default_columns(&preset.name);
        let svg = out.summary_csv.with_extension("svg");
        render_plot(&out.summary_csv, x, &ys, &svg)
            .with_context(|| format!("plotting {}", out.summary_csv.display()))?;
        println!("{}", svg.display());
    }
    Ok(())
}

fn plot(args: &PlotArgs) -> anyhow::Result<()> {
    let ys: Vec<&str> = args.y.iter().map(String::as_str).collect();
    render_plot(&args.csv, &args.x, &ys, &args.output)?;
    println!("{}", args.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::Plot(args)) => plot(args),
        Some(Command::Presets) => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        None => run(&cli.run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
