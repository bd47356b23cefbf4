use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use npdif::bootstrap::BootstrapStatistic;
use npdif::harness::{run_grid, ExperimentGrid, RmseGrid};
use npdif::report::{emit_analysis, emit_report};
use npdif::simulation::{dif_scenario, DEFAULT_ITEMS};
use npdif::{analyze, curve_data, load_response_csv, AnalysisConfig, ColumnSpec, KernelKind, Method, ReferenceCoding, SupportPolicy};

#[derive(Parser)]
#[command(name = "npdif", version, about = "Nonparametric DIF detection for binary items")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test every item of a response file for DIF.
    Analyze(AnalyzeArgs),
    /// Run a Monte Carlo experiment grid.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct Common {
    /// Bandwidth exponent; repeat for several values.
    #[arg(long = "zeta")]
    zetas: Vec<f64>,
    #[arg(long)]
    kernel: Option<KernelKind>,
    /// Detection method; repeat for several.
    #[arg(long = "method")]
    methods: Vec<Method>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Support cap, or 0 for the full pairwise support.
    #[arg(long)]
    support_size: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Statistic compared in the bootstrap: raw or studentized.
    #[arg(long)]
    bootstrap_statistic: Option<BootstrapStatistic>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "npdif-out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV with a header, one group column and 0/1 item columns.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "group")]
    group_col: String,
    /// Label of the reference group (default: the larger group).
    #[arg(long)]
    reference_label: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML experiment grid.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario tag; repeat for several. Overrides the config file.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    /// Sample size; repeat for several. Overrides the config file.
    #[arg(long = "n")]
    sample_sizes: Vec<usize>,
    #[arg(long)]
    replications: Option<usize>,
    #[command(flatten)]
    common: Common,
}

/// Experiment grid as written in a TOML file. Missing keys take defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    scenarios: Option<Vec<String>>,
    sample_sizes: Option<Vec<usize>>,
    zetas: Option<Vec<f64>>,
    methods: Option<Vec<String>>,
    replications: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
    kernel: Option<KernelKind>,
    bootstrap: Option<usize>,
    bootstrap_statistic: Option<BootstrapStatistic>,
    support_size: Option<usize>,
    rmse_grid: Option<RmseGrid>,
    n_items: Option<usize>,
}

fn support_policy(size: usize) -> SupportPolicy {
    if size == 0 {
        SupportPolicy::Full
    } else {
        SupportPolicy::Cap(size)
    }
}

fn init_pool(jobs: Option<usize>) -> anyhow::Result<()> {
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let c = args.common;
    init_pool(c.jobs)?;
    let mut spec = ColumnSpec::new(args.group_col);
    if let Some(l) = args.reference_label {
        spec.reference = ReferenceCoding::Label(l);
    }
    let file = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let rm = load_response_csv(BufReader::new(file), &spec)?;
    let defaults = AnalysisConfig::default();
    let cfg = AnalysisConfig {
        zetas: if c.zetas.is_empty() { defaults.zetas } else { c.zetas },
        kernel: c.kernel.unwrap_or_default(),
        methods: if c.methods.is_empty() { defaults.methods } else { c.methods },
        alpha: c.alpha.unwrap_or(defaults.alpha),
        support: c.support_size.map_or(defaults.support, support_policy),
        bootstrap: c.bootstrap.unwrap_or(defaults.bootstrap),
        bootstrap_statistic: c.bootstrap_statistic.unwrap_or_default(),
        seed: c.seed.unwrap_or(defaults.seed),
    };
    let outcomes = analyze(&rm, &cfg)?;
    let mut curves = Vec::new();
    for &zeta in &cfg.zetas {
        curves.extend(curve_data(&rm, zeta, cfg.kernel)?);
    }
    emit_analysis(&outcomes, &curves, &c.out)?;
    let flagged = outcomes.iter().filter(|o| o.report.as_ref().is_some_and(|r| r.reject)).count();
    eprintln!("{} tests, {flagged} flagged at alpha = {}; results in {}", outcomes.len(), cfg.alpha, c.out.display());
    Ok(())
}

fn load_grid_file(path: &Path) -> anyhow::Result<GridFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let file = match &args.config {
        Some(p) => load_grid_file(p)?,
        None => GridFile::default(),
    };
    let c = args.common;
    init_pool(c.jobs)?;
    let tags = if args.scenarios.is_empty() { file.scenarios.unwrap_or_else(|| vec!["b".into()]) } else { args.scenarios };
    let n_items = file.n_items.unwrap_or(DEFAULT_ITEMS);
    let scenarios = tags
        .iter()
        .map(|t| dif_scenario(t).map(|mut s| {
            s.n_items = n_items;
            s
        }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut grid = ExperimentGrid::new(scenarios);
    if !args.sample_sizes.is_empty() {
        grid.sample_sizes = args.sample_sizes;
    } else if let Some(v) = file.sample_sizes {
        grid.sample_sizes = v;
    }
    if !c.zetas.is_empty() {
        grid.zetas = c.zetas;
    } else if let Some(v) = file.zetas {
        grid.zetas = v;
    }
    if !c.methods.is_empty() {
        grid.methods = c.methods;
    } else if let Some(v) = file.methods {
        grid.methods = v.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
    }
    if grid.methods.is_empty() {
        return Err(npdif::DifError::Config("no methods selected".into()).into());
    }
    grid.replications = args.replications.or(file.replications).unwrap_or(grid.replications);
    grid.alpha = c.alpha.or(file.alpha).unwrap_or(grid.alpha);
    grid.seed = c.seed.or(file.seed).unwrap_or(grid.seed);
    grid.kernel = c.kernel.or(file.kernel).unwrap_or(grid.kernel);
    grid.bootstrap = c.bootstrap.or(file.bootstrap).unwrap_or(grid.bootstrap);
    grid.bootstrap_statistic = c.bootstrap_statistic.or(file.bootstrap_statistic).unwrap_or_default();
    if let Some(s) = c.support_size.or(file.support_size) {
        grid.support = support_policy(s);
    }
    grid.rmse_grid = file.rmse_grid.unwrap_or_default();
    let jobs = c.jobs.unwrap_or_else(rayon::current_num_threads);
    let report = run_grid(&grid, jobs)?;
    emit_report(&report, &c.out)?;
    eprintln!("{} conditions written to {}", report.conditions.len(), c.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Simulate(s) => run_simulate(s),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<npdif::DifError>().is_some_and(|d| matches!(d, npdif::DifError::Config(_) | npdif::DifError::UnknownScenario(_) | npdif::DifError::UnknownMethod(_))) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
