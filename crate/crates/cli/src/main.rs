use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edfnet::frontier::{FrontierError, InversionMethod, WeightKind, WeightedModel};
use edfnet::harness::{self, CsvRow, ExportFormat, HarnessError};
use edfnet::simulator::{SimError, SimOptions, Simulation};
use edfnet::{Topology, TopologyError};

const SEED_ENV: &str = "EDFNET_SEED";

#[derive(Parser)]
#[command(name = "edfnet", version, about = "Lead-time profiles of acyclic EDF networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover frontier positions from a per-station workload vector.
    Solve(SolveArgs),
    /// Predict the lead-time CDF at each station from queue totals.
    Predict(PredictArgs),
    /// Free-running simulation with periodic per-station statistics.
    Simulate(SimulateArgs),
    /// Run a full conditioned experiment from a config file.
    Experiment(ExperimentArgs),
    /// Distances between columns of two exported CSVs.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Weights {
    Count,
    Work,
}

impl From<Weights> for WeightKind {
    fn from(w: Weights) -> Self {
        match w {
            Weights::Count => WeightKind::Count,
            Weights::Work => WeightKind::Work,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Bisection,
}

#[derive(Args)]
struct ModelArgs {
    /// TOML file with a `[network]` table.
    #[arg(long)]
    network: PathBuf,
    #[arg(long, value_enum, default_value = "count")]
    weights: Weights,
    /// Divide weights at each station by its traffic intensity.
    #[arg(long)]
    normalize: bool,
}

impl ModelArgs {
    fn model(&self) -> Result<WeightedModel, CliError> {
        let topo = harness::load_network(&self.network)?;
        let model = WeightedModel::new(topo, self.weights.into());
        Ok(if self.normalize { model.normalize()? } else { model })
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated right-hand side, one value per station.
    #[arg(long, value_delimiter = ',', required = true)]
    workload: Vec<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    method: Method,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated queue totals, one per station.
    #[arg(long, value_delimiter = ',', required = true)]
    queues: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    /// Upper end of the grid; defaults to the largest lead-time support.
    #[arg(long)]
    to: Option<f64>,
    #[arg(long, default_value_t = 101)]
    points: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    horizon: f64,
    /// Reporting period in simulated time.
    #[arg(long, default_value_t = 1000.0)]
    interval: f64,
    #[arg(long)]
    preemptive: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's seed list.
    #[arg(long, env = SEED_ENV, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Column {
    EmpMin,
    EmpMean,
    EmpMax,
    Theory,
}

impl Column {
    fn pick(self, r: &CsvRow) -> f64 {
        match self {
            Column::EmpMin => r.emp_min,
            Column::EmpMean => r.emp_mean,
            Column::EmpMax => r.emp_max,
            Column::Theory => r.theory,
        }
    }
}

#[derive(Args)]
struct CompareArgs {
    left: PathBuf,
    right: PathBuf,
    #[arg(long, value_enum, default_value = "emp-mean")]
    left_column: Column,
    #[arg(long, value_enum, default_value = "emp-mean")]
    right_column: Column,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Partial(String),
    Failed(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Parse { .. }
            | HarnessError::Validation(_)
            | HarnessError::Topology(_)
            | HarnessError::GridMismatch { .. } => CliError::Invalid(e.to_string()),
            HarnessError::Frontier(f) => f.into(),
            HarnessError::HorizonExhausted => CliError::Partial(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<FrontierError> for CliError {
    fn from(e: FrontierError) -> Self {
        match e {
            FrontierError::NegativeWorkload { .. } | FrontierError::Topology(_) => CliError::Invalid(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::EventCapExceeded(_) => CliError::Failed(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<TopologyError> for CliError {
    fn from(e: TopologyError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn check_len(what: &str, got: usize, topo: &Topology) -> Result<(), CliError> {
    if got != topo.num_stations() {
        return Err(CliError::Invalid(format!(
            "{what}: expected {} values, got {got}",
            topo.num_stations()
        )));
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<bool, CliError> {
    let model = args.model.model()?;
    check_len("--workload", args.workload.len(), model.topology())?;
    let method = match args.method {
        Method::Exact => InversionMethod::Exact,
        Method::Bisection => InversionMethod::Bisection,
    };
    let sol = model.invert_with(&args.workload, method)?;
    println!("{}", serde_json::to_string_pretty(&sol).expect("serializable"));
    Ok(true)
}

fn predict(args: PredictArgs) -> Result<bool, CliError> {
    let model = args.model.model()?;
    let topo = model.topology();
    check_len("--queues", args.queues.len(), topo)?;
    let to = args
        .to
        .unwrap_or_else(|| model.supports().iter().copied().fold(f64::NEG_INFINITY, f64::max));
    if args.points < 2 || to.is_nan() || to <= args.from {
        return Err(CliError::Invalid("grid needs --to > --from and at least 2 points".into()));
    }
    let grid = harness::GridSpec::Linspace {
        start: args.from,
        stop: to,
        points: args.points,
    }
    .points();
    let sol = model.invert(&args.queues)?;
    eprintln!("frontiers {:?} permutation {:?}", sol.frontiers, sol.permutation);
    println!("station,y,theory");
    for j in 1..=topo.num_stations() {
        for &y in &grid {
            println!("{j},{y},{}", model.predicted_cdf(&sol.frontiers, j, y));
        }
    }
    Ok(true)
}

fn simulate(args: SimulateArgs) -> Result<bool, CliError> {
    if !(args.horizon > 0.0 && args.interval > 0.0) {
        return Err(CliError::Invalid("--horizon and --interval must be positive".into()));
    }
    let topo = harness::load_network(&args.network)?;
    let stations = topo.num_stations();
    let mut sim = Simulation::from_topology(
        topo,
        SimOptions {
            seed: args.seed,
            preemptive: args.preemptive,
            ..SimOptions::default()
        },
    );
    println!("time,station,queue,workload,frontier,behind");
    let mut t = 0.0;
    while t < args.horizon {
        t = (t + args.interval).min(args.horizon);
        sim.run_until(t)?;
        for j in 1..=stations {
            let b = sim.behind_frontier_stats(j);
            println!(
                "{t},{j},{},{},{},{}",
                sim.queue_length(j),
                sim.workload(j),
                sim.frontier(j),
                b.count_behind
            );
        }
    }
    for j in 1..=stations {
        let avg = sim.behind_averages(j);
        eprintln!(
            "station {j}: utilization {:.4}, mean queue {:.3}, fraction behind {:.4}",
            sim.utilization(j),
            avg.mean_queue,
            avg.fraction_behind
        );
    }
    Ok(true)
}

fn write(path: &Path, report: &harness::ProfileReport, format: ExportFormat) -> Result<(), CliError> {
    harness::export_report(report, path, format)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<bool, CliError> {
    let mut cfg = harness::load_config(&args.config)?;
    if !args.seed.is_empty() {
        cfg.experiment.seeds = args.seed;
    }
    let csv = args.csv.or(cfg.output.csv.clone());
    let json = args.report.or(cfg.output.report.clone());

    let started = std::time::Instant::now();
    let report = harness::run_experiment(&cfg)?;
    eprintln!("finished in {:.2?}", started.elapsed());

    match (&csv, &json) {
        (None, None) => print!("{}", report.to_csv()),
        _ => {
            if let Some(p) = &csv {
                write(p, &report, ExportFormat::Csv)?;
            }
            if let Some(p) = &json {
                write(p, &report, ExportFormat::Json)?;
            }
        }
    }
    for s in &report.stations {
        eprintln!(
            "station {}: sup {:.4}, L1 {:.4}, fraction behind {:.4}",
            s.station, s.sup_distance, s.l1_distance, s.behind.fraction_behind
        );
    }
    if report.partial {
        eprintln!(
            "partial: {} of {} snapshots collected",
            report.metadata.pooled_snapshots,
            cfg.experiment.snapshots * cfg.experiment.seeds.len()
        );
    }
    Ok(!report.partial)
}

fn read_rows(path: &Path) -> Result<Vec<CsvRow>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    Ok(harness::parse_csv(&text, &path.display().to_string())?.0)
}

fn compare(args: CompareArgs) -> Result<bool, CliError> {
    let left = read_rows(&args.left)?;
    let right = read_rows(&args.right)?;
    if left.len() != right.len()
        || left.iter().zip(&right).any(|(a, b)| a.station != b.station || a.y != b.y)
    {
        return Err(CliError::Invalid("the two files do not share a grid".into()));
    }
    let mut stations: Vec<usize> = left.iter().map(|r| r.station).collect();
    stations.dedup();
    println!("station,sup_distance,l1_distance");
    for j in stations {
        let pick = |rows: &[CsvRow], col: Column| -> Vec<f64> {
            rows.iter().filter(|r| r.station == j).map(|r| col.pick(r)).collect()
        };
        let grid: Vec<f64> = left.iter().filter(|r| r.station == j).map(|r| r.y).collect();
        let d = harness::compare_profiles(&pick(&left, args.left_column), &pick(&right, args.right_column), &grid)?;
        println!("{j},{},{}", d.sup_distance, d.l1_distance);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Predict(a) => predict(a),
        Command::Simulate(a) => simulate(a),
        Command::Experiment(a) => experiment(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Partial(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
