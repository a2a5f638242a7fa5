//! Single-binary CLI over the library: generation, correlation graphs,
//! prediction, budgeted selection, and full evaluation sweeps.
//!
//! Every run is fully determined by flags + input files + an explicit seed;
//! reruns produce byte-identical outputs.
//!
//! Exit codes: 0 ok, 1 usage error, 2 data error, 3 internal error.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use blindspot::correlation::{build_graph, CorrelationGraph, CorrelationMetric};
use blindspot::evaluation::{
    run_experiment, save_curves_csv, save_overage_csv, worst_case_overage, ExperimentSpec,
    OVERAGE_BASELINES,
};
use blindspot::model::{mask_random, KnownMask, PoiId, Scenario};
use blindspot::prediction::{predict, Predictor, ThresholdMode};
use blindspot::scenario::{self, GeneratorConfig};
use blindspot::selection::{
    coverage_objective, dynamic_greedy, exhaustive_oracle, load_metadata, random_selection,
    static_greedy, CreditStrategy, SelectionProblem,
};
use blindspot::Error;

#[derive(Parser)]
#[command(name = "blindspot", version, about = "POI availability extrapolation and query planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cluster-correlated scenario trace
    Generate(GenerateArgs),
    /// Build a thresholded correlation graph from a trace
    Correlate(CorrelateArgs),
    /// Predict the unknown POI states of one cycle
    Predict(PredictArgs),
    /// Select a budget-feasible query set from a correlation graph
    Select(SelectArgs),
    /// Run a full evaluation sweep and write result curves + overage
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator config JSON (seed lives here)
    #[arg(long)]
    config: PathBuf,
    /// Output trace CSV (poi_id,cycle,state)
    #[arg(long)]
    out: PathBuf,
    /// Optional metadata CSV (poi_id,cost,value)
    #[arg(long)]
    meta_out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum MetricArg {
    /// Binary agreement score (1 - mean XOR)
    Kt,
    /// Conditional change-agreement, restricted numerator
    Change,
    /// Conditional change-agreement, literal count ratio (can exceed 1)
    ChangeLiteral,
}

impl From<MetricArg> for CorrelationMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Kt => CorrelationMetric::KendallTau,
            MetricArg::Change => CorrelationMetric::ChangeCorrelation,
            MetricArg::ChangeLiteral => CorrelationMetric::ChangeCorrelationLiteral,
        }
    }
}

#[derive(Args)]
struct CorrelateArgs {
    /// Input trace CSV
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Minimum edge weight retained
    #[arg(long)]
    threshold: f64,
    /// Last history cycle used for the weights
    #[arg(long)]
    horizon: usize,
    /// Output graph CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum PredictorArg {
    Random,
    Last,
    Majority,
    Bestproxy,
    Hybrid,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("known_source").required(true)))]
struct PredictArgs {
    /// Input trace CSV (ground truth for the known states)
    #[arg(long)]
    trace: PathBuf,
    /// Cycle to predict (must have history, i.e. >= 2 for the history-based predictors)
    #[arg(long)]
    cycle: usize,
    #[arg(long, value_enum)]
    predictor: PredictorArg,
    /// Hybrid switching threshold (default 0.5)
    #[arg(long, conflicts_with = "adaptive")]
    threshold: Option<f64>,
    /// Derive the hybrid threshold from the known states each run
    #[arg(long)]
    adaptive: bool,
    /// Known fraction; a uniform random known set is drawn with --seed
    #[arg(long, group = "known_source")]
    known: Option<f64>,
    /// CSV of known POI labels (header poi_id, one label per row)
    #[arg(long, group = "known_source")]
    known_file: Option<PathBuf>,
    /// RNG seed for the mask draw and the random predictor
    #[arg(long)]
    seed: u64,
    /// Output prediction CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, ValueEnum)]
enum AlgorithmArg {
    Static,
    Dynamic,
    Random,
    Oracle,
}

#[derive(Copy, Clone, ValueEnum)]
enum StrategyArg {
    /// Credit each uncovered neighbor to its single best predictor
    Max,
    /// Credit every in-edge margin
    Sum,
}

#[derive(Args)]
struct SelectArgs {
    /// Correlation graph CSV
    #[arg(long)]
    graph: PathBuf,
    /// Metadata CSV (poi_id,cost,value)
    #[arg(long)]
    meta: PathBuf,
    /// Query budget (total cost bound)
    #[arg(long)]
    budget: f64,
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    #[arg(long, value_enum, default_value = "max")]
    strategy: StrategyArg,
    /// RNG seed; required by --algorithm random
    #[arg(long)]
    seed: Option<u64>,
    /// Output selection CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Input trace CSV
    #[arg(long)]
    trace: PathBuf,
    /// Experiment spec JSON
    #[arg(long)]
    spec: PathBuf,
    /// Directory for results.csv and overage.csv
    #[arg(long)]
    out_dir: PathBuf,
}

fn load_known_file(path: &Path, scenario: &Scenario) -> Result<BTreeSet<PoiId>, Error> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut known = BTreeSet::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let label = line.trim();
        if label.is_empty() || (lineno == 1 && label == "poi_id") {
            continue;
        }
        let id = scenario
            .id_of(label)
            .ok_or_else(|| Error::parse(path, lineno, format!("unknown poi `{label}`")))?;
        known.insert(id);
    }
    if known.is_empty() {
        return Err(Error::parse(path, 1, "no known POIs listed"));
    }
    Ok(known)
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Error> {
    let config = GeneratorConfig::load_json(&args.config)?;
    let scenario = scenario::generate(&config)?;
    scenario::save_csv(&scenario, &args.out)?;
    if let Some(meta) = &args.meta_out {
        scenario::save_metadata_csv(&scenario, meta)?;
    }
    Ok(())
}

fn cmd_correlate(args: &CorrelateArgs) -> Result<(), Error> {
    let scenario = scenario::load_csv(&args.trace, None)?;
    let graph = build_graph(&scenario, args.horizon, args.metric.into(), args.threshold)?;
    graph.save_csv(&args.out)
}

fn cmd_predict(args: &PredictArgs) -> Result<(), Error> {
    let scenario = scenario::load_csv(&args.trace, None)?;
    let known = match (&args.known, &args.known_file) {
        (Some(fraction), None) => mask_random(&scenario, args.cycle, *fraction, args.seed)?.known,
        (None, Some(path)) => {
            scenario.check_cycle(args.cycle)?;
            load_known_file(path, &scenario)?
        }
        _ => unreachable!("clap group enforces exactly one source"),
    };
    let predictor = match args.predictor {
        PredictorArg::Random => Predictor::Random { seed: args.seed },
        PredictorArg::Last => Predictor::LastKnownState,
        PredictorArg::Majority => Predictor::Majority,
        PredictorArg::Bestproxy => Predictor::BestProxyKt,
        PredictorArg::Hybrid => {
            if args.adaptive {
                Predictor::Hybrid {
                    threshold: ThresholdMode::Adaptive,
                }
            } else {
                Predictor::hybrid_fixed(args.threshold.unwrap_or(0.5))?
            }
        }
    };
    let mask = KnownMask {
        cycle: args.cycle,
        known: known.clone(),
    };
    let known_states = known
        .iter()
        .map(|&id| (id, scenario.state(id, args.cycle)))
        .collect();
    let result = predict(&predictor, &scenario, &mask, &known_states)?;
    result.save_csv(&scenario, &args.out)
}

fn cmd_select(args: &SelectArgs) -> Result<(), Error> {
    let graph = CorrelationGraph::load_csv(&args.graph)?;
    let meta = load_metadata(&args.meta)?;
    let mut costs = Vec::with_capacity(graph.n());
    let mut values = Vec::with_capacity(graph.n());
    for label in graph.labels() {
        let &(cost, value) = meta.get(label).ok_or_else(|| {
            Error::InvalidProblem(format!("graph node `{label}` missing from metadata"))
        })?;
        costs.push(cost);
        values.push(value);
    }
    let problem = SelectionProblem::new(graph, costs, values, args.budget)?;
    let strategy = match args.strategy {
        StrategyArg::Max => CreditStrategy::MaxPredictor,
        StrategyArg::Sum => CreditStrategy::FullSum,
    };
    let result = match args.algorithm {
        AlgorithmArg::Static => static_greedy(&problem, strategy),
        AlgorithmArg::Dynamic => dynamic_greedy(&problem, strategy),
        AlgorithmArg::Random => {
            let seed = args.seed.ok_or_else(|| {
                Error::InvalidConfig("--algorithm random requires --seed".into())
            })?;
            random_selection(&problem, seed)
        }
        AlgorithmArg::Oracle => {
            exhaustive_oracle(&problem, |subset| coverage_objective(&problem, subset))?
        }
    };
    result.save_csv(&problem, &args.out)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let scenario = scenario::load_csv(&args.trace, None)?;
    let spec = ExperimentSpec::load_json(&args.spec)?;
    let curves = run_experiment(&scenario, &spec)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    save_curves_csv(&curves, &args.out_dir.join("results.csv"))?;
    let present: BTreeSet<&str> = curves.iter().map(|c| c.algorithm.as_str()).collect();
    let baselines: Vec<&str> = OVERAGE_BASELINES
        .iter()
        .copied()
        .filter(|b| present.contains(b))
        .collect();
    if !baselines.is_empty() {
        let report = worst_case_overage(&curves, &baselines)?;
        save_overage_csv(&report, &args.out_dir.join("overage.csv"))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Correlate(args) => cmd_correlate(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Select(args) => cmd_select(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        // malformed requests, not malformed data
        Error::InvalidConfig(_) | Error::InvalidFraction(_) => 1,
        Error::Json(_) => 2,
        Error::Io { .. } | Error::Parse { .. } => 2,
        // everything else reaching the CLI means inconsistent input data
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap handles --help/--version via this path with success status
            if err.exit_code() == 0 {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
