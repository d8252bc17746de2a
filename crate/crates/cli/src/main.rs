//! `fedreorder`: reorder, explain, simulate and benchmark SERVICE orderings.

mod render;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fedreorder::sim::{self, Federation, SimError, SimulationResult};
use fedreorder::workload::{self, BenchError, CorpusConfig};
use fedreorder::{
    auto_plan, exhaustive_plan, greedy_plan, parse_query, serialize_query, ConfigError, CostConfig,
    FederatedQuery, Method, ParseError, ParseErrorKind, PlanError, PlanReport,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "fedreorder",
    version,
    about = "Reorder SERVICE patterns in federated SPARQL queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the query with its SERVICE patterns reordered.
    Reorder(PlanArgs),
    /// Report per-service costs, tie-breaks and the permutation table.
    Explain {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Evaluate the input, planned and optimal orders over a local federation.
    Simulate {
        #[command(flatten)]
        plan: PlanArgs,
        /// JSON manifest mapping endpoint IRIs to N-Triples files.
        #[arg(long)]
        federation: PathBuf,
        /// Abandon an ordering once an intermediate result exceeds this many solutions.
        #[arg(long)]
        max_rows: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Planning-time sweep and accuracy against the simulator on a generated corpus.
    Bench(BenchArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Query file, or `-` for stdin.
    #[arg(long = "in", default_value = "-")]
    input: String,
    /// Output file, or `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
    /// Overrides the method in --config.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    strategy: StrategyArg,
    /// JSON cost configuration; absent keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = workload::DEFAULT_CORPUS_SEED)]
    seed: u64,
    #[arg(long, default_value = "-")]
    out: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Overrides the method in --config for the timing sweep.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
    /// Largest query timed with exhaustive search (defaults to the cap).
    #[arg(long)]
    max_exhaustive: Option<usize>,
    /// Largest query timed with greedy search.
    #[arg(long, default_value_t = 12)]
    max_greedy: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long)]
    skip_timing: bool,
    #[arg(long)]
    skip_accuracy: bool,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 2)]
    min_services: usize,
    #[arg(long, default_value_t = 5)]
    max_services: usize,
    #[arg(long, default_value_t = 100)]
    min_store: usize,
    #[arg(long, default_value_t = 10_000)]
    max_store: usize,
    #[arg(long, default_value_t = 0.25)]
    literal_density: f64,
    #[arg(long, default_value_t = 0.15)]
    variable_endpoint_rate: f64,
    #[arg(long, default_value_t = 200_000)]
    max_rows: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Vc,
    Uvc,
    Wuvc,
    Jwuvc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Vc => Method::Vc,
            MethodArg::Uvc => Method::Uvc,
            MethodArg::Wuvc => Method::Wuvc,
            MethodArg::Jwuvc => Method::Jwuvc,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Exhaustive,
    Greedy,
    Auto,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Plan(#[from] PlanError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(e) if e.kind == ParseErrorKind::Syntax => 1,
            CliError::Parse(_) => 2,
            CliError::Plan(PlanError::ExhaustiveCapExceeded { .. }) => 4,
            CliError::Plan(_) => 3,
            CliError::Sim(SimError::Plan(PlanError::ExhaustiveCapExceeded { .. })) => 4,
            CliError::Sim(SimError::Plan(_)) => 3,
            CliError::Sim(_) => 5,
            CliError::Config(_) | CliError::Io { .. } | CliError::Invalid(_) => 6,
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Sim { source, .. } => CliError::Sim(source),
            BenchError::Plan { source, .. } => CliError::Plan(source),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(64)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Reorder(args) => reorder(&args),
        Command::Explain { plan, format } => explain(&plan, format),
        Command::Simulate {
            plan,
            federation,
            max_rows,
            format,
        } => simulate(&plan, &federation, max_rows, format),
        Command::Bench(args) => bench(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn read_input(input: &str) -> Result<String, CliError> {
    let io = |source| CliError::Io {
        path: input.to_owned(),
        source,
    };
    if input == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).map_err(io)?;
        Ok(text)
    } else {
        std::fs::read_to_string(input).map_err(io)
    }
}

fn write_output(out: &str, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: out.to_owned(),
        source,
    };
    if out == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(text.as_bytes()).map_err(io)?;
        stdout.flush().map_err(io)
    } else {
        std::fs::write(out, text).map_err(io)
    }
}

fn load_config(path: Option<&Path>, method: Option<MethodArg>) -> Result<CostConfig, CliError> {
    let mut config = match path {
        Some(p) => CostConfig::load(p)?,
        None => CostConfig::default(),
    };
    if let Some(m) = method {
        config.method = m.into();
    }
    Ok(config)
}

fn plan(
    query: &FederatedQuery,
    config: &CostConfig,
    strategy: StrategyArg,
) -> Result<(FederatedQuery, PlanReport), CliError> {
    let planned = match strategy {
        StrategyArg::Exhaustive => exhaustive_plan(query, config),
        StrategyArg::Greedy => greedy_plan(query, config),
        StrategyArg::Auto => auto_plan(query, config),
    };
    Ok(planned?)
}

fn prepare(
    args: &PlanArgs,
) -> Result<(FederatedQuery, CostConfig, FederatedQuery, PlanReport), CliError> {
    let config = load_config(args.config.as_deref(), args.method)?;
    let query = parse_query(&read_input(&args.input)?)?;
    let (planned, report) = plan(&query, &config, args.strategy)?;
    if args.verbose {
        eprint!("{}", render::plan_summary(&report));
    }
    Ok((query, config, planned, report))
}

fn reorder(args: &PlanArgs) -> Result<(), CliError> {
    let (_, _, planned, _) = prepare(args)?;
    write_output(&args.out, &serialize_query(&planned))
}

fn explain(args: &PlanArgs, format: Format) -> Result<(), CliError> {
    let (query, _, _, report) = prepare(args)?;
    let text = match format {
        Format::Json => {
            let mut value = serde_json::to_value(&report).expect("report serializes");
            value["input_order"] = json!(query.order());
            pretty(&value)
        }
        Format::Text => render::explain(&report),
    };
    write_output(&args.out, &text)
}

fn run_order(
    query: &FederatedQuery,
    fed: &Federation,
    max_rows: Option<usize>,
) -> Result<Value, CliError> {
    let result = sim::evaluate_sequence_bounded(query, fed, max_rows.unwrap_or(usize::MAX))?;
    Ok(order_json(&query.order(), result.as_ref()))
}

fn order_json(order: &[Vec<usize>], result: Option<&SimulationResult>) -> Value {
    match result {
        Some(r) => json!({
            "order": order,
            "completed": true,
            "total_calls": r.total_calls,
            "per_service_calls": r.per_service_calls,
            "intermediate_sizes": r.intermediate_sizes,
            "solutions": r.solutions.len(),
            "wall_time_ms": r.wall_time.as_secs_f64() * 1e3,
        }),
        None => json!({ "order": order, "completed": false }),
    }
}

fn simulate(
    args: &PlanArgs,
    manifest: &Path,
    max_rows: Option<usize>,
    format: Format,
) -> Result<(), CliError> {
    let fed = sim::load_federation(manifest)?;
    let (query, config, planned, report) = prepare(args)?;
    let input = run_order(&query, &fed, max_rows)?;
    let planner = run_order(&planned, &fed, max_rows)?;

    let optimal = if query
        .segments
        .iter()
        .all(|s| s.services.len() <= config.exhaustive_cap)
    {
        let best = sim::simulated_optimal_bounded(
            &query,
            &fed,
            config.exhaustive_cap,
            max_rows.unwrap_or(usize::MAX),
        )?;
        let ordered = query
            .with_order(&best.order)
            .expect("optimal order is a permutation");
        let mut value = run_order(&ordered, &fed, max_rows)?;
        value["orderings_evaluated"] = json!(best.orderings_evaluated);
        value["orderings_over_budget"] = json!(best.orderings_over_budget);
        Some((best, value))
    } else {
        if args.verbose {
            eprintln!("note: a segment exceeds the exhaustive cap; skipping the simulated optimum");
        }
        None
    };

    let matches = optimal
        .as_ref()
        .map(|(best, _)| best.order == report.chosen_order);
    let achieves = optimal
        .as_ref()
        .map(|(best, _)| planner["total_calls"].as_u64() == Some(best.total_calls as u64));
    let value = json!({
        "method": config.method,
        "strategy": report.strategy,
        "input": input,
        "planner": planner,
        "optimal": optimal.map(|(_, v)| v),
        "planner_matches_optimal": matches,
        "planner_achieves_optimal_calls": achieves,
    });
    let text = match format {
        Format::Json => pretty(&value),
        Format::Text => render::simulate(&value),
    };
    write_output(&args.out, &text)
}

fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref(), args.method)?;
    if args.min_services == 0 || args.min_services > args.max_services {
        return Err(CliError::Invalid(format!(
            "service range {}..={} is empty",
            args.min_services, args.max_services
        )));
    }
    if args.min_store == 0 || args.min_store > args.max_store {
        return Err(CliError::Invalid(format!(
            "store range {}..={} is empty",
            args.min_store, args.max_store
        )));
    }
    if args.max_services > config.exhaustive_cap {
        return Err(CliError::Invalid(format!(
            "max-services {} is above the exhaustive cap {}; the simulated optimum needs full enumeration",
            args.max_services, config.exhaustive_cap
        )));
    }
    let mut value = json!({ "seed": args.seed });

    if !args.skip_timing {
        let exhaustive_max = args.max_exhaustive.unwrap_or(config.exhaustive_cap);
        let sizes = 2..=args.max_greedy.max(exhaustive_max);
        if args.verbose {
            eprintln!("timing {} method, sizes {sizes:?}", config.method);
        }
        let rows =
            workload::planning_sweep(sizes, exhaustive_max, args.reps, args.seed, config.method);
        value["timing"] = render::timing_json(&rows);
    }

    if !args.skip_accuracy {
        let corpus = CorpusConfig {
            seed: args.seed,
            instances: args.instances,
            min_services: args.min_services,
            max_services: args.max_services,
            min_store: args.min_store,
            max_store: args.max_store,
            literal_density: args.literal_density,
            variable_endpoint_rate: args.variable_endpoint_rate,
            max_rows: args.max_rows,
        };
        if args.verbose {
            eprintln!("accuracy over {} instances", corpus.instances);
        }
        let report = workload::accuracy(&corpus, &config)?;
        value["corpus"] = serde_json::to_value(&corpus).expect("corpus serializes");
        value["accuracy"] = serde_json::to_value(&report).expect("report serializes");
    }

    let text = match args.format {
        Format::Json => pretty(&value),
        Format::Text => render::bench(&value),
    };
    write_output(&args.out, &text)
}

fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("json renders");
    text.push('\n');
    text
}
