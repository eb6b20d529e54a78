//! The `mcopi` command-line front end.
//!
//! Every subcommand writes its main artifact to `--out FILE` (atomically) or
//! to stdout, and short human-readable notes to stderr. Failures end with a
//! single stderr line of the form
//! `error: code=<n> kind=<usage|validation|runtime> message="<text>"`.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 runtime
//! error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aggregation::{
    load_clusters, run_opi_aggregated, validate_clusters, AggregationError, ClusterMap,
    DEFAULT_VALUE_TOLERANCE,
};
use crate::experiments::{
    default_experiment1_graph, default_experiment2_graph, generate_experiment_mdp,
    run_comparison, BaseGraph, ExperimentError, ExperimentKind, GeneratorSpec,
    DEFAULT_ITERATION_CAP,
};
use crate::mdp::{analyze, ClassTag, InitialDistribution, Mdp, MdpDocument, MdpError};
use crate::opi::{
    estimator_diagnostics, run_opi, OpiConfig, OpiError, ScheduleMode, StepFamily, StepSchedule,
    UpdateMode,
};
use crate::output::write_atomic;
use crate::rng::stream_rng;
use crate::solvers::{policy_iteration, Policy, SolverError};
use crate::variants::{
    load_game, negamin_transform, run_opi_game, run_opi_ssp, solve_game_exact, validate_ssp,
    Player, VariantError,
};

#[derive(Debug, Parser)]
#[command(
    name = "mcopi",
    version,
    about = "Monte Carlo optimistic policy iteration for finite MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the structural conditions; exit 0 iff all hold.
    Validate { mdp: PathBuf },
    /// Exact optimal values, a greedy policy and the optimal action sets as JSON.
    Solve {
        mdp: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run OPI on a discounted MDP.
    Opi {
        mdp: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run OPI on a stochastic shortest path problem.
    Ssp {
        mdp: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve an alternating game exactly and by OPI on its negamin form.
    Game {
        game: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run OPI with one shared value per cluster.
    Aggregate {
        mdp: PathBuf,
        /// Cluster file `{"clusters": [[ids...], ...]}`.
        #[arg(long)]
        clusters: PathBuf,
        /// Skip the oracle check that cluster members share an optimal value.
        #[arg(long)]
        skip_value_check: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare trajectory-wide and start-state-only updates.
    Experiment(ExperimentArgs),
    /// Per-state statistics of the first-visit estimator for a fixed policy.
    Diagnose {
        mdp: PathBuf,
        /// JSON array of actions, or any object with a "policy" array (such
        /// as the output of `solve`).
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        bias: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Trajectory,
    FirstState,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Visit,
    Time,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GenArg {
    Exp1,
    Exp2,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    /// Step sizes indexed by per-state update count (visit) or by iteration (time).
    #[arg(long, value_enum, default_value = "visit")]
    schedule: ScheduleArg,
    /// Step family: harmonic:C or power:C,R.
    #[arg(long, default_value = "harmonic:1")]
    beta: StepFamily,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truncation bias bound for discounted trajectories.
    #[arg(long, default_value_t = 1e-4)]
    bias: f64,
}

impl ScheduleArgs {
    fn schedule(&self) -> StepSchedule {
        let mode = match self.schedule {
            ScheduleArg::Visit => ScheduleMode::VisitBased,
            ScheduleArg::Time => ScheduleMode::TimeBased,
        };
        StepSchedule {
            mode,
            family: self.beta,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "trajectory")]
    mode: ModeArg,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    /// Write `t,state,value` snapshots here.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Snapshot every this many iterations.
    #[arg(long, default_value_t = 10)]
    history_stride: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> OpiConfig {
        OpiConfig {
            update_mode: match self.mode {
                ModeArg::Trajectory => UpdateMode::TrajectoryUpdate,
                ModeArg::FirstState => UpdateMode::FirstStateOnly,
            },
            schedule: self.schedule.schedule(),
            seed: self.schedule.seed,
            stream: 0,
            truncation_bias: self.schedule.bias,
            max_iterations: self.iters,
            stop_at_optimal: false,
            history_stride: self.history.as_ref().map(|_| self.history_stride),
        }
    }
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").args(["graph", "random"])))]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    gen: GenArg,
    /// Base graph file `{"num_states", "edges", "rewards"}`; defaults to the
    /// built-in graph for the chosen experiment.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Random base graph: N,D,SEED (states, maximum out-degree, seed).
    #[arg(long)]
    random: Option<String>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Per-trial iteration cap; trials still suboptimal there are censored.
    #[arg(long, default_value_t = DEFAULT_ITERATION_CAP)]
    iters: usize,
    /// Comparison CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Histogram CSV.
    #[arg(long)]
    hist: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn report(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Validation(m) => ("validation", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        format!("error: code={} kind={kind} message={message:?}", self.code())
    }
}

impl From<MdpError> for CliError {
    fn from(e: MdpError) -> Self {
        match e {
            MdpError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::StructureViolation(_) | SolverError::InvalidPolicy(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<OpiError> for CliError {
    fn from(e: OpiError) -> Self {
        match e {
            OpiError::InvalidConfig(_) | OpiError::Schedule(_) => CliError::Usage(e.to_string()),
            OpiError::Solver(s) => s.into(),
            OpiError::HorizonWithoutAbsorption { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<VariantError> for CliError {
    fn from(e: VariantError) -> Self {
        match e {
            VariantError::Ssp(_) | VariantError::Game(_) => CliError::Validation(e.to_string()),
            VariantError::Mdp(m) => m.into(),
            VariantError::Solver(s) => s.into(),
            VariantError::Opi(o) => o.into(),
            VariantError::RouteDisagreement { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<AggregationError> for CliError {
    fn from(e: AggregationError) -> Self {
        match e {
            AggregationError::Clusters(_) => CliError::Validation(e.to_string()),
            AggregationError::Mdp(m) => m.into(),
            AggregationError::Solver(s) => s.into(),
            AggregationError::Opi(o) => o.into(),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Graph(_) => CliError::Validation(e.to_string()),
            ExperimentError::Mdp(m) => m.into(),
            ExperimentError::Solver(s) => s.into(),
            ExperimentError::Opi(o) => o.into(),
            ExperimentError::Runtime(_) => CliError::Runtime(e.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            let err = CliError::Usage(e.kind().to_string());
            eprintln!("{}", err.report());
            return err.code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{}", err.report());
            err.code()
        }
    }
}

/// Writes to `path` atomically, or prints to stdout.
fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents.as_bytes())
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    emit(Some(path), contents)
}

/// Loads a discounted or SSP model; game files go through `game`.
fn load_model(path: &Path) -> Result<(Mdp, InitialDistribution), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| MdpError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let doc = MdpDocument::parse(&text)?;
    if doc.problem_class == ClassTag::Game {
        return Err(CliError::Usage(format!(
            "{} is a game file; use the `game` subcommand",
            path.display()
        )));
    }
    Ok(doc.to_model()?)
}

fn require_structure(mdp: &Mdp, p: &InitialDistribution) -> Result<(), CliError> {
    let report = analyze(mdp, p);
    if report.all_ok() {
        Ok(())
    } else {
        eprint!("{}", report.summary());
        Err(CliError::Validation("structural conditions violated".into()))
    }
}

/// `state,value,jstar,abs_error` followed by the run summary row.
fn run_table(values: &[f64], jstar: &[f64]) -> String {
    let mut out = String::from("state,value,jstar,abs_error\n");
    for (i, (v, j)) in values.iter().zip(jstar).enumerate() {
        let _ = writeln!(out, "{i},{v:e},{j:e},{:e}", (v - j).abs());
    }
    out
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Validate { mdp } => {
            let (mdp, p) = match load_model(&mdp) {
                Err(CliError::Usage(_)) => {
                    let (game, p) = load_game(&mdp)?;
                    (game.mdp().clone(), p)
                }
                other => other?,
            };
            let report = analyze(&mdp, &p);
            print!("{}", report.summary());
            if report.all_ok() {
                Ok(0)
            } else {
                Err(CliError::Validation("structural conditions violated".into()))
            }
        }
        Command::Solve { mdp, out } => {
            let (mdp, _) = load_model(&mdp)?;
            let solution = policy_iteration(&mdp)?;
            emit(out.as_deref(), &(solution.to_json() + "\n"))?;
            Ok(0)
        }
        Command::Opi { mdp, run } => {
            let (mdp, p) = load_model(&mdp)?;
            if !mdp.problem_class().is_discounted() {
                return Err(CliError::Usage("`opi` needs a discounted MDP; use `ssp`".into()));
            }
            require_structure(&mdp, &p)?;
            let oracle = policy_iteration(&mdp)?;
            let config = run.config();
            let result = run_opi(&mdp, &p, &config, &oracle)?;
            finish_run(&run, &config, &result, &oracle.values)
        }
        Command::Ssp { mdp, run } => {
            let (mdp, p) = load_model(&mdp)?;
            let report = analyze(&mdp, &p);
            validate_ssp(&mdp, &report).map_err(VariantError::Ssp)?;
            require_structure(&mdp, &p)?;
            let oracle = policy_iteration(&mdp)?;
            let config = run.config();
            let result = run_opi_ssp(&mdp, &p, &config, &oracle)?;
            finish_run(&run, &config, &result, &oracle.values)
        }
        Command::Game { game, run } => {
            let (game, p) = load_game(&game)?;
            require_structure(game.mdp(), &p)?;
            let jstar = solve_game_exact(&game)?;
            let negamin = negamin_transform(&game);
            let oracle = policy_iteration(&negamin.mdp)?;
            let config = run.config();
            let result = run_opi_game(&game, &p, &config, &oracle)?;
            let mut table = String::from("state,player,j_prime,j_star,opi_j_prime,opi_j_star\n");
            for i in 0..game.num_states() {
                let player = match game.player(i) {
                    Player::One => "1",
                    Player::Two => "2",
                    Player::Terminal => "0",
                };
                let _ = writeln!(
                    table,
                    "{i},{player},{:e},{:e},{:e},{:e}",
                    oracle.values[i], jstar[i], result.run.values[i], result.recovered[i]
                );
            }
            emit(run.out.as_deref(), &table)?;
            if let Some(h) = &run.history {
                write_file(h, &result.run.history_csv())?;
            }
            eprintln!(
                "{}\n{}",
                crate::opi::RunResult::CSV_HEADER,
                result.run.csv_row(0, &config)
            );
            eprintln!("recovered sup error {:e}", result.recovered_error);
            Ok(0)
        }
        Command::Aggregate {
            mdp,
            clusters,
            skip_value_check,
            run,
        } => {
            let (mdp, p) = load_model(&mdp)?;
            require_structure(&mdp, &p)?;
            let report = analyze(&mdp, &p);
            let map = ClusterMap::new(&mdp, &report, load_clusters(&clusters)?)
                .map_err(|v| AggregationError::Clusters(vec![v]))?;
            let oracle = policy_iteration(&mdp)?;
            if !skip_value_check {
                validate_clusters(
                    &mdp,
                    &map,
                    &report,
                    Some(&oracle.values),
                    DEFAULT_VALUE_TOLERANCE,
                )
                .map_err(AggregationError::Clusters)?;
            }
            let config = run.config();
            let result = run_opi_aggregated(&mdp, &p, &map, &config, &oracle)?;
            emit(run.out.as_deref(), &result.to_csv())?;
            if let Some(h) = &run.history {
                write_file(h, &result.run.history_csv())?;
            }
            eprintln!(
                "{}\n{}",
                crate::opi::RunResult::CSV_HEADER,
                result.run.csv_row(0, &config)
            );
            Ok(0)
        }
        Command::Experiment(args) => experiment(args),
        Command::Diagnose {
            mdp,
            policy,
            samples,
            seed,
            bias,
            out,
        } => {
            let (mdp, p) = load_model(&mdp)?;
            require_structure(&mdp, &p)?;
            let policy = load_policy(&policy)?;
            policy.validate(&mdp)?;
            if samples == 0 {
                return Err(CliError::Usage("--samples must be positive".into()));
            }
            let mut rng = stream_rng(seed, 0);
            let d = estimator_diagnostics(&mdp, &policy, &p, samples, &mut rng, bias)?;
            emit(out.as_deref(), &d.to_csv())?;
            Ok(0)
        }
    }
}

fn finish_run(
    run: &RunArgs,
    config: &OpiConfig,
    result: &crate::opi::RunResult,
    jstar: &[f64],
) -> Result<i32, CliError> {
    let mut text = format!("{}\n{}\n", crate::opi::RunResult::CSV_HEADER, result.csv_row(0, config));
    emit(run.out.as_deref(), &text)?;
    if let Some(h) = &run.history {
        write_file(h, &result.history_csv())?;
    }
    text = run_table(&result.values, jstar);
    eprint!("{text}");
    Ok(0)
}

fn load_policy(path: &Path) -> Result<Policy, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| MdpError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| MdpError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let array = match &value {
        serde_json::Value::Object(o) => o.get("policy").cloned(),
        serde_json::Value::Array(_) => Some(value.clone()),
        _ => None,
    }
    .ok_or_else(|| MdpError::Schema {
        field: "policy".into(),
        message: "expected an array of actions or an object with a \"policy\" array".into(),
    })?;
    let actions: Vec<usize> = serde_json::from_value(array).map_err(|e| MdpError::Schema {
        field: "policy".into(),
        message: e.to_string(),
    })?;
    Ok(Policy(actions))
}

fn parse_random(spec: &str) -> Result<(usize, usize, u64), CliError> {
    let usage = || CliError::Usage(format!("--random expects N,D,SEED, got {spec:?}"));
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let [n, d, seed] = parts[..] else {
        return Err(usage());
    };
    let n: usize = n.parse().map_err(|_| usage())?;
    let d: usize = d.parse().map_err(|_| usage())?;
    let seed: u64 = seed.parse().map_err(|_| usage())?;
    if n < 2 || d < 1 {
        return Err(CliError::Usage("--random needs N ≥ 2 and D ≥ 1".into()));
    }
    Ok((n, d, seed))
}

fn experiment(args: ExperimentArgs) -> Result<i32, CliError> {
    let kind = match args.gen {
        GenArg::Exp1 => ExperimentKind::Experiment1,
        GenArg::Exp2 => ExperimentKind::Experiment2,
    };
    let graph = match (&args.graph, &args.random) {
        (Some(path), _) => BaseGraph::load(path)?,
        (None, Some(spec)) => {
            let (n, d, seed) = parse_random(spec)?;
            BaseGraph::random(n, d, seed)
        }
        (None, None) => match kind {
            ExperimentKind::Experiment1 => default_experiment1_graph(),
            ExperimentKind::Experiment2 => default_experiment2_graph(),
        },
    };
    let generated = generate_experiment_mdp(&GeneratorSpec::new(kind, graph))?;
    let config = OpiConfig {
        schedule: args.schedule.schedule(),
        seed: args.schedule.seed,
        truncation_bias: args.schedule.bias,
        max_iterations: args.iters,
        ..OpiConfig::default()
    };
    let result = run_comparison(&generated.mdp, &generated.initial, args.trials, &config)?;
    emit(args.out.as_deref(), &result.to_csv())?;
    if let Some(h) = &args.hist {
        write_file(h, &result.histogram_csv())?;
    }
    eprint!("{}", result.summary_text());
    if generated.cost_shift != 0.0 {
        eprintln!("costs shifted by {}", generated.cost_shift);
    }
    Ok(0)
}
