//! Command-line surface: nine subcommands over the library, strict TOML
//! configuration, provenance headers on every artifact, and native SVG
//! plots.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime
//! failure, 4 failed bound verification.

pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::bounds;
use crate::clustering::match_labels;
use crate::harness::{
    self, scaling_fit, success_rate, sweep_csv, threshold_csv, Algorithm, SweepRow, ThresholdResult,
    ThresholdRow, TrialResult,
};
use crate::maxsense;
use crate::model::{self, ModelParams};
use crate::pairwise::{self, PairMode};
use crate::rng;
use config::{ConfigError, RunConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_BOUNDS: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    BoundsFailed,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::BoundsFailed => write!(f, "bound verification failed"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::BoundsFailed => EXIT_BOUNDS,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Runtime(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "ldp-lab",
    version,
    about = "Locally private collaborative filtering lab: release mechanisms, recovery estimators, bound oracles"
)]
struct Cli {
    /// Worker threads (default: logical cores; env LDP_LAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic rating dataset file.
    Gen(GenArgs),
    /// Run one pairwise-preference trial and print the result.
    Pp(PpArgs),
    /// Run one MaxSense trial and print the result.
    Maxsense(MaxsenseArgs),
    /// Run one Multi-MaxSense trial and print the result.
    Mms(MmsArgs),
    /// Run the success-rate grid from the config's [sweep] section.
    Sweep(SweepArgs),
    /// Search for the minimum user count meeting the target rate.
    Threshold(ThresholdArgs),
    /// Run the information-theoretic bound suite.
    Bounds(BoundsArgs),
    /// Run the non-private reference schemes.
    Baseline(BaselineArgs),
    /// Render a log-log scaling plot from a threshold CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (default: <out_dir>/dataset.txt).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a commented sample config to stdout and exit.
    #[arg(long)]
    emit_config: bool,
}

#[derive(Debug, Args)]
struct PpArgs {
    #[arg(long)]
    config: PathBuf,
    /// Pair assignment: random-global or random-rated.
    #[arg(long, default_value = "random-global")]
    mode: String,
    /// Directory for the matrix and class artifacts (default: out_dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MaxsenseArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write one `user_id,S,<hex of H>` line per user to this file.
    #[arg(long)]
    dump_sketches: Option<PathBuf>,
    /// Evaluate the class separation for each theta in this list and run
    /// with the best one.
    #[arg(long, value_delimiter = ',')]
    tune_theta: Vec<f64>,
}

#[derive(Debug, Args)]
struct MmsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Questions per user (default: config `questions`, else max(1, ceil(epsilon))).
    #[arg(long)]
    questions: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV (default: <out_dir>/sweep.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long)]
    config: PathBuf,
    /// maxsense, mms, pairwise, or pairwise-rated.
    #[arg(long)]
    algorithm: String,
    /// Item counts to sweep (default: the config's n_items).
    #[arg(long, value_delimiter = ',')]
    items: Vec<usize>,
    /// Rated-items-per-user values to sweep at fixed N (conflicts with --items).
    #[arg(long, value_delimiter = ',', conflicts_with = "items")]
    rated_grid: Vec<usize>,
    /// First probed user count.
    #[arg(long, default_value_t = 1_000)]
    u0: usize,
    /// Give up once a probe would exceed this many users.
    #[arg(long, default_value_t = 20_000_000)]
    cap: usize,
    /// Output CSV (default: <out_dir>/threshold.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Largest item count for the exact-enumeration checks.
    #[arg(long, default_value_t = 3)]
    max_n: usize,
    /// Random private kernels per configuration.
    #[arg(long, default_value_t = 200)]
    kernels: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also write the report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    /// Item counts to run.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 1_000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// adaptive, coupon, or both.
    #[arg(long, default_value = "both")]
    scheme: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Threshold CSV produced by the threshold subcommand.
    #[arg(long)]
    input: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Which column drives the x axis: N or w.
    #[arg(long, default_value = "N")]
    x: String,
    #[arg(long, default_value = "sample-complexity scaling")]
    title: String,
}

/// Parses `argv` and runs the requested subcommand, returning the process
/// exit code instead of exiting, so tests can drive it in-process.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("{e}");
        return e.exit_code();
    }
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Pp(a) => cmd_pp(a),
        Command::Maxsense(a) => cmd_maxsense(a),
        Command::Mms(a) => cmd_mms(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Threshold(a) => cmd_threshold(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let from_env = match std::env::var("LDP_LAB_THREADS") {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| {
            CliError::Config(format!("LDP_LAB_THREADS must be a positive integer, got {v:?}"))
        })?),
        Err(_) => None,
    };
    let threads = flag.or(from_env);
    match threads {
        Some(0) => Err(CliError::Config("thread count must be positive".into())),
        Some(t) => {
            // Repeat invocations in one process keep the first pool; results
            // do not depend on the thread count, so this is only a sizing hint.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            Ok(())
        }
        None => Ok(()),
    }
}

fn provenance(cfg: &RunConfig) -> String {
    format!(
        "# ldp-lab {}\n# config {}\n# seed {}\n# trials {} target {} theta {} out_dir {}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.hash(),
        cfg.seed,
        cfg.trials,
        cfg.target,
        cfg.model.theta,
        cfg.out_dir,
    )
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_artifact(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_trial(result: &TrialResult) {
    println!("{}", result.canonical());
    println!(
        "misplaced {} of {} items (accuracy {:.4}), wall {} ms",
        result.misplaced,
        result.n_items,
        1.0 - result.misclassification,
        result.wall_ms
    );
}

fn classes_csv(labels: &[usize]) -> String {
    let mut out = String::from("item,class\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l + 1));
    }
    out
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    if args.emit_config {
        print!("{}", config::sample_config());
        return Ok(());
    }
    let path = args
        .config
        .ok_or_else(|| CliError::Config("--config is required unless --emit-config".into()))?;
    let cfg = RunConfig::from_path(&path)?;
    let params = cfg.model_params();
    let dataset = model::generate_dataset(&params, cfg.seed).map_err(runtime)?;
    let out = args
        .out
        .unwrap_or_else(|| Path::new(&cfg.out_dir).join("dataset.txt"));
    let comment = format!(
        "ldp-lab {} config {}",
        env!("CARGO_PKG_VERSION"),
        cfg.hash()
    );
    let text = dataset.to_text(Some(&comment));
    write_artifact(&out, &text)?;
    println!(
        "dataset: N={} U={} K={} L={} w={} seed={}",
        params.n_items,
        params.n_users,
        params.n_user_classes(),
        params.n_item_classes(),
        params.rated_per_user,
        cfg.seed
    );
    Ok(())
}

fn trial_result(
    algo: Algorithm,
    params: &ModelParams,
    seed: u64,
    misplaced: usize,
    started: Instant,
) -> TrialResult {
    TrialResult {
        algorithm: algo.id(),
        n_items: params.n_items,
        n_users: params.n_users,
        n_user_classes: params.n_user_classes(),
        n_item_classes: params.n_item_classes(),
        rated_per_user: params.rated_per_user,
        epsilon: params.epsilon,
        theta: params.theta,
        questions: algo.questions(),
        seed,
        exact: misplaced == 0,
        misplaced,
        misclassification: misplaced as f64 / params.n_items as f64,
        wall_ms: started.elapsed().as_millis(),
    }
}

fn cmd_pp(args: PpArgs) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(&args.config)?;
    let mode: PairMode = args
        .mode
        .parse()
        .map_err(|e: pairwise::PairwiseError| CliError::Config(e.to_string()))?;
    let params = cfg.model_params();
    let dir = args.out_dir.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));

    let started = Instant::now();
    let truth = model::sample_ground_truth(&params, cfg.seed).map_err(runtime)?;
    let matrix = harness::pairwise_matrix(&params, &truth, mode, cfg.seed).map_err(runtime)?;
    let clustered =
        pairwise::pp_cluster(&matrix, params.n_item_classes(), 10, cfg.seed).map_err(runtime)?;
    let matched = match_labels(
        &clustered.labels,
        &truth.item_class_usize(),
        params.n_item_classes(),
    )
    .map_err(runtime)?;
    let result = trial_result(
        Algorithm::Pairwise(mode),
        &params,
        cfg.seed,
        matched.misplaced,
        started,
    );

    let head = provenance(&cfg);
    write_artifact(&dir.join("pp_matrix.csv"), &(head.clone() + &matrix.to_csv()))?;
    write_artifact(
        &dir.join("pp_classes.csv"),
        &(head + &classes_csv(&clustered.labels)),
    )?;
    println!("mode {mode}, {} released pairs", matrix.releases());
    print_trial(&result);
    Ok(())
}

fn cmd_maxsense(args: MaxsenseArgs) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(&args.config)?;
    let mut params = cfg.model_params();
    let dir = args.out_dir.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));

    if !args.tune_theta.is_empty() {
        println!("theta,delta_min");
        let mut best = (params.theta, f64::NEG_INFINITY);
        for &theta in &args.tune_theta {
            let mut p = params.clone();
            p.theta = theta;
            let d = maxsense::delta_min(&p).map_err(|e| CliError::Config(e.to_string()))?;
            println!("{theta},{d}");
            if d > best.1 {
                best = (theta, d);
            }
        }
        println!("using theta = {} (largest separation)", best.0);
        params.theta = best.0;
    }

    let report = maxsense::check_separability(&params).map_err(runtime)?;
    match report.failing {
        None => println!("separability: ok, delta_min = {}", report.delta_min),
        Some((a, b)) => println!(
            "separability: WARNING, classes {} and {} are indistinguishable (delta_min = {})",
            a + 1,
            b + 1,
            report.delta_min
        ),
    }
    for l in 0..params.n_item_classes() {
        let e = maxsense::expected_count(&params, l).map_err(runtime)?;
        println!("expected count, class {}: {:.2}", l + 1, e);
    }

    let started = Instant::now();
    let truth = model::sample_ground_truth(&params, cfg.seed).map_err(runtime)?;
    let counts = match &args.dump_sketches {
        None => harness::maxsense_counts(&params, &truth, cfg.seed).map_err(runtime)?,
        Some(log_path) => {
            if let Some(parent) = log_path.parent() {
                if !parent.as_os_str().is_empty() {
                    ensure_dir(parent)?;
                }
            }
            let file = fs::File::create(log_path)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", log_path.display())))?;
            let mut log = std::io::BufWriter::new(file);
            let mut counts = maxsense::ItemCounts::new(params.n_items);
            for uid in 0..params.n_users as u64 {
                let user = model::sample_user(&params, &truth, uid, cfg.seed);
                let mut stream = rng::indexed(cfg.seed, "sketch", uid);
                let h = maxsense::make_sensing_vector(
                    params.n_items,
                    params.theta,
                    params.rated_per_user,
                    &mut stream,
                )
                .map_err(runtime)?;
                let bit =
                    maxsense::ms_private_sketch(&user, &h, params.epsilon, &mut stream)
                        .map_err(runtime)?;
                counts.add(&h, bit);
                writeln!(log, "{}", maxsense::sketch_log_line(uid, bit, &h))
                    .map_err(runtime)?;
            }
            log.flush().map_err(runtime)?;
            println!("wrote {}", log_path.display());
            counts
        }
    };
    let clustered =
        maxsense::ms_cluster(&counts.counts, params.n_item_classes()).map_err(runtime)?;
    let matched = match_labels(
        &clustered.labels,
        &truth.item_class_usize(),
        params.n_item_classes(),
    )
    .map_err(runtime)?;
    let result = trial_result(Algorithm::MaxSense, &params, cfg.seed, matched.misplaced, started);

    let head = provenance(&cfg);
    write_artifact(&dir.join("ms_counts.csv"), &(head.clone() + &counts.to_csv()))?;
    write_artifact(
        &dir.join("ms_classes.csv"),
        &(head + &classes_csv(&clustered.labels)),
    )?;
    print_trial(&result);
    Ok(())
}

fn cmd_mms(args: MmsArgs) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(&args.config)?;
    let params = cfg.model_params();
    let dir = args.out_dir.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let questions = args
        .questions
        .or(cfg.questions)
        .unwrap_or_else(|| maxsense::default_question_count(params.epsilon));
    if questions == 0 {
        return Err(CliError::Config("questions must be positive".into()));
    }
    let per_question = crate::privacy::split_budget(params.epsilon, questions)
        .map_err(|e| CliError::Config(e.to_string()))?;
    println!(
        "questions {questions}, per-question budget {per_question} (total {})",
        params.epsilon
    );

    let started = Instant::now();
    let truth = model::sample_ground_truth(&params, cfg.seed).map_err(runtime)?;
    let counts = harness::mms_counts(&params, &truth, questions, cfg.seed).map_err(runtime)?;
    let clustered =
        maxsense::ms_cluster(&counts.counts, params.n_item_classes()).map_err(runtime)?;
    let matched = match_labels(
        &clustered.labels,
        &truth.item_class_usize(),
        params.n_item_classes(),
    )
    .map_err(runtime)?;
    let result = trial_result(
        Algorithm::MultiMaxSense { questions },
        &params,
        cfg.seed,
        matched.misplaced,
        started,
    );

    let head = provenance(&cfg);
    write_artifact(&dir.join("mms_counts.csv"), &(head.clone() + &counts.to_csv()))?;
    write_artifact(
        &dir.join("mms_classes.csv"),
        &(head + &classes_csv(&clustered.labels)),
    )?;
    print_trial(&result);
    Ok(())
}

fn parse_algorithm(name: &str, questions: usize) -> Result<Algorithm, CliError> {
    match name {
        "pairwise" => Ok(Algorithm::Pairwise(PairMode::RandomGlobal)),
        "pairwise-rated" => Ok(Algorithm::Pairwise(PairMode::RandomRated)),
        "maxsense" => Ok(Algorithm::MaxSense),
        "mms" => Ok(Algorithm::MultiMaxSense { questions }),
        other => Err(CliError::Config(format!(
            "unknown algorithm {other:?} (expected pairwise, pairwise-rated, maxsense, or mms)"
        ))),
    }
}

fn resolve_questions(cfg: &RunConfig, epsilon: f64) -> usize {
    cfg.questions
        .unwrap_or_else(|| maxsense::default_question_count(epsilon))
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(&args.config)?;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("config has no [sweep] section".into()))?;
    if sweep.algorithms.is_empty() || sweep.users.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let items = if sweep.items.is_empty() {
        vec![cfg.model.n_items]
    } else {
        sweep.items.clone()
    };
    let epsilons = if sweep.epsilons.is_empty() {
        vec![cfg.model.epsilon]
    } else {
        sweep.epsilons.clone()
    };

    let mut combos = Vec::new();
    for algo_name in &sweep.algorithms {
        for &n in &items {
            for &users in &sweep.users {
                for &eps in &epsilons {
                    let mut params = cfg.model_params();
                    params.n_items = n;
                    params.n_users = users;
                    params.epsilon = eps;
                    let algo = parse_algorithm(algo_name, resolve_questions(&cfg, eps))?;
                    params
                        .validate()
                        .map_err(|e| CliError::Config(format!("grid point N={n} U={users} eps={eps}: {e}")))?;
                    combos.push((algo, params));
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(combos.len());
    for (i, (algo, params)) in combos.iter().enumerate() {
        let seed0 = cfg.seed + (i * cfg.trials) as u64;
        let results = harness::run_trials(*algo, params, cfg.trials, seed0).map_err(runtime)?;
        let summary = success_rate(&results);
        println!(
            "{} N={} U={} eps={}: {}/{} exact (mean misclass {:.4})",
            algo.id(),
            params.n_items,
            params.n_users,
            params.epsilon,
            summary.successes,
            summary.trials,
            summary.mean_misclass
        );
        rows.push(SweepRow {
            algorithm: algo.id().to_string(),
            n_items: params.n_items,
            n_users: params.n_users,
            n_user_classes: params.n_user_classes(),
            n_item_classes: params.n_item_classes(),
            rated_per_user: params.rated_per_user,
            epsilon: params.epsilon,
            theta: params.theta,
            questions: algo.questions(),
            summary,
            seed0,
        });
    }
    let out = args
        .out
        .unwrap_or_else(|| Path::new(&cfg.out_dir).join("sweep.csv"));
    write_artifact(&out, &(provenance(&cfg) + &sweep_csv(&rows)))
}

fn cmd_threshold(args: ThresholdArgs) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(&args.config)?;
    if args.u0 == 0 || args.cap < args.u0 {
        return Err(CliError::Config(format!(
            "need 1 <= u0 <= cap, got u0 = {}, cap = {}",
            args.u0, args.cap
        )));
    }

    let grid: Vec<(usize, usize)> = if !args.rated_grid.is_empty() {
        args.rated_grid
            .iter()
            .map(|&w| (cfg.model.n_items, w))
            .collect()
    } else if !args.items.is_empty() {
        args.items
            .iter()
            .map(|&n| (n, cfg.model.rated_per_user))
            .collect()
    } else {
        vec![(cfg.model.n_items, cfg.model.rated_per_user)]
    };

    let mut prepared = Vec::new();
    for &(n, w) in &grid {
        let mut params = cfg.model_params();
        params.n_items = n;
        params.rated_per_user = w;
        params.n_users = args.u0;
        params
            .validate()
            .map_err(|e| CliError::Config(format!("grid point N={n} w={w}: {e}")))?;
        let algo = parse_algorithm(&args.algorithm, resolve_questions(&cfg, params.epsilon))?;
        prepared.push((algo, params));
    }

    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (i, (algo, params)) in prepared.iter().enumerate() {
        let seed0 = cfg.seed + (i as u64) * 1_000_000;
        let ThresholdResult { u_star, probes } = harness::threshold_users(
            *algo,
            params,
            cfg.target,
            cfg.trials,
            args.u0,
            args.cap,
            seed0,
        )
        .map_err(runtime)?;
        println!(
            "{} N={} w={}: U* = {} ({} probes)",
            algo.id(),
            params.n_items,
            params.rated_per_user,
            u_star,
            probes.len()
        );
        points.push((
            if args.rated_grid.is_empty() {
                params.n_items as f64
            } else {
                params.rated_per_user as f64
            },
            u_star as f64,
        ));
        rows.push(ThresholdRow {
            algorithm: algo.id().to_string(),
            n_items: params.n_items,
            rated_per_user: params.rated_per_user,
            epsilon: params.epsilon,
            target: cfg.target,
            u_star,
            probes: probes.len(),
        });
    }
    if points.len() >= 3 {
        let fit = scaling_fit(&points).map_err(runtime)?;
        println!(
            "log-log fit: slope {:.3}, intercept {:.3}, R2 {:.4}",
            fit.slope, fit.intercept, fit.r2
        );
    }
    let out = args
        .out
        .unwrap_or_else(|| Path::new(&cfg.out_dir).join("threshold.csv"));
    write_artifact(&out, &(provenance(&cfg) + &threshold_csv(&rows)))
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), CliError> {
    let report = bounds::run_bound_suite(args.max_n, args.kernels, args.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    print!("{}", report.render_table());
    if let Some(out) = args.out {
        let head = format!(
            "# ldp-lab {}\n# config bounds --max-n {} --kernels {}\n# seed {}\n",
            env!("CARGO_PKG_VERSION"),
            args.max_n,
            args.kernels,
            args.seed
        );
        write_artifact(&out, &(head + &report.to_csv()))?;
    }
    if report.all_pass() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(CliError::BoundsFailed)
    }
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(CliError::Config("reps must be positive".into()));
    }
    let schemes: Vec<&str> = match args.scheme.as_str() {
        "adaptive" => vec!["adaptive"],
        "coupon" => vec!["coupon"],
        "both" => vec!["adaptive", "coupon"],
        other => {
            return Err(CliError::Config(format!(
                "unknown scheme {other:?} (expected adaptive, coupon, or both)"
            )))
        }
    };
    let mut csv = String::from("scheme,N,reps,mean,reference,ratio\n");
    println!("scheme,N,reps,mean,reference,ratio");
    for scheme in schemes {
        for &n in &args.n_grid {
            let mut stream = rng::substream(args.seed, &format!("baseline:{scheme}:{n}"));
            let mut total = 0.0;
            for rep in 0..args.reps {
                total += match scheme {
                    "adaptive" => {
                        let bits = model::deterministic_truth_vector(n, args.seed + rep as u64)
                            .map_err(|e| CliError::Config(e.to_string()))?;
                        harness::baseline_adaptive_w1(&bits, &mut stream).map_err(runtime)?
                            as f64
                    }
                    _ => harness::baseline_coupon_bandwidth(n, &mut stream).map_err(runtime)?
                        as f64,
                };
            }
            let mean = total / args.reps as f64;
            let reference = match scheme {
                "adaptive" => 2.0 * (n * n) as f64,
                _ => n as f64 * (n as f64).log2().powi(2),
            };
            let line = format!(
                "{scheme},{n},{},{mean},{reference},{}",
                args.reps,
                mean / reference
            );
            println!("{line}");
            csv.push_str(&line);
            csv.push('\n');
        }
    }
    if let Some(out) = args.out {
        let head = format!(
            "# ldp-lab {}\n# config baseline --reps {}\n# seed {}\n",
            env!("CARGO_PKG_VERSION"),
            args.reps,
            args.seed
        );
        write_artifact(&out, &(head + &csv))?;
    }
    Ok(())
}

const THRESHOLD_HEADER: &str = "algorithm,N,w,epsilon,target,U_star,probes";

fn parse_threshold_csv(text: &str) -> Result<Vec<ThresholdRow>, CliError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h == THRESHOLD_HEADER => {}
        other => {
            return Err(CliError::Config(format!(
                "expected threshold CSV header {THRESHOLD_HEADER:?}, found {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CliError::Config(format!(
                "row {}: expected 7 fields, found {}",
                i + 1,
                fields.len()
            )));
        }
        let parse_err = |what: &str| CliError::Config(format!("row {}: bad {what}", i + 1));
        rows.push(ThresholdRow {
            algorithm: fields[0].to_string(),
            n_items: fields[1].parse().map_err(|_| parse_err("N"))?,
            rated_per_user: fields[2].parse().map_err(|_| parse_err("w"))?,
            epsilon: fields[3].parse().map_err(|_| parse_err("epsilon"))?,
            target: fields[4].parse().map_err(|_| parse_err("target"))?,
            u_star: fields[5].parse().map_err(|_| parse_err("U_star"))?,
            probes: fields[6].parse().map_err(|_| parse_err("probes"))?,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Config("threshold CSV has no data rows".into()));
    }
    Ok(rows)
}

fn cmd_plot(args: PlotArgs) -> Result<(), CliError> {
    let x_from_items = match args.x.as_str() {
        "N" => true,
        "w" => false,
        other => {
            return Err(CliError::Config(format!(
                "--x must be N or w, got {other:?}"
            )))
        }
    };
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", args.input.display())))?;
    let rows = parse_threshold_csv(&text)?;

    let mut series: Vec<plot::Series> = Vec::new();
    for row in &rows {
        let x = if x_from_items {
            row.n_items as f64
        } else {
            row.rated_per_user as f64
        };
        let point = (x, row.u_star as f64);
        match series.iter_mut().find(|s| s.name == row.algorithm) {
            Some(s) => s.points.push(point),
            None => series.push(plot::Series {
                name: row.algorithm.clone(),
                points: vec![point],
                fit: None,
            }),
        }
    }
    for s in &mut series {
        if s.points.len() >= 3 {
            s.fit = scaling_fit(&s.points).ok();
        }
        if let Some(fit) = &s.fit {
            println!("{}: slope {:.3}, R2 {:.4}", s.name, fit.slope, fit.r2);
        }
    }
    let x_label = if x_from_items { "N (items)" } else { "w (rated per user)" };
    let svg = plot::render_loglog_svg(&args.title, x_label, "U* (users)", &series);
    write_artifact(&args.out, &svg)
}
