//! `chainflow` command line: generate instances, run algorithms on them,
//! evaluate online-vs-offline ratios, and export the exact 0-1 program.
//!
//! Exit codes: 0 on success, 1 on runtime or solver-guard errors, 2 on
//! usage errors. Set `CHAINFLOW_LOG` (e.g. `warn`, `debug`) for logging.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use chainflow::ace::{ace_run, greedy_run, AceParams, TraceRecord};
use chainflow_cli::{metrics, report};
use chainflow::generators::{
    adversarial_instance, set_packing_instance, independent_set_instance, random_instance, RandomInstanceParams,
};
use chainflow::instance::{load_instance, save_instance, Instance, Mode, NetworkGraph};
use chainflow::offline::{
    branch_and_bound, brute_force, export_ilp, parse_lp, verify_solution, SolveResult,
};

#[derive(Parser)]
#[command(name = "chainflow", version, about = "Service chain admission and embedding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file produced by one of the generators.
    Generate(GenerateArgs),
    /// Run one or more algorithms on an instance and record results.
    Run(RunArgs),
    /// Compare an online result against an offline one.
    Evaluate(EvaluateArgs),
    /// Export the instance's 0-1 program in LP format.
    ExportIlp(ExportIlpArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorKind {
    /// Phase-based adversarial request sequence over a node line.
    Adversarial,
    /// Seeded random graph-mode instance.
    Random,
    /// Reduction from a maximum set packing input.
    Ksp,
    /// Reduction from a maximum independent set input.
    Mis,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long = "type", value_enum)]
    kind: GeneratorKind,
    /// Output instance file.
    #[arg(long)]
    out: PathBuf,
    /// Chain length: nodes of the adversary's line (power of two), or the
    /// chain length of random/mis instances.
    #[arg(long)]
    ell: Option<usize>,
    /// Per-node capacity of the adversarial instance.
    #[arg(long)]
    kappa: Option<u32>,
    /// Node count (random).
    #[arg(long)]
    n: Option<usize>,
    /// Hosting nodes per function type (random).
    #[arg(long, default_value_t = 2)]
    functions: usize,
    /// Number of requests (random).
    #[arg(long, default_value_t = 10)]
    requests: usize,
    #[arg(long, default_value_t = 1)]
    cap_min: u32,
    #[arg(long, default_value_t = 4)]
    cap_max: u32,
    /// Hop budget per request walk (random).
    #[arg(long, default_value_t = 6)]
    route_limit: u32,
    /// Probability of each non-tree edge (random).
    #[arg(long, default_value_t = 0.2)]
    edge_prob: f64,
    /// RNG seed (random); identical seeds reproduce identical files.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON input for the reductions (set system or graph).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Padded set size of the set packing reduction.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    /// Exponential-cost online admission.
    Ace,
    /// First-fit online baseline.
    Greedy,
    /// Exact branch-and-bound.
    OfflineBb,
    /// Exhaustive exact search (small instances only).
    OfflineBrute,
}

impl Algorithm {
    fn name(self) -> &'static str {
        match self {
            Algorithm::Ace => "ace",
            Algorithm::Greedy => "greedy",
            Algorithm::OfflineBb => "offline-bb",
            Algorithm::OfflineBrute => "offline-brute",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated list: ace, greedy, offline-bb, offline-brute.
    #[arg(long, value_delimiter = ',', required = true)]
    algo: Vec<Algorithm>,
    /// Directory for result files (`<algo>.json`, `ace.trace.jsonl`).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// CSV file to append one metrics row per algorithm run.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Non-standard cost base for the online algorithm (default 2ℓ+2).
    #[arg(long)]
    mu: Option<f64>,
    /// Repeat all runs this many times (timings vary, objectives must not).
    #[arg(long, default_value_t = 1)]
    repeat: u32,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Result file of the online algorithm.
    #[arg(long)]
    online: PathBuf,
    /// Result file of the offline reference.
    #[arg(long)]
    offline: PathBuf,
    /// Online trace (JSON lines) for the inequality residuals.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportIlpArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter("CHAINFLOW_LOG")).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(error)) => {
            eprintln!("error: {error:#}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        CliError::Runtime(error)
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Run(args) => run(args).map_err(CliError::from),
        Command::Evaluate(args) => evaluate(args).map_err(CliError::from),
        Command::ExportIlp(args) => export(args).map_err(CliError::from),
    }
}

// -------------------------------------------------------------------------
// generate
// -------------------------------------------------------------------------

/// Set system input for the set packing reduction.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetSystemDoc {
    universe_size: usize,
    sets: Vec<Vec<usize>>,
}

/// Bare graph input for the independent set reduction.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let require = |value: Option<usize>, flag: &str| {
        value.ok_or_else(|| usage(format!("--{flag} is required for this generator type")))
    };
    let instance = match args.kind {
        GeneratorKind::Adversarial => {
            let ell = require(args.ell, "ell")?;
            let kappa = args
                .kappa
                .ok_or_else(|| usage("--kappa is required for this generator type"))?;
            let (instance, _) =
                adversarial_instance(ell, kappa).map_err(|e| CliError::Runtime(e.into()))?;
            instance
        }
        GeneratorKind::Random => {
            let params = RandomInstanceParams {
                node_count: require(args.n, "n")?,
                chain_length: require(args.ell, "ell")?,
                instances_per_function: args.functions,
                request_count: args.requests,
                capacity_min: args.cap_min,
                capacity_max: args.cap_max,
                route_limit: args.route_limit,
                edge_probability: args.edge_prob,
            };
            let seed = args
                .seed
                .ok_or_else(|| usage("--seed is required for this generator type"))?;
            random_instance(&params, seed).map_err(|e| CliError::Runtime(e.into()))?
        }
        GeneratorKind::Ksp => {
            let input = args
                .input
                .as_deref()
                .ok_or_else(|| usage("--input is required for this generator type"))?;
            let k = require(args.k, "k")?;
            let doc: SetSystemDoc = read_json(input).map_err(CliError::Runtime)?;
            set_packing_instance(doc.universe_size, &doc.sets, k)
                .map_err(|e| CliError::Runtime(e.into()))?
        }
        GeneratorKind::Mis => {
            let input = args
                .input
                .as_deref()
                .ok_or_else(|| usage("--input is required for this generator type"))?;
            let ell = require(args.ell, "ell")?;
            let doc: GraphDoc = read_json(input).map_err(CliError::Runtime)?;
            let graph = NetworkGraph::new(doc.node_count, doc.edges, vec![1; doc.node_count])
                .map_err(|e| CliError::Runtime(e.into()))?;
            independent_set_instance(&graph, ell).map_err(|e| CliError::Runtime(e.into()))?
        }
    };
    std::fs::write(&args.out, save_instance(&instance))
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(CliError::Runtime)?;
    let seed_note = args.seed.map(|s| format!(" seed={s}")).unwrap_or_default();
    println!(
        "wrote {}: nodes={} chain_length={} requests={} chains={}{seed_note}",
        args.out.display(),
        instance.graph().node_count(),
        instance.max_chain_length(),
        instance.requests().len(),
        chain_count(&instance),
    );
    Ok(())
}

fn chain_count(instance: &Instance) -> u128 {
    match instance.mode() {
        Mode::Graph => instance.placement().expect("graph mode").chain_count(),
        Mode::Explicit => instance
            .requests()
            .iter()
            .flat_map(|r| r.candidates.iter().flatten())
            .collect::<BTreeSet<_>>()
            .len() as u128,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

// -------------------------------------------------------------------------
// run
// -------------------------------------------------------------------------

struct Execution {
    algorithm: Algorithm,
    result: SolveResult,
    runtime_ms: f64,
    trace: Option<Vec<TraceRecord>>,
}

fn run(args: RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let instance = load_instance(&text)?;
    let params = match args.mu {
        Some(mu) => AceParams::for_instance(&instance).with_mu(mu),
        None => AceParams::for_instance(&instance),
    };
    if !params.is_standard() {
        log::warn!("non-standard mu = {}; the admission guarantee assumes 2*ell+2", params.mu);
    }
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    for _ in 0..args.repeat {
        let mut executions = Vec::new();
        for &algorithm in &args.algo {
            let started = Instant::now();
            let (result, trace) = match algorithm {
                Algorithm::Ace => {
                    let run = ace_run(&instance, &params)?;
                    (run.result, Some(run.trace))
                }
                Algorithm::Greedy => (greedy_run(&instance)?, None),
                Algorithm::OfflineBb => (branch_and_bound(&instance)?, None),
                Algorithm::OfflineBrute => (brute_force(&instance)?, None),
            };
            let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
            let report = verify_solution(&instance, &result)?;
            if !report.is_valid() {
                bail!(
                    "{} produced an infeasible result: {}",
                    algorithm.name(),
                    report.violations[0]
                );
            }
            executions.push(Execution { algorithm, result, runtime_ms, trace });
        }

        // prefer the exhaustive objective as the ratio reference, then
        // branch-and-bound (only when proven optimal)
        let offline_objective = [Algorithm::OfflineBrute, Algorithm::OfflineBb]
            .iter()
            .find_map(|&wanted| {
                executions
                    .iter()
                    .find(|e| e.algorithm == wanted && e.result.optimal)
                    .map(|e| e.result.objective)
            });

        let mut rows = Vec::new();
        for execution in &executions {
            let online = matches!(execution.algorithm, Algorithm::Ace | Algorithm::Greedy);
            let ratio = match (online, offline_objective) {
                (true, Some(offline)) => {
                    report::offline_online_ratio(execution.result.objective, offline)
                        .or(Some(f64::INFINITY))
                }
                _ => None,
            };
            let bound = params.competitive_bound();
            rows.push(metrics::MetricsRow {
                instance: args.instance.display().to_string(),
                algorithm: execution.algorithm.name().to_string(),
                objective: execution.result.objective,
                runtime_ms: execution.runtime_ms,
                ratio_vs_offline: ratio,
                bound,
                bound_satisfied: ratio.map(|r| r <= bound),
            });
            let mut line = format!(
                "{}: objective={} runtime_ms={:.3}",
                execution.algorithm.name(),
                execution.result.objective,
                execution.runtime_ms
            );
            if let Some(r) = ratio {
                line.push_str(&format!(" ratio_vs_offline={r}"));
            }
            println!("{line}");
        }
        if let Some(path) = &args.metrics {
            metrics::append_rows(path, &rows)?;
        }

        for execution in &executions {
            let path = args.out_dir.join(format!("{}.json", execution.algorithm.name()));
            let mut text = serde_json::to_string_pretty(&execution.result)?;
            text.push('\n');
            std::fs::write(&path, text)
                .with_context(|| format!("writing {}", path.display()))?;
            if let Some(trace) = &execution.trace {
                let path = args.out_dir.join(format!("{}.trace.jsonl", execution.algorithm.name()));
                let mut lines = String::new();
                for record in trace {
                    lines.push_str(&serde_json::to_string(record)?);
                    lines.push('\n');
                }
                std::fs::write(&path, lines)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

// -------------------------------------------------------------------------
// evaluate
// -------------------------------------------------------------------------

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let instance = load_instance(&text)?;
    let online: SolveResult = read_json(&args.online)?;
    let offline: SolveResult = read_json(&args.offline)?;

    for (label, result) in [("online", &online), ("offline", &offline)] {
        let report = verify_solution(&instance, result)?;
        if !report.is_valid() {
            bail!(
                "mismatched-instance: {label} result does not fit {}: {}",
                args.instance.display(),
                report.violations[0]
            );
        }
    }

    let params = match args.mu {
        Some(mu) => AceParams::for_instance(&instance).with_mu(mu),
        None => AceParams::for_instance(&instance),
    };
    let trace = match &args.trace {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let records: Vec<TraceRecord> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<Result<_, _>>()
                .with_context(|| format!("parsing {}", path.display()))?;
            if records.len() != instance.requests().len() {
                bail!(
                    "mismatched-instance: trace has {} records for {} requests",
                    records.len(),
                    instance.requests().len()
                );
            }
            Some(records)
        }
    };

    let report = report::build_report(&online, &offline, &params, trace.as_deref());
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    print!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

// -------------------------------------------------------------------------
// export-ilp
// -------------------------------------------------------------------------

fn export(args: ExportIlpArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let instance = load_instance(&text)?;
    let lp = export_ilp(&instance)?;
    std::fs::write(&args.out, &lp).with_context(|| format!("writing {}", args.out.display()))?;
    let summary = parse_lp(&lp).map_err(|e| anyhow!("emitted LP failed self-parse: {e}"))?;
    println!(
        "wrote {}: {} binary variables, {} rows",
        args.out.display(),
        summary.binaries.len(),
        summary.rows.len()
    );
    Ok(())
}
