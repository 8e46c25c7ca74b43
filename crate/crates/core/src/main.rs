use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use abac_bandit::abac::{load_policy, save_policy};
use abac_bandit::data::{
    gen_complete_log, gen_random_policy, load_log, load_log_with_schema, manual_hierarchy,
    manual_policy, sample_partial_log, save_log, shuffle_log, RandomPolicyConfig,
};
use abac_bandit::harness::{
    compare_algorithms, emit_outputs, run_shift, run_stream, write_table, Algorithm, DatasetSpec,
    ExperimentConfig, FeedbackConfig, Matrix, Reference, RunSettings,
};
use abac_bandit::learners::{Exploration, DEFAULT_PSI};
use abac_bandit::{Error, Result};

#[derive(Parser)]
#[command(
    name = "abac-bandit",
    version,
    about = "Contextual-bandit ABAC policy learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a manual or random policy as JSON.
    GenPolicy(GenPolicy),
    /// Enumerate a policy's complete log, optionally subsampled, as CSV.
    GenLog(GenLog),
    /// Stream a log through one algorithm.
    Run(Run),
    /// Stream log A then log B through one learner.
    Shift(Shift),
    /// Run every cell of a comparison matrix.
    Compare(Compare),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["manual", "random"])))]
struct GenPolicy {
    #[arg(long, value_parser = ["m1", "m2", "m3"])]
    manual: Option<String>,
    #[arg(long, requires_all = ["rules", "attrs", "values", "target_log"])]
    random: bool,
    #[arg(long)]
    rules: Option<usize>,
    /// Attribute count, the operation included.
    #[arg(long)]
    attrs: Option<usize>,
    /// Total value count, the operations included.
    #[arg(long)]
    values: Option<usize>,
    #[arg(long)]
    target_log: Option<u64>,
    #[arg(long, default_value_t = 0.8)]
    permit_probability: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the policy's value hierarchy (m3 only).
    #[arg(long)]
    hierarchy_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenLog {
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    no_shuffle: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Epsilon,
    First,
    Bag,
    Cover,
    Supervised,
}

#[derive(Args)]
struct AlgoArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    first: u64,
    #[arg(long, default_value_t = 4)]
    bags: usize,
    #[arg(long, default_value_t = 2)]
    cover: usize,
    #[arg(long, default_value_t = DEFAULT_PSI)]
    psi: f64,
    #[arg(long, default_value_t = 1.0)]
    feedback_rate: f64,
    #[arg(long, default_value_t = 0)]
    delay: u64,
    #[arg(long)]
    seed: u64,
}

impl AlgoArgs {
    fn settings(&self) -> RunSettings {
        let algorithm = match self.algo {
            Algo::Epsilon => Algorithm::Bandit(Exploration::EpsilonGreedy {
                epsilon: self.epsilon,
            }),
            Algo::First => Algorithm::Bandit(Exploration::ExploreFirst { k: self.first }),
            Algo::Bag => Algorithm::Bandit(Exploration::Bagging { bags: self.bags }),
            Algo::Cover => Algorithm::Bandit(Exploration::OnlineCover {
                policies: self.cover,
                psi: self.psi,
            }),
            Algo::Supervised => Algorithm::Reference(Reference::Supervised),
        };
        let mut run = RunSettings::new(algorithm, self.seed);
        run.feedback = FeedbackConfig {
            rate: self.feedback_rate,
            delay: self.delay,
            ..FeedbackConfig::default()
        };
        run
    }
}

#[derive(Args)]
struct Run {
    #[arg(long)]
    log: PathBuf,
    /// Policy file supplying the log's schema (attribute kinds and full value ranges).
    #[arg(long)]
    policy: Option<PathBuf>,
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long)]
    warmstart: Option<PathBuf>,
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    #[arg(long, requires = "hierarchy")]
    plan: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Shift {
    #[arg(long)]
    log_a: PathBuf,
    #[arg(long)]
    log_b: PathBuf,
    #[arg(long)]
    policy_a: Option<PathBuf>,
    #[arg(long)]
    policy_b: Option<PathBuf>,
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Compare {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn gen_policy(args: GenPolicy) -> Result<()> {
    let policy = match &args.manual {
        Some(id) => {
            if let Some(path) = &args.hierarchy_out {
                let h = manual_hierarchy(id)?
                    .ok_or_else(|| Error::InvalidConfig(format!("no hierarchy ships with {id}")))?;
                std::fs::write(path, h.to_json() + "\n").map_err(|e| io_error(path, e))?;
            }
            manual_policy(id)?
        }
        None => {
            let mut cfg = RandomPolicyConfig::new(
                args.rules.expect("required by clap"),
                args.attrs.expect("required by clap"),
                args.values.expect("required by clap"),
                args.target_log.expect("required by clap"),
                args.seed,
            );
            cfg.permit_probability = args.permit_probability;
            gen_random_policy(&cfg)?
        }
    };
    save_policy(&policy, &args.out)
}

fn gen_log(args: GenLog) -> Result<()> {
    let policy = load_policy(&args.policy)?;
    let mut log = gen_complete_log(&policy)?;
    if let Some(f) = args.fraction {
        log = sample_partial_log(&log, f, args.seed)?;
    }
    if !args.no_shuffle {
        log = shuffle_log(&log, args.seed);
    }
    save_log(&log, &args.out)
}

fn run(args: Run) -> Result<()> {
    let mut run = args.algo.settings();
    run.planning = args.plan;
    let mut cfg = ExperimentConfig::new(
        DatasetSpec::Log {
            path: args.log,
            policy: args.policy,
            shuffle: false,
        },
        run,
    );
    cfg.warmstart = args.warmstart;
    cfg.hierarchy = args.hierarchy;
    let result = run_stream(&cfg)?;
    emit_outputs(&result, &args.out)?;
    println!(
        "{}",
        summary_line(
            &result.algorithm,
            &result.hyperparameter,
            result.final_pvl,
            result.records.len()
        )
    );
    Ok(())
}

fn read_log(path: &Path, policy: Option<&PathBuf>) -> Result<abac_bandit::abac::AccessLog> {
    match policy {
        Some(p) => load_log_with_schema(path, &load_policy(p)?.schema),
        None => load_log(path),
    }
}

fn shift(args: Shift) -> Result<()> {
    let a = read_log(&args.log_a, args.policy_a.as_ref())?;
    let b = read_log(&args.log_b, args.policy_b.as_ref())?;
    let result = run_shift(&a, &b, &args.algo.settings())?;
    emit_outputs(&result, &args.out)?;
    println!(
        "{}",
        summary_line(
            &result.algorithm,
            &result.hyperparameter,
            result.final_pvl,
            result.records.len()
        )
    );
    Ok(())
}

fn compare(args: Compare) -> Result<()> {
    let matrix = Matrix::load(&args.matrix)?;
    let rows = compare_algorithms(&matrix.expand());
    write_table(&rows, &args.out)?;
    for r in &rows {
        match (&r.pvl, &r.error) {
            (Some(pvl), _) => println!(
                "{}\t{}",
                r.dataset,
                summary_line(&r.algorithm, &r.hyperparameter, *pvl, r.rounds)
            ),
            (None, Some(e)) => println!(
                "{}\t{} ({}): error: {e}",
                r.dataset, r.algorithm, r.hyperparameter
            ),
            (None, None) => {}
        }
    }
    Ok(())
}

fn summary_line(algorithm: &str, hyper: &str, pvl: f64, rounds: usize) -> String {
    format!("{algorithm} ({hyper}): pvl {pvl:.4} over {rounds} rounds")
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn fail(kind: &str, message: String) -> ExitCode {
    let body = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim().to_string()),
    };
    let outcome = match cli.command {
        Command::GenPolicy(a) => gen_policy(a),
        Command::GenLog(a) => gen_log(a),
        Command::Run(a) => run(a),
        Command::Shift(a) => shift(a),
        Command::Compare(a) => compare(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
