//! The `neuro01` command-line tool.
//!
//! Exit codes: 0 success, 1 failed verification, 2 bad flags, 3 data errors,
//! 4 configuration values outside their domain.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use neuro01::bagging::fit_bagged;
use neuro01::bench::{run_benchmark, BenchModel, BenchSource, Summary, SyntheticModel, DEFAULT_TEST_SIZE};
use neuro01::boosting::{train_round_robin_traced, TrainConfig};
use neuro01::data::{load_csv, load_features, write_columns};
use neuro01::model_file::{Model, ModelFile};
use neuro01::rng::RandomStream;
use neuro01::tuning::{tune_and_train, ArchitectureId, Schedule, TuneOptions, TRIAL_LOG_HEADER};
use neuro01::verify::{run_suite, Suite};
use neuro01::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::ChecksFailed(_) => EXIT_CHECK_FAILED,
            Self::Core(e) => match e {
                Error::InvalidConfig(_)
                | Error::InvalidArchitecture(_)
                | Error::Unsupported(_)
                | Error::InvalidDimension(_) => EXIT_CONFIG,
                Error::ContractViolation(_) | Error::MissingAnchors => EXIT_CHECK_FAILED,
                _ => EXIT_DATA,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "neuro01", version, about = "Boosted indicator-neuron networks")]
struct Cli {
    /// Worker threads for parallel bags and trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a boosted (optionally bagged) model on a CSV file.
    Train(TrainArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Random-search tuning followed by a bagged retrain.
    Tune(TuneArgs),
    /// Repeated synthetic benchmark.
    Simulate(SimulateArgs),
    /// Run a built-in self-check suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default)]
struct HyperFlags {
    /// TOML file of hyperparameters; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of boosting stages M.
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Architecture id A-F.
    #[arg(long, conflicts_with = "widths")]
    architecture: Option<String>,
    /// Explicit layer widths, e.g. 4,4,1.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    #[arg(long)]
    w0: Option<usize>,
    /// Candidates per neuron visit.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    stochastic_ratio: Option<f64>,
    #[arg(long)]
    stabilizer: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Bagged members; 0 keeps the plain boosted model.
    #[arg(long)]
    bags: Option<usize>,
    #[arg(long)]
    fine_tune_rounds: Option<usize>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    stages: Option<usize>,
    gamma: Option<f64>,
    architecture: Option<String>,
    widths: Option<Vec<usize>>,
    w0: Option<usize>,
    k: Option<usize>,
    stochastic_ratio: Option<f64>,
    stabilizer: Option<f64>,
    seed: Option<u64>,
    rounds: Option<usize>,
    bags: Option<usize>,
    fine_tune_rounds: Option<usize>,
}

/// Fully resolved training settings.
#[derive(Clone, Debug, PartialEq)]
struct TrainPlan {
    config: TrainConfig,
    rounds: usize,
    bags: usize,
    fine_tune_rounds: usize,
}

impl HyperFlags {
    fn resolve(&self) -> CliResult<TrainPlan> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                toml::from_str::<ConfigFile>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let architecture = self.architecture.clone().or(file.architecture);
        let widths = self.widths.clone().or(file.widths);
        let widths = match (architecture, widths) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either an architecture or widths, not both".into()))
            }
            (Some(id), None) => id.parse::<ArchitectureId>()?.widths().to_vec(),
            (None, Some(w)) => w,
            (None, None) => ArchitectureId::D.widths().to_vec(),
        };
        let config = TrainConfig {
            widths,
            w0: self.w0.or(file.w0).unwrap_or(2),
            n_stages: self.stages.or(file.stages).unwrap_or(10),
            gamma: self.gamma.or(file.gamma).unwrap_or(0.5),
            k: self.k.or(file.k).unwrap_or(10),
            stochastic_ratio: self.stochastic_ratio.or(file.stochastic_ratio).unwrap_or(0.9),
            stabilizer: self.stabilizer.or(file.stabilizer).unwrap_or(0.01),
            seed: self.seed.or(file.seed).unwrap_or(0),
        };
        config.validate()?;
        Ok(TrainPlan {
            config,
            rounds: self.rounds.or(file.rounds).unwrap_or(120),
            bags: self.bags.or(file.bags).unwrap_or(0),
            fine_tune_rounds: self.fine_tune_rounds.or(file.fine_tune_rounds).unwrap_or(10),
        })
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hyper: HyperFlags,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScheduleFlags {
    #[arg(long, default_value_t = Schedule::default().val_rounds)]
    val_rounds: usize,
    #[arg(long, default_value_t = Schedule::default().val_bags)]
    val_bags: usize,
    #[arg(long, default_value_t = Schedule::default().val_fine_tune)]
    val_fine_tune: usize,
    #[arg(long, default_value_t = Schedule::default().final_rounds)]
    final_rounds: usize,
    #[arg(long, default_value_t = Schedule::default().final_bags)]
    final_bags: usize,
    #[arg(long, default_value_t = Schedule::default().final_fine_tune)]
    final_fine_tune: usize,
}

impl ScheduleFlags {
    fn schedule(&self) -> Schedule {
        Schedule {
            val_rounds: self.val_rounds,
            val_bags: self.val_bags,
            val_fine_tune: self.val_fine_tune,
            final_rounds: self.final_rounds,
            final_bags: self.final_bags,
            final_fine_tune: self.final_fine_tune,
        }
    }
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    /// Random-search trials R.
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the trials log here.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Draw a fresh 80/20 split for every trial.
    #[arg(long)]
    resplit_per_trial: bool,
    #[command(flatten)]
    schedule: ScheduleFlags,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelId {
    Linear,
    Xor,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model_id: ModelId,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_TEST_SIZE)]
    test_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Tuning trials R per repetition (ignored with --config).
    #[arg(long, default_value_t = 5)]
    tune_trials: usize,
    /// Train one fixed configuration from this TOML file instead of tuning.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Score against noisy test responses rather than the regression function.
    #[arg(long)]
    noisy_test: bool,
    #[command(flatten)]
    schedule: ScheduleFlags,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Convergence,
    Identities,
    Fixture,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return EXIT_USAGE;
        }
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Tune(a) => cmd_tune(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn save_model(model: &Model, data: &neuro01::Dataset, out: &Path) -> CliResult<()> {
    let file = ModelFile::new(
        model,
        data.feature_names.clone(),
        data.target_name.clone(),
        data.fingerprint(),
    )?;
    file.save(out)?;
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let plan = args.hyper.resolve()?;
    let data = load_csv(&args.data, &args.target)?;
    let mut rng = RandomStream::new(plan.config.seed);
    let mut trace = String::from("round,sse\n");
    let base = train_round_robin_traced(
        data.x.view(),
        &data.y,
        &plan.config,
        plan.rounds,
        None,
        &mut rng,
        |round, sse| {
            let _ = writeln!(trace, "{},{}", round + 1, sse);
        },
    )?;
    print!("{trace}");
    let model = if plan.bags == 0 {
        Model::Boosted(base)
    } else {
        let bag_seed = rng.next_seed();
        Model::Bagged(fit_bagged(
            &base,
            data.x.view(),
            &data.y,
            &plan.config,
            plan.bags,
            plan.fine_tune_rounds,
            bag_seed,
        )?)
    };
    save_model(&model, &data, &args.out)
}

fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    let file = ModelFile::load(&args.model)?;
    let model = file.to_model()?;
    let x = load_features(&args.data, &file.feature_names)?;
    let pred = model.predict_batch(x.view())?;
    write_columns(&args.out, &[("prediction", &pred)])?;
    Ok(())
}

fn cmd_tune(args: &TuneArgs) -> CliResult<()> {
    let data = load_csv(&args.data, &args.target)?;
    let opts = TuneOptions {
        schedule: args.schedule.schedule(),
        resplit_per_trial: args.resplit_per_trial,
    };
    let out = tune_and_train(&data, args.trials, &opts, &mut RandomStream::new(args.seed))?;
    let mut log = format!("{TRIAL_LOG_HEADER}\n");
    for t in &out.trials {
        log.push_str(&t.log_line());
        log.push('\n');
    }
    print!("{log}");
    if let Some(path) = &args.log {
        fs::write(path, &log).map_err(Error::from)?;
    }
    eprintln!("selected trial {}", out.best_trial);
    save_model(&Model::Bagged(out.model), &data, &args.out)
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let model_id = match args.model_id {
        ModelId::Linear => SyntheticModel::Linear,
        ModelId::Xor => SyntheticModel::Xor,
    };
    let source = BenchSource::Synthetic {
        model: model_id,
        n: args.n,
        p: args.p,
        test_size: args.test_size,
        noiseless_test: !args.noisy_test,
    };
    let model = match &args.config {
        Some(path) => {
            let flags = HyperFlags {
                config: Some(path.clone()),
                ..HyperFlags::default()
            };
            let plan = flags.resolve()?;
            BenchModel::Fixed {
                config: plan.config,
                rounds: plan.rounds,
                bags: plan.bags,
                fine_tune: plan.fine_tune_rounds,
            }
        }
        None => BenchModel::Tuned {
            trials: args.tune_trials,
            options: TuneOptions {
                schedule: args.schedule.schedule(),
                resplit_per_trial: false,
            },
        },
    };
    let result = run_benchmark(&source, args.trials, &model, args.seed)?;
    let mut csv = String::from("row,r2,single_r2,seconds\n");
    for (i, t) in result.trials.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{},{:.6}", t.r2, t.single_r2, t.seconds);
    }
    let seconds: Vec<f64> = result.trials.iter().map(|t| t.seconds).collect();
    let (bag, single) = (result.summary(), result.single_summary());
    let secs = Summary::of(&seconds).expect("at least one trial");
    for (name, b, s, t) in [
        ("max", bag.max, single.max, secs.max),
        ("mean", bag.mean, single.mean, secs.mean),
        ("std", bag.std, single.std, secs.std),
        ("min", bag.min, single.min, secs.min),
    ] {
        let _ = writeln!(csv, "{name},{b},{s},{t:.6}");
    }
    fs::write(&args.out, csv).map_err(Error::from)?;
    println!("bagged: {bag}");
    println!("single: {single}");
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    let suite = match args.suite {
        SuiteArg::Convergence => Suite::Convergence,
        SuiteArg::Identities => Suite::Identities,
        SuiteArg::Fixture => Suite::Fixture,
    };
    let report = run_suite(suite, args.seed)?;
    for check in &report.checks {
        println!("{check}");
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
