use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use packlp::harness::{
    bernstein_tail_bound, run_experiment, sweep, write_csv, write_json, ExperimentConfig, InstanceSource, SweepParam,
};
use packlp::instance::{generate, Family, GeneratorSpec, PackingInstance};
use packlp::solver::solve;
use packlp::{Algorithm, Error, HaltMode, Result};

#[derive(Parser, Serialize)]
#[command(name = "packlp", version, about = "Online packing LPs under random arrival order")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Write a generated instance as JSON.
    Gen(GenArgs),
    /// Solve an instance offline and print the primal and dual optimum.
    Solve(SolveArgs),
    /// Run one Monte Carlo experiment.
    Run(RunArgs),
    /// Run one experiment per value of a parameter.
    Sweep(SweepArgs),
    /// Evaluate the sampling-without-replacement Bernstein bound.
    Bound(BoundArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FamilyArg {
    Uniform,
    KSubspace,
    Arc,
    Knapsack,
}

#[derive(Args, Serialize)]
struct GeneratorArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    n: Option<usize>,
    /// Rows; defaults to 1 for knapsack and 2 otherwise.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "budget", short = 'B')]
    budget: Option<f64>,
    /// Directions for k-subspace.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Angle step for arc; defaults to (π/4)/(n−1).
    #[arg(long)]
    arc_delta: Option<f64>,
    /// Generator seed; defaults to --seed.
    #[arg(long)]
    gen_seed: Option<u64>,
}

impl GeneratorArgs {
    fn source(&self, default_seed: u64) -> Result<(GeneratorSpec, usize, usize, f64)> {
        let family = self.family.ok_or_else(|| Error::Parameter("--family is required".into()))?;
        let n = self.n.ok_or_else(|| Error::Parameter("--n is required with --family".into()))?;
        let budget = self.budget.ok_or_else(|| Error::Parameter("--budget is required with --family".into()))?;
        let family = match family {
            FamilyArg::Uniform => Family::Uniform,
            FamilyArg::KSubspace => Family::KSubspace { k: self.k },
            FamilyArg::Arc => Family::Arc {
                delta: self.arc_delta.unwrap_or(std::f64::consts::FRAC_PI_4 / (n.max(2) - 1) as f64),
            },
            FamilyArg::Knapsack => Family::Knapsack,
        };
        let m = self.m.unwrap_or(if matches!(family, Family::Knapsack) { 1 } else { 2 });
        Ok((GeneratorSpec::new(family, self.gen_seed.unwrap_or(default_seed)), n, m, budget))
    }
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add noise of this magnitude to reach general position.
    #[arg(long)]
    general_position: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Solve with this right-hand side instead of the instance budget.
    #[arg(long = "budget", short = 'B')]
    budget: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AlgoArg {
    Greedy,
    Otp,
    RobustOtp,
    RobustDpa,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Greedy => Algorithm::Greedy,
            AlgoArg::Otp => Algorithm::Otp,
            AlgoArg::RobustOtp => Algorithm::RobustOtp,
            AlgoArg::RobustDpa => Algorithm::RobustDpa,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum HaltArg {
    Halt,
    Skip,
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    /// Instance JSON file; alternatively describe a generator with --family.
    #[arg(long, conflicts_with = "family")]
    instance: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Algorithms to run, comma separated.
    #[arg(long = "algo", value_enum, value_delimiter = ',', default_value = "otp")]
    algo: Vec<AlgoArg>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "halt")]
    halt_mode: HaltArg,
    #[arg(long)]
    general_position: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include one row per trial and algorithm (JSON only).
    #[arg(long)]
    include_trials: bool,
    /// Include full arrival traces (JSON only).
    #[arg(long)]
    include_traces: bool,
}

impl ExperimentArgs {
    fn config(&self, flags: serde_json::Value) -> Result<ExperimentConfig> {
        let (source, budget) = match &self.instance {
            Some(path) => (InstanceSource::File { path: path.clone() }, self.generator.budget),
            None => {
                let (spec, n, m, budget) = self.generator.source(self.seed)?;
                (InstanceSource::Generated { spec, n, m, budget }, None)
            }
        };
        let mut config = ExperimentConfig::new(
            source,
            self.algo.iter().map(|&a| a.into()).collect(),
            self.epsilon,
            self.trials,
            self.seed,
        );
        config.budget = budget;
        config.general_position = self.general_position;
        config.halt_mode = match self.halt_mode {
            HaltArg::Halt => HaltMode::Halt,
            HaltArg::Skip => HaltMode::Skip,
        };
        config.workers = self.workers;
        config.include_trials = self.include_trials;
        config.include_traces = self.include_traces;
        config.flags = flags;
        Ok(config)
    }
}

#[derive(Args, Serialize)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum ParamArg {
    #[value(name = "B")]
    B,
    #[value(name = "epsilon")]
    Epsilon,
    #[value(name = "n")]
    N,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, value_enum)]
    param: ParamArg,
    /// Comma-separated values of the swept parameter.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    values: Vec<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Serialize)]
struct BoundArgs {
    #[arg(long)]
    s: usize,
    #[arg(long)]
    mu: f64,
    /// Per-draw variance; omit for the form using σ² ≤ 2μ.
    #[arg(long)]
    sigma_sq: Option<f64>,
    #[arg(long)]
    tau: f64,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(cli: &Cli) -> Result<()> {
    let flags = serde_json::to_value(cli)?;
    match &cli.command {
        Command::Gen(args) => {
            let (spec, n, m, budget) = args.generator.source(args.seed)?;
            let mut instance: PackingInstance = generate(&spec, n, m, budget)?;
            if let Some(g) = args.general_position {
                instance = instance.ensure_general_position(g, args.seed);
            }
            let mut out = output(args.out.as_deref())?;
            write_json(&mut out, &instance)?;
            out.flush()?;
        }
        Command::Solve(args) => {
            let instance = PackingInstance::load(&args.instance)?;
            let solution = solve(&instance, args.budget)?;
            let mut out = output(args.out.as_deref())?;
            write_json(&mut out, &solution)?;
            out.flush()?;
        }
        Command::Run(args) => {
            let config = args.experiment.config(flags)?;
            let report = run_experiment(&config)?;
            let mut out = output(args.experiment.out.as_deref())?;
            match args.format {
                Format::Json => write_json(&mut out, &report)?,
                Format::Csv => write_csv(&mut out, None, &[(0.0, report)])?,
            }
            out.flush()?;
        }
        Command::Sweep(args) => {
            let config = args.experiment.config(flags)?;
            let param = match args.param {
                ParamArg::B => SweepParam::Budget,
                ParamArg::Epsilon => SweepParam::Epsilon,
                ParamArg::N => SweepParam::N,
            };
            let reports = sweep(&config, param, &args.values)?;
            let mut out = output(args.experiment.out.as_deref())?;
            match args.format {
                Format::Csv => write_csv(&mut out, Some(param), &reports)?,
                Format::Json => {
                    let keyed: Vec<_> = reports.iter().map(|(v, r)| serde_json::json!({ "value": v, "report": r })).collect();
                    write_json(&mut out, &serde_json::json!({ "param": param.name(), "reports": keyed }))?
                }
            }
            out.flush()?;
        }
        Command::Bound(args) => {
            let bound = bernstein_tail_bound(args.s, args.mu, args.sigma_sq, args.tau)?;
            println!("{bound}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("packlp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
