//! Monte Carlo experiments over random arrival orders.
//!
//! Trial `k` of an experiment with base seed `b` uses the arrival order
//! [`permutation`]`(n, b ^ k)`. Trials run in parallel and are aggregated in
//! trial order, so a report depends only on its configuration.

mod bounds;
mod report;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{generate, GeneratorSpec, PackingInstance};
use crate::online::{permutation, Algorithm, HaltMode, OnlineRunTrace, Runner};
use crate::solver::solve;

pub use bounds::{
    bernstein_tail_bound, expected_sample_opt_check, random_subset, skew_frequency, RowSkew, SampleOptCheck,
    SkewReport,
};
pub use report::{write_csv, write_json, CSV_HEADER};

/// Identity of the generator behind every permutation and sample.
pub const PRNG: &str = "rand_chacha 0.3 ChaCha8Rng::seed_from_u64";
/// How arrival orders are drawn from the PRNG.
pub const PERMUTATION_RULE: &str =
    "Fisher-Yates, i = n-1 down to 1, j uniform in [0, i] by rejection on next_u64; trial seed = base_seed xor k";

/// Slack allowed on a competitive ratio above 1.
pub const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InstanceSource {
    File { path: PathBuf },
    Generated { spec: GeneratorSpec, n: usize, m: usize, budget: f64 },
    Inline { instance: PackingInstance },
}

impl InstanceSource {
    pub fn load(&self) -> Result<PackingInstance> {
        match self {
            InstanceSource::File { path } => PackingInstance::load(path),
            InstanceSource::Generated { spec, n, m, budget } => generate(spec, *n, *m, *budget),
            InstanceSource::Inline { instance } => {
                instance.validate()?;
                Ok(instance.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: InstanceSource,
    /// Replaces the budget of the loaded instance.
    pub budget: Option<f64>,
    /// Magnitude of general-position noise, seeded by `base_seed`.
    pub general_position: Option<f64>,
    pub algorithms: Vec<Algorithm>,
    pub epsilon: f64,
    pub halt_mode: HaltMode,
    pub trials: usize,
    pub base_seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub include_trials: bool,
    pub include_traces: bool,
    /// Echoed verbatim into the report metadata.
    pub flags: serde_json::Value,
}

impl ExperimentConfig {
    pub fn new(source: InstanceSource, algorithms: Vec<Algorithm>, epsilon: f64, trials: usize, base_seed: u64) -> Self {
        ExperimentConfig {
            source,
            budget: None,
            general_position: None,
            algorithms,
            epsilon,
            halt_mode: HaltMode::Halt,
            trials,
            base_seed,
            workers: None,
            include_trials: false,
            include_traces: false,
            flags: serde_json::Value::Null,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param(format!("epsilon {} must lie in (0,1)", self.epsilon)));
        }
        if self.algorithms.is_empty() {
            return Err(Error::param("select at least one algorithm"));
        }
        if self.workers == Some(0) {
            return Err(Error::param("workers must be at least 1"));
        }
        if let Some(g) = self.general_position {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::param(format!("general position magnitude {g} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn instance(&self) -> Result<PackingInstance> {
        let mut instance = self.source.load()?;
        if let Some(b) = self.budget {
            instance = instance.with_budget(b)?;
        }
        if let Some(g) = self.general_position {
            instance = instance.ensure_general_position(g, self.base_seed);
        }
        Ok(instance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub prng: String,
    pub permutation: String,
    pub flags: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    /// Columns observed before pricing starts, if the algorithm samples.
    pub sample_size: Option<usize>,
    pub mean_value: f64,
    pub std_value: f64,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    /// Standard error of `mean_ratio`.
    pub stderr_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub feasibility_rate: f64,
    /// Fraction of trials that halted permanently.
    pub halt_rate: f64,
    /// Mean arrival position of the halt over trials that halted.
    pub mean_halt_index: Option<f64>,
    pub mean_accepted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub value: f64,
    pub ratio: f64,
    pub feasible: bool,
    pub halted_at: Option<usize>,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub n: usize,
    pub m: usize,
    pub budget: f64,
    pub epsilon: f64,
    pub halt_mode: HaltMode,
    pub trials: usize,
    pub base_seed: u64,
    pub opt: f64,
    pub algorithms: Vec<AlgorithmSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trial_rows: Option<Vec<TrialRow>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub traces: Option<Vec<OnlineRunTrace>>,
}

impl ExperimentReport {
    pub fn summary(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|s| s.algorithm == algorithm)
    }
}

pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed ^ trial as u64
}

fn ratio(value: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        value / opt
    } else {
        1.0
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn sample_size(algorithm: Algorithm, n: usize, epsilon: f64) -> Option<usize> {
    match algorithm {
        Algorithm::Greedy => None,
        Algorithm::Otp | Algorithm::RobustOtp => Some((epsilon * n as f64).floor() as usize),
        Algorithm::RobustDpa => crate::online::dpa_schedule(n, epsilon).ok().and_then(|s| s.first().map(|w| w.sample_size)),
    }
}

fn summarize(algorithm: Algorithm, traces: &[&OnlineRunTrace], opt: f64, n: usize, epsilon: f64) -> AlgorithmSummary {
    let values: Vec<f64> = traces.iter().map(|t| t.value).collect();
    let ratios: Vec<f64> = values.iter().map(|&v| ratio(v, opt)).collect();
    let (mean_value, std_value) = mean_std(&values);
    let (mean_ratio, std_ratio) = mean_std(&ratios);
    let count = traces.len() as f64;
    let halts: Vec<f64> = traces.iter().filter_map(|t| t.halted_at.map(|h| h as f64)).collect();
    AlgorithmSummary {
        algorithm,
        sample_size: sample_size(algorithm, n, epsilon),
        mean_value,
        std_value,
        mean_ratio,
        std_ratio,
        stderr_ratio: std_ratio / count.sqrt(),
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        feasibility_rate: traces.iter().filter(|t| t.feasible).count() as f64 / count,
        halt_rate: halts.len() as f64 / count,
        mean_halt_index: (!halts.is_empty()).then(|| halts.iter().sum::<f64>() / halts.len() as f64),
        mean_accepted: traces.iter().map(|t| t.accepted() as f64).sum::<f64>() / count,
    }
}

fn run_trials(config: &ExperimentConfig, runner: &Runner<'_>, n: usize) -> Result<Vec<Vec<OnlineRunTrace>>> {
    let one = |k: usize| -> Result<Vec<OnlineRunTrace>> {
        let order = permutation(n, trial_seed(config.base_seed, k));
        config
            .algorithms
            .iter()
            .map(|&a| runner.run(a, order.clone()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Trial { trial: k, source: Box::new(e) })
    };
    let all = || (0..config.trials).into_par_iter().map(one).collect::<Vec<_>>();
    let results = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::param(format!("cannot start {w} workers: {e}")))?
            .install(all),
        None => all(),
    };
    results.into_iter().collect()
}

/// Solves OPT once, then runs every selected algorithm on each trial's order.
///
/// Fails with [`Error::Infeasible`] if any trace violates the budget, and
/// with [`Error::SolverFailure`] if a ratio exceeds `1 + RATIO_TOL`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let instance = config.instance()?;
    let opt = solve(&instance, None)?.value;
    let runner = Runner::new(&instance, config.epsilon, config.halt_mode, &config.algorithms)?;
    let per_trial = run_trials(config, &runner, instance.n)?;

    let mut rows = Vec::with_capacity(config.trials * config.algorithms.len());
    for (k, traces) in per_trial.iter().enumerate() {
        for t in traces {
            if !t.feasible {
                return Err(Error::Infeasible { algorithm: t.algorithm.to_string(), trial: k });
            }
            let r = ratio(t.value, opt);
            if r > 1.0 + RATIO_TOL {
                return Err(Error::Trial {
                    trial: k,
                    source: Box::new(Error::SolverFailure {
                        pivots: 0,
                        reason: format!("{} earned ratio {r} above the offline optimum", t.algorithm),
                    }),
                });
            }
            rows.push(TrialRow {
                trial: k,
                seed: trial_seed(config.base_seed, k),
                algorithm: t.algorithm,
                value: t.value,
                ratio: r,
                feasible: t.feasible,
                halted_at: t.halted_at,
                accepted: t.accepted(),
            });
        }
    }

    let algorithms = config
        .algorithms
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let traces: Vec<&OnlineRunTrace> = per_trial.iter().map(|ts| &ts[j]).collect();
            summarize(a, &traces, opt, instance.n, config.epsilon)
        })
        .collect();

    Ok(ExperimentReport {
        metadata: ReportMetadata {
            prng: PRNG.to_string(),
            permutation: PERMUTATION_RULE.to_string(),
            flags: config.flags.clone(),
        },
        n: instance.n,
        m: instance.m,
        budget: instance.budget,
        epsilon: config.epsilon,
        halt_mode: config.halt_mode,
        trials: config.trials,
        base_seed: config.base_seed,
        opt,
        algorithms,
        trial_rows: config.include_trials.then_some(rows),
        traces: config.include_traces.then(|| per_trial.into_iter().flatten().collect()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "B")]
    Budget,
    #[serde(rename = "epsilon")]
    Epsilon,
    #[serde(rename = "n")]
    N,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Budget => "B",
            SweepParam::Epsilon => "epsilon",
            SweepParam::N => "n",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B" | "b" | "budget" => Ok(SweepParam::Budget),
            "epsilon" | "eps" => Ok(SweepParam::Epsilon),
            "n" => Ok(SweepParam::N),
            _ => Err(Error::param(format!("unknown sweep parameter {s:?}"))),
        }
    }
}

fn with_param(config: &ExperimentConfig, param: SweepParam, value: f64) -> Result<ExperimentConfig> {
    let mut c = config.clone();
    match param {
        SweepParam::Budget => c.budget = Some(value),
        SweepParam::Epsilon => c.epsilon = value,
        SweepParam::N => {
            if !(value >= 1.0 && value.fract() == 0.0 && value <= usize::MAX as f64) {
                return Err(Error::param(format!("n = {value} is not a positive integer")));
            }
            match &mut c.source {
                InstanceSource::Generated { n, .. } => *n = value as usize,
                _ => return Err(Error::param("sweeping n needs a generated instance")),
            }
        }
    }
    Ok(c)
}

/// One experiment per value of `param`, all with the same base seed.
pub fn sweep(config: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<(f64, ExperimentReport)>> {
    if values.is_empty() {
        return Err(Error::param("sweep needs at least one value"));
    }
    let configs = values.iter().map(|&v| with_param(config, param, v)).collect::<Result<Vec<_>>>()?;
    for c in &configs {
        c.validate()?;
    }
    values.iter().zip(&configs).map(|(&v, c)| Ok((v, run_experiment(c)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Family;

    fn knapsack(n: usize, budget: f64, trials: usize) -> ExperimentConfig {
        ExperimentConfig::new(
            InstanceSource::Generated { spec: GeneratorSpec::new(Family::Knapsack, 3), n, m: 1, budget },
            vec![Algorithm::Greedy, Algorithm::Otp],
            0.1,
            trials,
            17,
        )
    }

    #[test]
    fn single_column_greedy_is_optimal() {
        let instance = PackingInstance::new(vec![2.0], vec![vec![0.5]], 1.0).unwrap();
        let config = ExperimentConfig::new(InstanceSource::Inline { instance }, vec![Algorithm::Greedy], 0.1, 1, 0);
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.algorithms[0].mean_ratio, 1.0);
        assert_eq!(report.opt, 2.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let mut config = knapsack(200, 10.0, 20);
        config.include_trials = true;
        let a = serde_json::to_string(&run_experiment(&config).unwrap()).unwrap();
        config.workers = Some(3);
        let b = serde_json::to_string(&run_experiment(&config).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ratios_and_feasibility() {
        let report = run_experiment(&knapsack(300, 15.0, 30)).unwrap();
        for s in &report.algorithms {
            assert_eq!(s.feasibility_rate, 1.0);
            assert!(s.max_ratio <= 1.0 + RATIO_TOL && s.min_ratio >= 0.0);
        }
        assert_eq!(report.summary(Algorithm::Otp).unwrap().sample_size, Some(30));
    }

    #[test]
    fn config_validation() {
        let mut c = knapsack(10, 2.0, 0);
        assert!(matches!(run_experiment(&c), Err(Error::Parameter(_))));
        c.trials = 1;
        c.epsilon = 1.0;
        assert!(run_experiment(&c).is_err());
    }

    #[test]
    fn singleton_sweep_equals_run() {
        let c = knapsack(100, 8.0, 5);
        let swept = sweep(&c, SweepParam::Budget, &[8.0]).unwrap();
        assert_eq!(swept.len(), 1);
        assert_eq!(swept[0].1, run_experiment(&c).unwrap());
    }

    #[test]
    fn epsilon_sweep_reflects_sample_sizes() {
        let c = knapsack(200, 10.0, 3);
        let swept = sweep(&c, SweepParam::Epsilon, &[0.05, 0.1, 0.2]).unwrap();
        let sizes: Vec<_> = swept.iter().map(|(_, r)| r.summary(Algorithm::Otp).unwrap().sample_size).collect();
        assert_eq!(sizes, vec![Some(10), Some(20), Some(40)]);
    }

    #[test]
    fn n_sweep_needs_generator() {
        let instance = PackingInstance::new(vec![1.0], vec![vec![1.0]], 1.0).unwrap();
        let c = ExperimentConfig::new(InstanceSource::Inline { instance }, vec![Algorithm::Greedy], 0.1, 1, 0);
        assert!(sweep(&c, SweepParam::N, &[10.0]).is_err());
        assert!(sweep(&knapsack(10, 2.0, 1), SweepParam::N, &[2.5]).is_err());
        assert!(sweep(&knapsack(10, 2.0, 1), SweepParam::N, &[]).is_err());
    }
}
