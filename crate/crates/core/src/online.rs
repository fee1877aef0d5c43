//! Online algorithms over a randomly permuted column stream.
//!
//! Every algorithm here consumes a [`PermutationStream`], decides each column
//! irrevocably as it arrives and produces an [`OnlineRunTrace`] scored on the
//! original instance. The robust variants decide on snapped columns with a
//! reduced budget; snapping depends only on the column itself and on
//! `(m, ε)`, so it can be carried out as each column arrives.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PackingInstance;
use crate::perturb::perturb_instance;
use crate::pricing::accepts;
use crate::solver::{solve_sample_dual, FEAS_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Greedy,
    Otp,
    RobustOtp,
    RobustDpa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Greedy, Algorithm::Otp, Algorithm::RobustOtp, Algorithm::RobustDpa];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Otp => "otp",
            Algorithm::RobustOtp => "robust-otp",
            Algorithm::RobustDpa => "robust-dpa",
        }
    }

    pub fn is_robust(self) -> bool {
        matches!(self, Algorithm::RobustOtp | Algorithm::RobustDpa)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::param(format!("unknown algorithm {s:?}")))
    }
}

/// What a pricing algorithm does at the first column it wants but cannot fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HaltMode {
    /// Reject it and every later column.
    #[default]
    Halt,
    /// Reject it and keep going.
    Skip,
}

impl FromStr for HaltMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "halt" => Ok(HaltMode::Halt),
            "skip" => Ok(HaltMode::Skip),
            _ => Err(Error::param(format!("unknown halt mode {s:?}"))),
        }
    }
}

/// Uniform `[0, bound)` by rejection sampling on 64-bit draws.
pub(crate) fn below(rng: &mut impl RngCore, bound: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// Fisher–Yates shuffle of `0..n` driven by `ChaCha8Rng::seed_from_u64(seed)`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = below(&mut rng, i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
}

/// Columns of an instance in arrival order, each decided exactly once.
///
/// A column is only visible through the [`Arrival`] handed out by
/// [`PermutationStream::next_arrival`], and the next column cannot be
/// requested until that handle is consumed. Dropping an undecided handle
/// rejects the column.
#[derive(Debug)]
pub struct PermutationStream<'a> {
    instance: &'a PackingInstance,
    order: Vec<usize>,
    decisions: Vec<bool>,
}

impl<'a> PermutationStream<'a> {
    pub fn new(instance: &'a PackingInstance, order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; instance.n];
        if order.len() != instance.n
            || order.iter().any(|&t| t >= instance.n || std::mem::replace(&mut seen[t], true))
        {
            return Err(Error::param("arrival order is not a permutation of the columns"));
        }
        Ok(PermutationStream { instance, order, decisions: Vec::with_capacity(instance.n) })
    }

    pub fn shuffled(instance: &'a PackingInstance, seed: u64) -> Self {
        let order = permutation(instance.n, seed);
        PermutationStream { instance, order, decisions: Vec::with_capacity(instance.n) }
    }

    pub fn instance(&self) -> &'a PackingInstance {
        self.instance
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of columns already decided.
    pub fn position(&self) -> usize {
        self.decisions.len()
    }

    pub fn remaining(&self) -> usize {
        self.order.len() - self.decisions.len()
    }

    /// Indices of the columns decided so far, in arrival order.
    pub fn observed(&self) -> &[usize] {
        &self.order[..self.decisions.len()]
    }

    pub fn decisions(&self) -> &[bool] {
        &self.decisions
    }

    pub fn next_arrival(&mut self) -> Option<Arrival<'_, 'a>> {
        let index = *self.order.get(self.decisions.len())?;
        Some(Arrival { stream: self, index, decided: false })
    }

    /// Rejects the next `k` columns (or all that remain).
    pub fn skip(&mut self, k: usize) {
        for _ in 0..k {
            match self.next_arrival() {
                Some(a) => a.decide(false),
                None => break,
            }
        }
    }

    pub fn into_decisions(self) -> (Vec<usize>, Vec<bool>) {
        (self.order, self.decisions)
    }
}

#[derive(Debug)]
pub struct Arrival<'s, 'a> {
    stream: &'s mut PermutationStream<'a>,
    index: usize,
    decided: bool,
}

impl Arrival<'_, '_> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn reward(&self) -> f64 {
        self.stream.instance.rewards[self.index]
    }

    pub fn column(&self) -> &[f64] {
        &self.stream.instance.columns[self.index]
    }

    pub fn decide(mut self, accept: bool) {
        self.stream.decisions.push(accept);
        self.decided = true;
    }
}

impl Drop for Arrival<'_, '_> {
    fn drop(&mut self) {
        if !self.decided {
            self.stream.decisions.push(false);
        }
    }
}

/// One pricing stage: a dual learned from the first `sample_size` arrivals
/// applied to arrival positions `window.0 .. window.1` (0-based, end exclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub sample_size: usize,
    pub window: (usize, usize),
    /// Scale on the sampled right-hand side, `1-ε` for OTP and `1-δ` for a staged run.
    pub delta_scale: f64,
    /// Per-row occupation cap for the window.
    pub cap: f64,
    pub prices: Vec<f64>,
    /// Arrival position of the column that triggered a permanent halt.
    pub halted_at: Option<usize>,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineRunTrace {
    pub algorithm: Algorithm,
    pub order: Vec<usize>,
    /// Decision for each arrival, in arrival order.
    pub decisions: Vec<bool>,
    /// Occupation of the original budget after each arrival.
    pub occupation: Vec<Vec<f64>>,
    pub stages: Vec<StageRecord>,
    pub value: f64,
    pub budget: f64,
    pub feasible: bool,
    pub halted_at: Option<usize>,
}

impl OnlineRunTrace {
    fn score(
        instance: &PackingInstance,
        algorithm: Algorithm,
        stream: PermutationStream<'_>,
        stages: Vec<StageRecord>,
    ) -> Self {
        let (order, decisions) = stream.into_decisions();
        let mut load = vec![0.0; instance.m];
        let mut occupation = Vec::with_capacity(order.len());
        let mut value = 0.0;
        for (&t, &d) in order.iter().zip(&decisions) {
            if d {
                value += instance.rewards[t];
                for (l, a) in load.iter_mut().zip(&instance.columns[t]) {
                    *l += a;
                }
            }
            occupation.push(load.clone());
        }
        let limit = instance.budget + FEAS_TOL * instance.budget.max(1.0);
        let feasible = occupation.iter().all(|row| row.iter().all(|&l| l <= limit));
        let halted_at = stages.iter().find_map(|s| s.halted_at);
        OnlineRunTrace {
            algorithm,
            order,
            decisions,
            occupation,
            stages,
            value,
            budget: instance.budget,
            feasible,
            halted_at,
        }
    }

    pub fn accepted(&self) -> usize {
        self.decisions.iter().filter(|&&d| d).count()
    }

    pub fn final_occupation(&self) -> &[f64] {
        self.occupation.last().map_or(&[], Vec::as_slice)
    }

    pub fn max_occupation(&self) -> f64 {
        self.final_occupation().iter().copied().fold(0.0, f64::max)
    }
}

fn check_epsilon(epsilon: f64, upper_inclusive: bool) -> Result<()> {
    let ok = epsilon > 0.0 && if upper_inclusive { epsilon <= 1.0 } else { epsilon < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::param(format!(
            "epsilon {epsilon} must lie in (0,1{}",
            if upper_inclusive { "]" } else { ")" }
        )))
    }
}

fn sample_size(n: usize, epsilon: f64) -> Result<usize> {
    let s = (epsilon * n as f64).floor() as usize;
    if s == 0 {
        return Err(Error::param(format!("epsilon {epsilon} with n = {n} leaves an empty sample")));
    }
    Ok(s.min(n))
}

/// Prices the next `len` arrivals with `prices`, reading columns from
/// `decide` and keeping the window's occupation at most `cap` on every row.
fn price_window(
    decide: &PackingInstance,
    stream: &mut PermutationStream<'_>,
    prices: &[f64],
    len: usize,
    cap: f64,
    halt_mode: HaltMode,
) -> (usize, Option<usize>) {
    let mut load = vec![0.0; decide.m];
    let mut accepted = 0;
    let mut halted_at = None;
    for _ in 0..len {
        let position = stream.position();
        let Some(arrival) = stream.next_arrival() else { break };
        if halted_at.is_some() {
            arrival.decide(false);
            continue;
        }
        let t = arrival.index();
        let column = &decide.columns[t];
        if !accepts(prices, decide.rewards[t], column) {
            arrival.decide(false);
            continue;
        }
        if load.iter().zip(column).all(|(l, a)| l + a <= cap) {
            load.iter_mut().zip(column).for_each(|(l, a)| *l += a);
            accepted += 1;
            arrival.decide(true);
        } else {
            if halt_mode == HaltMode::Halt {
                halted_at = Some(position);
            }
            arrival.decide(false);
        }
    }
    (accepted, halted_at)
}

fn otp_on(
    decide: &PackingInstance,
    epsilon: f64,
    stream: &mut PermutationStream<'_>,
    halt_mode: HaltMode,
) -> Result<Vec<StageRecord>> {
    let n = decide.n;
    let s = sample_size(n, epsilon)?;
    stream.skip(s);
    if s == n {
        return Ok(Vec::new());
    }
    let dual = solve_sample_dual(decide, stream.observed(), 1.0 - epsilon)?;
    let start = stream.position();
    let (accepted, halted_at) =
        price_window(decide, stream, &dual.p, stream.remaining(), decide.budget, halt_mode);
    Ok(vec![StageRecord {
        sample_size: s,
        window: (start, n),
        delta_scale: 1.0 - epsilon,
        cap: decide.budget,
        prices: dual.p,
        halted_at,
        accepted,
    }])
}

/// Schedule entry of the doubling algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageWindow {
    pub sample_size: usize,
    pub delta: f64,
    /// Arrival positions `start..end`, 0-based, end exclusive.
    pub start: usize,
    pub end: usize,
}

/// Stages of the doubling algorithm for `n` columns and accuracy `ε`.
///
/// With `s = ⌊εn⌋` and `r = ⌊log2(1/ε)⌋`, stage `i < r` learns from the first
/// `s·2^i` arrivals with `δ_i = sqrt(ε/2^i)` and prices arrivals
/// `s·2^i .. s·2^(i+1)`, truncated at `n`.
pub fn dpa_schedule(n: usize, epsilon: f64) -> Result<Vec<StageWindow>> {
    check_epsilon(epsilon, false)?;
    let s0 = sample_size(n, epsilon)?;
    let mut rounds = 0u32;
    while epsilon * 2f64.powi(rounds as i32 + 1) <= 1.0 + 1e-12 {
        rounds += 1;
    }
    if rounds == 0 {
        return Err(Error::param(format!("epsilon {epsilon} leaves no doubling stage (needs epsilon <= 1/2)")));
    }
    let mut stages = Vec::new();
    for i in 0..rounds {
        let s = s0 << i;
        if s >= n {
            break;
        }
        stages.push(StageWindow {
            sample_size: s,
            delta: (epsilon / f64::from(1u32 << i)).sqrt(),
            start: s,
            end: (2 * s).min(n),
        });
    }
    Ok(stages)
}

/// One `(s, δ)` stage: learn a dual from the first `s` arrivals with budget
/// scaled by `1-δ`, then price arrivals `s+1 .. 2s` while the stage's own
/// occupation stays within `(s/n)·B` on every row.
///
/// The stream must be positioned right after the first `s` columns.
pub fn run_sdotp_stage(
    instance: &PackingInstance,
    s: usize,
    delta: f64,
    stream: &mut PermutationStream<'_>,
    halt_mode: HaltMode,
) -> Result<StageRecord> {
    if stream.position() != s || s == 0 {
        return Err(Error::param(format!(
            "stage with s = {s} needs a stream positioned after s >= 1 columns, found {}",
            stream.position()
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta {delta} must lie in (0,1)")));
    }
    let dual = solve_sample_dual(instance, &stream.observed()[..s], 1.0 - delta)?;
    let cap = s as f64 / instance.n as f64 * instance.budget;
    let len = s.min(stream.remaining());
    let (accepted, halted_at) = price_window(instance, stream, &dual.p, len, cap, halt_mode);
    Ok(StageRecord {
        sample_size: s,
        window: (s, s + len),
        delta_scale: 1.0 - delta,
        cap,
        prices: dual.p,
        halted_at,
        accepted,
    })
}

fn dpa_on(
    decide: &PackingInstance,
    epsilon: f64,
    stream: &mut PermutationStream<'_>,
    halt_mode: HaltMode,
) -> Result<Vec<StageRecord>> {
    let schedule = dpa_schedule(decide.n, epsilon)?;
    let mut records = Vec::with_capacity(schedule.len());
    if let Some(first) = schedule.first() {
        stream.skip(first.sample_size);
    }
    for stage in &schedule {
        debug_assert_eq!(stream.position(), stage.start);
        records.push(run_sdotp_stage(decide, stage.sample_size, stage.delta, stream, halt_mode)?);
    }
    stream.skip(stream.remaining());
    Ok(records)
}

fn greedy_on(instance: &PackingInstance, stream: &mut PermutationStream<'_>) -> Vec<StageRecord> {
    let mut load = vec![0.0; instance.m];
    while let Some(arrival) = stream.next_arrival() {
        let column = arrival.column();
        let fits = load.iter().zip(column).all(|(l, a)| l + a <= instance.budget);
        if fits {
            load.iter_mut().zip(column).for_each(|(l, a)| *l += a);
        }
        arrival.decide(fits);
    }
    Vec::new()
}

/// Runs algorithms on one instance, perturbing it at most once.
#[derive(Debug, Clone)]
pub struct Runner<'a> {
    instance: &'a PackingInstance,
    epsilon: f64,
    halt_mode: HaltMode,
    perturbed: Option<PackingInstance>,
}

impl<'a> Runner<'a> {
    pub fn new(
        instance: &'a PackingInstance,
        epsilon: f64,
        halt_mode: HaltMode,
        algorithms: &[Algorithm],
    ) -> Result<Self> {
        instance.validate()?;
        let robust = algorithms.iter().any(|a| a.is_robust());
        check_epsilon(epsilon, !robust)?;
        let perturbed = if robust { Some(perturb_instance(instance, epsilon)?.0) } else { None };
        Ok(Runner { instance, epsilon, halt_mode, perturbed })
    }

    pub fn perturbed(&self) -> Option<&PackingInstance> {
        self.perturbed.as_ref()
    }

    pub fn run(&self, algorithm: Algorithm, order: Vec<usize>) -> Result<OnlineRunTrace> {
        self.run_stream(algorithm, PermutationStream::new(self.instance, order)?)
    }

    /// Runs `algorithm` on a fresh stream over this runner's instance.
    pub fn run_stream(&self, algorithm: Algorithm, mut stream: PermutationStream<'_>) -> Result<OnlineRunTrace> {
        if stream.position() != 0 {
            return Err(Error::param("stream has already been consumed"));
        }
        if !std::ptr::eq(stream.instance(), self.instance) && stream.instance() != self.instance {
            return Err(Error::param("stream was built over a different instance"));
        }
        let robust = || {
            self.perturbed
                .as_ref()
                .ok_or_else(|| Error::param(format!("runner was not prepared for {algorithm}")))
        };
        let stages = match algorithm {
            Algorithm::Greedy => greedy_on(self.instance, &mut stream),
            Algorithm::Otp => otp_on(self.instance, self.epsilon, &mut stream, self.halt_mode)?,
            Algorithm::RobustOtp => otp_on(robust()?, self.epsilon, &mut stream, self.halt_mode)?,
            Algorithm::RobustDpa => dpa_on(robust()?, self.epsilon, &mut stream, self.halt_mode)?,
        };
        stream.skip(stream.remaining());
        Ok(OnlineRunTrace::score(self.instance, algorithm, stream, stages))
    }
}

/// One-time pricing: observe `⌊εn⌋` columns, learn a dual from them with
/// budget scaled by `1-ε`, then accept exactly the columns it prices
/// profitably until the first one that no longer fits.
pub fn run_otp(
    instance: &PackingInstance,
    epsilon: f64,
    stream: PermutationStream<'_>,
    halt_mode: HaltMode,
) -> Result<OnlineRunTrace> {
    Runner::new(instance, epsilon, halt_mode, &[Algorithm::Otp])?.run_stream(Algorithm::Otp, stream)
}

/// OTP on snapped columns with budget `(1-ε)B`, scored on the original
/// columns and budget.
pub fn run_robust_otp(
    instance: &PackingInstance,
    epsilon: f64,
    stream: PermutationStream<'_>,
    halt_mode: HaltMode,
) -> Result<OnlineRunTrace> {
    Runner::new(instance, epsilon, halt_mode, &[Algorithm::RobustOtp])?.run_stream(Algorithm::RobustOtp, stream)
}

/// The stages of [`dpa_schedule`] run on snapped columns with budget
/// `B̃ = (1-ε)B`, each stage capped at `(s_i/n)·B̃`; the union of the stage
/// solutions is scored on the original columns and budget.
pub fn run_robust_dpa(
    instance: &PackingInstance,
    epsilon: f64,
    stream: PermutationStream<'_>,
    halt_mode: HaltMode,
) -> Result<OnlineRunTrace> {
    Runner::new(instance, epsilon, halt_mode, &[Algorithm::RobustDpa])?.run_stream(Algorithm::RobustDpa, stream)
}

/// Accepts every arriving column that still fits; never halts.
pub fn run_greedy_baseline(instance: &PackingInstance, stream: PermutationStream<'_>) -> Result<OnlineRunTrace> {
    Runner::new(instance, 0.5, HaltMode::Halt, &[Algorithm::Greedy])?.run_stream(Algorithm::Greedy, stream)
}
