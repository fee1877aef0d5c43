use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PackingInstance;
use crate::online::below;
use crate::pricing::Classification;
use crate::solver::{solve, solve_sample_dual};

/// Tail bound for the sum `X` of a size-`s` sample drawn without replacement
/// from values in `[0,1]` with mean `mu`:
/// `P(|X − sμ| ≥ τ) ≤ 2·exp(−τ²/(2sσ² + τ))`.
///
/// Without `sigma_sq` the variance is bounded by `σ² ≤ 2μ`, giving
/// `2·exp(−τ²/(4sμ + τ))`.
pub fn bernstein_tail_bound(s: usize, mu: f64, sigma_sq: Option<f64>, tau: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::param("sample size must be at least 1"));
    }
    if !(mu.is_finite() && (0.0..=1.0).contains(&mu)) {
        return Err(Error::param(format!("mean {mu} must lie in [0,1]")));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::param(format!("deviation {tau} must be positive")));
    }
    let spread = match sigma_sq {
        Some(v) if !(v.is_finite() && (0.0..=1.0).contains(&v)) => {
            return Err(Error::param(format!("variance {v} must lie in [0,1]")))
        }
        Some(v) => 2.0 * s as f64 * v,
        None => 4.0 * s as f64 * mu,
    };
    Ok(2.0 * (-tau * tau / (spread + tau)).exp())
}

/// Uniform size-`s` subset of `0..n` by a partial Fisher–Yates shuffle.
pub fn random_subset(n: usize, s: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..s.min(n) {
        let j = i + below(rng, (n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(s.min(n));
    pool
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSkew {
    pub row: usize,
    /// `a_i(x)` over all columns.
    pub occupation: f64,
    /// Fraction of trials with `a_i^S(x) ≤ (1−ε)B`.
    pub skew_minus: f64,
    /// Fraction of trials with `a_i^S(x) ≥ (1−2ε)B`.
    pub skew_plus: f64,
    /// Deviation of the raw sample sum needed for each event; `None` when
    /// the event contains the mean and no tail bound applies.
    pub tau_minus: Option<f64>,
    pub tau_plus: Option<f64>,
    /// `ε·s·a_i(x)/(2n)`, shown for comparison with `tau_minus`.
    pub tau_half_eps: f64,
    pub bound_minus: f64,
    pub bound_plus: f64,
    pub stderr_minus: f64,
    pub stderr_plus: f64,
}

impl RowSkew {
    /// Both frequencies are within three standard errors of their bounds.
    pub fn consistent(&self) -> bool {
        self.skew_minus <= self.bound_minus + 3.0 * self.stderr_minus
            && self.skew_plus <= self.bound_plus + 3.0 * self.stderr_plus
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewReport {
    pub sample_size: usize,
    pub trials: usize,
    pub epsilon: f64,
    pub rows: Vec<RowSkew>,
}

impl SkewReport {
    pub fn consistent(&self) -> bool {
        self.rows.iter().all(RowSkew::consistent)
    }
}

/// Frequencies of the skew events for a fixed classification `x` over
/// `trials` samples of size `⌊εn⌋`, with the matching corollary-form bounds.
///
/// For an event at distance `d > 0` from the mean of the scaled occupation,
/// the raw sample sum must deviate by `τ = (s/n)·d`, and the reported bound
/// is `bernstein_tail_bound(s, a_i(x)/n, None, τ)`.
pub fn skew_frequency(
    instance: &PackingInstance,
    x: &Classification,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<SkewReport> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param(format!("epsilon {epsilon} must lie in (0,1]")));
    }
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    if x.len() != instance.n {
        return Err(Error::param("classification length does not match the instance"));
    }
    let n = instance.n;
    let s = (epsilon * n as f64).floor() as usize;
    if s == 0 {
        return Err(Error::param(format!("epsilon {epsilon} leaves an empty sample for n = {n}")));
    }
    let scale = n as f64 / s as f64;
    let lower = (1.0 - epsilon) * instance.budget;
    let upper = (1.0 - 2.0 * epsilon) * instance.budget;

    let mut hits = vec![(0usize, 0usize); instance.m];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let sample = random_subset(n, s, &mut rng);
        for (i, h) in hits.iter_mut().enumerate() {
            let raw: f64 = sample.iter().filter(|&&t| x.contains(t)).map(|&t| instance.columns[t][i]).sum();
            let scaled = raw * scale;
            h.0 += usize::from(scaled <= lower);
            h.1 += usize::from(scaled >= upper);
        }
    }

    let frac = s as f64 / n as f64;
    let rows = hits
        .into_iter()
        .enumerate()
        .map(|(i, (minus, plus))| {
            let full: f64 = x.support().map(|t| instance.columns[t][i]).sum();
            let mu = (full / n as f64).min(1.0);
            let tail = |d: f64| -> Result<(Option<f64>, f64)> {
                let tau = frac * d;
                if tau > 0.0 {
                    Ok((Some(tau), bernstein_tail_bound(s, mu, None, tau)?.min(1.0)))
                } else {
                    Ok((None, 1.0))
                }
            };
            let (tau_minus, bound_minus) = tail(full - lower)?;
            let (tau_plus, bound_plus) = tail(upper - full)?;
            let f_minus = minus as f64 / trials as f64;
            let f_plus = plus as f64 / trials as f64;
            let se = |p: f64| (p * (1.0 - p) / trials as f64).sqrt();
            Ok(RowSkew {
                row: i,
                occupation: full,
                skew_minus: f_minus,
                skew_plus: f_plus,
                tau_minus,
                tau_plus,
                tau_half_eps: epsilon * s as f64 * full / (2.0 * n as f64),
                bound_minus,
                bound_plus,
                stderr_minus: se(f_minus),
                stderr_plus: se(f_plus),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SkewReport { sample_size: s, trials, epsilon, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOptCheck {
    pub sample_size: usize,
    pub trials: usize,
    /// Monte Carlo mean of the sample optimum with right-hand side `(s/n)B`.
    pub mean: f64,
    pub stderr: f64,
    pub opt: f64,
    /// `(s/n)·OPT`.
    pub bound: f64,
    /// `mean ≤ bound + 3·stderr`.
    pub satisfied: bool,
}

/// Estimates the expected optimum of a uniform size-`s` sample and compares
/// it with `(s/n)·OPT`.
pub fn expected_sample_opt_check(instance: &PackingInstance, s: usize, trials: usize, seed: u64) -> Result<SampleOptCheck> {
    if s > instance.n {
        return Err(Error::param(format!("sample size {s} exceeds n = {}", instance.n)));
    }
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let opt = solve(instance, None)?.value;
    let bound = s as f64 / instance.n as f64 * opt;
    if s == 0 {
        return Ok(SampleOptCheck { sample_size: 0, trials, mean: 0.0, stderr: 0.0, opt, bound, satisfied: true });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..trials)
        .map(|_| {
            let sample = random_subset(instance.n, s, &mut rng);
            solve_sample_dual(instance, &sample, 1.0).map(|sol| sol.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = trials as f64;
    let mean = values.iter().sum::<f64>() / k;
    let stderr = if trials > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    let satisfied = mean <= bound + 3.0 * stderr + 1e-9 * opt.max(1.0);
    Ok(SampleOptCheck { sample_size: s, trials, mean, stderr, opt, bound, satisfied })
}
