//! Packing LP data model and instance generators.
//!
//! An instance is `max Σ π_t x_t  s.t.  Σ a^t x_t ≤ B·1,  x ∈ [0,1]^n` with every
//! column `a^t ∈ [0,1]^m` nonzero, every reward `π_t ≥ 0` and a single budget
//! `B` shared by all rows.

use std::f64::consts::FRAC_PI_4;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Default magnitude of the reward noise added by
/// [`PackingInstance::ensure_general_position`].
pub const DEFAULT_GENERAL_POSITION_NOISE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingInstance {
    pub n: usize,
    pub m: usize,
    pub budget: f64,
    pub rewards: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

impl PackingInstance {
    /// Builds an instance and validates it.
    pub fn new(rewards: Vec<f64>, columns: Vec<Vec<f64>>, budget: f64) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        let inst = PackingInstance { n: rewards.len(), m, budget, rewards, columns };
        inst.validate()?;
        Ok(inst)
    }

    /// Checks every structural invariant and names the first one that fails.
    pub fn validate(&self) -> Result<(), Violation> {
        if self.n == 0 {
            return Err(Violation::EmptyDimension { what: "n" });
        }
        if self.m == 0 {
            return Err(Violation::EmptyDimension { what: "m" });
        }
        if self.rewards.len() != self.n {
            return Err(Violation::LengthMismatch {
                what: "rewards",
                expected: self.n,
                found: self.rewards.len(),
            });
        }
        if self.columns.len() != self.n {
            return Err(Violation::LengthMismatch {
                what: "columns",
                expected: self.n,
                found: self.columns.len(),
            });
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Violation::NonPositiveBudget(self.budget));
        }
        for (t, (&r, col)) in self.rewards.iter().zip(&self.columns).enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Violation::NegativeReward { index: t, value: r });
            }
            if col.len() != self.m {
                return Err(Violation::ColumnLength { column: t, expected: self.m, found: col.len() });
            }
            for (i, &v) in col.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Violation::EntryOutOfRange { column: t, row: i, value: v });
                }
            }
            if col.iter().all(|&v| v == 0.0) {
                return Err(Violation::ZeroColumn { column: t });
            }
        }
        Ok(())
    }

    pub fn column(&self, t: usize) -> &[f64] {
        &self.columns[t]
    }

    /// Same columns and rewards with a different right-hand side.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        let inst = PackingInstance { budget, ..self.clone() };
        inst.validate()?;
        Ok(inst)
    }

    /// The instance restricted to `indices` (in the given order) with budget `budget`.
    pub fn sub_instance(&self, indices: &[usize], budget: f64) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&t| t >= self.n) {
            return Err(Error::param(format!("index {bad} out of range for n={}", self.n)));
        }
        PackingInstance::new(
            indices.iter().map(|&t| self.rewards[t]).collect(),
            indices.iter().map(|&t| self.columns[t].clone()).collect(),
            budget,
        )
    }

    /// Adds independent uniform noise in `[0, magnitude]` to every reward.
    ///
    /// Rewards only grow, so the result validates whenever the input does.
    pub fn ensure_general_position(&self, magnitude: f64, seed: u64) -> Self {
        let mut out = self.clone();
        if magnitude == 0.0 {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for r in &mut out.rewards {
            *r += magnitude * rng.gen::<f64>();
        }
        out
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let inst: PackingInstance = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let inst: PackingInstance = serde_json::from_reader(reader)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(self.to_json_string()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Rescales rows so that every row shares the smallest right-hand side.
///
/// Row `i` is multiplied by `min_j rhs_j / rhs_i`, which leaves the feasible
/// set unchanged. Entries that leave `[0,1]` after scaling are rejected rather
/// than clipped.
pub fn normalize_budgets(rewards: Vec<f64>, columns: Vec<Vec<f64>>, rhs: &[f64]) -> Result<PackingInstance> {
    if rhs.is_empty() {
        return Err(Violation::EmptyDimension { what: "m" }.into());
    }
    if let Some(bad) = rhs.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::param(format!("right-hand side {bad} is not positive")));
    }
    let min_rhs = rhs.iter().copied().fold(f64::INFINITY, f64::min);
    let scale: Vec<f64> = rhs.iter().map(|r| min_rhs / r).collect();
    let mut scaled = Vec::with_capacity(columns.len());
    for (t, col) in columns.into_iter().enumerate() {
        if col.len() != rhs.len() {
            return Err(Violation::ColumnLength { column: t, expected: rhs.len(), found: col.len() }.into());
        }
        let col: Vec<f64> = col.iter().zip(&scale).map(|(a, s)| a * s).collect();
        if let Some((i, &v)) = col.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Violation::EntryOutOfRange { column: t, row: i, value: v }.into());
        }
        scaled.push(col);
    }
    PackingInstance::new(rewards, scaled, min_rhs)
}

/// Instance family drawn by [`generate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Rewards and entries i.i.d. uniform on (0,1].
    Uniform,
    /// Columns are positive multiples of `k` random directions of ℓ∞ norm 1.
    KSubspace { k: usize },
    /// Two rows, columns `(sin(π/4 + δt), cos(π/4 + δt))`, unit rewards.
    Arc { delta: f64 },
    /// One row, unit columns, uniform rewards.
    Knapsack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: Family,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        GeneratorSpec { family, seed }
    }
}

fn unit_open_closed(rng: &mut impl Rng) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Draws an instance from `spec`. Identical arguments give bit-identical output.
pub fn generate(spec: &GeneratorSpec, n: usize, m: usize, budget: f64) -> Result<PackingInstance> {
    if n == 0 || m == 0 {
        return Err(Error::param("n and m must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (rewards, columns) = match spec.family {
        Family::Uniform => {
            let rewards = (0..n).map(|_| unit_open_closed(&mut rng)).collect();
            let columns = (0..n)
                .map(|_| (0..m).map(|_| unit_open_closed(&mut rng)).collect())
                .collect();
            (rewards, columns)
        }
        Family::KSubspace { k } => {
            if k == 0 {
                return Err(Error::param("k-subspace family needs k >= 1"));
            }
            let directions: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let v: Vec<f64> = (0..m).map(|_| unit_open_closed(&mut rng)).collect();
                    let top = v.iter().copied().fold(0.0, f64::max);
                    v.iter().map(|x| x / top).collect()
                })
                .collect();
            let mut rewards = Vec::with_capacity(n);
            let mut columns = Vec::with_capacity(n);
            for _ in 0..n {
                let dir = &directions[rng.gen_range(0..k)];
                let scale = unit_open_closed(&mut rng);
                columns.push(dir.iter().map(|d| scale * d).collect());
                rewards.push(unit_open_closed(&mut rng));
            }
            (rewards, columns)
        }
        Family::Arc { delta } => {
            if m != 2 {
                return Err(Error::param(format!("arc family needs m = 2, got {m}")));
            }
            if !(delta.is_finite() && delta >= 0.0) || delta * (n - 1) as f64 > FRAC_PI_4 {
                return Err(Error::param(format!(
                    "arc delta {delta} must satisfy 0 <= delta*(n-1) <= pi/4 to keep entries in [0,1]"
                )));
            }
            let columns = (0..n)
                .map(|t| {
                    let angle = FRAC_PI_4 + delta * t as f64;
                    vec![angle.sin(), angle.cos().max(0.0)]
                })
                .collect();
            (vec![1.0; n], columns)
        }
        Family::Knapsack => {
            if m != 1 {
                return Err(Error::param(format!("knapsack family needs m = 1, got {m}")));
            }
            let rewards = (0..n).map(|_| unit_open_closed(&mut rng)).collect();
            (rewards, vec![vec![1.0]; n])
        }
    };
    PackingInstance::new(rewards, columns, budget)
}
