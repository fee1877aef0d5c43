//! Dual-price classification and budget occupation.
//!
//! A dual price `p ≥ 0` selects the columns with strictly positive reduced
//! cost, `x(p)_t = 1` iff `π_t > p·a^t`. Ties are rejected, where reduced
//! costs within [`REDUCED_COST_TOL`] of zero, relative to the larger of
//! `π_t` and `p·a^t`, count as ties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PackingInstance;
use crate::solver::OfflineSolution;

/// Prices above this count as strictly positive.
pub const PRICE_POSITIVE_TOL: f64 = 1e-9;
/// Relative size below which a reduced cost is treated as zero.
pub const REDUCED_COST_TOL: f64 = 1e-12;
/// Tolerance for treating two normalized columns as the same direction.
pub const DIRECTION_TOL: f64 = 1e-12;

/// A 0/1 vector over column indices, identified with its support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Classification {
    pub bits: Vec<bool>,
}

impl Classification {
    pub fn empty(n: usize) -> Self {
        Classification { bits: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        Classification { bits: vec![true; n] }
    }

    pub fn from_support(n: usize, support: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = vec![false; n];
        for t in support {
            bits[t] = true;
        }
        Classification { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.bits[t]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(t, _)| t)
    }

    pub fn is_subset_of(&self, other: &Classification) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Per-row budget occupation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupation(pub Vec<f64>);

impl Occupation {
    pub fn rows(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// `p·a^t`.
pub fn priced_cost(p: &[f64], column: &[f64]) -> f64 {
    p.iter().zip(column).map(|(a, b)| a * b).sum()
}

/// Threshold decision for a single column.
pub fn accepts(p: &[f64], reward: f64, column: &[f64]) -> bool {
    let cost = priced_cost(p, column);
    reward - cost > REDUCED_COST_TOL * reward.max(cost)
}

pub fn classify(instance: &PackingInstance, p: &[f64]) -> Classification {
    debug_assert_eq!(p.len(), instance.m);
    debug_assert!(p.iter().all(|&v| v >= 0.0));
    Classification {
        bits: instance
            .rewards
            .iter()
            .zip(&instance.columns)
            .map(|(&r, col)| accepts(p, r, col))
            .collect(),
    }
}

/// Occupation of `x`.
///
/// With `sample = Some(S)` this is the rescaled sampled occupation
/// `(1/f)·Σ_{t ∈ x∩S} a^t` with `f = |S|/n`; an empty sample yields zeros.
pub fn occupation(instance: &PackingInstance, x: &Classification, sample: Option<&[usize]>) -> Occupation {
    let mut load = vec![0.0; instance.m];
    let mut add = |t: usize| {
        if x.contains(t) {
            for (l, a) in load.iter_mut().zip(&instance.columns[t]) {
                *l += a;
            }
        }
    };
    match sample {
        None => (0..instance.n).for_each(&mut add),
        Some(s) => {
            s.iter().copied().for_each(&mut add);
            if s.is_empty() {
                return Occupation(load);
            }
            let inv_f = instance.n as f64 / s.len() as f64;
            load.iter_mut().for_each(|l| *l *= inv_f);
        }
    }
    Occupation(load)
}

/// Sampled complementary-slackness figures for one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSlack {
    pub row: usize,
    pub price: f64,
    /// `a_i^S(x(p))`.
    pub sampled_occupation: f64,
    /// `(1-ε)B`.
    pub upper_threshold: f64,
    /// `(1-2ε)B`.
    pub lower_threshold: f64,
    /// `(1-ε)B` minus the largest rescaled contribution of `m` tied columns,
    /// `m·n/|S|`; the floor the sampled occupation cannot fall below on a
    /// binding row when at most `m` reduced costs vanish.
    pub tie_floor: f64,
    /// Condition (i): `a_i^S ≤ (1-ε)B`.
    pub upper_ok: bool,
    /// Condition (ii): `p_i > 0 ⇒ a_i^S ≥ (1-2ε)B`. Vacuous when the price is zero.
    pub lower_ok: bool,
    pub tie_floor_ok: bool,
}

/// Checks the sampled complementary-slackness conditions for `x(p)` where `p`
/// comes from a `(|S|, 1-ε)` sampled dual.
///
/// Raw numbers are exposed so callers can see by how much a condition failed.
pub fn cs_slack_report(
    instance: &PackingInstance,
    sample: &[usize],
    epsilon: f64,
    dual: &OfflineSolution,
) -> Vec<RowSlack> {
    let x = classify(instance, &dual.p);
    let occ = occupation(instance, &x, Some(sample));
    let b = instance.budget;
    let upper = (1.0 - epsilon) * b;
    let lower = (1.0 - 2.0 * epsilon) * b;
    let rescale = if sample.is_empty() { 0.0 } else { instance.n as f64 / sample.len() as f64 };
    let tie_floor = upper - instance.m as f64 * rescale;
    let tol = 1e-9 * b.max(1.0);
    occ.0
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let binding = dual.p[i] > PRICE_POSITIVE_TOL;
            RowSlack {
                row: i,
                price: dual.p[i],
                sampled_occupation: a,
                upper_threshold: upper,
                lower_threshold: lower,
                tie_floor,
                upper_ok: a <= upper + tol,
                lower_ok: !binding || a >= lower - tol,
                tie_floor_ok: !binding || a >= tie_floor - tol,
            }
        })
        .collect()
}

/// `a / ‖a‖∞`.
pub fn direction(column: &[f64]) -> Vec<f64> {
    let top = column.iter().copied().fold(0.0, f64::max);
    column.iter().map(|v| v / top).collect()
}

fn same_direction(u: &[f64], v: &[f64]) -> bool {
    u.iter().zip(v).all(|(a, b)| (a - b).abs() <= DIRECTION_TOL)
}

fn size_ratio(instance: &PackingInstance, t: usize) -> f64 {
    let top = instance.columns[t].iter().copied().fold(0.0, f64::max);
    instance.rewards[t] / top
}

/// Groups columns by direction and sorts each group by `π_t/‖a^t‖∞`
/// descending (index ascending on ties). Groups appear in order of their
/// first member.
pub fn direction_classes(instance: &PackingInstance) -> Vec<Vec<usize>> {
    let mut reps: Vec<Vec<f64>> = Vec::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for t in 0..instance.n {
        let d = direction(&instance.columns[t]);
        match reps.iter().position(|r| same_direction(r, &d)) {
            Some(j) => classes[j].push(t),
            None => {
                reps.push(d);
                classes.push(vec![t]);
            }
        }
    }
    for class in &mut classes {
        class.sort_by(|&a, &b| size_ratio(instance, b).total_cmp(&size_ratio(instance, a)).then(a.cmp(&b)));
    }
    classes
}

/// True iff `x(p)` restricted to every class is a prefix of that class.
///
/// Each class must hold columns of one direction sorted by reward-to-size
/// ratio, descending; anything else is rejected.
pub fn check_prefix_property(instance: &PackingInstance, classes: &[Vec<usize>], p: &[f64]) -> Result<bool> {
    let x = classify(instance, p);
    prefix_holds(instance, classes, &x)
}

/// [`check_prefix_property`] for an explicit classification.
pub fn prefix_holds(instance: &PackingInstance, classes: &[Vec<usize>], x: &Classification) -> Result<bool> {
    for (j, class) in classes.iter().enumerate() {
        if let Some(&bad) = class.iter().find(|&&t| t >= instance.n) {
            return Err(Error::param(format!("class {j}: index {bad} out of range")));
        }
        let Some(&first) = class.first() else { continue };
        let d0 = direction(&instance.columns[first]);
        if let Some(&t) = class.iter().find(|&&t| !same_direction(&d0, &direction(&instance.columns[t]))) {
            return Err(Error::param(format!("class {j}: column {t} has a different direction")));
        }
        if class.windows(2).any(|w| size_ratio(instance, w[0]) < size_ratio(instance, w[1])) {
            return Err(Error::param(format!("class {j} is not sorted by reward-to-size ratio")));
        }
    }
    Ok(classes.iter().all(|class| {
        let first_out = class.iter().position(|&t| !x.contains(t)).unwrap_or(class.len());
        class[first_out..].iter().all(|&t| !x.contains(t))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Family, GeneratorSpec};
    use crate::solver::solve_sample_dual;
    use approx::assert_abs_diff_eq;

    fn knapsack(rewards: Vec<f64>) -> PackingInstance {
        let n = rewards.len();
        PackingInstance::new(rewards, vec![vec![1.0]; n], 1.0).unwrap()
    }

    #[test]
    fn zero_price_accepts_everything() {
        let i = generate(&GeneratorSpec::new(Family::Uniform, 1), 20, 3, 2.0).unwrap();
        assert_eq!(classify(&i, &[0.0; 3]), Classification::full(20));
    }

    #[test]
    fn ties_are_rejected() {
        let i = PackingInstance::new(vec![1.0], vec![vec![0.5, 0.25]], 1.0).unwrap();
        // p·a = 1.0*0.5 + 2.0*0.25 = 1.0 = π
        assert!(!classify(&i, &[1.0, 2.0]).contains(0));
        assert!(classify(&i, &[1.0, 1.9]).contains(0));
    }

    #[test]
    fn knapsack_threshold() {
        let i = knapsack(vec![3.0, 2.0, 1.0]);
        assert_eq!(classify(&i, &[2.0]).bits, vec![true, false, false]);
    }

    #[test]
    fn occupation_sums() {
        let i = PackingInstance::new(vec![1.0; 3], vec![vec![0.2], vec![0.3], vec![0.5]], 1.0).unwrap();
        assert_eq!(occupation(&i, &Classification::empty(3), None).0, vec![0.0]);
        assert_abs_diff_eq!(occupation(&i, &Classification::full(3), None).0[0], 1.0);
        let all = [0, 1, 2];
        assert_eq!(
            occupation(&i, &Classification::full(3), Some(&all)),
            occupation(&i, &Classification::full(3), None)
        );
        // S = {0}: (3/1) * 0.2
        assert_abs_diff_eq!(occupation(&i, &Classification::full(3), Some(&[0])).0[0], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn cs_report_vacuous_for_zero_price() {
        let i = generate(&GeneratorSpec::new(Family::Uniform, 4), 40, 2, 1000.0).unwrap();
        let sample: Vec<usize> = (0..10).collect();
        let dual = solve_sample_dual(&i, &sample, 0.9).unwrap();
        assert!(dual.p.iter().all(|&p| p == 0.0));
        for row in cs_slack_report(&i, &sample, 0.1, &dual) {
            assert!(row.lower_ok && row.upper_ok);
        }
    }

    #[test]
    fn cs_report_flags_mass_ties() {
        // m + 2 identical columns and unit rewards: every column is tied at the optimal price
        let n = 4;
        let i = PackingInstance::new(vec![1.0; n], vec![vec![1.0]; n], 2.5).unwrap();
        let sample: Vec<usize> = (0..n).collect();
        let eps = 0.1;
        let dual = solve_sample_dual(&i, &sample, 1.0 - eps).unwrap();
        assert!(dual.p[0] > 0.0);
        let rep = cs_slack_report(&i, &sample, eps, &dual);
        assert!(rep[0].upper_ok);
        assert!(!rep[0].lower_ok);
        assert_eq!(rep[0].sampled_occupation, 0.0);
    }

    #[test]
    fn knapsack_classes_are_prefixes() {
        let i = generate(&GeneratorSpec::new(Family::Knapsack, 9), 30, 1, 5.0).unwrap();
        let classes = direction_classes(&i);
        assert_eq!(classes.len(), 1);
        for p in [0.0, 0.1, 0.5, 0.9, 2.0] {
            assert!(check_prefix_property(&i, &classes, &[p]).unwrap());
        }
    }

    #[test]
    fn corrupted_classification_is_not_a_prefix() {
        let i = knapsack(vec![0.9, 0.7, 0.5, 0.3]);
        let classes = direction_classes(&i);
        let mut x = classify(&i, &[0.4]);
        assert!(prefix_holds(&i, &classes, &x).unwrap());
        x.bits[1] = false;
        assert!(!prefix_holds(&i, &classes, &x).unwrap());
    }

    #[test]
    fn malformed_classes_rejected() {
        let i = knapsack(vec![0.9, 0.7, 0.5]);
        assert!(check_prefix_property(&i, &[vec![2, 0, 1]], &[0.1]).is_err());
        let mixed = PackingInstance::new(vec![1.0, 1.0], vec![vec![1.0, 0.5], vec![0.5, 1.0]], 1.0).unwrap();
        assert!(check_prefix_property(&mixed, &[vec![0, 1]], &[0.1, 0.1]).is_err());
    }

    #[test]
    fn k_subspace_classes_are_prefixes() {
        let i = generate(&GeneratorSpec::new(Family::KSubspace { k: 5 }, 3), 200, 3, 10.0).unwrap();
        let classes = direction_classes(&i);
        assert!(classes.len() <= 5);
        for a in 0..20 {
            let p: Vec<f64> = (0..3).map(|k| 0.05 * (a * (k + 1)) as f64).collect();
            assert!(check_prefix_property(&i, &classes, &p).unwrap());
        }
    }
}
