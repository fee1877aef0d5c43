use packlp::instance::{generate, normalize_budgets, Family, GeneratorSpec, PackingInstance};
use packlp::solver::{brute_force_opt, solve, solve_sample_dual, CERT_TOL};
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

prop_compose! {
    fn small_instance(max_n: usize, max_m: usize)(n in 1..=max_n, m in 1..=max_m)(
        rewards in prop::collection::vec(0.0..=1.0f64, n),
        columns in prop::collection::vec(prop::collection::vec(0.01..=1.0f64, m), n),
        budget in 0.05..3.0f64,
    ) -> PackingInstance {
        PackingInstance::new(rewards, columns, budget).unwrap()
    }
}

prop_compose! {
    /// Columns with exact zeros and rewards on a coarse grid, to provoke ties.
    fn tied_instance()(n in 1..=6usize, m in 1..=3usize)(
        rewards in prop::collection::vec(0..4u8, n),
        columns in prop::collection::vec(prop::collection::vec(0..=4u8, m), n),
        budget in 1..6u8,
    ) -> Option<PackingInstance> {
        let columns: Vec<Vec<f64>> = columns.iter().map(|c| c.iter().map(|&v| f64::from(v) / 4.0).collect()).collect();
        if columns.iter().any(|c| c.iter().all(|&v| v == 0.0)) {
            return None;
        }
        PackingInstance::new(rewards.iter().map(|&r| f64::from(r)).collect(), columns, f64::from(budget) / 2.0).ok()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration(inst in small_instance(6, 3)) {
        let sol = solve(&inst, None).unwrap();
        let oracle = brute_force_opt(&inst).unwrap();
        prop_assert!(close(sol.value, oracle, 1e-9), "simplex {} oracle {}", sol.value, oracle);
    }

    #[test]
    fn simplex_matches_on_ties(inst in tied_instance()) {
        prop_assume!(inst.is_some());
        let inst = inst.unwrap();
        let sol = solve(&inst, None).unwrap();
        let oracle = brute_force_opt(&inst).unwrap();
        prop_assert!(close(sol.value, oracle, 1e-9), "simplex {} oracle {}", sol.value, oracle);
    }

    #[test]
    fn solution_is_certified(inst in small_instance(12, 4)) {
        let sol = solve(&inst, None).unwrap();
        prop_assert!(sol.x.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        prop_assert!(sol.p.iter().all(|&p| p >= 0.0));
        prop_assert!(sol.alpha.iter().all(|&a| a >= 0.0));
        for i in 0..inst.m {
            let load: f64 = (0..inst.n).map(|t| inst.columns[t][i] * sol.x[t]).sum();
            prop_assert!(load <= inst.budget + CERT_TOL * inst.budget.max(1.0));
        }
        prop_assert!(close(sol.value, sol.dual_value(), CERT_TOL));
        let value: f64 = sol.x.iter().zip(&inst.rewards).map(|(x, r)| x * r).sum();
        prop_assert!(close(sol.value, value, 1e-9));
        // dual feasibility: p·a + α ≥ π
        for t in 0..inst.n {
            let priced: f64 = sol.p.iter().zip(&inst.columns[t]).map(|(p, a)| p * a).sum();
            prop_assert!(priced + sol.alpha[t] >= inst.rewards[t] - CERT_TOL);
        }
    }

    #[test]
    fn value_is_monotone_and_concave_in_budget(inst in small_instance(10, 3), f in 1.0..3.0f64) {
        let lo = solve(&inst, None).unwrap().value;
        let hi = solve(&inst, Some(inst.budget * f)).unwrap().value;
        prop_assert!(hi >= lo - 1e-9);
        // concavity through the origin: OPT(fB) ≤ f·OPT(B)
        prop_assert!(hi <= f * lo + 1e-9 * hi.max(1.0));
    }

    #[test]
    fn value_scales_with_rewards(inst in small_instance(10, 3), c in 0.1..10.0f64) {
        let base = solve(&inst, None).unwrap().value;
        let scaled = PackingInstance::new(inst.rewards.iter().map(|r| r * c).collect(), inst.columns.clone(), inst.budget).unwrap();
        prop_assert!(close(solve(&scaled, None).unwrap().value, c * base, 1e-9));
    }

    #[test]
    fn row_normalization_preserves_opt(inst in small_instance(8, 3), f in prop::collection::vec(0.3..=1.0f64, 3)) {
        // row i scaled by f_i on both sides has the same feasible set
        let rhs: Vec<f64> = (0..inst.m).map(|i| inst.budget * f[i]).collect();
        let columns: Vec<Vec<f64>> = inst.columns.iter().map(|c| c.iter().zip(&f).map(|(a, s)| a * s).collect()).collect();
        let normalized = normalize_budgets(inst.rewards.clone(), columns, &rhs).unwrap();
        let min_rhs = rhs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((normalized.budget - min_rhs).abs() <= 1e-15);
        let reference = solve(&inst, None).unwrap().value;
        let value = solve(&normalized, None).unwrap().value;
        prop_assert!(close(value, reference, 1e-9), "normalized {value} vs {reference}");
    }

    #[test]
    fn general_position_moves_opt_by_at_most_n_magnitude(inst in small_instance(10, 3), seed in any::<u64>(), mag in 0.0..1e-3f64) {
        let base = solve(&inst, None).unwrap().value;
        let noisy = inst.ensure_general_position(mag, seed);
        let value = solve(&noisy, None).unwrap().value;
        prop_assert!(value >= base - 1e-9);
        prop_assert!(value <= base + inst.n as f64 * mag + 1e-9);
    }

    #[test]
    fn json_round_trip_is_bit_exact(inst in small_instance(8, 3)) {
        let back = PackingInstance::from_json_str(&inst.to_json_string().unwrap()).unwrap();
        prop_assert_eq!(back, inst);
    }
}

#[test]
fn sample_dual_with_full_sample_equals_opt() {
    let inst = generate(&GeneratorSpec::new(Family::Uniform, 21), 40, 3, 4.0).unwrap();
    let all: Vec<usize> = (0..40).rev().collect();
    let sample = solve_sample_dual(&inst, &all, 1.0).unwrap();
    let full = solve(&inst, None).unwrap();
    assert!(close(sample.value, full.value, 1e-9));
    assert_eq!(sample.x.len(), 40);
    // x is reported in sample order
    let value: f64 = all.iter().zip(&sample.x).map(|(&t, x)| inst.rewards[t] * x).sum();
    assert!(close(value, sample.value, 1e-9));
}

#[test]
fn sample_budget_is_scaled() {
    let inst = generate(&GeneratorSpec::new(Family::Knapsack, 3), 100, 1, 20.0).unwrap();
    let sample: Vec<usize> = (0..10).collect();
    let sol = solve_sample_dual(&inst, &sample, 0.5).unwrap();
    assert!((sol.budget - 1.0).abs() < 1e-12);
    // unit columns with budget 1: best single reward
    let best = sample.iter().map(|&t| inst.rewards[t]).fold(0.0, f64::max);
    assert!(close(sol.value, best, 1e-9));
    assert!(solve_sample_dual(&inst, &[1, 1], 1.0).is_err());
    assert!(solve_sample_dual(&inst, &[100], 1.0).is_err());
    assert!(solve_sample_dual(&inst, &sample, 0.0).is_err());
}

#[test]
fn larger_instances_certify() {
    for (family, m) in [(Family::Uniform, 4), (Family::KSubspace { k: 3 }, 5), (Family::Arc { delta: 0.001 }, 2)] {
        let inst = generate(&GeneratorSpec::new(family, 5), 400, m, 30.0).unwrap();
        let sol = solve(&inst, None).unwrap();
        assert!(close(sol.value, sol.dual_value(), CERT_TOL));
    }
}
