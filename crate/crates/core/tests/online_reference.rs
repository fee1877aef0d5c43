//! Replays each online algorithm with a straightforward reimplementation and
//! compares decisions arrival by arrival.

use packlp::instance::{generate, Family, GeneratorSpec, PackingInstance};
use packlp::online::{
    dpa_schedule, permutation, run_greedy_baseline, run_otp, run_robust_dpa, run_robust_otp, run_sdotp_stage,
    Algorithm, HaltMode, PermutationStream, Runner,
};
use packlp::perturb::perturb_instance;
use packlp::pricing::accepts;
use packlp::solver::solve_sample_dual;
use proptest::prelude::*;

struct Replay {
    decisions: Vec<bool>,
    halted_at: Option<usize>,
}

/// Prices `order[from..to]` with `p`, keeping the window's own load within `cap`.
fn price(
    inst: &PackingInstance,
    order: &[usize],
    from: usize,
    to: usize,
    p: &[f64],
    cap: f64,
    halt: HaltMode,
    out: &mut Replay,
) {
    let mut load = vec![0.0; inst.m];
    let mut stopped = false;
    for pos in from..to {
        let t = order[pos];
        if stopped || !accepts(p, inst.rewards[t], &inst.columns[t]) {
            continue;
        }
        let col = &inst.columns[t];
        if (0..inst.m).all(|i| load[i] + col[i] <= cap) {
            for i in 0..inst.m {
                load[i] += col[i];
            }
            out.decisions[pos] = true;
        } else if halt == HaltMode::Halt {
            stopped = true;
            out.halted_at.get_or_insert(pos);
        }
    }
}

fn replay_otp(inst: &PackingInstance, order: &[usize], eps: f64, halt: HaltMode) -> Replay {
    let n = inst.n;
    let s = (eps * n as f64).floor() as usize;
    let mut out = Replay { decisions: vec![false; n], halted_at: None };
    if s < n {
        let p = solve_sample_dual(inst, &order[..s], 1.0 - eps).unwrap().p;
        price(inst, order, s, n, &p, inst.budget, halt, &mut out);
    }
    out
}

fn replay_dpa(inst: &PackingInstance, order: &[usize], eps: f64, halt: HaltMode) -> Replay {
    let n = inst.n;
    let s0 = (eps * n as f64).floor() as usize;
    let rounds = (1.0 / eps).log2().floor() as u32;
    let mut out = Replay { decisions: vec![false; n], halted_at: None };
    for i in 0..rounds {
        let s = s0 * 2usize.pow(i);
        if s >= n {
            break;
        }
        let delta = (eps / 2f64.powi(i as i32)).sqrt();
        let p = solve_sample_dual(inst, &order[..s], 1.0 - delta).unwrap().p;
        price(inst, order, s, (2 * s).min(n), &p, s as f64 / n as f64 * inst.budget, halt, &mut out);
    }
    out
}

fn replay_greedy(inst: &PackingInstance, order: &[usize]) -> Vec<bool> {
    let mut load = vec![0.0; inst.m];
    order
        .iter()
        .map(|&t| {
            let col = &inst.columns[t];
            let fits = (0..inst.m).all(|i| load[i] + col[i] <= inst.budget);
            if fits {
                (0..inst.m).for_each(|i| load[i] += col[i]);
            }
            fits
        })
        .collect()
}

fn value_of(inst: &PackingInstance, order: &[usize], decisions: &[bool]) -> f64 {
    order.iter().zip(decisions).filter(|(_, &d)| d).map(|(&t, _)| inst.rewards[t]).sum()
}

fn families() -> Vec<(Family, usize)> {
    vec![
        (Family::Uniform, 3),
        (Family::KSubspace { k: 3 }, 2),
        (Family::KSubspace { k: 1 }, 3),
        (Family::Arc { delta: 0.001 }, 2),
        (Family::Knapsack, 1),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn otp_matches_replay(fam in 0..5usize, seed in any::<u64>(), order_seed in any::<u64>(), n in 20..300usize, b in 2.0..30.0f64, eps in 0.05..0.5f64, skip in any::<bool>()) {
        let (family, m) = families()[fam];
        let inst = generate(&GeneratorSpec::new(family, seed), n, m, b).unwrap();
        prop_assume!((eps * n as f64).floor() >= 1.0);
        let halt = if skip { HaltMode::Skip } else { HaltMode::Halt };
        let order = permutation(n, order_seed);
        let trace = run_otp(&inst, eps, PermutationStream::new(&inst, order.clone()).unwrap(), halt).unwrap();
        let expect = replay_otp(&inst, &order, eps, halt);
        prop_assert_eq!(&trace.decisions, &expect.decisions);
        prop_assert_eq!(trace.halted_at, expect.halted_at);
        prop_assert!((trace.value - value_of(&inst, &order, &expect.decisions)).abs() < 1e-9);
        prop_assert!(trace.feasible);
    }

    #[test]
    fn robust_algorithms_match_replay_on_perturbed_columns(fam in 0..5usize, seed in any::<u64>(), order_seed in any::<u64>(), n in 40..300usize, b in 2.0..30.0f64, eps_pow in 2..5i32) {
        let (family, m) = families()[fam];
        let eps = 0.5f64.powi(eps_pow) + 0.01;
        let inst = generate(&GeneratorSpec::new(family, seed), n, m, b).unwrap();
        prop_assume!((eps * n as f64).floor() >= 1.0);
        let (pert, _) = perturb_instance(&inst, eps).unwrap();
        let order = permutation(n, order_seed);
        let stream = || PermutationStream::new(&inst, order.clone()).unwrap();

        let otp = run_robust_otp(&inst, eps, stream(), HaltMode::Halt).unwrap();
        let expect = replay_otp(&pert, &order, eps, HaltMode::Halt);
        prop_assert_eq!(&otp.decisions, &expect.decisions);
        prop_assert!((otp.value - value_of(&inst, &order, &expect.decisions)).abs() < 1e-9);
        prop_assert!(otp.feasible);

        let dpa = run_robust_dpa(&inst, eps, stream(), HaltMode::Halt).unwrap();
        let expect = replay_dpa(&pert, &order, eps, HaltMode::Halt);
        prop_assert_eq!(&dpa.decisions, &expect.decisions);
        prop_assert_eq!(dpa.halted_at, expect.halted_at);
        prop_assert!(dpa.feasible);
    }

    #[test]
    fn greedy_matches_replay(fam in 0..5usize, seed in any::<u64>(), order_seed in any::<u64>(), n in 1..300usize, b in 0.5..30.0f64) {
        let (family, m) = families()[fam];
        let inst = generate(&GeneratorSpec::new(family, seed), n, m, b).unwrap();
        let order = permutation(n, order_seed);
        let trace = run_greedy_baseline(&inst, PermutationStream::new(&inst, order.clone()).unwrap()).unwrap();
        prop_assert_eq!(&trace.decisions, &replay_greedy(&inst, &order));
        prop_assert!(trace.feasible);
        prop_assert!(trace.halted_at.is_none());
    }

    #[test]
    fn dpa_windows_partition_the_priced_range(n in 1..5000usize, eps in 0.01..0.5f64) {
        let Ok(stages) = dpa_schedule(n, eps) else {
            prop_assert!((eps * n as f64).floor() < 1.0);
            return Ok(());
        };
        let s0 = (eps * n as f64).floor() as usize;
        let rounds = (1.0 / eps).log2().floor() as u32;
        prop_assert_eq!(stages[0].start, s0);
        for w in stages.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
            prop_assert!(w[1].delta < w[0].delta);
        }
        for st in &stages {
            prop_assert_eq!(st.start, st.sample_size);
            prop_assert!(st.end <= n && st.start < st.end);
        }
        let last = stages.last().unwrap();
        prop_assert_eq!(last.end, (s0 << rounds).min(n));
        prop_assert!(stages.len() as u32 <= rounds);
    }
}

#[test]
fn power_of_two_epsilon_covers_every_arrival() {
    let stages = dpa_schedule(1280, 1.0 / 128.0).unwrap();
    assert_eq!(stages.len(), 7);
    assert_eq!(stages[0].start, 10);
    assert_eq!(stages.last().unwrap().end, 1280);
}

#[test]
fn halting_rejects_everything_afterwards() {
    let inst = generate(&GeneratorSpec::new(Family::Knapsack, 1), 400, 1, 5.0).unwrap();
    let mut halted = 0;
    for seed in 0..50 {
        let trace = run_otp(&inst, 0.3, PermutationStream::shuffled(&inst, seed), HaltMode::Halt).unwrap();
        if let Some(h) = trace.halted_at {
            halted += 1;
            assert!(!trace.decisions[h]);
            assert!(trace.decisions[h..].iter().all(|d| !d));
        }
        assert!(trace.decisions[..120].iter().all(|d| !d));
    }
    assert!(halted > 0);
}

#[test]
fn stage_respects_its_cap() {
    let inst = generate(&GeneratorSpec::new(Family::Uniform, 8), 600, 2, 40.0).unwrap();
    for seed in 0..20 {
        let mut stream = PermutationStream::shuffled(&inst, seed);
        stream.skip(100);
        let rec = run_sdotp_stage(&inst, 100, 0.3, &mut stream, HaltMode::Skip).unwrap();
        assert_eq!(rec.window, (100, 200));
        assert!((rec.cap - 100.0 / 600.0 * 40.0).abs() < 1e-12);
        let mut load = [0.0; 2];
        for (pos, &d) in stream.decisions().iter().enumerate() {
            if d {
                let t = stream.order()[pos];
                load[0] += inst.columns[t][0];
                load[1] += inst.columns[t][1];
            }
        }
        assert!(load.iter().all(|&l| l <= rec.cap));
    }
    let mut early = PermutationStream::shuffled(&inst, 0);
    assert!(run_sdotp_stage(&inst, 100, 0.3, &mut early, HaltMode::Halt).is_err());
}

#[test]
fn runner_perturbs_once_and_rejects_foreign_streams() {
    let inst = generate(&GeneratorSpec::new(Family::Uniform, 2), 100, 2, 10.0).unwrap();
    let other = generate(&GeneratorSpec::new(Family::Uniform, 3), 100, 2, 10.0).unwrap();
    let runner = Runner::new(&inst, 0.25, HaltMode::Halt, &Algorithm::ALL).unwrap();
    assert!(runner.perturbed().is_some());
    assert!(runner.run_stream(Algorithm::Otp, PermutationStream::shuffled(&other, 1)).is_err());
    let plain = Runner::new(&inst, 0.25, HaltMode::Halt, &[Algorithm::Otp]).unwrap();
    assert!(plain.run(Algorithm::RobustOtp, permutation(100, 1)).is_err());
    assert!(PermutationStream::new(&inst, vec![0; 100]).is_err());
}

#[test]
fn undecided_arrivals_are_rejected() {
    let inst = PackingInstance::new(vec![1.0, 1.0], vec![vec![0.1], vec![0.1]], 1.0).unwrap();
    let mut stream = PermutationStream::new(&inst, vec![1, 0]).unwrap();
    {
        let a = stream.next_arrival().unwrap();
        assert_eq!(a.index(), 1);
    }
    stream.next_arrival().unwrap().decide(true);
    assert_eq!(stream.decisions(), &[false, true]);
    assert!(stream.next_arrival().is_none());
}
