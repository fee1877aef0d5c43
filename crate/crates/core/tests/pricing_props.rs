use packlp::instance::{generate, Family, GeneratorSpec, PackingInstance};
use packlp::pricing::{
    check_prefix_property, classify, cs_slack_report, direction_classes, occupation, prefix_holds, Classification,
};
use packlp::solver::solve_sample_dual;
use proptest::prelude::*;

prop_compose! {
    fn instance(max_n: usize, max_m: usize)(n in 1..=max_n, m in 1..=max_m)(
        rewards in prop::collection::vec(0.0..=1.0f64, n),
        columns in prop::collection::vec(prop::collection::vec(0.01..=1.0f64, m), n),
        budget in 0.5..5.0f64,
        m in Just(m),
    ) -> (PackingInstance, usize) {
        (PackingInstance::new(rewards, columns, budget).unwrap(), m)
    }
}

fn subsets(n: usize, s: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).filter(|mask| mask.count_ones() as usize == s).map(|mask| (0..n).filter(|&t| mask >> t & 1 == 1).collect()).collect()
}

proptest! {
    #[test]
    fn classification_is_antitone_in_prices(
        (inst, m) in instance(20, 3),
        p in prop::collection::vec(0.0..2.0f64, 3),
        bump in prop::collection::vec(0.0..1.0f64, 3),
    ) {
        let p = &p[..m];
        let q: Vec<f64> = p.iter().zip(&bump).map(|(a, b)| a + b).collect();
        prop_assert!(classify(&inst, &q).is_subset_of(&classify(&inst, p)));
        prop_assert_eq!(classify(&inst, &vec![0.0; m]).count(), inst.rewards.iter().filter(|&&r| r > 0.0).count());
    }

    #[test]
    fn occupation_is_additive(
        (inst, _) in instance(20, 3),
        bits in prop::collection::vec(0..3u8, 20),
    ) {
        let n = inst.n;
        let x = Classification::from_support(n, (0..n).filter(|&t| bits[t] == 1));
        let y = Classification::from_support(n, (0..n).filter(|&t| bits[t] == 2));
        let both = Classification::from_support(n, (0..n).filter(|&t| bits[t] != 0));
        let ox = occupation(&inst, &x, None);
        let oy = occupation(&inst, &y, None);
        let ob = occupation(&inst, &both, None);
        for i in 0..inst.m {
            prop_assert!((ox.0[i] + oy.0[i] - ob.0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_occupation_is_unbiased((inst, _) in instance(8, 2), s in 1..=8usize, bits in prop::collection::vec(any::<bool>(), 8)) {
        let n = inst.n;
        let s = s.min(n);
        let x = Classification::from_support(n, (0..n).filter(|&t| bits[t]));
        let full = occupation(&inst, &x, None);
        let all = subsets(n, s);
        let mut mean = vec![0.0; inst.m];
        for sample in &all {
            for (acc, v) in mean.iter_mut().zip(occupation(&inst, &x, Some(sample)).0) {
                *acc += v / all.len() as f64;
            }
        }
        for (got, want) in mean.iter().zip(&full.0) {
            prop_assert!((got - want).abs() < 1e-9 * want.max(1.0));
        }
    }
}

#[test]
fn prefix_property_on_k_subspace() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for seed in 0..10 {
        let inst = generate(&GeneratorSpec::new(Family::KSubspace { k: 1 + seed as usize % 8 }, seed), 300, 3, 20.0).unwrap();
        let classes = direction_classes(&inst);
        assert!(classes.len() <= 8);
        for _ in 0..200 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..3.0)).collect();
            assert!(check_prefix_property(&inst, &classes, &p).unwrap());
        }
    }
}

#[test]
fn prefix_check_detects_gaps_and_bad_classes() {
    let inst = PackingInstance::new(vec![3.0, 2.0, 1.0], vec![vec![0.5, 1.0], vec![0.5, 1.0], vec![1.0, 0.2]], 2.0).unwrap();
    let classes = direction_classes(&inst);
    assert_eq!(classes, vec![vec![0, 1], vec![2]]);
    assert!(prefix_holds(&inst, &classes, &Classification::from_support(3, [0])).unwrap());
    assert!(!prefix_holds(&inst, &classes, &Classification::from_support(3, [1])).unwrap());
    assert!(prefix_holds(&inst, &[vec![1, 0]], &Classification::empty(3)).is_err());
    assert!(prefix_holds(&inst, &[vec![0, 2]], &Classification::empty(3)).is_err());
    assert!(prefix_holds(&inst, &[vec![5]], &Classification::empty(3)).is_err());
}

#[test]
fn sampled_complementary_slackness_on_general_position() {
    use rand::SeedableRng;
    let eps = 0.1;
    for seed in 0..5u64 {
        let base = generate(&GeneratorSpec::new(Family::Uniform, seed), 1000, 2, 150.0).unwrap();
        let inst = base.ensure_general_position(1e-9, seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = (eps * 1000.0) as usize;
        for _ in 0..5 {
            let sample = packlp::harness::random_subset(1000, s, &mut rng);
            let dual = solve_sample_dual(&inst, &sample, 1.0 - eps).unwrap();
            for row in cs_slack_report(&inst, &sample, eps, &dual) {
                assert!(row.upper_ok && row.lower_ok, "{row:?}");
            }
        }
    }
}
