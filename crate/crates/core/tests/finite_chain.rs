mod common;

use proptest::prelude::*;
use zhang_sandpile::finite::transient_marginals;
use zhang_sandpile::{
    empirical_tv_distance, rng, AdditionEvent, ChainConfig, ChainParams, ChainProcess,
    TopplingPolicy,
};

const POLICIES: [TopplingPolicy; 3] = [
    TopplingPolicy::LeftmostFirst,
    TopplingPolicy::RightmostFirst,
    TopplingPolicy::UniformRandom,
];

fn stable_chain(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 1..=max_n)
}

#[test]
fn three_orders_of_one_start() {
    let start = [0.0, 0.0, 1.4, 1.2, 0.0, 0.0];
    let rows: [(TopplingPolicy, [f64; 6], [u64; 6]); 3] = [
        (
            TopplingPolicy::LeftmostFirst,
            [0.0, 0.7, 0.95, 0.0, 0.95, 0.0],
            [0, 0, 1, 1, 0, 0],
        ),
        (
            TopplingPolicy::RightmostFirst,
            [0.5, 0.5, 0.525, 0.0, 0.525, 0.55],
            [0, 1, 2, 3, 1, 0],
        ),
        (
            TopplingPolicy::ParallelRounds,
            [0.0, 0.7, 0.6, 0.7, 0.6, 0.0],
            [0, 0, 1, 1, 0, 0],
        ),
    ];
    let mut r = rng::stream(0, 0);
    for (policy, heights, counts) in rows {
        let mut c = ChainConfig::new(start.to_vec()).unwrap();
        let log = c.stabilize(policy, &mut r).unwrap();
        assert_eq!(log.counts, counts, "{policy:?}");
        for (h, want) in c.heights().iter().zip(heights) {
            assert!((h - want).abs() <= 1e-12, "{policy:?}: {:?}", c.heights());
        }
        assert!(log.dissipated.abs() <= 1e-12);
    }
}

#[test]
fn two_full_sites_cascade() {
    // (0.9, 0.9) + 0.2 at site 1: (1.1, 0.9) -> (0, 1.45) -> (0.725, 0).
    let p = ChainParams::new(2, 0.0, 1.0).unwrap();
    let mut proc = ChainProcess::new(p, ChainConfig::new(vec![0.9, 0.9]).unwrap(), 0).unwrap();
    let script = [
        AdditionEvent {
            t: 1,
            site: 0,
            amount: 0.2,
        },
        AdditionEvent {
            t: 2,
            site: 1,
            amount: 0.5,
        },
    ];
    let traj = proc.scripted_run(&script).unwrap();
    assert_eq!(traj.logs[0].counts, vec![1, 1]);
    assert_eq!(traj.logs[0].sequence, vec![0, 1]);
    assert!((traj.logs[0].dissipated - (0.55 + 0.725)).abs() < 1e-12);
    let want = [[0.9, 0.9], [0.725, 0.0], [0.725, 0.5]];
    for (c, w) in traj.configs.iter().zip(want) {
        assert!(c.max_abs_diff(&ChainConfig::new(w.to_vec()).unwrap()) < 1e-12);
    }
    assert!(traj.logs[1].is_empty());
}

#[test]
fn single_site_stationary_mean_is_one_over_e() {
    // For N=1, a=0, b=1 heights are the partial sums of uniforms below 1, so
    // the stationary law has an atom 1/e at 0 and density e^{x-1} on (0, 1).
    let p = ChainParams::new(1, 0.0, 1.0).unwrap();
    let series = |seed| {
        let mut proc = ChainProcess::new(p, ChainConfig::zeros(1).unwrap(), seed).unwrap();
        (0..400_000)
            .map(|_| {
                proc.step().unwrap();
                proc.config().heights()[0]
            })
            .collect::<Vec<f64>>()
    };
    let (m1, se1) = common::batch_mean_se(&series(1), 100);
    let (m2, se2) = common::batch_mean_se(&series(2), 100);
    let e_inv = (-1.0f64).exp();
    assert!((m1 - e_inv).abs() < 3.0 * se1, "{m1} vs {e_inv} ± {se1}");
    assert!((m2 - e_inv).abs() < 3.0 * se2, "{m2} vs {e_inv} ± {se2}");
    assert!((m1 - m2).abs() < 3.0 * (se1 * se1 + se2 * se2).sqrt());
}

#[test]
fn runs_from_different_starts_forget_them() {
    let p = ChainParams::new(3, 0.3, 0.9).unwrap();
    let mut lo = ChainProcess::new(p, ChainConfig::zeros(3).unwrap(), 1).unwrap();
    let mut hi = ChainProcess::new(p, ChainConfig::new(vec![0.99; 3]).unwrap(), 2).unwrap();
    let s1 = lo.run_stationary(10_000, 200_000, 32).unwrap();
    let s2 = hi.run_stationary(10_000, 200_000, 32).unwrap();
    for x in 0..3 {
        assert!(empirical_tv_distance(&s1, &s2, x).unwrap() < 0.03);
    }
}

#[test]
fn transient_laws_approach_each_other() {
    let p = ChainParams::new(3, 0.3, 0.9).unwrap();
    let checkpoints = [1, 4, 16, 64];
    let lo = transient_marginals(
        p,
        &ChainConfig::zeros(3).unwrap(),
        &checkpoints,
        4000,
        1,
        16,
    )
    .unwrap();
    let hi = ChainConfig::new(vec![0.99; 3]).unwrap();
    let hi = transient_marginals(p, &hi, &checkpoints, 4000, 2, 16).unwrap();
    let tv: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| empirical_tv_distance(a, b, 1).unwrap())
        .collect();
    assert!(tv[0] > 0.5, "{tv:?}");
    assert!(tv[3] < 0.1, "{tv:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn single_addition_is_abelian(
        h in stable_chain(12),
        site in any::<prop::sample::Index>(),
        amount in 0.0..1.0f64,
        seed in any::<u64>(),
    ) {
        let x = site.index(h.len());
        let mut results = Vec::new();
        for policy in POLICIES {
            let mut c = ChainConfig::new(h.clone()).unwrap();
            c.add(x, amount).unwrap();
            let log = c.stabilize(policy, &mut rng::stream(seed, 0)).unwrap();
            prop_assert!(c.is_stable());
            results.push((c, log));
        }
        for (c, log) in &results[1..] {
            prop_assert_eq!(&log.counts, &results[0].1.counts);
            prop_assert!(c.max_abs_diff(&results[0].0) <= 1e-12);
        }
    }

    #[test]
    fn topple_moves_mass_to_neighbours_or_out(
        h in prop::collection::vec(0.0..2.0f64, 1..=20),
        site in any::<prop::sample::Index>(),
    ) {
        let x = site.index(h.len());
        let mut c = ChainConfig::new(h.clone()).unwrap();
        let before = c.total_mass();
        let t = c.topple(x).unwrap();
        prop_assert_eq!(t.toppled, h[x] >= 1.0);
        prop_assert!((c.total_mass() + t.dissipated - before).abs() <= 1e-12);
        if t.toppled {
            prop_assert_eq!(c.heights()[x], 0.0);
            let boundary_shares = usize::from(x == 0) + usize::from(x + 1 == h.len());
            prop_assert!((t.dissipated - boundary_shares as f64 * h[x] / 2.0).abs() <= 1e-12);
        } else {
            prop_assert_eq!(c.heights(), &h[..]);
        }
    }

    #[test]
    fn filling_the_empty_end_sweeps_to_the_other(
        full in prop::collection::vec(0.5..1.0f64, 1..20),
        last in 0.0..1.0f64,
        extra in 0.0..0.5f64,
    ) {
        let n = full.len() + 1;
        let mut h = full;
        h.push(last);
        let mut c = ChainConfig::new(h).unwrap();
        c.add(n - 1, 1.0 - last + extra).unwrap();
        let log = c.stabilize(TopplingPolicy::LeftmostFirst, &mut rng::stream(0, 0)).unwrap();
        prop_assert_eq!(log.counts, vec![1; n]);
        prop_assert!(c.in_class_e(0).unwrap(), "{:?}", c.heights());
    }

    #[test]
    fn process_is_deterministic_and_stays_stable(
        n in 1usize..10,
        a in 0.0..0.9f64,
        width in 0.01..0.1f64,
        seed in any::<u64>(),
    ) {
        let p = ChainParams::new(n, a, a + width).unwrap();
        let mut one = ChainProcess::new(p, ChainConfig::zeros(n).unwrap(), seed).unwrap();
        let mut two = ChainProcess::new(p, ChainConfig::zeros(n).unwrap(), seed).unwrap();
        for _ in 0..200 {
            let x = one.step().unwrap();
            let y = two.step().unwrap();
            prop_assert_eq!(x.event, y.event);
            prop_assert_eq!(x.log.counts, y.log.counts);
            prop_assert!(one.config().is_stable());
            prop_assert!(p.contains_amount(x.event.amount));
            prop_assert!(x.event.site < n);
        }
        prop_assert_eq!(one.config(), two.config());
    }

    #[test]
    fn heavy_additions_topple_full_sites(
        n in 2usize..10,
        a in 0.5..0.9f64,
        seed in any::<u64>(),
    ) {
        let p = ChainParams::new(n, a, 1.0).unwrap();
        let mut proc = ChainProcess::new(p, ChainConfig::zeros(n).unwrap(), seed).unwrap();
        for _ in 0..300 {
            let before = proc.config().clone();
            let out = proc.step().unwrap();
            if before.heights()[out.event.site] >= 0.5 {
                prop_assert!(out.log.counts[out.event.site] >= 1);
            }
        }
    }
}
