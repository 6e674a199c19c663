use bootstrap_bench::datagen::{rollout_random_policy, sample_random_policy, Method};
use bootstrap_bench::envs::{observer, BehaviorDescriptor, EnvName, EnvSpec};
use bootstrap_bench::metrics::{
    aggregate, boundary_mass, histogram, records_from_errors, render_table, ErrorKind, ErrorRow,
};
use bootstrap_bench::ns::{descriptor_spread, evaluation_suite_indices, evolve, novelty_score, NsConfig};
use bootstrap_bench::seed;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn brute_novelty(b: &[f64], pool: &[Vec<f64>], k: usize) -> f64 {
    let mut d: Vec<f64> = pool
        .iter()
        .map(|p| p.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = k.min(d.len());
    d[..k].iter().sum::<f64>() / k as f64
}

fn descriptors(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, dim), 1..=n)
}

proptest! {
    #[test]
    fn novelty_matches_brute_force(pool in descriptors(50, 3), b in prop::collection::vec(-5.0..5.0f64, 3), k in 1usize..20) {
        let bd = BehaviorDescriptor { values: b.clone() };
        let owned: Vec<BehaviorDescriptor> = pool.iter().map(|v| BehaviorDescriptor { values: v.clone() }).collect();
        let refs: Vec<&BehaviorDescriptor> = owned.iter().collect();
        let got = novelty_score(&bd, &refs, k).unwrap();
        let want = brute_novelty(&b, &pool, k);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn novelty_ignores_pool_order(pool in descriptors(40, 2), k in 1usize..10, shuffle_seed in any::<u64>()) {
        let owned: Vec<BehaviorDescriptor> = pool.iter().map(|v| BehaviorDescriptor { values: v.clone() }).collect();
        let mut refs: Vec<&BehaviorDescriptor> = owned.iter().collect();
        let b = BehaviorDescriptor { values: vec![0.5, -0.5] };
        let before = novelty_score(&b, &refs, k).unwrap();
        refs.shuffle(&mut seed::rng(shuffle_seed));
        prop_assert_eq!(before.to_bits(), novelty_score(&b, &refs, k).unwrap().to_bits());
    }

    #[test]
    fn histogram_accounts_for_every_sample(xs in prop::collection::vec(-2.0..2.0f64, 0..200), bins in 1usize..40) {
        let h = histogram("x", &xs, bins, (-1.0, 1.0)).unwrap();
        prop_assert_eq!(h.total(), xs.len() as u64);
        prop_assert_eq!(h.bin_edges.len(), bins + 1);
    }

    #[test]
    fn histogram_matches_brute_force_binning(xs in prop::collection::vec(-1.5..1.5f64, 0..200), bins in 1usize..25) {
        let h = histogram("x", &xs, bins, (-1.0, 1.0)).unwrap();
        let mut counts = vec![0u64; bins];
        let mut outside = 0u64;
        for &x in &xs {
            let e = &h.bin_edges;
            match (0..bins).find(|&i| x >= e[i] && (x < e[i + 1] || (i + 1 == bins && x <= e[i + 1]))) {
                Some(i) => counts[i] += 1,
                None => outside += 1,
            }
        }
        prop_assert_eq!(&h.counts, &counts);
        prop_assert_eq!(h.overflow, outside);
    }

    #[test]
    fn boundary_mass_grows_with_the_fraction(raw in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 1..100),
                                             f1 in 0.01..0.49f64, f2 in 0.01..0.49f64) {
        let spec = EnvSpec::new(EnvName::BallInCup);
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let a = boundary_mass(&raw, &spec, lo).unwrap();
        let b = boundary_mass(&raw, &spec, hi).unwrap();
        prop_assert!(a <= b);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn aggregate_matches_formula_and_ignores_order(reps in prop::collection::vec(prop::collection::vec(0.0..10.0f64, 1..8), 1..12),
                                                   shuffle_seed in any::<u64>()) {
        let means: Vec<f64> = reps.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n;
        let std = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n).sqrt();
        let got = aggregate(&reps).unwrap();
        prop_assert!((got.mean - mean).abs() < 1e-12);
        prop_assert!((got.std - std).abs() < 1e-9);
        let mut shuffled = reps.clone();
        shuffled.shuffle(&mut seed::rng(shuffle_seed));
        prop_assert_eq!(aggregate(&shuffled).unwrap(), got);
    }
}

#[test]
fn uniform_samples_fill_bins_evenly() {
    let mut rng = seed::rng(11);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..1.0)).collect();
    let h = histogram("u", &xs, 10, (0.0, 1.0)).unwrap();
    let limit = 5.0 * (1000.0f64 * 0.9).sqrt();
    for &c in &h.counts {
        assert!((c as f64 - 1000.0).abs() < limit, "{:?}", h.counts);
    }
    let width = 0.1;
    let area: f64 = h.density().iter().map(|d| d * width).sum();
    assert!((area - 1.0).abs() < 1e-12);
}

#[test]
fn uniform_one_dimensional_boundary_mass() {
    let spec = EnvSpec::new(EnvName::BallInCup);
    let mut rng = seed::rng(12);
    // Only the first coordinate varies; the rest sit at the center.
    let actions: Vec<Vec<f64>> = (0..20_000)
        .map(|_| vec![rng.random_range(-1.0..1.0), 0.0, 0.0])
        .collect();
    let m = boundary_mass(&actions, &spec, 0.1).unwrap();
    assert!((m - 0.2).abs() < 0.015, "{m}");
    assert!(boundary_mass(&actions, &spec, 0.5).is_err());
}

#[test]
fn archive_grows_by_the_configured_amount() {
    let spec = EnvSpec::new(EnvName::RedundantArmNoWalls);
    let config = NsConfig {
        population_size: 8,
        generations: 4,
        k_nearest: 3,
        archive_add_per_gen: 2,
        suite_size: 5,
        ..NsConfig::default()
    };
    let archive = evolve(&spec, &config, 3).unwrap();
    assert_eq!(archive.len(), 8);
    assert_eq!(archive, evolve(&spec, &config, 3).unwrap());
    let picked = evaluation_suite_indices(archive.len(), 5, 1).unwrap();
    assert!(picked.windows(2).all(|w| w[0] < w[1]));
    assert!(evaluation_suite_indices(archive.len(), 9, 1).is_err());
}

#[test]
fn novelty_search_spreads_outcomes_wider_than_random_policies() {
    let spec = EnvSpec::new(EnvName::BallInCup);
    let config = NsConfig {
        population_size: 20,
        generations: 10,
        k_nearest: 5,
        archive_add_per_gen: 3,
        suite_size: 30,
        ..NsConfig::default()
    };
    for s in 0..5u64 {
        let archive = evolve(&spec, &config, s).unwrap();
        let evolved: Vec<&BehaviorDescriptor> = archive.entries.iter().map(|e| &e.descriptor).collect();
        let random: Vec<BehaviorDescriptor> = (0..archive.len())
            .map(|i| {
                let policy = sample_random_policy(&spec, seed::derive_seed(1000 + s, &[i as u64]));
                observer(&spec, &rollout_random_policy(&spec, &policy).unwrap().states()).unwrap()
            })
            .collect();
        let random: Vec<&BehaviorDescriptor> = random.iter().collect();
        let (e, r) = (descriptor_spread(&evolved), descriptor_spread(&random));
        assert!(e > r, "seed {s}: evolved {e} vs random {r}");
    }
}

#[test]
fn table_reports_the_missing_cell() {
    let row = |method, budget, error| ErrorRow {
        env: EnvName::BallInCup,
        method,
        budget,
        horizon: 1,
        repetition: 0,
        trajectory_id: 0,
        error,
        diverged: false,
        outcome_error: error,
    };
    let rows = vec![
        row(Method::RandomPolicy, 5, 1.0),
        row(Method::RandomActions, 5, 2.0),
        row(Method::Rarph, 5, 1.5),
        row(Method::RandomPolicy, 10, 1.0),
    ];
    let records = records_from_errors(&rows, ErrorKind::FullState).unwrap();
    let err = render_table(&records).unwrap_err().to_string();
    assert!(err.contains("budget 10"), "{err}");
    let complete = records_from_errors(&rows[..3], ErrorKind::FullState).unwrap();
    let table = render_table(&complete).unwrap();
    assert!(table.text.contains("1.000 ± 0.000"));
}
