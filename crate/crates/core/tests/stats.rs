use bmlmc::stats::{tree_reduce, LevelAccumulator, MlmcDataset};
use proptest::prelude::*;

/// Two-pass mean and centered second moment with compensated sums.
fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = neumaier(values.iter().copied()) / n;
    let s2 = neumaier(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, s2)
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn accumulate(level: usize, values: &[f64]) -> LevelAccumulator {
    let mut acc = LevelAccumulator::new(level);
    for &v in values {
        acc.accumulate(v, 0.0, 1.0).unwrap();
    }
    acc
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// Positive values whose magnitudes span `1e-3..1e6`.
fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((1.0f64..10.0, -3i32..6), 2..3000)
        .prop_map(|v| v.into_iter().map(|(m, e)| m * 10f64.powi(e)).collect())
}

fn split(values: &[f64], cuts: &[usize]) -> Vec<LevelAccumulator> {
    let mut cuts: Vec<usize> = cuts.iter().map(|c| c % (values.len() + 1)).collect();
    cuts.push(0);
    cuts.push(values.len());
    cuts.sort_unstable();
    cuts.windows(2)
        .map(|w| accumulate(0, &values[w[0]..w[1]]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn merged_partitions_match_two_pass(
        values in values(),
        cuts in prop::collection::vec(any::<usize>(), 0..12),
    ) {
        let (mean, s2) = two_pass(&values);
        let parts = split(&values, &cuts);
        let mut sequential = LevelAccumulator::new(0);
        for p in &parts {
            sequential.merge_from(p).unwrap();
        }
        let tree = tree_reduce(&parts, 0).unwrap();
        for acc in [&sequential, &tree] {
            prop_assert_eq!(acc.count, values.len() as u64);
            prop_assert!(rel(acc.mean_q, mean) <= 1e-12, "mean {} vs {}", acc.mean_q, mean);
            prop_assert!(rel(acc.s2_q, s2) <= 1e-10, "s2 {} vs {}", acc.s2_q, s2);
            prop_assert!(rel(acc.mean_y, mean) <= 1e-12);
            prop_assert!(rel(acc.s2_y, s2) <= 1e-10);
        }
    }

    #[test]
    fn merge_is_associative_up_to_rounding(
        a in values(), b in values(), c in values(),
    ) {
        let (a, b, c) = (accumulate(2, &a), accumulate(2, &b), accumulate(2, &c));
        let left = a.merge(&b).unwrap().merge(&c).unwrap();
        let right = a.merge(&b.merge(&c).unwrap()).unwrap();
        prop_assert_eq!(left.count, right.count);
        prop_assert!(rel(left.mean_q, right.mean_q) <= 1e-13);
        prop_assert!(rel(left.s2_q, right.s2_q) <= 1e-11);
        prop_assert_eq!(left.total_cost, right.total_cost);
    }

    #[test]
    fn empty_is_a_bitwise_identity(values in values()) {
        let acc = accumulate(1, &values);
        let empty = LevelAccumulator::new(1);
        prop_assert_eq!(&acc.merge(&empty).unwrap(), &acc);
        prop_assert_eq!(&empty.merge(&acc).unwrap(), &acc);
    }

    #[test]
    fn dataset_merge_adds_counts(
        old in prop::collection::vec(0u64..50, 1..5),
        new in prop::collection::vec(0u64..50, 1..6),
    ) {
        let build = |counts: &[u64]| {
            let levels = counts
                .iter()
                .enumerate()
                .map(|(l, &m)| {
                    let values: Vec<f64> = (0..m).map(|i| i as f64 * 0.5 + l as f64).collect();
                    accumulate(l, &values)
                })
                .collect();
            MlmcDataset::from_levels(levels).unwrap()
        };
        let merged = build(&old).merge(&build(&new)).unwrap();
        let n = old.len().max(new.len());
        prop_assert_eq!(merged.n_levels(), n);
        for l in 0..n {
            let expected = old.get(l).copied().unwrap_or(0) + new.get(l).copied().unwrap_or(0);
            prop_assert_eq!(merged.counts()[l], expected);
        }
    }
}

#[test]
fn large_partitioned_dataset() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let values: Vec<f64> = (0..100_000)
        .map(|_| rng.random_range(1.0..10.0) * 10f64.powi(rng.random_range(-3..=6)))
        .collect();
    let (mean, s2) = two_pass(&values);
    for parts in [1usize, 7, 64, 1000] {
        let cuts: Vec<usize> = (0..parts)
            .map(|_| rng.random_range(0..=values.len()))
            .collect();
        let acc = tree_reduce(&split(&values, &cuts), 0).unwrap();
        assert!(rel(acc.mean_q, mean) <= 1e-12);
        assert!(rel(acc.s2_q, s2) <= 1e-10);
    }
}
