use proptest::prelude::*;

use fedosaa::algorithms::aggregate;
use fedosaa::dataset::{
    parse_libsvm, partition_iid, partition_imbalanced, partition_label_skew, standard_imbalance, Dataset, Example,
    Label, LabelMap, Partition,
};

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    let example = (
        any::<bool>(),
        prop::collection::btree_map(1u32..500, any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..12),
    )
        .prop_map(|(pos, feats)| {
            let label = if pos { Label::Positive } else { Label::Negative };
            Example::new(label, feats.into_iter().collect()).unwrap()
        });
    prop::collection::vec(example, 1..60).prop_map(|ex| Dataset::new(ex, None).unwrap())
}

fn labeled(n: usize, positives: usize) -> Dataset {
    let ex = (0..n)
        .map(|i| {
            let label = if i < positives { Label::Positive } else { Label::Negative };
            Example::new(label, vec![(1, i as f64)]).unwrap()
        })
        .collect();
    Dataset::new(ex, Some(1)).unwrap()
}

/// Disjoint, nonempty clients; returns how many examples were assigned.
fn assert_disjoint(p: &Partition, n: usize) -> usize {
    let mut seen = vec![false; n];
    for k in 0..p.num_clients() {
        assert!(!p.client(k).is_empty(), "client {k} is empty");
        for &i in p.client(k) {
            assert!(!seen[i], "example {i} assigned twice");
            seen[i] = true;
        }
    }
    seen.iter().filter(|&&s| s).count()
}

proptest! {
    #[test]
    fn libsvm_text_reparses_bit_identically(data in dataset_strategy()) {
        let text = data.to_libsvm();
        let map = LabelMap::new(vec![(1.0, Label::Positive), (-1.0, Label::Negative)]);
        let back = parse_libsvm(&text, &map, Some(data.dim())).unwrap();
        prop_assert_eq!(back.len(), data.len());
        for (a, b) in data.examples().iter().zip(back.examples()) {
            prop_assert_eq!(a.label, b.label);
            let bits = |e: &Example| e.features.iter().map(|&(i, v)| (i, v.to_bits())).collect::<Vec<_>>();
            prop_assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn iid_partition_is_disjoint_cover(n in 1usize..400, k in 1usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let data = labeled(n, n / 2);
        let p = partition_iid(&data, k, seed).unwrap();
        prop_assert_eq!(assert_disjoint(&p, n), n - n % k);
        prop_assert!(p.client_sizes().iter().all(|&s| s == n / k));
    }

    #[test]
    fn imbalanced_partition_is_disjoint_cover(n in 500usize..3000, k in 3usize..12, seed in any::<u64>()) {
        let data = labeled(n, n / 3);
        let p = partition_imbalanced(&data, &standard_imbalance(k).unwrap(), seed).unwrap();
        prop_assert_eq!(p.num_clients(), k);
        prop_assert_eq!(assert_disjoint(&p, n), n);
    }

    #[test]
    fn label_skew_partition_is_disjoint_cover(n in 100usize..600, frac in 0.2f64..0.8, k in 2usize..8, seed in any::<u64>()) {
        let data = labeled(n, (n as f64 * frac) as usize);
        if let Ok(p) = partition_label_skew(&data, k, seed) {
            prop_assert_eq!(assert_disjoint(&p, n), n);
        }
    }

    #[test]
    fn aggregate_of_equal_updates_is_that_update(
        w in prop::collection::vec(-1e6f64..1e6, 1..20),
        sizes in prop::collection::vec(1usize..100, 1..10),
    ) {
        let updates = vec![w.clone(); sizes.len()];
        let avg = aggregate(&updates, &sizes).unwrap();
        for (a, b) in avg.iter().zip(&w) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
