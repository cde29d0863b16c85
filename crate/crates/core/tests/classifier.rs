use proptest::prelude::*;
use uttgenre_core::classifier::{grouped_folds, stratified_folds, train_svm, SvmConfig};
use uttgenre_core::corpus::Label;

fn is_partition(folds: &[Vec<usize>], n: usize) -> bool {
    let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
    all.sort_unstable();
    all == (0..n).collect::<Vec<_>>()
}

fn labels() -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(prop_oneof![Just(Label::High), Just(Label::Low)], 10..120)
}

proptest! {
    #[test]
    fn stratified_folds_partition_and_balance(l in labels(), k in 2usize..8, seed in any::<u64>()) {
        let folds = stratified_folds(&l, k, seed);
        prop_assert_eq!(folds.len(), k);
        prop_assert!(is_partition(&folds, l.len()));
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let highs = l.iter().filter(|x| **x == Label::High).count() as f64;
        for f in &folds {
            let h = f.iter().filter(|&&i| l[i] == Label::High).count() as f64;
            prop_assert!((h - highs / k as f64).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn grouped_folds_keep_groups_together(g in prop::collection::vec(0u8..15, 10..100), k in 2usize..6, seed in any::<u64>()) {
        let names: Vec<String> = g.iter().map(|x| format!("T{x}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let folds = grouped_folds(&refs, k, seed);
        prop_assert!(is_partition(&folds, g.len()));
        let mut home = std::collections::BTreeMap::new();
        for (fi, f) in folds.iter().enumerate() {
            for &i in f {
                prop_assert_eq!(*home.entry(g[i]).or_insert(fi), fi);
            }
        }
    }

    #[test]
    fn column_scale_does_not_change_predictions(seed in any::<u64>(), s in 0.01..100.0f64) {
        let mut rng = seed;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![next(), next(), next()]).collect();
        let y: Vec<Label> = x.iter().map(|r| if r[0] + 0.3 * next() > 0.6 { Label::High } else { Label::Low }).collect();
        prop_assume!(y.contains(&Label::High) && y.contains(&Label::Low));
        let scaled: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] * s, r[1], r[2] * s + 3.0]).collect();
        let cfg = SvmConfig::default();
        let a = train_svm(&x, &y, &cfg).unwrap();
        let b = train_svm(&scaled, &y, &cfg).unwrap();
        for (r, q) in x.iter().zip(&scaled) {
            let (da, db) = (a.decision(r), b.decision(q));
            prop_assert!((da - db).abs() < 1e-4, "{da} vs {db}");
        }
    }
}

#[test]
fn separable_data_is_learned() {
    let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
    let y: Vec<Label> = (0..30).map(|i| if i >= 15 { Label::High } else { Label::Low }).collect();
    let m = train_svm(&x, &y, &SvmConfig { c: 100.0, ..SvmConfig::default() }).unwrap();
    for (r, l) in x.iter().zip(&y) {
        assert_eq!(m.predict(r), *l);
    }
    assert!(m.weights[0] > 0.0);
}

#[test]
fn excluded_label_is_rejected() {
    let x = vec![vec![1.0], vec![2.0]];
    assert!(train_svm(&x, &[Label::High, Label::Excluded], &SvmConfig::default()).is_err());
    assert!(train_svm(&x, &[Label::High], &SvmConfig::default()).is_err());
}
