use proptest::prelude::*;
use uttgenre_core::kmeans::{kmeans, KMeansConfig};

fn blobs() -> Vec<f64> {
    let centres = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
    let mut pts = Vec::new();
    for (i, (cx, cy)) in centres.iter().enumerate() {
        for j in 0..20 {
            let a = (i * 20 + j) as f64 * 0.7;
            pts.extend([cx + a.sin() * 0.5, cy + a.cos() * 0.5]);
        }
    }
    pts
}

#[test]
fn separated_blobs_are_recovered() {
    let c = kmeans(&blobs(), 2, 3, 7, &KMeansConfig::default()).unwrap();
    for block in c.assignments.chunks(20) {
        assert!(block.iter().all(|&a| a == block[0]));
    }
    let mut firsts: Vec<usize> = c.assignments.chunks(20).map(|b| b[0]).collect();
    firsts.sort();
    assert_eq!(firsts, [0, 1, 2]);
}

#[test]
fn one_cluster_is_the_mean() {
    let pts = [1.0, 2.0, 3.0, 10.0];
    let c = kmeans(&pts, 1, 1, 0, &KMeansConfig::default()).unwrap();
    assert!((c.centroids[0] - 4.0).abs() < 1e-12);
}

#[test]
fn one_point_per_cluster_has_no_inertia() {
    let pts = [1.0, 5.0, 2.0, 9.0, 3.0];
    let c = kmeans(&pts, 1, 5, 3, &KMeansConfig::default()).unwrap();
    assert!(c.inertia.abs() < 1e-12);
    assert_eq!(c.cluster_sizes(), vec![1; 5]);
}

#[test]
fn too_many_clusters_is_an_error() {
    assert!(kmeans(&[1.0, 2.0], 1, 3, 0, &KMeansConfig::default()).is_err());
}

fn cloud() -> impl Strategy<Value = (Vec<f64>, usize, usize, u64)> {
    (1usize..4, 6usize..60, 1usize..6, any::<u64>()).prop_flat_map(|(dim, n, k, seed)| {
        (prop::collection::vec(-20.0..20.0f64, n * dim), Just(dim), Just(k.min(n)), Just(seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn same_seed_same_result((pts, dim, k, seed) in cloud()) {
        let cfg = KMeansConfig { restarts: 3, ..KMeansConfig::default() };
        let a = kmeans(&pts, dim, k, seed, &cfg);
        let b = kmeans(&pts, dim, k, seed, &cfg);
        prop_assert_eq!(a.ok(), b.ok());
    }

    #[test]
    fn centroids_are_member_means((pts, dim, k, seed) in cloud()) {
        let cfg = KMeansConfig { restarts: 2, ..KMeansConfig::default() };
        if let Ok(c) = kmeans(&pts, dim, k, seed, &cfg) {
            for (ci, members) in c.members().iter().enumerate() {
                if members.is_empty() {
                    continue;
                }
                for d in 0..dim {
                    let m = members.iter().map(|&i| pts[i * dim + d]).sum::<f64>() / members.len() as f64;
                    prop_assert!((c.centroid(ci)[d] - m).abs() < 1e-6 * m.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn inertia_never_rises((pts, dim, k, seed) in cloud()) {
        let cfg = KMeansConfig { restarts: 1, record_history: true, ..KMeansConfig::default() };
        if let Ok(c) = kmeans(&pts, dim, k, seed, &cfg) {
            for w in c.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-9);
            }
        }
    }
}
