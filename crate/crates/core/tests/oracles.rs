mod common;

use common::{covering_labels, oracle_forward, random_matrix, rows, tiny_shape};
use dwcl::cluster::{kmeans, silhouette, KMeansConfig};
use dwcl::eval::{accuracy, confusion, hungarian_match, nmi};
use dwcl::linalg::{cosine_similarity, pairwise_distances};
use dwcl::loss::{info_nce, reconstruction_loss};
use dwcl::net::ViewModel;
use dwcl::weights::cmi_weight;
use dwcl::RandomSource;

#[test]
fn distances_against_double_loop() {
    let mut rng = RandomSource::new(11);
    for _ in 0..10 {
        let x = random_matrix(&mut rng, 10, 4);
        let d = pairwise_distances(&x).unwrap();
        let o = dwcl_oracles::distances(&rows(&x));
        for i in 0..10 {
            for j in 0..10 {
                assert!((d[(i, j)] - o[i][j]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn cosine_against_scalar_loop() {
    let mut rng = RandomSource::new(12);
    let a = random_matrix(&mut rng, 5, 3);
    let b = random_matrix(&mut rng, 4, 3);
    let s = cosine_similarity(&a, &b).unwrap();
    for i in 0..5 {
        for j in 0..4 {
            assert!((s[(i, j)] - dwcl_oracles::cosine(a.row(i), b.row(j))).abs() < 1e-12);
        }
    }
}

#[test]
fn silhouette_against_brute_force() {
    let mut rng = RandomSource::new(13);
    for _ in 0..30 {
        let n = 4 + rng.below(197);
        let k = 2 + rng.below(4);
        let d = 1 + rng.below(8);
        let x = random_matrix(&mut rng, n, d);
        let labels = covering_labels(&mut rng, n, k);
        let got = silhouette(&x, &labels).unwrap();
        let want = dwcl_oracles::silhouette(&rows(&x), &labels);
        for (g, w) in got.per_instance.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
        let mean = want.iter().sum::<f64>() / n as f64;
        assert!((got.mean - mean).abs() < 1e-10);
    }
}

#[test]
fn cmi_and_nmi_against_contingency_table() {
    let mut rng = RandomSource::new(14);
    for _ in 0..50 {
        let n = 50;
        let k = 2 + rng.below(4);
        let a: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let want = dwcl_oracles::normalized_mi(&a, &b);
        let got = cmi_weight(&a, &b, k).unwrap();
        assert!((got.cmi - want).abs() < 1e-10);
        assert!((got.weight - (want.exp() - 1.0)).abs() < 1e-10);
        assert!((nmi(&a, &b).unwrap() - want).abs() < 1e-10);
    }
}

#[test]
fn hungarian_against_enumeration() {
    let mut rng = RandomSource::new(15);
    for _ in 0..100 {
        let k = 1 + rng.below(6);
        let t: Vec<Vec<u64>> = (0..k).map(|_| (0..k).map(|_| rng.below(20) as u64).collect()).collect();
        let p = hungarian_match(&t).unwrap();
        let mut seen = p.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..k).collect::<Vec<_>>());
        assert_eq!(dwcl_oracles::permutation_score(&t, &p), dwcl_oracles::best_matching(&t));
    }
}

#[test]
fn accuracy_against_enumeration() {
    let mut rng = RandomSource::new(16);
    for _ in 0..30 {
        let k = 2 + rng.below(4);
        let truth: Vec<usize> = (0..40).map(|_| rng.below(k)).collect();
        let pred: Vec<usize> = (0..40).map(|_| rng.below(k)).collect();
        let best = dwcl_oracles::best_matching(&confusion(&pred, &truth, k).unwrap());
        assert_eq!(accuracy(&pred, &truth, k).unwrap(), best as f64 / 40.0);
    }
}

#[test]
fn kmeans_separated_groups() {
    let x = dwcl::Matrix::from_rows(&[vec![0.0], vec![0.1], vec![10.0], vec![10.1]]).unwrap();
    let r = kmeans(&x, &KMeansConfig::new(2, 0)).unwrap();
    assert_eq!(r.labels[0], r.labels[1]);
    assert_eq!(r.labels[2], r.labels[3]);
    assert_ne!(r.labels[0], r.labels[2]);
    let mut c: Vec<f64> = r.centroids.data().to_vec();
    c.sort_by(f64::total_cmp);
    assert!((c[0] - 0.05).abs() < 1e-12 && (c[1] - 10.05).abs() < 1e-12);
}

#[test]
fn kmeans_beats_random_assignments() {
    let mut rng = RandomSource::new(17);
    let centers = [[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]];
    let x = dwcl::Matrix::from_fn(90, 2, |i, j| centers[i % 3][j] + rng.normal());
    let r = kmeans(&x, &KMeansConfig::new(3, 1)).unwrap();
    let xr = rows(&x);
    assert!((r.inertia - dwcl_oracles::inertia(&xr, &r.labels, 3)).abs() < 1e-9);
    for _ in 0..1000 {
        let l: Vec<usize> = (0..90).map(|_| rng.below(3)).collect();
        assert!(r.inertia <= dwcl_oracles::inertia(&xr, &l, 3));
    }
}

#[test]
fn forward_against_scalar_network() {
    let mut rng = RandomSource::new(18);
    for _ in 0..10 {
        let shape = tiny_shape(&mut rng);
        let d = 1 + rng.below(8);
        let model = ViewModel::new(d, &shape, &mut rng).unwrap();
        let x = random_matrix(&mut rng, 5, d);
        let fp = model.forward(&x).unwrap();
        let (hhat, xrec) = oracle_forward(&model, &rows(&x));
        for i in 0..5 {
            for (g, w) in fp.hhat.row(i).iter().zip(&hhat[i]) {
                assert!((g - w).abs() < 1e-10);
            }
            for (g, w) in fp.xrec.row(i).iter().zip(&xrec[i]) {
                assert!((g - w).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn losses_against_scalar_loops() {
    let mut rng = RandomSource::new(19);
    for _ in 0..20 {
        let b = 2 + rng.below(5);
        let d = 1 + rng.below(8);
        let a = random_matrix(&mut rng, b, d);
        let c = random_matrix(&mut rng, b, d);
        let tau = 0.2 + rng.uniform();
        let got = info_nce(&a, &c, tau).unwrap().loss;
        assert!((got - dwcl_oracles::info_nce(&rows(&a), &rows(&c), tau)).abs() < 1e-12);
        let (l, _) = reconstruction_loss(&a, &c).unwrap();
        assert!((l - dwcl_oracles::mse(&rows(&a), &rows(&c))).abs() < 1e-12);
    }
}
