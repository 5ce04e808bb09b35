mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ordbasis::basis::{choose_basis, BasisConfig};
use ordbasis::data::{generate, load_csv, save_csv, Dataset, GenParams, Kind};
use ordbasis::embed::embed_all;
use ordbasis::oracle::GroundTruthOracle;
use ordbasis::points::PointSet;
use ordbasis::ranks::RankTable;
use ordbasis::refine::{
    basis_chains, basis_triples, chain_triples, harvest_knn_chains, Encoding, Triple,
    TripleOrigin, TripleSet,
};
use ordbasis::soe::soe_loss_grad;

use common::dist_to_hull;

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointSet {
    PointSet::new(d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn truly_closer(p: &PointSet, t: &Triple) -> bool {
    let (a, b) = (p.dist2(t.head, t.closer), p.dist2(t.head, t.farther));
    a < b || (a == b && t.closer < t.farther)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn harvested_triples_agree_with_the_metric(seed in any::<u64>(), n in 8usize..60, d in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_points(&mut rng, n, d);
        let mut oracle = GroundTruthOracle::from_points(p.clone());
        let run = choose_basis(&mut oracle, &BasisConfig { seed, ..Default::default() }).unwrap();
        let emb = embed_all(&run).unwrap().to_positions();
        let chains = basis_chains(&run.ranks).unwrap();
        let knn = harvest_knn_chains(&emb, &mut oracle, 3).unwrap();
        for encoding in [Encoding::Consecutive, Encoding::Dyadic] {
            for set in [chain_triples(&chains, encoding).unwrap(), chain_triples(&knn, encoding).unwrap()] {
                for t in set.triples() {
                    prop_assert!(truly_closer(&p, t), "{t:?}");
                }
            }
        }
        let consecutive = basis_triples(&run.ranks).unwrap();
        prop_assert_eq!(consecutive.len(), run.ranks.heads().len() * (n - 2));
    }

    #[test]
    fn inserting_twice_keeps_one_copy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = TripleSet::new();
        let mut distinct = std::collections::HashSet::new();
        for _ in 0..60 {
            let ids = rand::seq::index::sample(&mut rng, 10, 3).into_vec();
            let t = Triple::new(ids[0], ids[1], ids[2]);
            let fresh = set.insert(t, TripleOrigin::External).unwrap();
            prop_assert_eq!(fresh, distinct.insert((ids[0], ids[1], ids[2])));
        }
        prop_assert_eq!(set.len(), distinct.len());
        let text = set.to_text();
        let back = TripleSet::parse(&text, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back.triples(), set.triples());
    }

    #[test]
    fn conv_hat_keeps_everything_inside_the_hull(seed in any::<u64>(), n in 10usize..120, d in 2usize..4, m in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_points(&mut rng, n, d);
        let centers = rand::seq::index::sample(&mut rng, n, m.min(d + 1)).into_vec();
        let mut oracle = GroundTruthOracle::from_points(p.clone());
        let mut table = RankTable::new(n);
        for &c in &centers {
            table.sort_head(&mut oracle, c).unwrap();
        }
        let hat = table.conv_hat(&centers).unwrap();
        let verts: Vec<Vec<f64>> = centers.iter().map(|&c| p.row(c).to_vec()).collect();
        for x in 0..n {
            if dist_to_hull(p.row(x), &verts) < 1e-12 {
                prop_assert!(hat.contains(&x), "object {x} lies in conv(P) but not in conv_hat");
            }
        }
        for &c in &centers {
            prop_assert!(hat.contains(&c));
        }
        // skyline: nothing in X is strictly closer to every center
        for &c in &hat {
            let beaten = (0..n).any(|x| centers.iter().all(|&a| p.dist2(a, x) < p.dist2(a, c)));
            prop_assert!(!beaten);
        }
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), d in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 9;
        let p = random_points(&mut rng, n, d);
        let triples: Vec<Triple> = (0..30)
            .map(|_| {
                let ids = rand::seq::index::sample(&mut rng, n, 3).into_vec();
                Triple::new(ids[0], ids[1], ids[2])
            })
            .collect();
        let margin = 0.5;
        let (_, grad) = soe_loss_grad(&p, &triples, margin);
        let h = 1e-6;
        for (i, &g) in grad.iter().enumerate() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.as_mut_slice()[i] += h;
            minus.as_mut_slice()[i] -= h;
            let fd = (soe_loss_grad(&plus, &triples, margin).0 - soe_loss_grad(&minus, &triples, margin).0) / (2.0 * h);
            prop_assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0), "{fd} vs {g}");
        }
    }

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>(), n in 3usize..30, d in 1usize..5, labelled in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n * d)
            .map(|_| (rng.random::<f64>() - 0.5) * 10f64.powi(rng.random_range(-8..8)))
            .collect();
        let labels = labelled.then(|| (0..n).map(|_| rng.random_range(-3..10)).collect());
        let ds = Dataset {
            points: PointSet::new(d, coords).unwrap(),
            labels,
            name: "prop".into(),
            seed,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        save_csv(&path, &ds).unwrap();
        let back = load_csv(&path).unwrap();
        prop_assert_eq!(back.points, ds.points);
        prop_assert_eq!(back.labels, ds.labels);
    }
}

#[test]
fn generators_have_the_expected_moments() {
    let params = GenParams::default();
    let n = 20_000;
    let mean = |p: &PointSet, k: usize| p.rows().map(|r| r[k]).sum::<f64>() / p.len() as f64;
    let var = |p: &PointSet, k: usize| {
        let m = mean(p, k);
        p.rows().map(|r| (r[k] - m).powi(2)).sum::<f64>() / p.len() as f64
    };
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();

    let cube = generate(Kind::Cube, n, 3, 1, &params).unwrap().points;
    for k in 0..3 {
        assert!((mean(&cube, k) - 0.5).abs() < 0.01);
        assert!((var(&cube, k) - 1.0 / 12.0).abs() < 0.003);
    }
    let gauss = generate(Kind::Gaussian, n, 3, 2, &params).unwrap().points;
    for k in 0..3 {
        assert!(mean(&gauss, k).abs() < 0.03);
        assert!((var(&gauss, k) - 1.0).abs() < 0.04);
    }
    let sphere = generate(Kind::Sphere, n, 3, 3, &params).unwrap().points;
    assert!(sphere.rows().all(|r| (norm(r) - 1.0).abs() < 1e-12));
    assert!(mean(&sphere, 0).abs() < 0.02);
    // radius^d is uniform on [0, 1] inside a ball
    let ball = generate(Kind::Ball, n, 3, 4, &params).unwrap().points;
    assert!(ball.rows().all(|r| norm(r) <= 1.0));
    let cubed = ball.rows().map(|r| norm(r).powi(3)).sum::<f64>() / n as f64;
    assert!((cubed - 0.5).abs() < 0.01);
    let gmm = generate(Kind::Gmm, n, 2, 5, &params).unwrap();
    let labels = gmm.labels.as_ref().unwrap();
    assert!(labels.iter().all(|&l| (0..5).contains(&l)));
    for c in 0..5 {
        let share = labels.iter().filter(|&&l| l == c).count() as f64 / n as f64;
        assert!((share - 0.2).abs() < 0.02);
    }
}

#[test]
fn generation_is_reproducible() {
    let params = GenParams::default();
    for kind in [Kind::Ball, Kind::Cube, Kind::Gaussian, Kind::Sphere, Kind::Gmm] {
        let a = generate(kind, 50, 3, 9, &params).unwrap();
        let b = generate(kind, 50, 3, 9, &params).unwrap();
        let c = generate(kind, 50, 3, 10, &params).unwrap();
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, c.points);
        assert_eq!(a.name, format!("3d{kind}"));
    }
}
