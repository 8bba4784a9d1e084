use std::collections::BTreeMap;

use grokbench::classgen::{build_family, class_distance, class_mean, euclidean, sample_class};
use grokbench::topology::{
    build_equidistant_spec, build_equivariant_spec, max_clique, realize, subgraph_at_weight, Adjacency, DistanceGraph,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn distance_is_a_metric(a in 0u32..512, b in 0u32..512, c in 0u32..512) {
        let d = |x, y| class_distance(x, y, 9).unwrap();
        prop_assert_eq!(d(a, b), (a ^ b).count_ones());
        prop_assert_eq!(d(a, b), d(b, a));
        prop_assert_eq!(d(a, b) == 0, a == b);
        prop_assert!(d(a, c) <= d(a, b) + d(b, c));
    }

    #[test]
    fn squared_mean_distance_is_code_distance(a in 0u32..512, b in 0u32..512, seed in 0u64..4) {
        let fam = build_family(9, 13, 0.25, seed).unwrap();
        let d = euclidean(&class_mean(&fam, a).unwrap(), &class_mean(&fam, b).unwrap());
        let h = class_distance(a, b, 9).unwrap() as f64;
        prop_assert!((d * d - h).abs() <= 1e-9 * h.max(1.0));
    }
}

#[test]
fn sampling_is_pure_in_seed() {
    let fam = build_family(9, 13, 0.25, 5).unwrap();
    let a = sample_class(&fam, 77, 64, 9).unwrap();
    assert_eq!(a, sample_class(&fam, 77, 64, 9).unwrap());
    assert_ne!(a, sample_class(&fam, 77, 64, 10).unwrap());
    assert!(a.iter().all(|v| v.is_finite()));
    assert_eq!(a.ncols(), 117);
}

#[test]
fn monte_carlo_mean_and_covariance() {
    let sigma = 0.25;
    let fam = build_family(9, 13, sigma, 1).unwrap();
    let n = 100_000;
    let x = sample_class(&fam, 300, n, 2).unwrap();
    let mean = class_mean(&fam, 300).unwrap();
    let tol = 4.0 * sigma / (n as f64).sqrt();
    let emp = x.mean_axis(ndarray::Axis(0)).unwrap();
    for (e, m) in emp.iter().zip(mean.iter()) {
        assert!((e - m).abs() <= tol, "mean error {} > {tol}", (e - m).abs());
    }
    // diagonal of each r-block's covariance within 5% of sigma²
    let centered = &x - &emp;
    for j in 0..117 {
        let var = centered.column(j).mapv(|v| v * v).sum() / (n as f64 - 1.0);
        assert!(
            (var / (sigma * sigma) - 1.0).abs() <= 0.05,
            "coordinate {j} variance {var}"
        );
    }
}

/// Exhaustive oracle: lexicographically smallest maximum clique by subset enumeration.
fn brute_force_clique(n: usize, adj: &[Vec<bool>]) -> Vec<usize> {
    let mut best: Vec<usize> = Vec::new();
    for mask in 0u32..(1 << n) {
        let nodes: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let ok = nodes
            .iter()
            .enumerate()
            .all(|(i, &a)| nodes[i + 1..].iter().all(|&b| adj[a][b]));
        if ok && (nodes.len() > best.len() || (nodes.len() == best.len() && nodes < best)) {
            best = nodes;
        }
    }
    best
}

#[test]
fn max_clique_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let n = rng.random_range(1..=16);
        let density: f64 = rng.random_range(0.1..0.9);
        let mut m = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random_bool(density) {
                    edges.push((a, b));
                }
            }
        }
        for &(a, b) in &edges {
            m[a][b] = true;
            m[b][a] = true;
        }
        let adj = Adjacency::from_edges(n, edges).unwrap();
        let got = max_clique(&adj);
        assert!(adj.is_clique(&got));
        assert_eq!(got, brute_force_clique(n, &m), "trial {trial}, n = {n}");
    }
}

#[test]
fn weight_subgraphs_partition_the_complete_graph() {
    let g = DistanceGraph::new(5).unwrap();
    let subs: Vec<Adjacency> = (1..=5).map(|w| subgraph_at_weight(&g, w).unwrap()).collect();
    for a in 0..32 {
        for b in (a + 1)..32 {
            let hits = subs.iter().filter(|s| s.has_edge(a, b)).count();
            assert_eq!(hits, 1, "edge ({a},{b})");
        }
    }
    assert_eq!(subs.iter().map(Adjacency::edge_count).sum::<usize>(), 32 * 31 / 2);
}

#[test]
fn weight_two_clique_of_nine() {
    let adj = subgraph_at_weight(&DistanceGraph::new(9).unwrap(), 2).unwrap();
    let unit_codes: Vec<usize> = (0..9).map(|i| 1 << i).collect();
    assert!(adj.is_clique(&unit_codes));
    let c = max_clique(&adj);
    assert_eq!(c.len(), 9);
    assert!(adj.is_clique(&c));
}

#[test]
fn weight_six_contains_reference_clique() {
    let reference = [63usize, 240, 323, 396];
    for (i, &a) in reference.iter().enumerate() {
        for &b in &reference[i + 1..] {
            assert_eq!((a ^ b).count_ones(), 6);
        }
    }
    let adj = subgraph_at_weight(&DistanceGraph::new(9).unwrap(), 6).unwrap();
    assert!(adj.is_clique(&reference));
    let c = max_clique(&adj);
    assert!(c.len() >= 4);
    assert!(adj.is_clique(&c));
}

#[test]
fn equidistant_centroids_at_root_two() {
    let spec = build_equidistant_spec(9, 13, 0.25, 3).unwrap();
    let fam = spec.family.build().unwrap();
    let means: Vec<_> = spec
        .subclasses()
        .iter()
        .map(|&(_, code)| class_mean(&fam, code).unwrap())
        .collect();
    let mut pairs = 0;
    for i in 0..means.len() {
        for j in (i + 1)..means.len() {
            assert!((euclidean(&means[i], &means[j]) - 2f64.sqrt()).abs() <= 1e-9);
            pairs += 1;
        }
    }
    assert_eq!(pairs, 28);
}

#[test]
fn equivariant_distance_structure() {
    let spec = build_equivariant_spec(9, 13, 0.25, 3).unwrap();
    let subs = spec.subclasses();
    assert_eq!(subs.len(), 40);
    let (mut max_within, mut min_across) = (0, u32::MAX);
    for (i, &(ca, a)) in subs.iter().enumerate() {
        for &(cb, b) in &subs[i + 1..] {
            let d = class_distance(a, b, 9).unwrap();
            assert!(d > 0);
            if ca == cb {
                max_within = max_within.max(d);
            } else {
                min_across = min_across.min(d);
            }
        }
    }
    assert!(max_within <= 2);
    assert!(min_across >= 4);
    for class in &spec.classes {
        let center = class[0];
        assert_eq!(
            class[1..].iter().filter(|&&c| (c ^ center).count_ones() == 1).count(),
            9
        );
    }
}

#[test]
fn empirical_centroids_converge() {
    let sigma = 0.25;
    let spec = build_equidistant_spec(9, 13, sigma, 8).unwrap();
    let counts: BTreeMap<usize, usize> = (0..8).map(|k| (k, 10_000)).collect();
    let ds = realize(&spec, &counts, 21).unwrap();
    let fam = spec.family.build().unwrap();
    let tol = 5.0 * sigma / 100.0;
    for (k, &(_, code)) in spec.subclasses().iter().enumerate() {
        let rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.subclasses[i] == k).collect();
        let emp = ds
            .points
            .select(ndarray::Axis(0), &rows)
            .mean_axis(ndarray::Axis(0))
            .unwrap();
        let mean = class_mean(&fam, code).unwrap();
        let worst = emp
            .iter()
            .zip(mean.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= tol, "subclass {k}: {worst} > {tol}");
    }
}

#[test]
fn realization_is_bit_reproducible() {
    let spec = build_equivariant_spec(9, 13, 0.25, 0).unwrap();
    let counts: BTreeMap<usize, usize> = (0..40).map(|k| (k, 7)).collect();
    let a = realize(&spec, &counts, 5).unwrap();
    let b = realize(&spec, &counts, 5).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.write_csv(&mut x).unwrap();
    b.write_csv(&mut y).unwrap();
    assert_eq!(x, y);
    assert_eq!(a.metadata_json().unwrap(), b.metadata_json().unwrap());
}
