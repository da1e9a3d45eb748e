//! Production persistence (union-find + cohomology reduction with clearing)
//! against the naive full boundary-matrix oracle, plus the MST cross-check
//! for dimension 0.

use npd_core::ph::{self, oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_cloud(rng: &mut ChaCha12Rng, m: usize, scale: f64) -> Vec<[f64; 3]> {
    (0..m)
        .map(|_| {
            [
                scale * rng.random::<f64>(),
                scale * rng.random::<f64>(),
                scale * rng.random::<f64>(),
            ]
        })
        .collect()
}

fn assert_diagrams_equal(a: &[ph::PersistenceDiagram], b: &[ph::PersistenceDiagram], ctx: &str) {
    assert_eq!(a.len(), b.len(), "{ctx}: dimension count");
    for (da, db) in a.iter().zip(b) {
        assert_eq!(da.dim, db.dim);
        assert_eq!(
            da.pairs.len(),
            db.pairs.len(),
            "{ctx}: dim {} bar count {:?} vs {:?}",
            da.dim,
            da.pairs,
            db.pairs
        );
        for (pa, pb) in da.pairs.iter().zip(&db.pairs) {
            assert_eq!(pa.0.to_bits(), pb.0.to_bits(), "{ctx}: dim {} birth", da.dim);
            assert_eq!(pa.1.to_bits(), pb.1.to_bits(), "{ctx}: dim {} death", da.dim);
        }
    }
}

#[test]
fn production_matches_oracle_on_random_clouds() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x0a11ce);
    for trial in 0..50 {
        let m = 3 + (trial % 8);
        let cloud = random_cloud(&mut rng, m, 1.0);
        let f = ph::build_rips(&cloud, 2, None).unwrap();
        let fast = ph::persistence(&f);
        let slow = oracle::full_reduction(&f);
        assert_diagrams_equal(&fast, &slow, &format!("trial {trial}, M={m}"));
    }
}

#[test]
fn production_matches_oracle_with_truncated_threshold() {
    // thresholds below the enclosing radius exercise multiple infinite bars
    let mut rng = ChaCha12Rng::seed_from_u64(0xbee);
    for trial in 0..30 {
        let m = 4 + (trial % 7);
        let cloud = random_cloud(&mut rng, m, 2.0);
        let thr = 0.5 + rng.random::<f64>();
        let f = ph::build_rips(&cloud, 2, Some(thr)).unwrap();
        let fast = ph::persistence(&f);
        let slow = oracle::full_reduction(&f);
        assert_diagrams_equal(&fast, &slow, &format!("truncated trial {trial}"));
    }
}

#[test]
fn dim0_finite_deaths_are_mst_edge_weights() {
    // Kruskal oracle: finite dim-0 deaths = MST edge weights
    let mut rng = ChaCha12Rng::seed_from_u64(0x157);
    for _ in 0..20 {
        let m = 12;
        let cloud = random_cloud(&mut rng, m, 1.0);
        let dgm = &ph::rips_diagrams(&cloud, 0).unwrap()[0];

        let mut edges: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let d = (0..3)
                    .map(|k| (cloud[i][k] - cloud[j][k]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                edges.push((d, i, j));
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut mst = Vec::new();
        for (d, i, j) in edges {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
                mst.push(d);
            }
        }
        let mut finite: Vec<f64> = dgm.finite_pairs().map(|p| p.1).collect();
        finite.sort_by(f64::total_cmp);
        mst.sort_by(f64::total_cmp);
        assert_eq!(finite.len(), mst.len());
        for (a, b) in finite.iter().zip(&mst) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
