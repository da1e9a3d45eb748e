//! Stability chain: diagram Wasserstein distances bounded by the point-set
//! Wasserstein distance, and the vectorization bounded by an empirical
//! Lipschitz constant times the diagram distance.

use npd_core::ph::{self, pointset_wasserstein1_sum, wasserstein1, PersistenceDiagram};
use npd_core::vectorize::VectorizerModel;
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

/// A pair of clouds with the same cardinality: either independent draws or
/// a jittered copy, mixing global and local perturbations.
fn cloud_pair(rng: &mut ChaCha12Rng, m: usize) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let a = random_cloud(rng, m, 1.0);
    if rng.random::<f64>() < 0.5 {
        (a, random_cloud(rng, m, 1.0))
    } else {
        let eps = 10f64.powf(rng.random_range(-4.0..-0.5));
        let b = a
            .iter()
            .map(|p| {
                [
                    p[0] + eps * (rng.random::<f64>() - 0.5),
                    p[1] + eps * (rng.random::<f64>() - 0.5),
                    p[2] + eps * (rng.random::<f64>() - 0.5),
                ]
            })
            .collect();
        (a, b)
    }
}

fn binom(n: usize, k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => n as f64,
        _ => unreachable!(),
    }
}

/// `W₁(F_k, G_k) ≤ 2·C(M−1, k)·Σ_π‖p−q‖` for k ∈ {0, 1} on random
/// equal-cardinality pairs. The right side uses the unnormalized point-set
/// transport cost (the (1/M)-normalized variant times M).
#[test]
fn diagram_w1_bounded_by_pointset_transport() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x57ab);
    for trial in 0..200 {
        let m = rng.random_range(3..=20);
        let (p, q) = cloud_pair(&mut rng, m);
        let dp = ph::rips_diagrams(&p, 1).unwrap();
        let dq = ph::rips_diagrams(&q, 1).unwrap();
        let transport = pointset_wasserstein1_sum(&p, &q).unwrap();
        for k in 0..=1usize {
            let w1 = wasserstein1(&dp[k], &dq[k]);
            let bound = 2.0 * binom(m - 1, k) * transport;
            assert!(
                w1 <= bound + 1e-9,
                "trial {trial}, M={m}, k={k}: W1 {w1} > bound {bound}"
            );
        }
    }
}

fn diagrams_of_pairs(
    rng: &mut ChaCha12Rng,
    n_pairs: usize,
) -> Vec<(Vec<PersistenceDiagram>, Vec<PersistenceDiagram>)> {
    (0..n_pairs)
        .map(|_| {
            let m = rng.random_range(4..=16);
            let (p, q) = cloud_pair(rng, m);
            (ph::rips_diagrams(&p, 1).unwrap(), ph::rips_diagrams(&q, 1).unwrap())
        })
        .collect()
}

/// End-to-end vectorization stability: with K the empirical max of
/// `‖T(F)−T(G)‖/W₁(F,G)` over a large training probe, held-out pairs obey
/// `‖T(F)−T(G)‖ ≤ K·W₁(F,G)`.
#[test]
fn vectorization_bounded_by_empirical_lipschitz_constant() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x11b5);

    // corpus for fitting
    let fit_pool: Vec<Vec<PersistenceDiagram>> = (0..120)
        .map(|_| {
            let m = rng.random_range(4..=16);
            ph::rips_diagrams(&random_cloud(&mut rng, m, 1.0), 1).unwrap()
        })
        .collect();
    let dim0: Vec<&PersistenceDiagram> = fit_pool.iter().map(|d| &d[0]).collect();
    let dim1: Vec<&PersistenceDiagram> = fit_pool.iter().map(|d| &d[1]).collect();
    let model = VectorizerModel::fit(&[0, 1], &[dim0, dim1], &mut rng);

    // empirical constant from a 10x larger training probe
    let train_pairs = diagrams_of_pairs(&mut rng, 10_000);
    let mut k_emp = [0.0f64; 2];
    for (df, dg) in &train_pairs {
        for k in 0..=1usize {
            match model.lipschitz_ratio(&df[k], &dg[k]) {
                Ok(r) => {
                    assert!(r.is_finite(), "ratio must stay bounded");
                    k_emp[k] = k_emp[k].max(r);
                }
                Err(_) => continue, // identical diagrams
            }
        }
    }
    assert!(k_emp[0] > 0.0 && k_emp[1] > 0.0);

    // held-out bound
    let held_out = diagrams_of_pairs(&mut rng, 1_000);
    for (i, (df, dg)) in held_out.iter().enumerate() {
        for k in 0..=1usize {
            let w1 = wasserstein1(&df[k], &dg[k]);
            if w1 == 0.0 {
                continue;
            }
            let tf = model.transform_dim(&df[k]).unwrap();
            let tg = model.transform_dim(&dg[k]).unwrap();
            let dist: f64 = tf
                .iter()
                .zip(&tg)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                dist <= k_emp[k] * w1 * (1.0 + 1e-9),
                "pair {i}, dim {k}: ‖ΔT‖ {dist} > K·W1 {}",
                k_emp[k] * w1
            );
        }
    }
}

/// Smoother kernels can only lower the recorded empirical constant.
#[test]
fn doubling_sigma_does_not_raise_the_empirical_constant() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x2b0d);
    let fit_pool: Vec<Vec<PersistenceDiagram>> = (0..80)
        .map(|_| {
            let m = rng.random_range(4..=14);
            ph::rips_diagrams(&random_cloud(&mut rng, m, 1.0), 1).unwrap()
        })
        .collect();
    let dim0: Vec<&PersistenceDiagram> = fit_pool.iter().map(|d| &d[0]).collect();
    let model = VectorizerModel::fit(&[0], &[dim0], &mut rng);
    let mut wide = model.clone();
    for s in wide.per_dim[0].sigmas.iter_mut() {
        *s *= 2.0;
    }

    let pairs = diagrams_of_pairs(&mut rng, 2_000);
    let probe = |m: &VectorizerModel| -> f64 {
        let mut mx = 0.0f64;
        for (df, dg) in &pairs {
            if let Ok(r) = m.lipschitz_ratio(&df[0], &dg[0]) {
                mx = mx.max(r);
            }
        }
        mx
    };
    let k_base = probe(&model);
    let k_wide = probe(&wide);
    assert!(
        k_wide <= k_base + 1e-12,
        "2σ raised the constant: {k_base} -> {k_wide}"
    );
}

#[test]
fn lipschitz_ratio_rejects_identical_diagrams() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x3c);
    let cloud = random_cloud(&mut rng, 8, 1.0);
    let d = ph::rips_diagrams(&cloud, 1).unwrap();
    let refs0: Vec<&PersistenceDiagram> = vec![&d[0]];
    let refs1: Vec<&PersistenceDiagram> = vec![&d[1]];
    let model = VectorizerModel::fit(&[0, 1], &[refs0, refs1], &mut rng);
    assert!(model.lipschitz_ratio(&d[0], &d[0]).is_err());
}
