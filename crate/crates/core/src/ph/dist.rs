//! Matching distances: bottleneck and 1-Wasserstein between persistence
//! diagrams (with diagonal augmentation), and the point-set Wasserstein
//! distance between equal-cardinality clouds.

use super::PersistenceDiagram;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("point sets must have equal cardinality, got {left} and {right}")]
    CardinalityMismatch { left: usize, right: usize },
    #[error("distance between identical inputs is zero; ratio undefined")]
    ZeroDistance,
}

/// Exact solution of the square assignment problem by shortest augmenting
/// paths with potentials. `cost` is row-major `n x n`. Returns the minimum
/// total cost.
pub fn hungarian(cost: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1]; // matched[j] = row assigned to col j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=n {
        total += cost[(matched[j] - 1) * n + (j - 1)];
    }
    total
}

fn euclid2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    (dx * dx + dy * dy).sqrt()
}

/// Euclidean distance from a diagram point to the diagonal.
fn diag_dist_euclid(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / std::f64::consts::SQRT_2
}

/// l∞ distance from a diagram point to the diagonal.
fn diag_dist_linf(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / 2.0
}

fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// Cost of matching the infinite bars of both diagrams to each other:
/// sorted births under the given per-pair metric; `None` when the counts
/// differ (no finite matching exists).
fn infinite_bar_cost(
    f: &PersistenceDiagram,
    g: &PersistenceDiagram,
    combine_max: bool,
) -> Option<f64> {
    let mut bf: Vec<f64> = f.infinite_births().collect();
    let mut bg: Vec<f64> = g.infinite_births().collect();
    if bf.len() != bg.len() {
        return None;
    }
    bf.sort_unstable_by(f64::total_cmp);
    bg.sort_unstable_by(f64::total_cmp);
    let mut acc = 0.0f64;
    for (a, b) in bf.iter().zip(&bg) {
        let c = (a - b).abs();
        if combine_max {
            acc = acc.max(c);
        } else {
            acc += c;
        }
    }
    Some(acc)
}

/// (1,2)-Wasserstein distance between diagrams: minimum-cost perfect
/// matching on the diagonally augmented bipartite graph, Euclidean ground
/// cost, summed. Infinite bars match only to infinite bars; unequal counts
/// give +∞.
pub fn wasserstein1(f: &PersistenceDiagram, g: &PersistenceDiagram) -> f64 {
    let Some(inf_cost) = infinite_bar_cost(f, g, false) else {
        return f64::INFINITY;
    };
    let fp: Vec<(f64, f64)> = f.finite_pairs().collect();
    let gp: Vec<(f64, f64)> = g.finite_pairs().collect();
    let (n, m) = (fp.len(), gp.len());
    let size = n + m;
    if size == 0 {
        return inf_cost;
    }
    let mut cost = vec![0.0f64; size * size];
    for i in 0..size {
        for j in 0..size {
            cost[i * size + j] = match (i < n, j < m) {
                (true, true) => euclid2(fp[i], gp[j]),
                (true, false) => diag_dist_euclid(fp[i]),
                (false, true) => diag_dist_euclid(gp[j]),
                (false, false) => 0.0,
            };
        }
    }
    hungarian(&cost, size) + inf_cost
}

/// Bottleneck distance: minimum over matchings of the max l∞ transport
/// cost, found by binary search over the candidate costs with a bipartite
/// feasibility check at each probe.
pub fn bottleneck(f: &PersistenceDiagram, g: &PersistenceDiagram) -> f64 {
    let Some(inf_cost) = infinite_bar_cost(f, g, true) else {
        return f64::INFINITY;
    };
    let fp: Vec<(f64, f64)> = f.finite_pairs().collect();
    let gp: Vec<(f64, f64)> = g.finite_pairs().collect();
    if fp.is_empty() && gp.is_empty() {
        return inf_cost;
    }

    let mut candidates: Vec<f64> = Vec::new();
    for &p in &fp {
        candidates.push(diag_dist_linf(p));
        for &q in &gp {
            candidates.push(linf(p, q));
        }
    }
    for &q in &gp {
        candidates.push(diag_dist_linf(q));
    }
    candidates.sort_unstable_by(f64::total_cmp);
    candidates.dedup();

    // smallest candidate admitting a perfect matching
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    debug_assert!(bottleneck_feasible(&fp, &gp, candidates[hi]));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if bottleneck_feasible(&fp, &gp, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo].max(inf_cost)
}

/// Kuhn augmenting-path matching on the diagonally augmented graph with
/// edges of cost ≤ lambda.
fn bottleneck_feasible(fp: &[(f64, f64)], gp: &[(f64, f64)], lambda: f64) -> bool {
    let (n, m) = (fp.len(), gp.len());
    let size = n + m;
    let edge = |i: usize, j: usize| -> bool {
        match (i < n, j < m) {
            (true, true) => linf(fp[i], gp[j]) <= lambda,
            (true, false) => diag_dist_linf(fp[i]) <= lambda,
            (false, true) => diag_dist_linf(gp[j]) <= lambda,
            (false, false) => true,
        }
    };
    let mut match_col: Vec<Option<usize>> = vec![None; size];
    let mut matched = 0usize;
    for i in 0..size {
        let mut seen = vec![false; size];
        if augment(i, &edge, &mut match_col, &mut seen, size) {
            matched += 1;
        }
    }
    matched == size
}

fn augment(
    i: usize,
    edge: &impl Fn(usize, usize) -> bool,
    match_col: &mut Vec<Option<usize>>,
    seen: &mut [bool],
    size: usize,
) -> bool {
    for j in 0..size {
        if !seen[j] && edge(i, j) {
            seen[j] = true;
            if match_col[j].is_none() || augment(match_col[j].unwrap(), edge, match_col, seen, size)
            {
                match_col[j] = Some(i);
                return true;
            }
        }
    }
    false
}

/// Point-set 1-Wasserstein distance, normalized:
/// `min_π (1/M)·Σ ‖p_i − q_{π(i)}‖`.
pub fn pointset_wasserstein1(p: &[[f64; 3]], q: &[[f64; 3]]) -> Result<f64, DistanceError> {
    Ok(pointset_wasserstein1_sum(p, q)? / p.len().max(1) as f64)
}

/// Unnormalized variant: `min_π Σ ‖p_i − q_{π(i)}‖`.
pub fn pointset_wasserstein1_sum(p: &[[f64; 3]], q: &[[f64; 3]]) -> Result<f64, DistanceError> {
    if p.len() != q.len() {
        return Err(DistanceError::CardinalityMismatch { left: p.len(), right: q.len() });
    }
    let n = p.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut cost = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            let dx = p[i][0] - q[j][0];
            let dy = p[i][1] - q[j][1];
            let dz = p[i][2] - q[j][2];
            cost[i * n + j] = (dx * dx + dy * dy + dz * dz).sqrt();
        }
    }
    Ok(hungarian(&cost, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dgm(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram { dim: 0, pairs: pairs.to_vec() }
    }

    #[test]
    fn hungarian_matches_bruteforce() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(30);
        for n in 1..=6 {
            for _ in 0..20 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
                let fast = hungarian(&cost, n);
                let mut perm: Vec<usize> = (0..n).collect();
                let mut best = f64::INFINITY;
                permute(&mut perm, 0, &mut |p| {
                    let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
                    if c < best {
                        best = c;
                    }
                });
                assert!((fast - best).abs() < 1e-12, "n={n}: {fast} vs {best}");
            }
        }
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn w1_identity_is_zero() {
        let f = dgm(&[(0.0, 1.0), (0.5, 2.0), (0.0, f64::INFINITY)]);
        assert_eq!(wasserstein1(&f, &f), 0.0);
    }

    #[test]
    fn w1_single_point_to_empty() {
        let f = dgm(&[(0.0, 1.0)]);
        let g = dgm(&[]);
        let expected = 1.0 / std::f64::consts::SQRT_2;
        assert!((wasserstein1(&f, &g) - expected).abs() < 1e-15);
    }

    #[test]
    fn w1_extra_point_goes_to_diagonal() {
        let h = 1e-3;
        let f = dgm(&[(0.0, 1.0)]);
        let g = dgm(&[(0.0, 1.0), (0.5, 0.5 + h)]);
        let expected = h / std::f64::consts::SQRT_2;
        assert!((wasserstein1(&f, &g) - expected).abs() < 1e-12);
    }

    #[test]
    fn w1_unequal_infinite_bars() {
        let f = dgm(&[(0.0, f64::INFINITY)]);
        let g = dgm(&[]);
        assert_eq!(wasserstein1(&f, &g), f64::INFINITY);
    }

    #[test]
    fn bottleneck_identity_is_zero() {
        let f = dgm(&[(0.0, 1.0), (0.3, 0.9)]);
        assert_eq!(bottleneck(&f, &f), 0.0);
    }

    #[test]
    fn bottleneck_single_point_to_empty() {
        let f = dgm(&[(0.0, 2.0)]);
        let g = dgm(&[]);
        assert_eq!(bottleneck(&f, &g), 1.0);
    }

    #[test]
    fn bottleneck_death_shift_is_lipschitz() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for _ in 0..50 {
            let pairs: Vec<(f64, f64)> = (0..8)
                .map(|_| {
                    let b = rng.random::<f64>();
                    (b, b + rng.random::<f64>())
                })
                .collect();
            let f = dgm(&pairs);
            let eps = 0.01 * rng.random::<f64>();
            let shifted: Vec<(f64, f64)> = pairs.iter().map(|&(b, d)| (b, d + eps)).collect();
            let g = dgm(&shifted);
            assert!(bottleneck(&f, &g) <= eps + 1e-12);
        }
    }

    #[test]
    fn pointset_identity_and_singleton() {
        let p = vec![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]];
        assert_eq!(pointset_wasserstein1(&p, &p).unwrap(), 0.0);
        let a = vec![[0.0, 0.0, 0.0]];
        let b = vec![[3.0, 4.0, 0.0]];
        assert!((pointset_wasserstein1(&a, &b).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn pointset_matches_permutation_bruteforce() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(32);
        for _ in 0..10 {
            let p: Vec<[f64; 3]> = (0..6)
                .map(|_| [rng.random(), rng.random(), rng.random()])
                .collect();
            let q: Vec<[f64; 3]> = (0..6)
                .map(|_| [rng.random(), rng.random(), rng.random()])
                .collect();
            let fast = pointset_wasserstein1_sum(&p, &q).unwrap();
            let mut perm: Vec<usize> = (0..6).collect();
            let mut best = f64::INFINITY;
            permute(&mut perm, 0, &mut |pi| {
                let c: f64 = pi
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| {
                        let dx = p[i][0] - q[j][0];
                        let dy = p[i][1] - q[j][1];
                        let dz = p[i][2] - q[j][2];
                        (dx * dx + dy * dy + dz * dz).sqrt()
                    })
                    .sum();
                if c < best {
                    best = c;
                }
            });
            assert!((fast - best).abs() < 1e-10);
        }
    }

    #[test]
    fn cardinality_mismatch_is_an_error() {
        let p = vec![[0.0; 3]];
        let q = vec![[0.0; 3], [1.0; 3]];
        assert!(matches!(
            pointset_wasserstein1(&p, &q),
            Err(DistanceError::CardinalityMismatch { left: 1, right: 2 })
        ));
    }
}
