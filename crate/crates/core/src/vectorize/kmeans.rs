//! k-means++ seeding and Lloyd iterations on 2-d points.

use rand::Rng;

/// Draws `k` initial centers: the first uniformly, each next with
/// probability proportional to the squared distance to the nearest center
/// chosen so far.
pub fn kmeans_pp_seed(points: &[[f64; 2]], k: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    assert!(!points.is_empty() && k >= 1);
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(*p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all mass on existing centers; fall back to uniform
            points[rng.random_range(0..points.len())]
        } else {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            points[chosen]
        };
        centers.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(*p, next));
        }
    }
    centers
}

/// Lloyd iterations until the max center movement drops below `tol` or
/// `max_iter` is reached. Empty clusters keep their previous center.
/// Returns the centers and the number of iterations run.
pub fn lloyd(
    points: &[[f64; 2]],
    mut centers: Vec<[f64; 2]>,
    tol: f64,
    max_iter: usize,
) -> (Vec<[f64; 2]>, usize) {
    let k = centers.len();
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for iter in 0..max_iter {
        sums.iter_mut().for_each(|s| *s = [0.0, 0.0]);
        counts.iter_mut().for_each(|c| *c = 0);
        for p in points {
            let a = nearest(&centers, *p);
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        let mut moved = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let new = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            moved = moved.max(sq_dist(new, centers[c]).sqrt());
            centers[c] = new;
        }
        if moved < tol {
            return (centers, iter + 1);
        }
    }
    (centers, max_iter)
}

pub fn nearest(centers: &[[f64; 2]], p: [f64; 2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(p, *c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

pub fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Within-cluster sum of squared distances.
pub fn inertia(points: &[[f64; 2]], centers: &[[f64; 2]]) -> f64 {
    points
        .iter()
        .map(|p| sq_dist(*p, centers[nearest(centers, *p)]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn exact_cover_has_zero_cost() {
        // 20 distinct points, k = 20: Lloyd fixes centers on the points
        let mut rng = ChaCha12Rng::seed_from_u64(40);
        let points: Vec<[f64; 2]> = (0..20)
            .map(|i| [i as f64, rng.random::<f64>()])
            .collect();
        let seeds = kmeans_pp_seed(&points, 20, &mut rng);
        let (centers, _) = lloyd(&points, seeds, 1e-6, 200);
        assert!(inertia(&points, &centers) < 1e-20);
    }

    #[test]
    fn seeding_probabilities_match_analytic_law() {
        // 3-point corpus at 0, 1, 3 on a line; k = 2.
        // First center uniform (1/3 each). Given first = point a, the second
        // is drawn ∝ squared distance: e.g. a=0 → P(1)=1/10, P(3)=9/10.
        let points = vec![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]];
        let runs = 10_000;
        let mut first_counts = [0usize; 3];
        let mut second_given_first0 = [0usize; 3];
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..runs {
            let c = kmeans_pp_seed(&points, 2, &mut rng);
            let f = points.iter().position(|p| *p == c[0]).unwrap();
            let s = points.iter().position(|p| *p == c[1]).unwrap();
            first_counts[f] += 1;
            if f == 0 {
                second_given_first0[s] += 1;
            }
        }
        // 4σ Monte-Carlo bands
        let n = runs as f64;
        for c in first_counts {
            let p = c as f64 / n;
            let sigma = ((1.0 / 3.0) * (2.0 / 3.0) / n).sqrt();
            assert!((p - 1.0 / 3.0).abs() < 4.0 * sigma, "first-center p = {p}");
        }
        let n0 = first_counts[0] as f64;
        // distances² from 0: to 1 is 1, to 3 is 9 → probabilities 0.1, 0.9
        let p1 = second_given_first0[1] as f64 / n0;
        let sigma1 = (0.1 * 0.9 / n0).sqrt();
        assert!((p1 - 0.1).abs() < 4.0 * sigma1, "P(second=1 | first=0) = {p1}");
        let p3 = second_given_first0[2] as f64 / n0;
        assert!((p3 - 0.9).abs() < 4.0 * sigma1, "P(second=3 | first=0) = {p3}");
    }
}
