//! Volume-exclusion model: first-order short-range repulsion with cell
//! division and death at constant rates.

use super::{sub3, SimState, VolexParams};
use rand::Rng;
use rand_distr::StandardNormal;

/// Result of one volume-exclusion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolexStepOutcome {
    Ok,
    /// the population crossed the cap; the caller aborts the sequence
    CapExceeded { population: usize },
}

/// One explicit Euler step of
/// `dx_i/dt = -(α/R)·Σ_{j≠i} φ(‖x_j - x_i‖²/(4R²))·(x_i - x_j)` with
/// `φ(r) = 1/r - 1` on (0, 1], followed by independent division (probability
/// λ_b·dt, child jittered by an isotropic Gaussian of σ = R/100) and death
/// (probability λ_d·dt) events.
pub fn step_volex(
    state: &mut SimState,
    p: &VolexParams,
    dt: f64,
    cap: usize,
    rng: &mut impl Rng,
) -> VolexStepOutcome {
    let m = state.positions.len();
    let four_r2 = 4.0 * p.radius * p.radius;

    let mut drift = vec![[0.0f64; 3]; m];
    if p.radius > 0.0 {
        let coeff = p.alpha / p.radius;
        for i in 0..m {
            for j in (i + 1)..m {
                let d = sub3(state.positions[i], state.positions[j]);
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let arg = r2 / four_r2;
                if arg <= 0.0 || arg > 1.0 {
                    continue; // outside the support of φ (or coincident)
                }
                // repulsive: i is pushed along x_i - x_j, away from j
                let phi = 1.0 / arg - 1.0;
                for k in 0..3 {
                    let f = coeff * phi * d[k];
                    drift[i][k] += f;
                    drift[j][k] -= f;
                }
            }
        }
    }
    for i in 0..m {
        for k in 0..3 {
            state.positions[i][k] += drift[i][k] * dt;
        }
    }

    // Division first (children are not subject to events this step), then
    // death of the original points.
    let jitter = p.radius / 100.0;
    let mut children: Vec<[f64; 3]> = Vec::new();
    let mut dead = vec![false; m];
    for i in 0..m {
        if rng.random::<f64>() < p.birth_rate * dt {
            let mut c = state.positions[i];
            for ck in c.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *ck += jitter * g;
            }
            children.push(c);
        }
        if rng.random::<f64>() < p.death_rate * dt {
            dead[i] = true;
        }
    }
    let mut keep_idx = 0;
    state.positions.retain(|_| {
        let k = !dead[keep_idx];
        keep_idx += 1;
        k
    });
    state.positions.extend(children);
    state.velocities = vec![[0.0; 3]; state.positions.len()];

    if state.positions.len() > cap {
        return VolexStepOutcome::CapExceeded { population: state.positions.len() };
    }
    VolexStepOutcome::Ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn quiet(alpha: f64, radius: f64) -> VolexParams {
        VolexParams { alpha, radius, birth_rate: 0.0, death_rate: 0.0 }
    }

    #[test]
    fn far_pair_has_zero_drift() {
        let p = quiet(1.0, 0.5);
        let mut s = SimState {
            positions: vec![[0.0; 3], [2.0, 0.0, 0.0]], // distance 2 > 2R = 1
            velocities: vec![[0.0; 3]; 2],
        };
        let before = s.positions.clone();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        step_volex(&mut s, &p, 0.01, 2000, &mut rng);
        assert_eq!(s.positions, before);
    }

    #[test]
    fn no_birth_no_death_keeps_cardinality() {
        let p = quiet(1.5, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let mut s = super::super::init_state(50, &mut rng);
        for _ in 0..300 {
            assert_eq!(
                step_volex(&mut s, &p, 0.01, 2000, &mut rng),
                VolexStepOutcome::Ok
            );
            assert_eq!(s.positions.len(), 50);
        }
    }

    #[test]
    fn close_pair_separates_monotonically() {
        let p = quiet(1.0, 1.0);
        let mut s = SimState {
            positions: vec![[0.0; 3], [0.5, 0.0, 0.0]],
            velocities: vec![[0.0; 3]; 2],
        };
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut prev = 0.5;
        for _ in 0..500 {
            step_volex(&mut s, &p, 0.01, 2000, &mut rng);
            let d = sub3(s.positions[0], s.positions[1]);
            let dist = super::super::norm(d);
            assert!(dist >= prev - 1e-15, "{dist} < {prev}");
            prev = dist;
        }
    }

    #[test]
    fn pure_birth_matches_branching_expectation() {
        // branching-process oracle: E[M_n] = M₀·(1 + λ_b·dt)^n
        let p = VolexParams { alpha: 0.0, radius: 1.0, birth_rate: 1.0, death_rate: 0.0 };
        let (m0, steps, dt, runs) = (200usize, 200usize, 0.01, 20usize);
        let expected = m0 as f64 * (1.0 + p.birth_rate * dt).powi(steps as i32);
        let mut finals = Vec::new();
        let mut checkpoint_means = vec![0.0f64; steps / 20];
        for run in 0..runs {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + run as u64);
            let mut s = super::super::init_state(m0, &mut rng);
            for step in 0..steps {
                assert_eq!(
                    step_volex(&mut s, &p, dt, 4000, &mut rng),
                    VolexStepOutcome::Ok
                );
                if (step + 1) % 20 == 0 {
                    checkpoint_means[step / 20] += s.positions.len() as f64 / runs as f64;
                }
            }
            finals.push(s.positions.len() as f64);
        }
        // growth trend: mean population strictly increases checkpoint to checkpoint
        for w in checkpoint_means.windows(2) {
            assert!(w[1] > w[0], "growth not monotone: {checkpoint_means:?}");
        }
        let mean = finals.iter().sum::<f64>() / runs as f64;
        assert!(
            (mean - expected).abs() / expected < 0.10,
            "mean {mean} vs expected {expected}"
        );
    }

    #[test]
    fn cap_is_reported() {
        let p = VolexParams { alpha: 0.0, radius: 1.0, birth_rate: 1.0, death_rate: 0.0 };
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut s = super::super::init_state(100, &mut rng);
        let mut hit = false;
        for _ in 0..10_000 {
            if let VolexStepOutcome::CapExceeded { population } =
                step_volex(&mut s, &p, 0.01, 150, &mut rng)
            {
                assert!(population > 150);
                hit = true;
                break;
            }
        }
        assert!(hit);
    }
}
