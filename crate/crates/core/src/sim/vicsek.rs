//! Vicsek model: unit-speed particles aligning with neighbors under
//! rotational noise, `dv = (I - vvᵀ)(ν·v̄·dt + √(2D)·dB)`.

use super::{norm, sub3, SimState, VicsekParams};
use rand::Rng;
use rand_distr::StandardNormal;

/// One tangent-projected Euler–Maruyama step followed by renormalization to
/// the unit sphere.
///
/// The neighborhood average includes the particle itself; when the
/// neighborhood sum cancels exactly, the particle keeps its own direction.
pub fn step_vicsek(state: &mut SimState, p: &VicsekParams, dt: f64, rng: &mut impl Rng) {
    let m = state.positions.len();
    let r2 = p.radius * p.radius;

    // neighborhood sums over ‖x_i - x_j‖ ≤ R (self included)
    let mut sums = vec![[0.0f64; 3]; m];
    for i in 0..m {
        sums[i] = state.velocities[i];
        for j in (i + 1)..m {
            let d = sub3(state.positions[i], state.positions[j]);
            if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r2 {
                for k in 0..3 {
                    sums[i][k] += state.velocities[j][k];
                    sums[j][k] += state.velocities[i][k];
                }
            }
        }
    }

    let noise_scale = (2.0 * p.diffusion * dt).sqrt();
    for i in 0..m {
        let v = state.velocities[i];
        let mean = {
            let n = norm(sums[i]);
            if n > 0.0 {
                [sums[i][0] / n, sums[i][1] / n, sums[i][2] / n]
            } else {
                v // exact cancellation fallback
            }
        };
        let mut w = [0.0f64; 3];
        for k in 0..3 {
            let xi: f64 = rng.sample(StandardNormal);
            w[k] = p.alignment * mean[k] * dt + noise_scale * xi;
        }
        // tangent projection (I - vvᵀ)w, then renormalize
        let vdotw = v[0] * w[0] + v[1] * w[1] + v[2] * w[2];
        let mut vn = [0.0f64; 3];
        for k in 0..3 {
            vn[k] = v[k] + w[k] - vdotw * v[k];
        }
        let n = norm(vn);
        if n > 0.0 {
            for k in 0..3 {
                vn[k] /= n;
            }
        } else {
            vn = v;
        }
        state.velocities[i] = vn;
        for k in 0..3 {
            state.positions[i][k] += p.speed * v[k] * dt;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn noiseless_single_particle_keeps_direction() {
        let p = VicsekParams { speed: 1.0, alignment: 2.0, diffusion: 0.0, radius: 1.0 };
        let v0 = [0.6, 0.8, 0.0];
        let mut s = SimState { positions: vec![[0.0; 3]], velocities: vec![v0] };
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..200 {
            step_vicsek(&mut s, &p, 0.01, &mut rng);
        }
        for k in 0..3 {
            assert!((s.velocities[0][k] - v0[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_norm_after_every_step() {
        let p = VicsekParams { speed: 2.0, alignment: 3.0, diffusion: 1.5, radius: 2.0 };
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut s = super::super::init_state(30, &mut rng);
        for _ in 0..500 {
            step_vicsek(&mut s, &p, 0.01, &mut rng);
            for v in &s.velocities {
                assert!((norm(*v) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_aligned_pair_keeps_direction() {
        let p = VicsekParams { speed: 1.0, alignment: 4.0, diffusion: 0.0, radius: 5.0 };
        let v0 = [0.0, 0.0, 1.0];
        let mut s = SimState {
            positions: vec![[0.0; 3], [0.5, 0.0, 0.0]],
            velocities: vec![v0, v0],
        };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            step_vicsek(&mut s, &p, 0.01, &mut rng);
        }
        for v in &s.velocities {
            for k in 0..3 {
                assert!((v[k] - v0[k]).abs() < 1e-12);
            }
        }
    }
}
