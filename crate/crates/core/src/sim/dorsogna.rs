//! D'Orsogna model: self-propulsion with friction and a Morse-type
//! interaction potential `U(r) = C_r·e^{-r/l_r} - C_a·e^{-r/l_a}`.

use super::{norm, sub3, DorsognaParams, SimState};

/// One explicit Euler step of
/// `dx/dt = v`, `m·dv/dt = (α - β|v|²)v - ∇_{x_i} Σ_j U(‖x_i - x_j‖)`.
///
/// Pair forces use the analytic gradient of U; the contribution of exactly
/// coincident points is zero (the gradient is undefined at r = 0). The
/// interaction sum is unnormalized, matching the original second-order
/// model; bound collective states (flocks, mills, clumps) only form when
/// the full neighborhood attraction can overcome self-propulsion.
pub fn step_dorsogna(state: &mut SimState, p: &DorsognaParams, dt: f64) {
    let m = state.positions.len();
    let mut force = vec![[0.0f64; 3]; m];

    // ∇_{x_i} U(‖x_i - x_j‖) = U'(r)·(x_i - x_j)/r, accumulated pairwise.
    for i in 0..m {
        for j in (i + 1)..m {
            let d = sub3(state.positions[i], state.positions[j]);
            let r = norm(d);
            if r == 0.0 {
                continue;
            }
            let du = -(p.c_rep / p.l_rep) * (-r / p.l_rep).exp()
                + (p.c_att / p.l_att) * (-r / p.l_att).exp();
            let scale = du / r;
            for k in 0..3 {
                let f = scale * d[k];
                force[i][k] += f;
                force[j][k] -= f;
            }
        }
    }

    for i in 0..m {
        let v = state.velocities[i];
        let speed2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let drive = p.alpha - p.beta * speed2;
        let mut dv = [0.0f64; 3];
        for k in 0..3 {
            dv[k] = (drive * v[k] - force[i][k]) / p.mass;
        }
        for k in 0..3 {
            state.positions[i][k] += v[k] * dt;
            state.velocities[i][k] += dv[k] * dt;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DorsognaParams {
        DorsognaParams {
            mass: 1.0,
            alpha: 1.0,
            beta: 1.0,
            c_rep: 1.0,
            l_rep: 1.0,
            c_att: 1.0,
            l_att: 1.0,
        }
    }

    #[test]
    fn unit_speed_is_fixed_point_for_single_particle() {
        // (α - β|v|²)v = 0 at |v| = √(α/β) = 1
        let mut s = SimState {
            positions: vec![[0.0, 0.0, 0.0]],
            velocities: vec![[1.0, 0.0, 0.0]],
        };
        let p = params();
        for _ in 0..100 {
            step_dorsogna(&mut s, &p, 0.01);
        }
        assert!((norm(s.velocities[0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speed_relaxes_monotonically_toward_equilibrium() {
        // scalar ODE oracle: m·s' = (α - β·s²)·s, same Euler discretization
        let p = DorsognaParams { alpha: 2.0, beta: 0.5, ..params() };
        let target = (p.alpha / p.beta).sqrt();
        let mut s = SimState {
            positions: vec![[0.0, 0.0, 0.0]],
            velocities: vec![[0.3, 0.0, 0.0]],
        };
        let dt = 0.01;
        let mut oracle = 0.3f64;
        let mut prev_gap = (norm(s.velocities[0]) - target).abs();
        for _ in 0..1000 {
            step_dorsogna(&mut s, &p, dt);
            oracle += dt / p.mass * (p.alpha - p.beta * oracle * oracle) * oracle;
            let speed = norm(s.velocities[0]);
            assert!((speed - oracle).abs() < 1e-9, "sim {speed} vs oracle {oracle}");
            let gap = (speed - target).abs();
            assert!(gap <= prev_gap + 1e-12);
            prev_gap = gap;
        }
        assert!(prev_gap < 0.01 * target);
    }

    #[test]
    fn pair_forces_are_equal_and_opposite() {
        let p = params();
        let mut s = SimState {
            positions: vec![[0.0, 0.0, 0.0], [0.7, 0.2, -0.1]],
            velocities: vec![[0.0; 3], [0.0; 3]],
        };
        step_dorsogna(&mut s, &p, 0.01);
        // with zero velocities, dv comes from the pair force alone
        for k in 0..3 {
            assert!((s.velocities[0][k] + s.velocities[1][k]).abs() < 1e-15);
        }
    }

    #[test]
    fn coincident_points_do_not_poison_the_state() {
        let p = params();
        let mut s = SimState {
            positions: vec![[0.1, 0.1, 0.1], [0.1, 0.1, 0.1]],
            velocities: vec![[0.0; 3], [0.0; 3]],
        };
        step_dorsogna(&mut s, &p, 0.01);
        for pt in &s.positions {
            assert!(pt.iter().all(|c| c.is_finite()));
        }
    }
}
