//! Simulator invariants: unit speeds, speed relaxation, conserved
//! populations, parameter-filter coverage.

use npd_core::sim::{
    init_state, sample_params, step_dorsogna, step_vicsek, step_volex, DorsognaParams, Sampler,
    SimParams, SimState, VicsekParams, VolexParams, VolexStepOutcome,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[test]
fn vicsek_unit_speed_holds_over_100_seeded_runs() {
    for run in 0..100u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(7000 + run);
        let p = VicsekParams {
            radius: rng.random_range(0.5..=5.0),
            speed: rng.random_range(0.5..=5.0),
            alignment: rng.random_range(0.5..=5.0),
            diffusion: rng.random_range(0.0..=2.0),
        };
        let mut state = init_state(30, &mut rng);
        for _ in 0..1000 {
            step_vicsek(&mut state, &p, 0.01, &mut rng);
            for v in &state.velocities {
                assert!((norm3(*v) - 1.0).abs() < 1e-9, "run {run}");
            }
        }
    }
}

#[test]
fn dorsogna_speed_relaxes_to_sqrt_alpha_over_beta() {
    // interactions disabled: C_r = C_a = 0
    let mut rng = ChaCha12Rng::seed_from_u64(7200);
    for _ in 0..20 {
        let p = DorsognaParams {
            mass: 2f64.powf(rng.random_range(-2.0..=2.0)),
            alpha: 2f64.powf(rng.random_range(-2.0..=2.0)),
            beta: 0.5,
            c_rep: 0.0,
            l_rep: 1.0,
            c_att: 0.0,
            l_att: 1.0,
        };
        let target = (p.alpha / p.beta).sqrt();
        let mut state = init_state(5, &mut rng);
        for _ in 0..1000 {
            step_dorsogna(&mut state, &p, 0.01);
        }
        for v in &state.velocities {
            let speed = norm3(*v);
            assert!(
                (speed - target).abs() < 0.01 * target,
                "m={}, α={}: speed {speed} vs target {target}",
                p.mass,
                p.alpha
            );
        }
    }
}

#[test]
fn volex_population_constant_without_birth_death() {
    let mut rng = ChaCha12Rng::seed_from_u64(7300);
    let p = VolexParams { alpha: 1.0, radius: 0.8, birth_rate: 0.0, death_rate: 0.0 };
    let mut state = init_state(120, &mut rng);
    for _ in 0..1000 {
        assert_eq!(
            step_volex(&mut state, &p, 0.01, 2000, &mut rng),
            VolexStepOutcome::Ok
        );
        assert_eq!(state.len(), 120);
    }
}

#[test]
fn volex_two_particle_repulsion_is_monotone() {
    let p = VolexParams { alpha: 1.3, radius: 1.0, birth_rate: 0.0, death_rate: 0.0 };
    let mut state = SimState {
        positions: vec![[0.0; 3], [0.3, 0.1, -0.2]],
        velocities: vec![[0.0; 3]; 2],
    };
    let mut rng = ChaCha12Rng::seed_from_u64(7400);
    let mut prev = {
        let d = [
            state.positions[0][0] - state.positions[1][0],
            state.positions[0][1] - state.positions[1][1],
            state.positions[0][2] - state.positions[1][2],
        ];
        norm3(d)
    };
    for _ in 0..2000 {
        step_volex(&mut state, &p, 0.01, 2000, &mut rng);
        let d = [
            state.positions[0][0] - state.positions[1][0],
            state.positions[0][1] - state.positions[1][1],
            state.positions[0][2] - state.positions[1][2],
        ];
        let dist = norm3(d);
        assert!(dist >= prev - 1e-12);
        prev = dist;
    }
}

#[test]
fn volex_sampling_filter_holds_on_100k_draws() {
    let mut rng = ChaCha12Rng::seed_from_u64(7500);
    for _ in 0..100_000 {
        let SimParams::Volex(p) = sample_params(Sampler::Volex, &mut rng) else {
            panic!()
        };
        assert!(p.death_rate <= p.birth_rate);
        assert!((0.0..=1.0).contains(&p.birth_rate));
        assert!((0.0..=1.0).contains(&p.death_rate));
        assert!((0.0..=2.0).contains(&p.alpha));
        assert!((0.0..=2.0).contains(&p.radius));
    }
}
