//! Self-propelled particle simulations in R³.
//!
//! Three governing equations are implemented: the D'Orsogna model
//! (second-order dynamics with a Morse interaction potential), the Vicsek
//! model (unit-speed alignment dynamics with rotational noise) and a
//! volume-exclusion model (short-range repulsion plus birth/death events).
//! All integrators are explicit Euler with a fixed step size; every stepper
//! is deterministic given its RNG stream.

mod dorsogna;
mod vicsek;
mod volex;

pub use dorsogna::step_dorsogna;
pub use vicsek::step_vicsek;
pub use volex::{step_volex, VolexStepOutcome};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type Point = [f64; 3];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown model name `{0}`")]
    UnknownModel(String),
    #[error("population {population} exceeded cap {cap} at step {step}")]
    PopulationCap { population: usize, cap: usize, step: usize },
}

/// Hard population cap for the volume-exclusion model; sequences that exceed
/// it are aborted and their parameters resampled.
pub const VOLEX_POPULATION_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DorsognaParams {
    pub mass: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c_rep: f64,
    pub l_rep: f64,
    pub c_att: f64,
    pub l_att: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VicsekParams {
    pub speed: f64,     // c
    pub alignment: f64, // ν
    pub diffusion: f64, // D
    pub radius: f64,    // R
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolexParams {
    pub alpha: f64,
    pub radius: f64,
    pub birth_rate: f64,
    pub death_rate: f64,
}

/// Parameters of one simulation run, tagged by model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimParams {
    Dorsogna(DorsognaParams),
    Vicsek(VicsekParams),
    Volex(VolexParams),
}

impl SimParams {
    pub fn model_name(&self) -> &'static str {
        match self {
            SimParams::Dorsogna(_) => "dorsogna",
            SimParams::Vicsek(_) => "vicsek",
            SimParams::Volex(_) => "volex",
        }
    }

    /// The varied-parameter subvector used as the regression target.
    pub fn targets(&self, sampler: Sampler) -> Vec<f64> {
        match (self, sampler) {
            (SimParams::Dorsogna(p), Sampler::Dorsogna1k) => vec![p.c_rep, p.l_rep],
            (SimParams::Dorsogna(p), _) => vec![p.mass, p.alpha, p.c_rep, p.l_rep],
            (SimParams::Vicsek(p), _) => {
                vec![p.speed, p.alignment, p.diffusion, p.radius]
            }
            (SimParams::Volex(p), _) => {
                vec![p.alpha, p.radius, p.birth_rate, p.death_rate]
            }
        }
    }
}

/// Which parameter-sampling scheme generated a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    /// two varied parameters: C_r, l_r ~ U[0.1, 2]; m = α = 1
    Dorsogna1k,
    /// four varied parameters sampled as powers of two
    Dorsogna10k,
    Vicsek,
    Volex,
}

impl Sampler {
    pub fn parse(name: &str) -> Result<Self, SimError> {
        match name {
            "dorsogna-1k" | "dorsogna1k" => Ok(Sampler::Dorsogna1k),
            "dorsogna-10k" | "dorsogna10k" | "dorsogna" => Ok(Sampler::Dorsogna10k),
            "vicsek" => Ok(Sampler::Vicsek),
            "volex" => Ok(Sampler::Volex),
            other => Err(SimError::UnknownModel(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Dorsogna1k => "dorsogna-1k",
            Sampler::Dorsogna10k => "dorsogna-10k",
            Sampler::Vicsek => "vicsek",
            Sampler::Volex => "volex",
        }
    }

    pub fn target_count(&self) -> usize {
        match self {
            Sampler::Dorsogna1k => 2,
            _ => 4,
        }
    }

    pub fn target_names(&self) -> Vec<&'static str> {
        match self {
            Sampler::Dorsogna1k => vec!["C_r", "l_r"],
            Sampler::Dorsogna10k => vec!["m", "alpha", "C_r", "l_r"],
            Sampler::Vicsek => vec!["c", "nu", "D", "R"],
            Sampler::Volex => vec!["alpha", "R", "lambda_b", "lambda_d"],
        }
    }
}

/// β is not a varied parameter; it defaults to 0.5 and is recorded in the
/// dataset manifest.
pub const DORSOGNA_DEFAULT_BETA: f64 = 0.5;

/// Draws model parameters for one sequence.
///
/// Volume-exclusion rates are rejection-sampled so that λ_d ≤ λ_b; the
/// population-cap filter happens later, during simulation.
pub fn sample_params(sampler: Sampler, rng: &mut impl Rng) -> SimParams {
    match sampler {
        Sampler::Dorsogna1k => SimParams::Dorsogna(DorsognaParams {
            mass: 1.0,
            alpha: 1.0,
            beta: DORSOGNA_DEFAULT_BETA,
            c_rep: rng.random_range(0.1..=2.0),
            l_rep: rng.random_range(0.1..=2.0),
            c_att: 1.0,
            l_att: 1.0,
        }),
        Sampler::Dorsogna10k => {
            let t_c: f64 = rng.random_range(-1.0..=1.0);
            let t_l: f64 = rng.random_range(-1.5..=0.5);
            let t_a: f64 = rng.random_range(-2.0..=2.0);
            let t_m: f64 = rng.random_range(-2.0..=2.0);
            SimParams::Dorsogna(DorsognaParams {
                mass: 2f64.powf(t_m),
                alpha: 2f64.powf(t_a),
                beta: DORSOGNA_DEFAULT_BETA,
                c_rep: 2f64.powf(t_c),
                l_rep: 2f64.powf(t_l),
                c_att: 1.0,
                l_att: 1.0,
            })
        }
        Sampler::Vicsek => SimParams::Vicsek(VicsekParams {
            radius: rng.random_range(0.5..=5.0),
            speed: rng.random_range(0.5..=5.0),
            alignment: rng.random_range(0.5..=5.0),
            diffusion: rng.random_range(0.0..=2.0),
        }),
        Sampler::Volex => loop {
            let birth: f64 = rng.random_range(0.0..=1.0);
            let death: f64 = rng.random_range(0.0..=1.0);
            if death > birth {
                continue; // death rates above birth rates are indistinguishable
            }
            return SimParams::Volex(VolexParams {
                alpha: rng.random_range(0.0..=2.0),
                radius: rng.random_range(0.0..=2.0),
                birth_rate: birth,
                death_rate: death,
            });
        },
    }
}

/// Positions and velocities of the particles at one instant.
#[derive(Debug, Clone)]
pub struct SimState {
    pub positions: Vec<Point>,
    pub velocities: Vec<Point>,
}

impl SimState {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Positions uniform in [-0.5, 0.5]³, velocities uniform on the unit sphere.
pub fn init_state(m: usize, rng: &mut impl Rng) -> SimState {
    assert!(m >= 1);
    let mut positions = Vec::with_capacity(m);
    let mut velocities = Vec::with_capacity(m);
    for _ in 0..m {
        positions.push([
            rng.random_range(-0.5..=0.5),
            rng.random_range(-0.5..=0.5),
            rng.random_range(-0.5..=0.5),
        ]);
        velocities.push(unit_sphere(rng));
    }
    SimState { positions, velocities }
}

/// Uniform direction via a normalized Gaussian triple.
pub fn unit_sphere(rng: &mut impl Rng) -> Point {
    loop {
        let v: Point = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = norm(v);
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

pub(crate) fn norm(v: Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn sub3(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// One sequence of observed point clouds with its generating parameters.
#[derive(Debug, Clone)]
pub struct ObservationSequence {
    /// strictly increasing observation times
    pub times: Vec<f64>,
    /// one point cloud per observation time
    pub clouds: Vec<Vec<Point>>,
    pub params: SimParams,
    /// the varied-parameter subvector (regression target)
    pub targets: Vec<f64>,
}

/// Generation config for [`simulate`]; defaults match the standard protocol
/// (1000 steps of size 0.01, every 10th step observed, 100 observations).
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub steps: usize,
    pub dt: f64,
    pub stride: usize,
    /// when set, only observations with step index in
    /// `[start, start + length)` are emitted; the run extends to
    /// `start + length` steps
    pub window: Option<(usize, usize)>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { steps: 1000, dt: 0.01, stride: 10, window: None }
    }
}

/// Runs one simulation and collects the observed point clouds.
///
/// Observations are taken at step indices `w0, w0+stride, …` inside the
/// window (the full run when no window is given), so the default config
/// yields exactly `steps / stride` observations.
pub fn simulate(
    params: SimParams,
    m: usize,
    cfg: SimConfig,
    rng: &mut impl Rng,
) -> Result<ObservationSequence, SimError> {
    assert!(cfg.steps >= cfg.stride && cfg.stride >= 1);
    let (w0, wlen) = cfg.window.unwrap_or((0, cfg.steps));
    let total_steps = w0 + wlen;
    let mut state = init_state(m, rng);
    let mut times = Vec::new();
    let mut clouds = Vec::new();

    for step in 0..=total_steps {
        if step >= w0 && step < w0 + wlen && (step - w0) % cfg.stride == 0 {
            times.push(step as f64 * cfg.dt);
            clouds.push(state.positions.clone());
        }
        if step == total_steps {
            break;
        }
        match params {
            SimParams::Dorsogna(p) => step_dorsogna(&mut state, &p, cfg.dt),
            SimParams::Vicsek(p) => step_vicsek(&mut state, &p, cfg.dt, rng),
            SimParams::Volex(p) => {
                match step_volex(&mut state, &p, cfg.dt, VOLEX_POPULATION_CAP, rng) {
                    VolexStepOutcome::Ok => {}
                    VolexStepOutcome::CapExceeded { population } => {
                        return Err(SimError::PopulationCap {
                            population,
                            cap: VOLEX_POPULATION_CAP,
                            step,
                        })
                    }
                }
            }
        }
    }

    let sampler = match params {
        SimParams::Dorsogna(_) => Sampler::Dorsogna10k,
        SimParams::Vicsek(_) => Sampler::Vicsek,
        SimParams::Volex(_) => Sampler::Volex,
    };
    Ok(ObservationSequence {
        times,
        clouds,
        params,
        targets: params.targets(sampler),
    })
}
