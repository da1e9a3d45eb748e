//! Distribution-level properties of the variational machinery.

use npd_core::tensor::Tape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// One-sample reparametrization: ∇_μ E[‖z‖²] with z = μ + σ⊙ε estimated by
/// averaging the per-sample tape gradient equals 2μ (3σ Monte-Carlo band).
#[test]
fn reparametrized_gradient_matches_closed_form() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed);
    let z = 4usize;
    let mu_true = [0.7, -1.3, 0.0, 2.1];
    let logvar_true = [0.2, -0.5, 0.0, 0.4];
    let n = 100_000usize;
    let mut grad_sum = vec![0.0f64; z];
    let mut grad_sq = vec![0.0f64; z];
    for _ in 0..n {
        let mut tape = Tape::new();
        let mu = tape.leaf(mu_true.to_vec(), vec![1, z], true);
        let logvar = tape.leaf(logvar_true.to_vec(), vec![1, z], true);
        let eps: Vec<f64> = (0..z).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let eps = tape.constant(eps, vec![1, z]);
        let half = tape.scale(logvar, 0.5);
        let sigma = tape.exp(half);
        let jitter = tape.mul(sigma, eps).unwrap();
        let zvar = tape.add(mu, jitter).unwrap();
        let sq = tape.mul(zvar, zvar).unwrap();
        let out = tape.sum(sq);
        tape.backward(out).unwrap();
        for (k, g) in tape.grad(mu).unwrap().iter().enumerate() {
            grad_sum[k] += g;
            grad_sq[k] += g * g;
        }
    }
    for k in 0..z {
        let mean = grad_sum[k] / n as f64;
        let var = grad_sq[k] / n as f64 - mean * mean;
        let band = 3.0 * (var / n as f64).sqrt();
        let expected = 2.0 * mu_true[k];
        assert!(
            (mean - expected).abs() < band.max(1e-4),
            "coord {k}: {mean} vs {expected} (band {band})"
        );
    }
}
