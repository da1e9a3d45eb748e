//! Core library for learning the parameters of collective-behavior models
//! from the topology of evolving point clouds.
//!
//! The pipeline: simulate a particle model ([`sim`]), summarize every observed
//! point cloud by Vietoris–Rips persistent homology ([`ph`]), map the diagrams
//! to fixed-length vectors ([`vectorize`]), fit a latent-ODE sequence model on
//! the vector dynamics ([`latent`]) and regress the governing-equation
//! parameters. [`crocker`] provides the Betti-curve stack baseline and
//! [`metrics`] the evaluation protocol.

pub mod crocker;
pub mod latent;
pub mod metrics;
pub mod ph;
pub mod sim;
pub mod tensor;
pub mod vectorize;

/// Derives an independent sub-seed from a master seed and a stream index.
///
/// SplitMix64 finalizer; used everywhere a master seed fans out into
/// per-sequence / per-run RNG streams so that streams stay decorrelated and
/// reproducible.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::derive_seed;

    #[test]
    fn derived_seeds_differ_across_streams() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        // and are stable
        assert_eq!(a, derive_seed(42, 0));
    }
}
