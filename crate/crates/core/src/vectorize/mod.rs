//! Persistence-diagram vectorization by exponential structure elements.
//!
//! Diagrams are mapped to fixed-length vectors: each coordinate is the
//! summed response of a Gaussian element in (birth, persistence)
//! coordinates, tapered linearly to zero at the diagonal. Element centers
//! come from k-means++ on a subsample of the training diagrams; scales from
//! the nearest-center half-distance.

pub mod kmeans;

use crate::ph::{wasserstein1, PersistenceDiagram};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VectorizeError {
    #[error("no vectorizer fitted for homology dimension {0}")]
    UnknownDim(usize),
    #[error("W1 distance is zero; Lipschitz ratio undefined")]
    ZeroDistance,
}

pub const ELEMENTS_PER_DIM: usize = 20;
pub const SIGMA_FLOOR: f64 = 1e-3;
pub const SAMPLE_CAP: usize = 50_000;
const LLOYD_TOL: f64 = 1e-6;
const LLOYD_MAX_ITER: usize = 200;

/// Fitted structure elements for one homology dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DimVectorizer {
    /// element centers in (birth, persistence) coordinates
    pub centers: Vec<[f64; 2]>,
    /// per-element kernel scales, floored at [`SIGMA_FLOOR`]
    pub sigmas: Vec<f64>,
    /// diagonal-taper width: contributions ramp linearly from 0 at the
    /// diagonal to full weight at persistence ν
    pub nu: f64,
    /// substitute death value for infinite bars
    pub inf_cap: f64,
    /// true when the dimension had no usable training mass; transforms to
    /// the zero vector
    pub degenerate: bool,
}

/// Vectorizers for a set of homology dimensions; output dimensionality is
/// `ELEMENTS_PER_DIM * dims.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizerModel {
    pub dims: Vec<usize>,
    pub per_dim: Vec<DimVectorizer>,
}

/// A vectorized diagram sequence entry.
#[derive(Debug, Clone)]
pub struct DiagramVector {
    pub values: Vec<f64>,
    pub time: f64,
    pub sequence: usize,
}

fn percentile_1st(sorted: &[f64]) -> f64 {
    // empirical 1st percentile: lower value at index floor(0.01·(n−1))
    sorted[(0.01 * (sorted.len() - 1) as f64).floor() as usize]
}

impl VectorizerModel {
    /// Fits one [`DimVectorizer`] per dimension from training diagrams.
    ///
    /// Per dimension: gather all (birth, persistence) points, subsample to
    /// [`SAMPLE_CAP`], run k-means++ seeding plus Lloyd iterations, set
    /// σ to half the nearest-other-center distance, ν to the 1st percentile
    /// of positive persistences, and the infinite-death cap to the largest
    /// finite coordinate seen. A dimension with no points (or no positive
    /// persistence) is marked degenerate and maps to zero vectors.
    pub fn fit(
        dims: &[usize],
        diagrams_per_dim: &[Vec<&PersistenceDiagram>],
        rng: &mut impl Rng,
    ) -> Self {
        assert_eq!(dims.len(), diagrams_per_dim.len());
        let mut per_dim = Vec::with_capacity(dims.len());
        for diagrams in diagrams_per_dim {
            // cap over finite coordinates; births of infinite bars count too
            let mut cap = 0.0f64;
            for d in diagrams {
                for &(b, dth) in &d.pairs {
                    cap = cap.max(b);
                    if dth.is_finite() {
                        cap = cap.max(dth);
                    }
                }
            }

            let mut points: Vec<[f64; 2]> = Vec::new();
            for d in diagrams {
                for &(b, dth) in &d.pairs {
                    let death = if dth.is_finite() { dth } else { cap };
                    points.push([b, (death - b).max(0.0)]);
                }
            }
            if points.len() > SAMPLE_CAP {
                // uniform subsample without replacement
                let idx = rand::seq::index::sample(rng, points.len(), SAMPLE_CAP);
                points = idx.iter().map(|i| points[i]).collect();
            }

            let mut positive: Vec<f64> =
                points.iter().map(|p| p[1]).filter(|&p| p > 0.0).collect();
            if points.is_empty() || positive.is_empty() {
                per_dim.push(DimVectorizer {
                    centers: vec![[0.0, 0.0]; ELEMENTS_PER_DIM],
                    sigmas: vec![SIGMA_FLOOR; ELEMENTS_PER_DIM],
                    nu: SIGMA_FLOOR,
                    inf_cap: cap,
                    degenerate: true,
                });
                continue;
            }
            positive.sort_by(f64::total_cmp);
            let nu = percentile_1st(&positive).max(f64::MIN_POSITIVE);

            let seeds = kmeans::kmeans_pp_seed(&points, ELEMENTS_PER_DIM, rng);
            let (centers, _) = kmeans::lloyd(&points, seeds, LLOYD_TOL, LLOYD_MAX_ITER);
            let sigmas = nearest_half_distances(&centers);
            per_dim.push(DimVectorizer {
                centers,
                sigmas,
                nu,
                inf_cap: cap,
                degenerate: false,
            });
        }
        VectorizerModel { dims: dims.to_vec(), per_dim }
    }

    pub fn output_dim(&self) -> usize {
        self.dims.len() * ELEMENTS_PER_DIM
    }

    fn dim_slot(&self, dim: usize) -> Result<usize, VectorizeError> {
        self.dims
            .iter()
            .position(|&d| d == dim)
            .ok_or(VectorizeError::UnknownDim(dim))
    }

    /// Vector for a single diagram of one homology dimension
    /// (length [`ELEMENTS_PER_DIM`]).
    pub fn transform_dim(&self, diagram: &PersistenceDiagram) -> Result<Vec<f64>, VectorizeError> {
        let slot = self.dim_slot(diagram.dim)?;
        let v = &self.per_dim[slot];
        let mut out = vec![0.0f64; ELEMENTS_PER_DIM];
        if v.degenerate {
            return Ok(out);
        }
        for &(b, dth) in &diagram.pairs {
            let death = if dth.is_finite() { dth } else { v.inf_cap };
            let pers = (death - b).max(0.0);
            let w = (pers / v.nu).min(1.0);
            if w == 0.0 {
                continue; // on-diagonal points contribute exactly zero
            }
            for (i, c) in v.centers.iter().enumerate() {
                let dx = b - c[0];
                let dy = pers - c[1];
                let s = v.sigmas[i];
                out[i] += w * (-(dx * dx + dy * dy) / (s * s)).exp();
            }
        }
        Ok(out)
    }

    /// Concatenated vector over all fitted dimensions; `diagrams` must hold
    /// one diagram per fitted dimension, in any order.
    pub fn transform(
        &self,
        diagrams: &[&PersistenceDiagram],
    ) -> Result<Vec<f64>, VectorizeError> {
        let mut out = vec![0.0f64; self.output_dim()];
        for d in diagrams {
            let slot = self.dim_slot(d.dim)?;
            let v = self.transform_dim(d)?;
            out[slot * ELEMENTS_PER_DIM..(slot + 1) * ELEMENTS_PER_DIM].copy_from_slice(&v);
        }
        Ok(out)
    }

    /// Empirical Lipschitz probe: `‖T(F) − T(G)‖₂ / W₁(F, G)`.
    pub fn lipschitz_ratio(
        &self,
        f: &PersistenceDiagram,
        g: &PersistenceDiagram,
    ) -> Result<f64, VectorizeError> {
        let w1 = wasserstein1(f, g);
        if w1 == 0.0 {
            return Err(VectorizeError::ZeroDistance);
        }
        let tf = self.transform_dim(f)?;
        let tg = self.transform_dim(g)?;
        let d2: f64 = tf.iter().zip(&tg).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(d2.sqrt() / w1)
    }
}

fn nearest_half_distances(centers: &[[f64; 2]]) -> Vec<f64> {
    let k = centers.len();
    let mut sigmas = vec![SIGMA_FLOOR; k];
    for i in 0..k {
        let mut nearest = f64::INFINITY;
        for j in 0..k {
            if i != j {
                nearest = nearest.min(kmeans::sq_dist(centers[i], centers[j]).sqrt());
            }
        }
        if nearest.is_finite() {
            sigmas[i] = nearest / 2.0;
        }
        sigmas[i] = sigmas[i].max(SIGMA_FLOOR);
    }
    sigmas
}
