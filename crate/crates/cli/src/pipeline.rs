//! End-to-end pipeline steps shared by the CLI commands and the test
//! suites: dataset generation, persistence precompute, per-(split, rate)
//! training runs, and the crocker-stack baseline.

use crate::store::{self, DatasetManifest, SequenceEntry, StoreError};
use npd_core::crocker;
use npd_core::latent::{
    train, LatentModel, ModelConfig, SeqSample, TrainConfig, TrainError, TrainResult, Variant,
};
use npd_core::metrics::{EvalProtocol, ScoreCell, SplitPlan};
use npd_core::ph::{self, PersistenceDiagram, PhError};
use npd_core::sim::{self, sample_params, Sampler, SimConfig, SimParams};
use npd_core::vectorize::{VectorizeError, VectorizerModel};
use npd_core::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ph(#[from] PhError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error("volex parameters kept exceeding the population cap after {0} attempts")]
    ResampleBudget(usize),
    #[error("{0}")]
    Invalid(String),
}

// ── generation ──────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub sampler: Sampler,
    pub n_sequences: usize,
    pub m_points: usize,
    /// observation window length in steps
    pub steps: usize,
    pub dt: f64,
    pub stride: usize,
    /// total simulated steps; when larger than `steps`, each sequence gets
    /// a random window start in `[0, total_steps − steps]`
    pub total_steps: usize,
    pub seed: u64,
    pub beta: f64,
}

impl GenerateConfig {
    pub fn new(sampler: Sampler, n_sequences: usize, m_points: usize, seed: u64) -> Self {
        GenerateConfig {
            sampler,
            n_sequences,
            m_points,
            steps: 1000,
            dt: 0.01,
            stride: 10,
            total_steps: 1000,
            seed,
            beta: sim::DORSOGNA_DEFAULT_BETA,
        }
    }

    fn hash_line(&self) -> String {
        format!(
            "{} n={} M={} steps={} dt={} stride={} total={} seed={} beta={}",
            self.sampler.name(),
            self.n_sequences,
            self.m_points,
            self.steps,
            self.dt,
            self.stride,
            self.total_steps,
            self.seed,
            self.beta
        )
    }
}

const RESAMPLE_BUDGET: usize = 10_000;

/// Simulates one sequence deterministically from its derived seed,
/// resampling parameters when the volume-exclusion population cap aborts
/// the run.
pub fn generate_sequence(
    cfg: &GenerateConfig,
    id: usize,
) -> Result<(u64, sim::ObservationSequence, usize), PipelineError> {
    let seq_seed = derive_seed(cfg.seed, id as u64);
    let mut rng = ChaCha12Rng::seed_from_u64(seq_seed);
    for _ in 0..RESAMPLE_BUDGET {
        let mut params = sample_params(cfg.sampler, &mut rng);
        if let SimParams::Dorsogna(ref mut d) = params {
            d.beta = cfg.beta;
        }
        let window_start = if cfg.total_steps > cfg.steps {
            rng.random_range(0..=(cfg.total_steps - cfg.steps))
        } else {
            0
        };
        let sim_cfg = SimConfig {
            steps: cfg.steps,
            dt: cfg.dt,
            stride: cfg.stride,
            window: Some((window_start, cfg.steps)),
        };
        match sim::simulate(params, cfg.m_points, sim_cfg, &mut rng) {
            Ok(mut seq) => {
                seq.targets = params.targets(cfg.sampler);
                return Ok((seq_seed, seq, window_start));
            }
            Err(sim::SimError::PopulationCap { .. }) => continue,
            Err(e) => return Err(PipelineError::Invalid(e.to_string())),
        }
    }
    Err(PipelineError::ResampleBudget(RESAMPLE_BUDGET))
}

/// Generates the dataset: blobs first, manifest last (atomic rename).
pub fn generate(cfg: &GenerateConfig, root: &Path) -> Result<DatasetManifest, PipelineError> {
    if store::manifest_path(root).exists() {
        return Err(StoreError::AlreadyExists(root.to_path_buf()).into());
    }
    std::fs::create_dir_all(root)
        .map_err(|e| PipelineError::Invalid(format!("cannot create {}: {e}", root.display())))?;

    let mut entries = Vec::with_capacity(cfg.n_sequences);
    for id in 0..cfg.n_sequences {
        let (seq_seed, seq, window_start) = generate_sequence(cfg, id)?;
        let bytes = store::encode_positions(&seq.clouds);
        let blob = format!("seq_{id:06}.pos");
        let (blob_len, checksum) = store::write_blob(&root.join(&blob), &bytes)?;
        entries.push(SequenceEntry {
            id,
            seed: seq_seed,
            params: seq.params.into(),
            targets: seq.targets.clone(),
            obs_count: seq.clouds.len(),
            cardinalities: seq.clouds.iter().map(|c| c.len() as u32).collect(),
            window_start,
            blob,
            blob_len,
            checksum,
        });
        if (id + 1) % 50 == 0 {
            eprintln!("generated {}/{}", id + 1, cfg.n_sequences);
        }
    }

    let manifest = DatasetManifest {
        schema_version: store::SCHEMA_VERSION,
        model: cfg.sampler.name().to_string(),
        sequence_count: cfg.n_sequences,
        m_points: cfg.m_points,
        steps: cfg.steps,
        dt: cfg.dt,
        stride: cfg.stride,
        window_max_start: cfg.total_steps.saturating_sub(cfg.steps),
        beta: cfg.beta,
        master_seed: cfg.seed,
        config_hash: store::crc32(cfg.hash_line().as_bytes()),
        vectorizer_fingerprint: None,
        sequences: entries,
    };
    store::write_manifest(root, &manifest)?;
    Ok(manifest)
}

// ── persistence precompute ──────────────────────────────────────────────

#[derive(Debug, Default)]
pub struct PrecomputeReport {
    pub computed: usize,
    pub skipped: usize,
    pub failures: Vec<(usize, String)>,
}

/// Computes and stores Rips diagrams (dimensions `0..=max_dim`) for every
/// sequence that does not already have them. Idempotent; independent
/// sequences fan out over a small thread pool; per-sequence failures are
/// recorded and the rest of the run continues.
pub fn precompute(
    root: &Path,
    max_dim: usize,
    threads: usize,
) -> Result<PrecomputeReport, PipelineError> {
    let manifest = store::read_manifest(root)?;
    let pending: Vec<&SequenceEntry> = manifest
        .sequences
        .iter()
        .filter(|e| !store::dgm_path(root, e.id).exists())
        .collect();
    let skipped = manifest.sequences.len() - pending.len();

    let next = AtomicUsize::new(0);
    let failures: Mutex<Vec<(usize, String)>> = Mutex::new(Vec::new());
    let done = AtomicUsize::new(0);
    let threads = threads.max(1);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= pending.len() {
                    break;
                }
                let entry = pending[i];
                match precompute_one(root, entry, max_dim) {
                    Ok(()) => {
                        let d = done.fetch_add(1, Ordering::Relaxed) + 1;
                        if d % 25 == 0 {
                            eprintln!("persistence: {d}/{} sequences", pending.len());
                        }
                    }
                    Err(e) => failures.lock().unwrap().push((entry.id, e.to_string())),
                }
            });
        }
    });

    let failures = failures.into_inner().unwrap();
    Ok(PrecomputeReport {
        computed: pending.len() - failures.len(),
        skipped,
        failures,
    })
}

fn precompute_one(
    root: &Path,
    entry: &SequenceEntry,
    max_dim: usize,
) -> Result<(), PipelineError> {
    let clouds = store::read_positions(root, entry)?;
    let mut diagrams = Vec::with_capacity(clouds.len());
    for cloud in &clouds {
        diagrams.push(ph::rips_diagrams(cloud, max_dim)?);
    }
    store::write_diagrams(root, entry.id, &diagrams, max_dim)?;
    Ok(())
}

// ── loaded dataset ──────────────────────────────────────────────────────

pub struct LoadedDataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    /// diagrams[sequence][observation][homology dimension]
    pub diagrams: Vec<Vec<Vec<PersistenceDiagram>>>,
    pub max_dim: usize,
}

impl LoadedDataset {
    pub fn n_obs(&self) -> usize {
        self.manifest.sequences[0].obs_count
    }

    pub fn target_dim(&self) -> usize {
        self.manifest.sequences[0].targets.len()
    }
}

/// Loads the manifest and every precomputed diagram blob into memory.
pub fn load_dataset(root: &Path) -> Result<LoadedDataset, PipelineError> {
    let manifest = store::read_manifest(root)?;
    let mut diagrams = Vec::with_capacity(manifest.sequences.len());
    let mut max_dim = None;
    for entry in &manifest.sequences {
        let (md, d) = store::read_diagrams(root, entry.id)?;
        match max_dim {
            None => max_dim = Some(md),
            Some(m) if m == md => {}
            Some(m) => {
                return Err(PipelineError::Invalid(format!(
                    "inconsistent max_dim: {m} vs {md} in sequence {}",
                    entry.id
                )))
            }
        }
        diagrams.push(d);
    }
    let max_dim = max_dim
        .ok_or_else(|| PipelineError::Invalid("dataset has no sequences".into()))?;
    Ok(LoadedDataset {
        root: root.to_path_buf(),
        manifest,
        diagrams,
        max_dim,
    })
}

// ── training runs ───────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub variant: Variant,
    /// homology dimensions fed to the vectorizer
    pub dims: Vec<usize>,
    pub protocol: EvalProtocol,
    pub split: usize,
    pub rate_idx: usize,
    pub epochs: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub lambda_reg: f64,
}

impl RunConfig {
    pub fn new(variant: Variant, dims: Vec<usize>, protocol: EvalProtocol) -> Self {
        RunConfig {
            variant,
            dims,
            protocol,
            split: 0,
            rate_idx: 0,
            epochs: 150,
            base_lr: 1e-3,
            weight_decay: 1e-3,
            batch_size: 8,
            lambda_reg: 1.0,
        }
    }
}

pub struct RunArtifacts {
    pub cell: ScoreCell,
    pub model: LatentModel,
    pub vectorizer: VectorizerModel,
    pub fingerprint: u32,
    pub result: TrainResult,
}

/// Builds the deterministic split plan of a dataset under a protocol.
pub fn split_plan(data: &LoadedDataset, protocol: &EvalProtocol) -> SplitPlan {
    let ids: Vec<usize> = data.manifest.sequences.iter().map(|e| e.id).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(protocol.master_seed, 0x5917));
    npd_core::metrics::make_splits(&ids, data.n_obs(), protocol, &mut rng)
}

/// Fits the vectorizer on the kept observations of the training split only.
pub fn fit_vectorizer(
    data: &LoadedDataset,
    train_ids: &[usize],
    kept: &std::collections::HashMap<usize, Vec<usize>>,
    dims: &[usize],
    seed: u64,
) -> VectorizerModel {
    let mut per_dim: Vec<Vec<&PersistenceDiagram>> = vec![Vec::new(); dims.len()];
    for &id in train_ids {
        for &obs in &kept[&id] {
            for (slot, &dim) in dims.iter().enumerate() {
                per_dim[slot].push(&data.diagrams[id][obs][dim]);
            }
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    VectorizerModel::fit(dims, &per_dim, &mut rng)
}

/// Observation vectors of one sequence under a fitted vectorizer
/// (all slots, row-major).
pub fn sequence_vectors(
    data: &LoadedDataset,
    vectorizer: &VectorizerModel,
    id: usize,
) -> Result<Vec<f64>, VectorizeError> {
    let d = vectorizer.output_dim();
    let n = data.diagrams[id].len();
    let mut out = Vec::with_capacity(n * d);
    for obs in &data.diagrams[id] {
        let refs: Vec<&PersistenceDiagram> = vectorizer
            .dims
            .iter()
            .map(|&dim| &obs[dim])
            .collect();
        out.extend(vectorizer.transform(&refs)?);
    }
    Ok(out)
}

fn rescaled_times(manifest: &DatasetManifest, entry: &SequenceEntry) -> Vec<f64> {
    let times = manifest.times(entry);
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    times
        .iter()
        .map(|&t| if span > 0.0 { (t - t0) / span } else { 0.5 })
        .collect()
}

/// Target standardization statistics over the training ids
/// (population σ, floored for constant targets).
pub fn target_stats(data: &LoadedDataset, train_ids: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let p = data.target_dim();
    let n = train_ids.len() as f64;
    let mut mean = vec![0.0f64; p];
    for &id in train_ids {
        for (k, &t) in data.manifest.sequences[id].targets.iter().enumerate() {
            mean[k] += t;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; p];
    for &id in train_ids {
        for (k, &t) in data.manifest.sequences[id].targets.iter().enumerate() {
            var[k] += (t - mean[k]) * (t - mean[k]);
        }
    }
    let std = var
        .iter()
        .map(|&v| {
            let s = (v / n).sqrt();
            if s > 1e-9 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Per-component mean and standard deviation of the observation vectors
/// over the kept training observations (population σ, floored).
pub fn input_stats(
    data: &LoadedDataset,
    vectorizer: &VectorizerModel,
    train_ids: &[usize],
    kept: &std::collections::HashMap<usize, Vec<usize>>,
) -> Result<(Vec<f64>, Vec<f64>), VectorizeError> {
    let d = vectorizer.output_dim();
    let mut mean = vec![0.0f64; d];
    let mut count = 0usize;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for &id in train_ids {
        let values = sequence_vectors(data, vectorizer, id)?;
        for &obs in &kept[&id] {
            let row = values[obs * d..(obs + 1) * d].to_vec();
            for (m, &v) in mean.iter_mut().zip(&row) {
                *m += v;
            }
            rows.push(row);
            count += 1;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = vec![0.0f64; d];
    for row in &rows {
        for k in 0..d {
            let c = row[k] - mean[k];
            var[k] += c * c;
        }
    }
    let std = var
        .iter()
        .map(|&v| {
            let s = (v / count as f64).sqrt();
            if s > 1e-9 {
                s
            } else {
                1.0
            }
        })
        .collect();
    Ok((mean, std))
}

#[allow(clippy::too_many_arguments)]
fn build_sample(
    data: &LoadedDataset,
    vectorizer: &VectorizerModel,
    id: usize,
    kept: &[usize],
    mean: &[f64],
    std: &[f64],
    in_mean: &[f64],
    in_std: &[f64],
) -> Result<SeqSample, VectorizeError> {
    let entry = &data.manifest.sequences[id];
    let n = entry.obs_count;
    let mut values = sequence_vectors(data, vectorizer, id)?;
    if !in_mean.is_empty() {
        let d = in_mean.len();
        for row in 0..n {
            for k in 0..d {
                values[row * d + k] = (values[row * d + k] - in_mean[k]) / in_std[k];
            }
        }
    }
    let mut mask = vec![false; n];
    for &k in kept {
        mask[k] = true;
    }
    let target = entry
        .targets
        .iter()
        .enumerate()
        .map(|(k, &t)| (t - mean[k]) / std[k])
        .collect();
    Ok(SeqSample {
        times: rescaled_times(&data.manifest, entry),
        values,
        mask,
        target,
    })
}

/// Trains one (variant, split, rate) cell end to end: vectorizer fit on the
/// training split, target standardization from the training split,
/// training, and test-set scoring in raw target units.
pub fn run_split_rate(
    data: &LoadedDataset,
    plan: &SplitPlan,
    rc: &RunConfig,
) -> Result<RunArtifacts, PipelineError> {
    let split = &plan.splits[rc.split];
    let kept = &plan.kept_times[rc.rate_idx];
    let rate = rc.protocol.subsample_rates[rc.rate_idx];
    let run_tag = (rc.split as u64) << 32 | rc.rate_idx as u64;

    let vectorizer = fit_vectorizer(
        data,
        &split.train,
        kept,
        &rc.dims,
        derive_seed(rc.protocol.master_seed, 0xfe0 ^ run_tag),
    );
    let fingerprint = store::vectorizer_fingerprint(&vectorizer);
    let (mean, std) = target_stats(data, &split.train);
    let (in_mean, in_std) = input_stats(data, &vectorizer, &split.train, kept)?;

    let train_set: Vec<SeqSample> = split
        .train
        .iter()
        .map(|&id| build_sample(data, &vectorizer, id, &kept[&id], &mean, &std, &in_mean, &in_std))
        .collect::<Result<_, _>>()?;
    let test_set: Vec<SeqSample> = split
        .test
        .iter()
        .map(|&id| build_sample(data, &vectorizer, id, &kept[&id], &mean, &std, &in_mean, &in_std))
        .collect::<Result<_, _>>()?;

    let mut config = ModelConfig::new(rc.variant, vectorizer.output_dim(), data.target_dim());
    config.lambda_reg = rc.lambda_reg;
    let mut init_rng =
        ChaCha12Rng::seed_from_u64(derive_seed(rc.protocol.master_seed, 0x111 ^ run_tag));
    let mut model = LatentModel::init(config, &mut init_rng);
    model.target_mean = mean;
    model.target_std = std;
    model.input_mean = in_mean;
    model.input_std = in_std;

    let tc = TrainConfig {
        epochs: rc.epochs,
        base_lr: rc.base_lr,
        weight_decay: rc.weight_decay,
        batch_size: rc.batch_size,
        seed: derive_seed(rc.protocol.master_seed, 0x222 ^ run_tag),
    };
    let result = train(&mut model, &train_set, &tc)?;

    let y: Vec<Vec<f64>> = split
        .test
        .iter()
        .map(|&id| data.manifest.sequences[id].targets.clone())
        .collect();
    let yhat: Vec<Vec<f64>> = test_set.iter().map(|s| model.predict(s)).collect();
    let cell = ScoreCell::from_predictions(rc.split, rate, &y, &yhat);

    Ok(RunArtifacts { cell, model, vectorizer, fingerprint, result })
}

/// Evaluates a trained model on an id set (used by `evaluate --checkpoint`).
pub fn evaluate_model(
    data: &LoadedDataset,
    model: &mut LatentModel,
    vectorizer: &VectorizerModel,
    ids: &[usize],
    kept: &std::collections::HashMap<usize, Vec<usize>>,
    split: usize,
    rate: f64,
) -> Result<ScoreCell, PipelineError> {
    let mean = model.target_mean.clone();
    let std = model.target_std.clone();
    let (in_mean, in_std) = (model.input_mean.clone(), model.input_std.clone());
    let samples: Vec<SeqSample> = ids
        .iter()
        .map(|&id| build_sample(data, vectorizer, id, &kept[&id], &mean, &std, &in_mean, &in_std))
        .collect::<Result<_, _>>()?;
    let y: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| data.manifest.sequences[id].targets.clone())
        .collect();
    let yhat: Vec<Vec<f64>> = samples.iter().map(|s| model.predict(s)).collect();
    Ok(ScoreCell::from_predictions(split, rate, &y, &yhat))
}

// ── crocker baseline ────────────────────────────────────────────────────

/// Crocker-stack features and ridge regression for one split. The baseline
/// always sees all time points (rate 1.0); maxPers is per-sequence, so the
/// features of train and test sequences are computed identically.
pub fn run_crocker_split(
    data: &LoadedDataset,
    plan: &SplitPlan,
    split_idx: usize,
    dims: &[usize],
) -> ScoreCell {
    let split = &plan.splits[split_idx];
    let features = |ids: &[usize]| -> Vec<Vec<f32>> {
        ids.iter()
            .map(|&id| {
                let seq: Vec<Vec<&PersistenceDiagram>> = data.diagrams[id]
                    .iter()
                    .map(|obs| dims.iter().map(|&d| &obs[d]).collect())
                    .collect();
                crocker::build_stack(&seq, dims, crocker::EPS_STEPS, crocker::ALPHA_STEPS)
                    .flatten()
            })
            .collect()
    };
    let train_x = features(&split.train);
    let test_x = features(&split.test);
    let train_y: Vec<Vec<f64>> = split
        .train
        .iter()
        .map(|&id| data.manifest.sequences[id].targets.clone())
        .collect();
    let test_y: Vec<Vec<f64>> = split
        .test
        .iter()
        .map(|&id| data.manifest.sequences[id].targets.clone())
        .collect();
    let (preds, _) = crocker::ridge_cv_fit_predict(
        &train_x,
        &train_y,
        &test_x,
        &crocker::default_lambda_grid(),
        5,
    );
    ScoreCell::from_predictions(split_idx, 1.0, &test_y, &preds)
}
