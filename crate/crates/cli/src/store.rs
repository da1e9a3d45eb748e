//! On-disk dataset store.
//!
//! A dataset directory holds one `manifest.json` plus one blob per
//! sequence. All binary formats are little-endian and versioned.
//!
//! * `seq_NNNNNN.pos` — positions as f32, shape `(N_obs, M_i, 3)`,
//!   concatenated in time order (per-time cardinalities in the manifest).
//! * `seq_NNNNNN.dgm` — persistence diagrams per (time, dimension) as f64
//!   (birth, death) pairs; infinite deaths are IEEE +∞.
//! * `vectorizer.bin` — fitted structure elements; its crc32 is the
//!   vectorizer fingerprint recorded in the manifest.
//!
//! The manifest is written last via an atomic rename, so readers never see
//! a manifest that references missing or truncated blobs.

use npd_core::ph::PersistenceDiagram;
use npd_core::sim::{DorsognaParams, SimParams, VicsekParams, VolexParams};
use npd_core::vectorize::{DimVectorizer, VectorizerModel};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("manifest parse error: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error("blob {path} checksum mismatch (expected {expected:08x}, got {got:08x})")]
    Checksum { path: PathBuf, expected: u32, got: u32 },
    #[error("blob {path} length mismatch (expected {expected}, got {got})")]
    BlobLength { path: PathBuf, expected: u64, got: u64 },
    #[error("corrupt diagram file {path}: {reason}")]
    CorruptDiagrams { path: PathBuf, reason: String },
    #[error("corrupt vectorizer file: {0}")]
    CorruptVectorizer(String),
    #[error("dataset already exists at {0}; refusing to overwrite")]
    AlreadyExists(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// JSON-friendly mirror of [`SimParams`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model")]
pub enum ParamsRecord {
    #[serde(rename = "dorsogna")]
    Dorsogna { m: f64, alpha: f64, beta: f64, c_r: f64, l_r: f64, c_a: f64, l_a: f64 },
    #[serde(rename = "vicsek")]
    Vicsek { c: f64, nu: f64, d: f64, r: f64 },
    #[serde(rename = "volex")]
    Volex { alpha: f64, r: f64, lambda_b: f64, lambda_d: f64 },
}

impl From<SimParams> for ParamsRecord {
    fn from(p: SimParams) -> Self {
        match p {
            SimParams::Dorsogna(d) => ParamsRecord::Dorsogna {
                m: d.mass,
                alpha: d.alpha,
                beta: d.beta,
                c_r: d.c_rep,
                l_r: d.l_rep,
                c_a: d.c_att,
                l_a: d.l_att,
            },
            SimParams::Vicsek(v) => ParamsRecord::Vicsek {
                c: v.speed,
                nu: v.alignment,
                d: v.diffusion,
                r: v.radius,
            },
            SimParams::Volex(v) => ParamsRecord::Volex {
                alpha: v.alpha,
                r: v.radius,
                lambda_b: v.birth_rate,
                lambda_d: v.death_rate,
            },
        }
    }
}

impl ParamsRecord {
    pub fn to_sim(&self) -> SimParams {
        match *self {
            ParamsRecord::Dorsogna { m, alpha, beta, c_r, l_r, c_a, l_a } => {
                SimParams::Dorsogna(DorsognaParams {
                    mass: m,
                    alpha,
                    beta,
                    c_rep: c_r,
                    l_rep: l_r,
                    c_att: c_a,
                    l_att: l_a,
                })
            }
            ParamsRecord::Vicsek { c, nu, d, r } => SimParams::Vicsek(VicsekParams {
                speed: c,
                alignment: nu,
                diffusion: d,
                radius: r,
            }),
            ParamsRecord::Volex { alpha, r, lambda_b, lambda_d } => {
                SimParams::Volex(VolexParams {
                    alpha,
                    radius: r,
                    birth_rate: lambda_b,
                    death_rate: lambda_d,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub id: usize,
    pub seed: u64,
    pub params: ParamsRecord,
    pub targets: Vec<f64>,
    pub obs_count: usize,
    /// per-observation point counts (constant except for volex)
    pub cardinalities: Vec<u32>,
    /// first simulated step of the observation window
    pub window_start: usize,
    pub blob: String,
    pub blob_len: u64,
    pub checksum: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    /// sampling scheme name: dorsogna-1k | dorsogna-10k | vicsek | volex
    pub model: String,
    pub sequence_count: usize,
    pub m_points: usize,
    pub steps: usize,
    pub dt: f64,
    pub stride: usize,
    /// maximum window start for the observation-timeframe experiment
    /// (0 = sequence starts at t = 0)
    pub window_max_start: usize,
    /// D'Orsogna damping coefficient used for generation
    pub beta: f64,
    pub master_seed: u64,
    pub config_hash: u32,
    pub vectorizer_fingerprint: Option<u32>,
    pub sequences: Vec<SequenceEntry>,
}

impl DatasetManifest {
    /// Observation times of one sequence, reconstructed exactly from the
    /// window start and stride.
    pub fn times(&self, entry: &SequenceEntry) -> Vec<f64> {
        (0..entry.obs_count)
            .map(|k| (entry.window_start + k * self.stride) as f64 * self.dt)
            .collect()
    }
}

pub fn crc32(bytes: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(bytes);
    h.finalize()
}

pub fn manifest_path(root: &Path) -> PathBuf {
    root.join("manifest.json")
}

pub fn pos_path(root: &Path, id: usize) -> PathBuf {
    root.join(format!("seq_{id:06}.pos"))
}

pub fn dgm_path(root: &Path, id: usize) -> PathBuf {
    root.join(format!("seq_{id:06}.dgm"))
}

pub fn vectorizer_path(root: &Path) -> PathBuf {
    root.join("vectorizer.bin")
}

/// Serializes and atomically installs the manifest.
pub fn write_manifest(root: &Path, manifest: &DatasetManifest) -> Result<(), StoreError> {
    let path = manifest_path(root);
    let tmp = root.join("manifest.json.tmp");
    let json = serde_json::to_vec_pretty(manifest)?;
    fs::write(&tmp, &json).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(())
}

pub fn read_manifest(root: &Path) -> Result<DatasetManifest, StoreError> {
    let path = manifest_path(root);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let manifest: DatasetManifest = serde_json::from_slice(&bytes)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(StoreError::SchemaVersion(manifest.schema_version));
    }
    Ok(manifest)
}

/// Encodes clouds as f32 little-endian triples in time order.
pub fn encode_positions(clouds: &[Vec<[f64; 3]>]) -> Vec<u8> {
    let total: usize = clouds.iter().map(|c| c.len() * 3 * 4).sum();
    let mut out = Vec::with_capacity(total);
    for cloud in clouds {
        for p in cloud {
            for &c in p {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
    }
    out
}

/// Reads a positions blob back into per-time clouds (f32 widened to f64),
/// verifying length and checksum against the manifest entry.
pub fn read_positions(
    root: &Path,
    entry: &SequenceEntry,
) -> Result<Vec<Vec<[f64; 3]>>, StoreError> {
    let path = root.join(&entry.blob);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    if bytes.len() as u64 != entry.blob_len {
        return Err(StoreError::BlobLength {
            path,
            expected: entry.blob_len,
            got: bytes.len() as u64,
        });
    }
    let got = crc32(&bytes);
    if got != entry.checksum {
        return Err(StoreError::Checksum { path, expected: entry.checksum, got });
    }
    let mut clouds = Vec::with_capacity(entry.obs_count);
    let mut off = 0usize;
    for &card in &entry.cardinalities {
        let mut cloud = Vec::with_capacity(card as usize);
        for _ in 0..card {
            let mut p = [0.0f64; 3];
            for c in p.iter_mut() {
                let mut b = [0u8; 4];
                b.copy_from_slice(&bytes[off..off + 4]);
                *c = f32::from_le_bytes(b) as f64;
                off += 4;
            }
            cloud.push(p);
        }
        clouds.push(cloud);
    }
    Ok(clouds)
}

// ── diagram codec ───────────────────────────────────────────────────────

const DGM_MAGIC: &[u8; 4] = b"NPDG";
const DGM_VERSION: u32 = 1;

/// Encodes the diagrams of one sequence: `diagrams[time][dim]`.
pub fn encode_diagrams(diagrams: &[Vec<PersistenceDiagram>], max_dim: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(DGM_MAGIC);
    out.extend_from_slice(&DGM_VERSION.to_le_bytes());
    out.extend_from_slice(&(max_dim as u32).to_le_bytes());
    out.extend_from_slice(&(diagrams.len() as u32).to_le_bytes());
    for per_time in diagrams {
        debug_assert_eq!(per_time.len(), max_dim + 1);
        for d in per_time {
            out.extend_from_slice(&(d.pairs.len() as u32).to_le_bytes());
            for &(b, dd) in &d.pairs {
                out.extend_from_slice(&b.to_le_bytes());
                out.extend_from_slice(&dd.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_diagrams(
    bytes: &[u8],
    path: &Path,
) -> Result<(usize, Vec<Vec<PersistenceDiagram>>), StoreError> {
    let corrupt = |reason: &str| StoreError::CorruptDiagrams {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| corrupt("truncated magic"))?;
    if &magic != DGM_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut &[u8]| -> Result<u32, StoreError> {
        r.read_exact(&mut u32buf).map_err(|_| corrupt("truncated u32"))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let version = read_u32(&mut r)?;
    if version != DGM_VERSION {
        return Err(corrupt(&format!("version {version}")));
    }
    let max_dim = read_u32(&mut r)? as usize;
    let n_obs = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let mut per_time = Vec::with_capacity(max_dim + 1);
        for dim in 0..=max_dim {
            let count = read_u32(&mut r)? as usize;
            let mut pairs = Vec::with_capacity(count);
            for _ in 0..count {
                let mut b = [0u8; 8];
                r.read_exact(&mut b).map_err(|_| corrupt("truncated pair"))?;
                let birth = f64::from_le_bytes(b);
                r.read_exact(&mut b).map_err(|_| corrupt("truncated pair"))?;
                let death = f64::from_le_bytes(b);
                pairs.push((birth, death));
            }
            per_time.push(PersistenceDiagram { dim, pairs });
        }
        out.push(per_time);
    }
    Ok((max_dim, out))
}

/// Writes the diagram blob for a sequence.
pub fn write_diagrams(
    root: &Path,
    id: usize,
    diagrams: &[Vec<PersistenceDiagram>],
    max_dim: usize,
) -> Result<(), StoreError> {
    let path = dgm_path(root, id);
    let tmp = root.join(format!("seq_{id:06}.dgm.tmp"));
    fs::write(&tmp, encode_diagrams(diagrams, max_dim)).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(())
}

pub fn read_diagrams(
    root: &Path,
    id: usize,
) -> Result<(usize, Vec<Vec<PersistenceDiagram>>), StoreError> {
    let path = dgm_path(root, id);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    decode_diagrams(&bytes, &path)
}

// ── vectorizer codec ────────────────────────────────────────────────────

const VEC_MAGIC: &[u8; 4] = b"NPDV";
const VEC_VERSION: u32 = 1;

pub fn encode_vectorizer(model: &VectorizerModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(VEC_MAGIC);
    out.extend_from_slice(&VEC_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.dims.len() as u32).to_le_bytes());
    for (slot, &dim) in model.dims.iter().enumerate() {
        let v = &model.per_dim[slot];
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.push(v.degenerate as u8);
        out.extend_from_slice(&v.nu.to_le_bytes());
        out.extend_from_slice(&v.inf_cap.to_le_bytes());
        out.extend_from_slice(&(v.centers.len() as u32).to_le_bytes());
        for c in &v.centers {
            out.extend_from_slice(&c[0].to_le_bytes());
            out.extend_from_slice(&c[1].to_le_bytes());
        }
        for s in &v.sigmas {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    out
}

pub fn decode_vectorizer(bytes: &[u8]) -> Result<VectorizerModel, StoreError> {
    let corrupt = |m: &str| StoreError::CorruptVectorizer(m.to_string());
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| corrupt("truncated"))?;
    if &magic != VEC_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut read_u32 = |r: &mut &[u8]| -> Result<u32, StoreError> {
        r.read_exact(&mut b4).map_err(|_| corrupt("truncated u32"))?;
        Ok(u32::from_le_bytes(b4))
    };
    if read_u32(&mut r)? != VEC_VERSION {
        return Err(corrupt("version"));
    }
    let ndims = read_u32(&mut r)? as usize;
    let mut dims = Vec::with_capacity(ndims);
    let mut per_dim = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let dim = read_u32(&mut r)? as usize;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag).map_err(|_| corrupt("flag"))?;
        r.read_exact(&mut b8).map_err(|_| corrupt("nu"))?;
        let nu = f64::from_le_bytes(b8);
        r.read_exact(&mut b8).map_err(|_| corrupt("cap"))?;
        let inf_cap = f64::from_le_bytes(b8);
        let k = read_u32(&mut r)? as usize;
        let mut centers = Vec::with_capacity(k);
        for _ in 0..k {
            r.read_exact(&mut b8).map_err(|_| corrupt("center"))?;
            let x = f64::from_le_bytes(b8);
            r.read_exact(&mut b8).map_err(|_| corrupt("center"))?;
            let y = f64::from_le_bytes(b8);
            centers.push([x, y]);
        }
        let mut sigmas = Vec::with_capacity(k);
        for _ in 0..k {
            r.read_exact(&mut b8).map_err(|_| corrupt("sigma"))?;
            sigmas.push(f64::from_le_bytes(b8));
        }
        dims.push(dim);
        per_dim.push(DimVectorizer {
            centers,
            sigmas,
            nu,
            inf_cap,
            degenerate: flag[0] != 0,
        });
    }
    Ok(VectorizerModel { dims, per_dim })
}

/// Writes the vectorizer and returns its fingerprint (crc32 of the bytes).
pub fn write_vectorizer(path: &Path, model: &VectorizerModel) -> Result<u32, StoreError> {
    let bytes = encode_vectorizer(model);
    let fp = crc32(&bytes);
    let tmp = path.with_extension("bin.tmp");
    fs::write(&tmp, &bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(fp)
}

pub fn read_vectorizer(path: &Path) -> Result<(VectorizerModel, u32), StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let fp = crc32(&bytes);
    Ok((decode_vectorizer(&bytes)?, fp))
}

pub fn vectorizer_fingerprint(model: &VectorizerModel) -> u32 {
    crc32(&encode_vectorizer(model))
}

/// Writes a generic blob with an atomic rename; returns (len, crc32).
pub fn write_blob(path: &Path, bytes: &[u8]) -> Result<(u64, u32), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok((bytes.len() as u64, crc32(bytes)))
}
