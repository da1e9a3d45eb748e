//! Versioned binary model checkpoints.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic   4 bytes   b"NPDL"
//! version u32       1
//! variant u8        0 = latent-ODE, 1 = baseline
//! config  13 × u32  input_dim, target_dim, latent_dim, ref_points,
//!                   time_embed_dim, attn_width, enc_hidden, field_hidden,
//!                   dec_hidden, euler_steps, reg_queries, reg_ref_points,
//!                   baseline_hidden
//! lambda  f64       auxiliary regression loss weight
//! stats   u32 P, then P × f64 target means, P × f64 target stds;
//!         u32 d, then d × f64 input means, d × f64 input stds
//! params  u32 count, then per parameter:
//!         u16 name length + name bytes (utf-8)
//!         u8 rank + rank × u32 extents
//!         numel × f64 values, numel × f64 first moments,
//!         numel × f64 second moments
//! ```

use super::{LatentModel, ModelConfig, Variant};
use std::io::{self, Read, Write};
use thiserror::Error;

const MAGIC: &[u8; 4] = b"NPDL";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

fn w_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn w_f64(w: &mut impl Write, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn w_f64s(w: &mut impl Write, vs: &[f64]) -> io::Result<()> {
    for v in vs {
        w_f64(w, *v)?;
    }
    Ok(())
}

fn r_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn r_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn r_f64s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(r_f64(r)?);
    }
    Ok(out)
}

pub fn write_checkpoint(model: &LatentModel, w: &mut impl Write) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w_u32(w, VERSION)?;
    let c = &model.config;
    w.write_all(&[match c.variant {
        Variant::LatentOde => 0u8,
        Variant::Baseline => 1u8,
    }])?;
    for v in [
        c.input_dim,
        c.target_dim,
        c.latent_dim,
        c.ref_points,
        c.time_embed_dim,
        c.attn_width,
        c.enc_hidden,
        c.field_hidden,
        c.dec_hidden,
        c.euler_steps,
        c.reg_queries,
        c.reg_ref_points,
        c.baseline_hidden,
    ] {
        w_u32(w, v as u32)?;
    }
    w_f64(w, c.lambda_reg)?;
    w_u32(w, model.target_mean.len() as u32)?;
    w_f64s(w, &model.target_mean)?;
    w_f64s(w, &model.target_std)?;
    w_u32(w, model.input_mean.len() as u32)?;
    w_f64s(w, &model.input_mean)?;
    w_f64s(w, &model.input_std)?;
    w_u32(w, model.params.len() as u32)?;
    for p in &model.params {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[p.shape.len() as u8])?;
        for &e in &p.shape {
            w_u32(w, e as u32)?;
        }
        w_f64s(w, &p.value)?;
        w_f64s(w, &p.m)?;
        w_f64s(w, &p.v)?;
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<LatentModel, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r_u32(r)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let mut vb = [0u8; 1];
    r.read_exact(&mut vb)?;
    let variant = match vb[0] {
        0 => Variant::LatentOde,
        1 => Variant::Baseline,
        x => return Err(CheckpointError::Corrupt(format!("variant byte {x}"))),
    };
    let mut cfg_vals = [0usize; 13];
    for v in cfg_vals.iter_mut() {
        *v = r_u32(r)? as usize;
    }
    let lambda_reg = r_f64(r)?;
    let config = ModelConfig {
        variant,
        input_dim: cfg_vals[0],
        target_dim: cfg_vals[1],
        latent_dim: cfg_vals[2],
        ref_points: cfg_vals[3],
        time_embed_dim: cfg_vals[4],
        attn_width: cfg_vals[5],
        enc_hidden: cfg_vals[6],
        field_hidden: cfg_vals[7],
        dec_hidden: cfg_vals[8],
        euler_steps: cfg_vals[9],
        reg_queries: cfg_vals[10],
        reg_ref_points: cfg_vals[11],
        baseline_hidden: cfg_vals[12],
        lambda_reg,
    };
    let p = r_u32(r)? as usize;
    let target_mean = r_f64s(r, p)?;
    let target_std = r_f64s(r, p)?;
    let d = r_u32(r)? as usize;
    let input_mean = r_f64s(r, d)?;
    let input_std = r_f64s(r, d)?;

    let count = r_u32(r)? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let mut lb = [0u8; 2];
        r.read_exact(&mut lb)?;
        let mut name = vec![0u8; u16::from_le_bytes(lb) as usize];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| CheckpointError::Corrupt("parameter name".into()))?;
        let mut rb = [0u8; 1];
        r.read_exact(&mut rb)?;
        let mut shape = Vec::with_capacity(rb[0] as usize);
        for _ in 0..rb[0] {
            shape.push(r_u32(r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let value = r_f64s(r, numel)?;
        let m = r_f64s(r, numel)?;
        let v = r_f64s(r, numel)?;
        let mut param = crate::tensor::optim::Param::new(name, shape, value);
        param.m = m;
        param.v = v;
        params.push(param);
    }

    let mut model = LatentModel {
        config,
        params,
        index: Default::default(),
        target_mean,
        target_std,
        input_mean,
        input_std,
        ode_evals: 0,
    };
    model.reindex();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::super::{LatentModel, ModelConfig, Variant};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn roundtrip_is_byte_identical() {
        let mut rng = ChaCha12Rng::seed_from_u64(120);
        let mut cfg = ModelConfig::new(Variant::LatentOde, 8, 2);
        cfg.latent_dim = 5;
        let mut model = LatentModel::init(cfg, &mut rng);
        model.target_mean = vec![0.5, -1.0];
        model.target_std = vec![2.0, 0.3];
        model.params[3].m[0] = 0.125; // non-trivial moments survive

        let mut blob = Vec::new();
        write_checkpoint(&model, &mut blob).unwrap();
        let restored = read_checkpoint(&mut blob.as_slice()).unwrap();
        let mut blob2 = Vec::new();
        write_checkpoint(&restored, &mut blob2).unwrap();
        assert_eq!(blob, blob2);
        assert_eq!(restored.config, model.config);
        assert_eq!(restored.target_mean, model.target_mean);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let blob = b"NOPE0000000";
        assert!(matches!(
            read_checkpoint(&mut blob.as_slice()),
            Err(CheckpointError::BadMagic)
        ));
    }
}
