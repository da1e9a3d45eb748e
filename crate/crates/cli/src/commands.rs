//! Subcommand implementations. Exit codes: 0 success, 1 partial failures,
//! 2 invalid invocation (clap reserves 2 for parse errors).

use crate::pipeline::{self, GenerateConfig, RunConfig};
use crate::store;
use npd_core::latent::{history_csv, read_checkpoint, write_checkpoint, Variant};
use npd_core::metrics::{EvalProtocol, ScoreCell, ScoreReport};
use npd_core::ph::{self, pointset_wasserstein1_sum, wasserstein1, PersistenceDiagram};
use npd_core::vectorize::VectorizerModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};

pub type CmdResult = Result<i32, Box<dyn Error>>;

/// Sidecar metadata written next to every checkpoint.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub variant: String,
    pub split: usize,
    pub rate: f64,
    pub rate_idx: usize,
    pub protocol_seed: u64,
    pub n_splits: usize,
    pub train_fraction: f64,
    pub rates: Vec<f64>,
    pub dims: Vec<usize>,
    pub vectorizer_fingerprint: u32,
}

pub fn cmd_generate(cfg: GenerateConfig, out: &Path) -> CmdResult {
    let manifest = pipeline::generate(&cfg, out)?;
    println!(
        "wrote {} sequences ({} observations each) to {}",
        manifest.sequence_count,
        manifest.sequences.first().map(|e| e.obs_count).unwrap_or(0),
        out.display()
    );
    println!("config hash {:08x}", manifest.config_hash);
    Ok(0)
}

pub fn cmd_precompute(data: &Path, max_dim: usize, threads: usize) -> CmdResult {
    let report = pipeline::precompute(data, max_dim, threads)?;
    println!(
        "persistence: {} computed, {} already present, {} failed",
        report.computed,
        report.skipped,
        report.failures.len()
    );
    for (id, err) in &report.failures {
        eprintln!("sequence {id}: {err}");
    }
    Ok(if report.failures.is_empty() { 0 } else { 1 })
}

pub fn cmd_vectorize_fit(data: &Path, dims: &[usize], seed: u64) -> CmdResult {
    let dataset = pipeline::load_dataset(data)?;
    let ids: Vec<usize> = dataset.manifest.sequences.iter().map(|e| e.id).collect();
    let all_times: std::collections::HashMap<usize, Vec<usize>> = ids
        .iter()
        .map(|&id| (id, (0..dataset.manifest.sequences[id].obs_count).collect()))
        .collect();
    let model = pipeline::fit_vectorizer(&dataset, &ids, &all_times, dims, seed);
    let fp = store::write_vectorizer(&store::vectorizer_path(data), &model)?;
    let mut manifest = dataset.manifest;
    manifest.vectorizer_fingerprint = Some(fp);
    store::write_manifest(data, &manifest)?;
    println!("vectorizer fitted on {} sequences, fingerprint {fp:08x}", ids.len());
    Ok(0)
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub variant: Variant,
    pub dims: Vec<usize>,
    pub protocol: EvalProtocol,
    pub splits: Vec<usize>,
    pub rate_indices: Vec<usize>,
    pub epochs: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub lambda_reg: f64,
}

fn scores_csv(cells: &[(String, ScoreCell)]) -> String {
    let p = cells.first().map(|(_, c)| c.ve_per_param.len()).unwrap_or(0);
    let mut out = String::from("method,split,rate,ve,smape");
    for k in 0..p {
        out.push_str(&format!(",ve_p{k}"));
    }
    for k in 0..p {
        out.push_str(&format!(",smape_p{k}"));
    }
    out.push('\n');
    for (method, c) in cells {
        out.push_str(&format!(
            "{method},{},{},{:.10e},{:.10e}",
            c.split, c.rate, c.ve, c.smape
        ));
        for v in &c.ve_per_param {
            out.push_str(&format!(",{v:.10e}"));
        }
        for v in &c.smape_per_param {
            out.push_str(&format!(",{v:.10e}"));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_train(data: &Path, out: &Path, args: &TrainArgs) -> CmdResult {
    let dataset = pipeline::load_dataset(data)?;
    for &d in &args.dims {
        if d > dataset.max_dim {
            return Err(format!(
                "dimension {d} not precomputed (store has max_dim {})",
                dataset.max_dim
            )
            .into());
        }
    }
    fs::create_dir_all(out)?;
    let plan = pipeline::split_plan(&dataset, &args.protocol);
    let mut cells: Vec<(String, ScoreCell)> = Vec::new();

    for &split in &args.splits {
        for &rate_idx in &args.rate_indices {
            let rate = args.protocol.subsample_rates[rate_idx];
            let mut rc = RunConfig::new(args.variant, args.dims.clone(), args.protocol.clone());
            rc.split = split;
            rc.rate_idx = rate_idx;
            rc.epochs = args.epochs;
            rc.base_lr = args.base_lr;
            rc.weight_decay = args.weight_decay;
            rc.batch_size = args.batch_size;
            rc.lambda_reg = args.lambda_reg;

            eprintln!(
                "training {} split {split} rate {rate} ({} epochs)",
                args.variant.name(),
                args.epochs
            );
            let art = pipeline::run_split_rate(&dataset, &plan, &rc)?;

            let tag = format!("{}_s{split}_r{rate}", args.variant.name());
            let ckpt_path = out.join(format!("ckpt_{tag}.ckpt"));
            let mut blob = Vec::new();
            write_checkpoint(&art.model, &mut blob)?;
            fs::write(&ckpt_path, &blob)?;
            store::write_vectorizer(&out.join(format!("vec_{tag}.bin")), &art.vectorizer)?;
            let meta = RunMeta {
                variant: args.variant.name().to_string(),
                split,
                rate,
                rate_idx,
                protocol_seed: args.protocol.master_seed,
                n_splits: args.protocol.n_splits,
                train_fraction: args.protocol.train_fraction,
                rates: args.protocol.subsample_rates.clone(),
                dims: args.dims.clone(),
                vectorizer_fingerprint: art.fingerprint,
            };
            fs::write(
                ckpt_path.with_extension("ckpt.json"),
                serde_json::to_vec_pretty(&meta)?,
            )?;
            fs::write(
                out.join(format!("history_{tag}.csv")),
                history_csv(&art.result.history),
            )?;
            println!(
                "{}: split {split} rate {rate}: VE {:.4}  SMAPE {:.4}  (ode evals {})",
                args.variant.name(),
                art.cell.ve,
                art.cell.smape,
                art.result.ode_evals
            );
            cells.push((args.variant.name().to_string(), art.cell));
        }
    }

    let scores_path = out.join(format!("scores_{}.csv", args.variant.name()));
    fs::write(&scores_path, scores_csv(&cells))?;
    let report = ScoreReport::new(
        args.variant.name(),
        cells.into_iter().map(|(_, c)| c).collect(),
    );
    println!("{}", report.summary_row());
    println!("scores written to {}", scores_path.display());
    Ok(0)
}

pub fn cmd_crocker(data: &Path, out: &Path, dims: &[usize], protocol: &EvalProtocol) -> CmdResult {
    let dataset = pipeline::load_dataset(data)?;
    fs::create_dir_all(out)?;
    let plan = pipeline::split_plan(&dataset, protocol);
    let mut cells = Vec::new();
    for split in 0..protocol.n_splits {
        eprintln!("crocker baseline split {split} (all time points)");
        let cell = pipeline::run_crocker_split(&dataset, &plan, split, dims);
        println!("crocker: split {split}: VE {:.4}  SMAPE {:.4}", cell.ve, cell.smape);
        cells.push(("crocker".to_string(), cell));
    }
    fs::write(out.join("scores_crocker.csv"), scores_csv(&cells))?;
    let report = ScoreReport::new("crocker", cells.into_iter().map(|(_, c)| c).collect());
    println!("{}", report.summary_row());
    Ok(0)
}

fn read_scores(path: &Path) -> Result<Vec<(String, ScoreCell)>, Box<dyn Error>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() < 5 {
            continue;
        }
        out.push((
            parts[0].to_string(),
            ScoreCell {
                split: parts[1].parse()?,
                rate: parts[2].parse()?,
                ve_per_param: vec![],
                smape_per_param: vec![],
                ve: parts[3].parse()?,
                smape: parts[4].parse()?,
            },
        ));
    }
    Ok(out)
}

/// Aggregates score files into the method × (VE, SMAPE) comparison table.
pub fn cmd_evaluate_scores(score_files: &[PathBuf], dataset_name: &str) -> CmdResult {
    let mut by_method: std::collections::BTreeMap<String, Vec<ScoreCell>> = Default::default();
    for f in score_files {
        for (method, cell) in read_scores(f)? {
            by_method.entry(method).or_default().push(cell);
        }
    }
    if by_method.is_empty() {
        return Err("no score cells found".into());
    }
    println!("dataset: {dataset_name}");
    println!("{:<28} {:<12} {}", "method", "VE (mean±std)", "SMAPE (mean±std)");
    for (method, cells) in by_method {
        let report = ScoreReport::new(method, cells);
        println!("{}", report.summary_row());
    }
    Ok(0)
}

/// Re-evaluates one checkpoint on its test split, with leakage guards.
pub fn cmd_evaluate_checkpoint(
    data: &Path,
    ckpt: &Path,
    vectorizer_file: Option<&Path>,
    on_train: bool,
    allow_train_eval: bool,
) -> CmdResult {
    let meta: RunMeta = serde_json::from_slice(&fs::read(ckpt.with_extension("ckpt.json"))?)?;
    let vec_path = match vectorizer_file {
        Some(p) => p.to_path_buf(),
        None => {
            let tag = format!("{}_s{}_r{}", meta.variant, meta.split, meta.rate);
            ckpt.parent().unwrap_or(Path::new(".")).join(format!("vec_{tag}.bin"))
        }
    };
    let (vectorizer, fp) = store::read_vectorizer(&vec_path)?;
    if fp != meta.vectorizer_fingerprint {
        return Err(format!(
            "vectorizer fingerprint mismatch: checkpoint was trained with {:08x}, \
             {} has {fp:08x} — refusing to evaluate under a shifted representation",
            meta.vectorizer_fingerprint,
            vec_path.display()
        )
        .into());
    }
    if on_train && !allow_train_eval {
        return Err(
            "evaluating on the training split leaks fit information; \
             pass --allow-train-eval to override"
                .into(),
        );
    }

    let dataset = pipeline::load_dataset(data)?;
    let protocol = EvalProtocol {
        n_splits: meta.n_splits,
        train_fraction: meta.train_fraction,
        subsample_rates: meta.rates.clone(),
        master_seed: meta.protocol_seed,
    };
    let plan = pipeline::split_plan(&dataset, &protocol);
    let mut model = read_checkpoint(&mut fs::read(ckpt)?.as_slice())?;
    let ids = if on_train {
        plan.splits[meta.split].train.clone()
    } else {
        plan.splits[meta.split].test.clone()
    };
    let cell = pipeline::evaluate_model(
        &dataset,
        &mut model,
        &vectorizer,
        &ids,
        &plan.kept_times[meta.rate_idx],
        meta.split,
        meta.rate,
    )?;
    println!(
        "{} split {} rate {} ({}): VE {:.4}  SMAPE {:.4}",
        meta.variant,
        meta.split,
        meta.rate,
        if on_train { "TRAIN — leakage override" } else { "test" },
        cell.ve,
        cell.smape
    );
    Ok(0)
}

/// Random-cloud probe of the distance chain and the vectorization bound;
/// prints the measured constants.
pub fn cmd_stability_suite(pairs: usize, max_points: usize, seed: u64) -> CmdResult {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cloud = |rng: &mut ChaCha12Rng, m: usize| -> Vec<[f64; 3]> {
        (0..m)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect()
    };

    // distance chain
    let mut worst_slack = f64::INFINITY;
    let mut violations = 0usize;
    for _ in 0..pairs {
        let m = rng.random_range(3..=max_points);
        let p = cloud(&mut rng, m);
        let q = cloud(&mut rng, m);
        let dp = ph::rips_diagrams(&p, 1)?;
        let dq = ph::rips_diagrams(&q, 1)?;
        let transport = pointset_wasserstein1_sum(&p, &q)?;
        for k in 0..=1usize {
            let w1 = wasserstein1(&dp[k], &dq[k]);
            let coeff = if k == 0 { 1.0 } else { (m - 1) as f64 };
            let bound = 2.0 * coeff * transport;
            let slack = bound - w1;
            worst_slack = worst_slack.min(slack);
            if slack < -1e-9 {
                violations += 1;
            }
        }
    }
    println!(
        "distance chain: {pairs} pairs, worst slack {worst_slack:.6e}, {violations} violations"
    );

    // vectorization bound
    let fit_pool: Vec<Vec<PersistenceDiagram>> = (0..100)
        .map(|_| {
            let m = rng.random_range(3..=max_points);
            ph::rips_diagrams(&cloud(&mut rng, m), 1).unwrap()
        })
        .collect();
    let dim0: Vec<&PersistenceDiagram> = fit_pool.iter().map(|d| &d[0]).collect();
    let dim1: Vec<&PersistenceDiagram> = fit_pool.iter().map(|d| &d[1]).collect();
    let model = VectorizerModel::fit(&[0, 1], &[dim0, dim1], &mut rng);
    let mut k_emp = [0.0f64; 2];
    for _ in 0..pairs.max(1000) {
        let m = rng.random_range(3..=max_points);
        let p = cloud(&mut rng, m);
        let q = cloud(&mut rng, m);
        let dp = ph::rips_diagrams(&p, 1)?;
        let dq = ph::rips_diagrams(&q, 1)?;
        for k in 0..=1usize {
            if let Ok(r) = model.lipschitz_ratio(&dp[k], &dq[k]) {
                k_emp[k] = k_emp[k].max(r);
            }
        }
    }
    println!(
        "vectorization: empirical Lipschitz constants K₀ {:.4}, K₁ {:.4}",
        k_emp[0], k_emp[1]
    );
    Ok(if violations == 0 { 0 } else { 1 })
}
