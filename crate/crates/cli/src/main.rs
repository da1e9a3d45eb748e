//! `npd` — simulate collective behavior, summarize it by persistent
//! homology, learn the latent dynamics, and regress the governing
//! parameters.

use clap::{Args, Parser, Subcommand};
use npd_cli::commands::{self, TrainArgs};
use npd_cli::pipeline::GenerateConfig;
use npd_core::latent::Variant;
use npd_core::metrics::EvalProtocol;
use npd_core::sim::Sampler;
use serde::Deserialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "npd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArg {
    /// dataset directory (defaults to $NPD_DATA_ROOT)
    #[arg(long, env = "NPD_DATA_ROOT")]
    data: PathBuf,
}

#[derive(Args, Clone)]
struct ProtocolArgs {
    /// number of disjoint train/test splits
    #[arg(long, default_value_t = 5)]
    n_splits: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// time-point subsampling rates
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.5, 0.8])]
    rates: Vec<f64>,
    /// master seed of the split/subsampling plan
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ProtocolArgs {
    fn protocol(&self) -> EvalProtocol {
        EvalProtocol {
            n_splits: self.n_splits,
            train_fraction: self.train_fraction,
            subsample_rates: self.rates.clone(),
            master_seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset of observation sequences
    Generate {
        /// sampling scheme: dorsogna-1k | dorsogna-10k | vicsek | volex
        #[arg(long)]
        model: String,
        /// number of sequences
        #[arg(short, long)]
        n: usize,
        /// points per cloud
        #[arg(short = 'M', long, default_value_t = 200)]
        points: usize,
        /// observation window length in steps
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// observe every stride-th step
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// total simulated steps; above `steps` the window start is drawn
        /// uniformly from [0, total-steps − steps]
        #[arg(long)]
        total_steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// D'Orsogna damping coefficient
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, env = "NPD_DATA_ROOT")]
        out: PathBuf,
    },
    /// Compute and store Rips persistence diagrams for every sequence
    Precompute {
        #[command(flatten)]
        data: DataArg,
        /// highest homology dimension (0, 1 or 2)
        #[arg(long, default_value_t = 2)]
        max_dim: usize,
        /// worker threads (defaults to the available parallelism)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Fit a dataset-level vectorizer and stamp its fingerprint
    VectorizeFit {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the latent-ODE model (or the no-dynamics baseline)
    Train {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out: PathBuf,
        /// v1 (latent ODE) or baseline (no dynamics)
        #[arg(long, default_value = "v1")]
        variant: String,
        /// homology dimensions fed to the vectorizer
        #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2])]
        dims: Vec<usize>,
        #[command(flatten)]
        protocol: ProtocolArgs,
        /// splits to run (default: all)
        #[arg(long, value_delimiter = ',')]
        splits: Option<Vec<usize>>,
        /// subset of the protocol rates to run (values, default: all)
        #[arg(long, value_delimiter = ',')]
        run_rates: Option<Vec<f64>>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        weight_decay: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lambda_reg: Option<f64>,
        /// JSON config file; explicit flags win over its fields
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Aggregate score files, run the crocker baseline, or re-evaluate a
    /// checkpoint
    Evaluate {
        #[arg(long, env = "NPD_DATA_ROOT")]
        data: Option<PathBuf>,
        /// score CSV files to aggregate into a comparison table
        #[arg(long, value_delimiter = ',')]
        scores: Option<Vec<PathBuf>>,
        #[arg(long, default_value = "dataset")]
        dataset_name: String,
        /// run the crocker-stacks baseline (all time points)
        #[arg(long)]
        crocker: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2])]
        dims: Vec<usize>,
        #[command(flatten)]
        protocol: ProtocolArgs,
        /// checkpoint to re-evaluate on its test split
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// vectorizer file (defaults to the checkpoint's sibling)
        #[arg(long)]
        vectorizer: Option<PathBuf>,
        /// evaluate on the training split instead (refused without
        /// --allow-train-eval)
        #[arg(long)]
        on_train: bool,
        #[arg(long)]
        allow_train_eval: bool,
    },
    /// Probe the stability chain and the vectorization Lipschitz bound
    StabilitySuite {
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 20)]
        max_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Optional JSON training config; explicit flags override these fields.
#[derive(Debug, Default, Deserialize)]
struct TrainFileConfig {
    epochs: Option<usize>,
    base_lr: Option<f64>,
    weight_decay: Option<f64>,
    batch_size: Option<usize>,
    lambda_reg: Option<f64>,
}

fn run() -> commands::CmdResult {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            model,
            n,
            points,
            steps,
            dt,
            stride,
            total_steps,
            seed,
            beta,
            out,
        } => {
            let sampler = Sampler::parse(&model)?;
            let mut cfg = GenerateConfig::new(sampler, n, points, seed);
            cfg.steps = steps;
            cfg.dt = dt;
            cfg.stride = stride;
            cfg.total_steps = total_steps.unwrap_or(steps).max(steps);
            cfg.beta = beta;
            commands::cmd_generate(cfg, &out)
        }
        Command::Precompute { data, max_dim, threads } => {
            let threads = threads.unwrap_or_else(|| {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            });
            commands::cmd_precompute(&data.data, max_dim, threads)
        }
        Command::VectorizeFit { data, dims, seed } => {
            commands::cmd_vectorize_fit(&data.data, &dims, seed)
        }
        Command::Train {
            data,
            out,
            variant,
            dims,
            protocol,
            splits,
            run_rates,
            epochs,
            lr,
            weight_decay,
            batch_size,
            lambda_reg,
            config,
        } => {
            let variant = Variant::parse(&variant)
                .ok_or_else(|| format!("unknown variant `{variant}` (use v1 or baseline)"))?;
            let file_cfg: TrainFileConfig = match config {
                Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
                None => TrainFileConfig::default(),
            };
            let proto = protocol.protocol();
            let rate_indices: Vec<usize> = match run_rates {
                None => (0..proto.subsample_rates.len()).collect(),
                Some(values) => values
                    .iter()
                    .map(|v| {
                        proto
                            .subsample_rates
                            .iter()
                            .position(|r| (r - v).abs() < 1e-12)
                            .ok_or_else(|| format!("rate {v} not in protocol rates"))
                    })
                    .collect::<Result<_, _>>()?,
            };
            let args = TrainArgs {
                variant,
                dims,
                splits: splits.unwrap_or_else(|| (0..proto.n_splits).collect()),
                rate_indices,
                epochs: epochs.or(file_cfg.epochs).unwrap_or(150),
                base_lr: lr.or(file_cfg.base_lr).unwrap_or(1e-3),
                weight_decay: weight_decay.or(file_cfg.weight_decay).unwrap_or(1e-3),
                batch_size: batch_size.or(file_cfg.batch_size).unwrap_or(8),
                lambda_reg: lambda_reg.or(file_cfg.lambda_reg).unwrap_or(1.0),
                protocol: proto,
            };
            commands::cmd_train(&data.data, &out, &args)
        }
        Command::Evaluate {
            data,
            scores,
            dataset_name,
            crocker,
            out,
            dims,
            protocol,
            checkpoint,
            vectorizer,
            on_train,
            allow_train_eval,
        } => {
            if let Some(scores) = scores {
                return commands::cmd_evaluate_scores(&scores, &dataset_name);
            }
            let data = data.ok_or("--data (or $NPD_DATA_ROOT) is required")?;
            if crocker {
                let out = out.unwrap_or_else(|| data.clone());
                return commands::cmd_crocker(&data, &out, &dims, &protocol.protocol());
            }
            if let Some(ckpt) = checkpoint {
                return commands::cmd_evaluate_checkpoint(
                    &data,
                    &ckpt,
                    vectorizer.as_deref(),
                    on_train,
                    allow_train_eval,
                );
            }
            Err("evaluate needs one of --scores, --crocker or --checkpoint".into())
        }
        Command::StabilitySuite { pairs, max_points, seed } => {
            commands::cmd_stability_suite(pairs, max_points, seed)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
