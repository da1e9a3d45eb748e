//! Forward passes: attention encoder, Euler integration of the latent
//! field, decoder, regression head, and the combined training loss.

use super::{LatentModel, SeqSample, Variant};
use crate::tensor::{Tape, TensorError, Var};
use rand::Rng;
use rand_distr::StandardNormal;

const MASK_BIAS: f64 = -1e30;

fn linspace01(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Loss pieces of one forward pass, as tape nodes.
pub(crate) struct SeqLoss {
    pub total: Var,
    pub neg_elbo: Option<Var>,
    pub reg_mse: Var,
}

/// Scalar training statistics of one batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchStats {
    pub loss: f64,
    pub neg_elbo: f64,
    pub reg_mse: f64,
}

impl LatentModel {
    pub(crate) fn leaf_params(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.value.clone(), p.shape.clone(), true))
            .collect()
    }

    fn v(&self, vars: &[Var], name: &str) -> Var {
        vars[self.idx(name)]
    }

    /// Learned sinusoidal embedding of a column of times: `sin(t·ω + φ)`.
    fn time_embedding(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        prefix: &str,
        times: &[f64],
    ) -> Result<Var, TensorError> {
        let n = times.len();
        let col = tape.constant(times.to_vec(), vec![n, 1]);
        let omega = self.v(vars, &format!("{prefix}.omega"));
        let phi = self.v(vars, &format!("{prefix}.phi"));
        let de = self.config.time_embed_dim;
        let prod = tape.matmul(col, omega)?;
        let phib = tape.broadcast(phi, &[n, de])?;
        let pre = tape.add(prod, phib)?;
        Ok(tape.sin(pre))
    }

    /// Time-query attention: reference times attend over keyed time points;
    /// returns the `ref × value_dim` aggregate. `mask` marks valid keys.
    fn attention(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        prefix: &str,
        ref_times: &[f64],
        key_times: &[f64],
        values: Var,
        mask: Option<&[bool]>,
    ) -> Result<Var, TensorError> {
        let e_keys = self.time_embedding(tape, vars, prefix, key_times)?;
        let e_refs = self.time_embedding(tape, vars, prefix, ref_times)?;
        let wq = self.v(vars, &format!("{prefix}.wq"));
        let wk = self.v(vars, &format!("{prefix}.wk"));
        let q = tape.matmul(e_refs, wq)?;
        let k = tape.matmul(e_keys, wk)?;
        let kt = tape.transpose(k)?;
        let scores = tape.matmul(q, kt)?;
        let mut scores = tape.scale(scores, 1.0 / (self.config.attn_width as f64).sqrt());
        if let Some(m) = mask {
            let bias_row: Vec<f64> = m.iter().map(|&b| if b { 0.0 } else { MASK_BIAS }).collect();
            let n = bias_row.len();
            let bias = tape.constant(bias_row, vec![1, n]);
            let bias = tape.broadcast(bias, &[ref_times.len(), n])?;
            scores = tape.add(scores, bias)?;
        }
        let attn = tape.softmax(scores);
        tape.matmul(attn, values)
    }

    /// Posterior parameters (μ, log σ²) of the initial latent state.
    pub(crate) fn encode(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        seq: &SeqSample,
    ) -> Result<(Var, Var), TensorError> {
        let cfg = &self.config;
        let n = seq.n_slots();
        let values = tape.constant(masked_values(seq, cfg.input_dim), vec![n, cfg.input_dim]);
        let refs = linspace01(cfg.ref_points);
        let agg = self.attention(tape, vars, "enc", &refs, &seq.times, values, Some(&seq.mask))?;
        let flat = tape.reshape(agg, vec![1, cfg.ref_points * cfg.input_dim])?;
        let w1 = self.v(vars, "enc.w1");
        let b1 = self.v(vars, "enc.b1");
        let w2 = self.v(vars, "enc.w2");
        let b2 = self.v(vars, "enc.b2");
        let h = tape.matmul(flat, w1)?;
        let h = tape.add(h, b1)?;
        let h = tape.relu(h);
        let out = tape.matmul(h, w2)?;
        let out = tape.add(out, b2)?;
        let mu = tape.slice_cols(out, 0, cfg.latent_dim)?;
        let logvar = tape.slice_cols(out, cfg.latent_dim, cfg.latent_dim)?;
        Ok((mu, logvar))
    }

    /// Latent vector field `f(z)`.
    fn field(&self, tape: &mut Tape, vars: &[Var], z: Var) -> Result<Var, TensorError> {
        let w1 = self.v(vars, "field.w1");
        let b1 = self.v(vars, "field.b1");
        let w2 = self.v(vars, "field.w2");
        let b2 = self.v(vars, "field.b2");
        let h = tape.matmul(z, w1)?;
        let h = tape.add(h, b1)?;
        let h = tape.tanh(h);
        let out = tape.matmul(h, w2)?;
        tape.add(out, b2)
    }

    /// Explicit Euler flow of `z0` across the merged grid of solver steps
    /// and readout times; returns the state at each requested readout.
    pub(crate) fn integrate(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        z0: Var,
        readouts: &[f64],
        evals: &mut u64,
    ) -> Result<Vec<Var>, TensorError> {
        let s = self.config.euler_steps;
        let mut grid: Vec<f64> = (0..=s).map(|k| k as f64 / s as f64).collect();
        grid.extend_from_slice(readouts);
        grid.sort_unstable_by(f64::total_cmp);
        grid.dedup();

        let mut out: Vec<Option<Var>> = vec![None; readouts.len()];
        let mut z = z0;
        for (gi, &t) in grid.iter().enumerate() {
            for (ri, &rt) in readouts.iter().enumerate() {
                if rt == t && out[ri].is_none() {
                    out[ri] = Some(z);
                }
            }
            if gi + 1 < grid.len() {
                let dt = grid[gi + 1] - t;
                let f = self.field(tape, vars, z)?;
                *evals += 1;
                let step = tape.scale(f, dt);
                z = tape.add(z, step)?;
            }
        }
        Ok(out.into_iter().map(|v| v.expect("readout on grid")).collect())
    }

    /// Decoder applied to a matrix of latent states (rows).
    pub(crate) fn decode_rows(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        zmat: Var,
    ) -> Result<Var, TensorError> {
        let rows = tape.shape(zmat)[0];
        let w1 = self.v(vars, "dec.w1");
        let b1 = self.v(vars, "dec.b1");
        let w2 = self.v(vars, "dec.w2");
        let b2 = self.v(vars, "dec.b2");
        let b1b = tape.broadcast(b1, &[rows, self.config.dec_hidden])?;
        let h = tape.matmul(zmat, w1)?;
        let h = tape.add(h, b1b)?;
        let h = tape.relu(h);
        let b2b = tape.broadcast(b2, &[rows, self.config.input_dim])?;
        let out = tape.matmul(h, w2)?;
        tape.add(out, b2b)
    }

    /// Regression head over the latent path: attention with its own
    /// parameters, mean-pooled reference outputs, one linear map.
    pub(crate) fn regress_path(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        path: Var,
        path_times: &[f64],
    ) -> Result<Var, TensorError> {
        let refs = linspace01(self.config.reg_ref_points);
        let agg = self.attention(tape, vars, "reg", &refs, path_times, path, None)?;
        let pool_w = tape.constant(
            vec![1.0 / self.config.reg_ref_points as f64; self.config.reg_ref_points],
            vec![1, self.config.reg_ref_points],
        );
        let pooled = tape.matmul(pool_w, agg)?;
        let out_w = self.v(vars, "reg.out_w");
        let out_b = self.v(vars, "reg.out_b");
        let out = tape.matmul(pooled, out_w)?;
        tape.add(out, out_b)
    }

    /// Baseline head: attention straight over the observation vectors,
    /// mean-pool, hidden relu layer, linear map.
    pub(crate) fn regress_baseline(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        seq: &SeqSample,
    ) -> Result<Var, TensorError> {
        let cfg = &self.config;
        let n = seq.n_slots();
        let values = tape.constant(masked_values(seq, cfg.input_dim), vec![n, cfg.input_dim]);
        let refs = linspace01(cfg.reg_ref_points);
        let agg =
            self.attention(tape, vars, "reg", &refs, &seq.times, values, Some(&seq.mask))?;
        let pool_w = tape.constant(
            vec![1.0 / cfg.reg_ref_points as f64; cfg.reg_ref_points],
            vec![1, cfg.reg_ref_points],
        );
        let pooled = tape.matmul(pool_w, agg)?;
        let h_w = self.v(vars, "reg.h_w");
        let h_b = self.v(vars, "reg.h_b");
        let h = tape.matmul(pooled, h_w)?;
        let h = tape.add(h, h_b)?;
        let h = tape.relu(h);
        let out_w = self.v(vars, "reg.out_w");
        let out_b = self.v(vars, "reg.out_b");
        let out = tape.matmul(h, out_w)?;
        tape.add(out, out_b)
    }

    /// Full per-sequence loss. `noise` is the reparametrization draw
    /// (length z); pass zeros to use the posterior mean.
    pub(crate) fn seq_loss(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        seq: &SeqSample,
        noise: &[f64],
        evals: &mut u64,
    ) -> Result<SeqLoss, TensorError> {
        let cfg = &self.config;
        match cfg.variant {
            Variant::Baseline => {
                let pred = self.regress_baseline(tape, vars, seq)?;
                let target = tape.constant(seq.target.clone(), vec![1, cfg.target_dim]);
                let se = tape.squared_error(pred, target)?;
                let reg_mse = tape.scale(se, 1.0 / cfg.target_dim as f64);
                Ok(SeqLoss { total: reg_mse, neg_elbo: None, reg_mse })
            }
            Variant::LatentOde => {
                let n = seq.n_slots();
                let (mu, logvar) = self.encode(tape, vars, seq)?;

                // z0 = μ + exp(logvar/2) ⊙ ε
                let eps = tape.constant(noise.to_vec(), vec![1, cfg.latent_dim]);
                let half = tape.scale(logvar, 0.5);
                let sigma = tape.exp(half);
                let jitter = tape.mul(sigma, eps)?;
                let z0 = tape.add(mu, jitter)?;

                // one integration pass serves both decoder and regressor
                let reg_times = linspace01(cfg.reg_queries);
                let mut readouts = seq.times.clone();
                readouts.extend_from_slice(&reg_times);
                let states = self.integrate(tape, vars, z0, &readouts, evals)?;

                let z_obs = tape.concat_rows(&states[..n])?;
                let recon_rows = self.decode_rows(tape, vars, z_obs)?;
                let mask_mat = tape.constant(mask_matrix(seq, cfg.input_dim), vec![n, cfg.input_dim]);
                let masked_pred = tape.mul(recon_rows, mask_mat)?;
                let observed = tape.constant(masked_values(seq, cfg.input_dim), vec![n, cfg.input_dim]);
                let se = tape.squared_error(masked_pred, observed)?;
                let recon = tape.scale(se, 0.5);

                // KL(N(μ, σ²) ‖ N(0, I)) in closed form
                let mu2 = tape.mul(mu, mu)?;
                let ev = tape.exp(logvar);
                let sum1 = tape.add(mu2, ev)?;
                let sum2 = tape.sub(sum1, logvar)?;
                let ones = tape.constant(vec![1.0; cfg.latent_dim], vec![1, cfg.latent_dim]);
                let sum3 = tape.sub(sum2, ones)?;
                let kl_sum = tape.sum(sum3);
                let kl = tape.scale(kl_sum, 0.5);

                let neg_elbo = tape.add(recon, kl)?;

                let z_reg = tape.concat_rows(&states[n..])?;
                let pred = self.regress_path(tape, vars, z_reg, &reg_times)?;
                let target = tape.constant(seq.target.clone(), vec![1, cfg.target_dim]);
                let se = tape.squared_error(pred, target)?;
                let reg_mse = tape.scale(se, 1.0 / cfg.target_dim as f64);

                // the regression MSE is O(1) while the reconstruction term
                // sums over every observed entry; weighting by the entry
                // count makes λ_reg a dimensionless balance knob
                let kept_entries = seq.mask.iter().filter(|&&m| m).count() * cfg.input_dim;
                let weighted = tape.scale(reg_mse, cfg.lambda_reg * kept_entries as f64);
                let total = tape.add(neg_elbo, weighted)?;
                Ok(SeqLoss { total, neg_elbo: Some(neg_elbo), reg_mse })
            }
        }
    }

    /// Mean loss over a batch with backward pass; gradients land in
    /// `self.params[..].grad`. One reparametrization draw per sequence.
    pub fn batch_gradients(
        &mut self,
        batch: &[&SeqSample],
        rng: &mut impl Rng,
    ) -> Result<BatchStats, TensorError> {
        let (stats, grads) = self.batch_pass(batch, rng, true)?;
        if let Some(grads) = grads {
            for (p, g) in self.params.iter_mut().zip(grads) {
                p.grad = Some(g);
            }
        }
        Ok(stats)
    }

    /// Mean loss over a batch without gradients.
    pub fn batch_loss_value(
        &mut self,
        batch: &[&SeqSample],
        rng: &mut impl Rng,
    ) -> Result<f64, TensorError> {
        Ok(self.batch_pass(batch, rng, false)?.0.loss)
    }

    fn batch_pass(
        &mut self,
        batch: &[&SeqSample],
        rng: &mut impl Rng,
        backward: bool,
    ) -> Result<(BatchStats, Option<Vec<Vec<f64>>>), TensorError> {
        assert!(!batch.is_empty());
        let mut tape = Tape::new();
        let vars = self.leaf_params(&mut tape);
        let mut total: Option<Var> = None;
        let mut neg_elbo_acc = 0.0;
        let mut reg_acc = 0.0;
        let mut evals = 0u64;
        for seq in batch {
            let noise: Vec<f64> = (0..self.config.latent_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let sl = self.seq_loss(&mut tape, &vars, seq, &noise, &mut evals)?;
            if let Some(ne) = sl.neg_elbo {
                neg_elbo_acc += tape.item(ne);
            }
            reg_acc += tape.item(sl.reg_mse);
            total = Some(match total {
                None => sl.total,
                Some(t) => tape.add(t, sl.total)?,
            });
        }
        self.ode_evals += evals;
        let b = batch.len() as f64;
        let mean = tape.scale(total.unwrap(), 1.0 / b);
        let loss = tape.item(mean);
        let stats = BatchStats {
            loss,
            neg_elbo: neg_elbo_acc / b,
            reg_mse: reg_acc / b,
        };
        if !backward {
            return Ok((stats, None));
        }
        tape.backward(mean)?;
        let grads = vars
            .iter()
            .zip(&self.params)
            .map(|(v, p)| {
                tape.grad(*v)
                    .map(|g| g.to_vec())
                    .unwrap_or_else(|| vec![0.0; p.numel()])
            })
            .collect();
        Ok((stats, Some(grads)))
    }

    /// Posterior (μ, σ²) of one sequence — deterministic, no sampling.
    pub fn posterior(&self, seq: &SeqSample) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(self.config.variant, Variant::LatentOde);
        let mut tape = Tape::new();
        let vars = self.leaf_params(&mut tape);
        let (mu, logvar) = self.encode(&mut tape, &vars, seq).expect("encode");
        let var: Vec<f64> = tape.values(logvar).iter().map(|&l| l.exp()).collect();
        (tape.values(mu).to_vec(), var)
    }

    /// Deterministic prediction in standardized target space: latent path
    /// from the posterior mean, regression head on top. The baseline
    /// variant regresses straight from the observations.
    pub fn predict_standardized(&mut self, seq: &SeqSample) -> Vec<f64> {
        let mut tape = Tape::new();
        let vars = self.leaf_params(&mut tape);
        let pred = match self.config.variant {
            Variant::Baseline => self.regress_baseline(&mut tape, &vars, seq).expect("regress"),
            Variant::LatentOde => {
                let (mu, _) = self.encode(&mut tape, &vars, seq).expect("encode");
                let reg_times = linspace01(self.config.reg_queries);
                let mut evals = 0u64;
                let states = self
                    .integrate(&mut tape, &vars, mu, &reg_times, &mut evals)
                    .expect("integrate");
                self.ode_evals += evals;
                let z_reg = tape.concat_rows(&states).expect("concat");
                self.regress_path(&mut tape, &vars, z_reg, &reg_times)
                    .expect("regress")
            }
        };
        tape.values(pred).to_vec()
    }

    /// Prediction mapped back to raw target units via the stored
    /// standardization statistics.
    pub fn predict(&mut self, seq: &SeqSample) -> Vec<f64> {
        let std_pred = self.predict_standardized(seq);
        if self.target_mean.is_empty() {
            return std_pred;
        }
        std_pred
            .iter()
            .enumerate()
            .map(|(k, &v)| v * self.target_std[k] + self.target_mean[k])
            .collect()
    }
}

/// Observation matrix with masked rows zeroed, so masked values can never
/// reach the computation.
fn masked_values(seq: &SeqSample, d: usize) -> Vec<f64> {
    let mut out = seq.values.clone();
    for (i, &keep) in seq.mask.iter().enumerate() {
        if !keep {
            out[i * d..(i + 1) * d].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    out
}

fn mask_matrix(seq: &SeqSample, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; seq.mask.len() * d];
    for (i, &keep) in seq.mask.iter().enumerate() {
        if keep {
            out[i * d..(i + 1) * d].iter_mut().for_each(|v| *v = 1.0);
        }
    }
    out
}
