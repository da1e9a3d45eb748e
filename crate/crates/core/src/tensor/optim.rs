//! ADAM with decoupled weight decay, plus the cosine learning-rate schedule.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("missing gradient for parameter `{name}`")]
    MissingGradient { name: String },
}

/// A named, persistent parameter tensor with its optimizer moment buffers.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Option<Vec<f64>>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Param {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, value: Vec<f64>) -> Self {
        let n = value.len();
        assert_eq!(n, shape.iter().product::<usize>());
        Param {
            name: name.into(),
            shape,
            value,
            grad: None,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }
}

/// ADAM state. β₁=0.9, β₂=0.999, ε=1e-8 (standard defaults).
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0 }
    }
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }

    /// One update: moments advance, then `θ ← θ − lr·m̂/(√v̂+ε) − lr·wd·θ`
    /// (weight decay decoupled from the gradient-based step).
    pub fn step(
        &mut self,
        params: &mut [Param],
        lr: f64,
        weight_decay: f64,
    ) -> Result<(), OptimError> {
        for p in params.iter() {
            if p.grad.is_none() {
                return Err(OptimError::MissingGradient { name: p.name.clone() });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for p in params.iter_mut() {
            let g = p.grad.as_ref().unwrap();
            for i in 0..p.value.len() {
                p.m[i] = self.beta1 * p.m[i] + (1.0 - self.beta1) * g[i];
                p.v[i] = self.beta2 * p.v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = p.m[i] / bc1;
                let vhat = p.v[i] / bc2;
                p.value[i] -= lr * mhat / (vhat.sqrt() + self.eps) + lr * weight_decay * p.value[i];
            }
        }
        Ok(())
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

/// Cosine annealing: `base_lr · (1 + cos(π·epoch/total)) / 2`.
pub fn cosine_lr(epoch: usize, total_epochs: usize, base_lr: f64) -> f64 {
    assert!(epoch < total_epochs, "epoch {epoch} out of range 0..{total_epochs}");
    base_lr * (1.0 + (std::f64::consts::PI * epoch as f64 / total_epochs as f64).cos()) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = vec![Param::new("w", vec![2], vec![1.0, -2.0])];
        p[0].grad = Some(vec![0.0, 0.0]);
        let mut adam = Adam::new();
        adam.step(&mut p, 0.1, 0.0).unwrap();
        assert_eq!(p[0].value, vec![1.0, -2.0]);
    }

    #[test]
    fn constant_gradient_moves_against_its_sign() {
        let mut p = vec![Param::new("w", vec![2], vec![0.0, 0.0])];
        let mut adam = Adam::new();
        for _ in 0..50 {
            p[0].grad = Some(vec![1.0, -3.0]);
            adam.step(&mut p, 0.01, 0.0).unwrap();
        }
        assert!(p[0].value[0] < 0.0);
        assert!(p[0].value[1] > 0.0);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // f(x) = x², start at x = 1
        let mut p = vec![Param::new("x", vec![1], vec![1.0])];
        let mut adam = Adam::new();
        for _ in 0..500 {
            p[0].grad = Some(vec![2.0 * p[0].value[0]]);
            adam.step(&mut p, 0.01, 0.0).unwrap();
        }
        assert!(p[0].value[0].abs() < 1e-2, "final x = {}", p[0].value[0]);
    }

    #[test]
    fn missing_gradient_is_reported_by_name() {
        let mut p = vec![Param::new("encoder.w1", vec![1], vec![0.5])];
        let mut adam = Adam::new();
        let err = adam.step(&mut p, 0.01, 0.0).unwrap_err();
        assert!(err.to_string().contains("encoder.w1"));
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0, 150, 0.001), 0.001);
        assert!((cosine_lr(75, 150, 0.001) - 0.0005).abs() < 1e-15);
        //  base·(1+cos(149π/150))/2
        let expected = 0.001 * (1.0 + (149.0 * std::f64::consts::PI / 150.0).cos()) / 2.0;
        assert!((cosine_lr(149, 150, 0.001) - expected).abs() < 1e-18);
        assert!((expected - 1.0966e-7).abs() < 1e-10, "{expected}");
    }

    #[test]
    fn weight_decay_shrinks_without_gradient_signal() {
        let mut p = vec![Param::new("w", vec![1], vec![10.0])];
        let mut adam = Adam::new();
        for _ in 0..10 {
            p[0].grad = Some(vec![0.0]);
            adam.step(&mut p, 0.1, 0.001).unwrap();
        }
        assert!(p[0].value[0] < 10.0 && p[0].value[0] > 9.8);
    }
}
