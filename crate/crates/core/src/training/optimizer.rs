use crate::error::{Error, Result};
use crate::numerics::ParamSet;

/// Adam with linear warm-up to `lr_base` followed by linear decay to zero
/// at `total_steps`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub step: usize,
    pub lr_base: f32,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl OptimizerState {
    pub fn new(params: &ParamSet, lr_base: f32, warmup_steps: usize, total_steps: usize) -> Self {
        let m = (0..params.len())
            .map(|i| vec![0.0; params.get(i).numel()])
            .collect();
        let v = (0..params.len())
            .map(|i| vec![0.0; params.get(i).numel()])
            .collect();
        OptimizerState {
            step: 0,
            lr_base,
            warmup_steps,
            total_steps,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m,
            v,
        }
    }

    /// Learning rate at a given (1-based) step.
    pub fn lr_at(&self, step: usize) -> f32 {
        if self.total_steps == 0 {
            return 0.0;
        }
        let s = step as f32;
        if self.warmup_steps > 0 && step <= self.warmup_steps {
            return self.lr_base * s / self.warmup_steps as f32;
        }
        let total = self.total_steps as f32;
        let warm = self.warmup_steps as f32;
        if total <= warm {
            return self.lr_base;
        }
        (self.lr_base * (total - s) / (total - warm)).max(0.0)
    }

    /// One update over all parameters. `grads[i]` aligns with parameter i;
    /// missing gradients are treated as zero (moments still decay).
    pub fn apply(&mut self, params: &mut ParamSet, grads: &[Option<Vec<f32>>]) -> Result<f32> {
        if grads.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer: {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        self.step += 1;
        let lr = self.lr_at(self.step);
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let p = params.get_mut(i);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let zero;
            let g: &[f32] = match &grads[i] {
                Some(g) => {
                    if g.len() != p.numel() {
                        return Err(Error::Contract(format!(
                            "optimizer: gradient size {} for parameter {} of size {}",
                            g.len(),
                            i,
                            p.numel()
                        )));
                    }
                    g
                }
                None => {
                    zero = vec![0.0; p.numel()];
                    &zero
                }
            };
            for j in 0..p.data.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p.data[j] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(lr)
    }
}
