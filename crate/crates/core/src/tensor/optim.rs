use super::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.v
    }

    /// Restores state saved from [`Adam::first_moments`] / [`Adam::second_moments`].
    pub fn restore(&mut self, step: u64, m: Vec<Vec<T>>, v: Vec<Vec<T>>) -> Result<()> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::State("adam moments have mismatched sizes".into()));
        }
        self.step = step;
        self.m = m;
        self.v = v;
        Ok(())
    }

    /// Applies one update to every tensor using its populated gradient.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>]) -> Result<()> {
        if self.m.is_empty() && self.step == 0 {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len()
            || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::State(format!(
                "adam state tracks {} tensors, step received {}",
                self.m.len(),
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|p| p.grad().is_none()) {
            return Err(Error::State(format!("parameter {i} has no gradient")));
        }
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bc1 = T::of_f64(1.0 - c.beta1.powi(t));
        let bc2 = T::of_f64(1.0 - c.beta2.powi(t));
        let (b1, b2) = (T::of_f64(c.beta1), T::of_f64(c.beta2));
        let (lr, eps) = (T::of_f64(c.lr), T::of_f64(c.eps));
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let grad = p.grad().expect("checked above").to_vec();
            for (((w, g), mi), vi) in p.data_mut().iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
