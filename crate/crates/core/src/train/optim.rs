use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};

use super::config::AdamConfig;
use crate::error::{Error, Result};

/// Adam without weight decay. Variables without a gradient in a step keep
/// their value and moments.
pub struct Adam {
    vars: Vec<(String, Var)>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: usize,
    cfg: AdamConfig,
}

impl Adam {
    pub fn new(vars: Vec<(String, Var)>, cfg: AdamConfig) -> Result<Self> {
        let m = vars
            .iter()
            .map(|(_, v)| v.as_tensor().zeros_like())
            .collect::<candle_core::Result<Vec<_>>>()?;
        let v = m.clone();
        Ok(Self {
            vars,
            m,
            v,
            t: 0,
            cfg,
        })
    }

    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn step(&mut self, grads: &GradStore, lr: f64) -> Result<()> {
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (k, (_, var)) in self.vars.iter().enumerate() {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            // Leaf gradients still reference the step's graph; keeping them
            // in the moments would chain every step's graph together.
            let g = g.detach();
            let m = ((&self.m[k] * beta1)? + (&g * (1.0 - beta1))?)?;
            let v = ((&self.v[k] * beta2)? + (g.sqr()? * (1.0 - beta2))?)?;
            let mhat = (&m / c1)?;
            let denom = ((&v / c2)?.sqrt()? + eps)?;
            let update = (mhat / denom)?;
            var.set(&(var.as_tensor() - (update * lr)?)?)?;
            self.m[k] = m;
            self.v[k] = v;
        }
        Ok(())
    }

    /// `(name, first moment, second moment)` of every variable.
    pub fn moments(&self) -> Vec<(&str, &Tensor, &Tensor)> {
        self.vars
            .iter()
            .zip(self.m.iter().zip(&self.v))
            .map(|((n, _), (m, v))| (n.as_str(), m, v))
            .collect()
    }

    /// Restores moments and the step count, e.g. from a checkpoint.
    pub fn restore(&mut self, t: usize, moments: impl Fn(&str) -> Option<(Tensor, Tensor)>) -> Result<()> {
        for (k, (name, var)) in self.vars.iter().enumerate() {
            let (m, v) = moments(name).ok_or_else(|| {
                Error::Version(format!("checkpoint has no optimizer state for `{name}`"))
            })?;
            if m.dims() != var.dims() || v.dims() != var.dims() {
                return Err(Error::Version(format!(
                    "optimizer state for `{name}` has the wrong shape"
                )));
            }
            self.m[k] = m.to_dtype(var.dtype())?;
            self.v[k] = v.to_dtype(var.dtype())?;
        }
        self.t = t;
        Ok(())
    }
}
