use std::collections::BTreeMap;
use std::sync::Mutex;

use candle_core::{DType, Device, Shape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Parameter initialisation rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    Const(f64),
    /// Uniform on `[-bound, bound]`.
    Uniform(f64),
    /// Framework-default linear/conv init: bound = 1 / sqrt(fan_in).
    FanIn { fan_in: usize },
    /// Zero-mean normal with this standard deviation, resampled outside two
    /// standard deviations.
    TruncNormal(f64),
}

impl Init {
    fn bound(self) -> Option<f64> {
        match self {
            Init::Uniform(b) => Some(b),
            Init::FanIn { fan_in } => Some(1.0 / (fan_in.max(1) as f64).sqrt()),
            _ => None,
        }
    }
}

struct Inner {
    params: BTreeMap<String, Var>,
    buffers: BTreeMap<String, Var>,
    rng: ChaCha8Rng,
}

/// Owns every trainable parameter and every non-trainable buffer
/// (batch-norm running statistics) of a model, keyed by dotted path.
///
/// Initial values are drawn from a seeded ChaCha stream, so two stores built
/// with the same seed and the same construction order are bitwise equal.
pub struct ParamStore {
    device: Device,
    dtype: DType,
    inner: Mutex<Inner>,
}

impl ParamStore {
    pub fn new(dtype: DType, seed: u64) -> Self {
        Self {
            device: Device::Cpu,
            dtype,
            inner: Mutex::new(Inner {
                params: BTreeMap::new(),
                buffers: BTreeMap::new(),
                rng: ChaCha8Rng::seed_from_u64(seed),
            }),
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn root(&self) -> Scope<'_> {
        Scope {
            store: self,
            prefix: String::new(),
        }
    }

    fn create(&self, name: String, shape: Shape, init: Init, buffer: bool) -> Result<Var> {
        let mut inner = self.inner.lock().expect("param store poisoned");
        let exists = if buffer {
            inner.buffers.contains_key(&name)
        } else {
            inner.params.contains_key(&name)
        };
        if exists {
            return Err(Error::config(format!("duplicate parameter name `{name}`")));
        }
        let n = shape.elem_count();
        let values: Vec<f64> = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Const(c) => vec![c; n],
            Init::TruncNormal(std) => {
                let normal = Normal::new(0.0, std).map_err(|e| Error::config(e.to_string()))?;
                (0..n)
                    .map(|_| loop {
                        let v: f64 = normal.sample(&mut inner.rng);
                        if v.abs() <= 2.0 * std {
                            break v;
                        }
                    })
                    .collect()
            }
            other => {
                let b = other.bound().unwrap_or(0.0);
                (0..n).map(|_| inner.rng.random_range(-b..=b)).collect()
            }
        };
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        if buffer {
            inner.buffers.insert(name, var.clone());
        } else {
            inner.params.insert(name, var.clone());
        }
        Ok(var)
    }

    /// Trainable parameters in name order.
    pub fn params(&self) -> Vec<(String, Var)> {
        let inner = self.inner.lock().expect("param store poisoned");
        inner.params.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn buffers(&self) -> Vec<(String, Var)> {
        let inner = self.inner.lock().expect("param store poisoned");
        inner.buffers.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn param(&self, name: &str) -> Option<Var> {
        self.inner.lock().expect("param store poisoned").params.get(name).cloned()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|(_, v)| v.elem_count()).sum()
    }

    /// Overwrites a parameter or buffer in place; shapes must match.
    pub fn assign(&self, name: &str, value: &Tensor) -> Result<()> {
        let var = {
            let inner = self.inner.lock().expect("param store poisoned");
            inner
                .params
                .get(name)
                .or_else(|| inner.buffers.get(name))
                .cloned()
        };
        let var = var.ok_or_else(|| Error::Validation(format!("unknown parameter `{name}`")))?;
        if var.dims() != value.dims() {
            return Err(Error::dim(format!(
                "parameter `{name}` has shape {:?}, got {:?}",
                var.dims(),
                value.dims()
            )));
        }
        var.set(&value.to_dtype(self.dtype)?)?;
        Ok(())
    }
}

/// A name prefix into a [`ParamStore`], in the spirit of a var builder.
#[derive(Clone)]
pub struct Scope<'a> {
    store: &'a ParamStore,
    prefix: String,
}

impl<'a> Scope<'a> {
    pub fn pp(&self, name: impl std::fmt::Display) -> Scope<'a> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        Scope {
            store: self.store,
            prefix,
        }
    }

    fn full(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn param<S: Into<Shape>>(&self, name: &str, shape: S, init: Init) -> Result<Tensor> {
        let var = self.store.create(self.full(name), shape.into(), init, false)?;
        Ok(var.as_tensor().clone())
    }

    pub fn buffer<S: Into<Shape>>(&self, name: &str, shape: S, init: Init) -> Result<Var> {
        self.store.create(self.full(name), shape.into(), init, true)
    }

    pub fn dtype(&self) -> DType {
        self.store.dtype
    }

    pub fn device(&self) -> &Device {
        &self.store.device
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }
}
