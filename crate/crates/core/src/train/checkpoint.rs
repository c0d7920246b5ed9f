use std::collections::HashMap;
use std::path::Path;

use candle_core::safetensors::Load;
use candle_core::Tensor;
use safetensors::SafeTensors;
use serde::{Deserialize, Serialize};

use super::optim::Adam;
use crate::error::{Error, Result};
use crate::network::ModelConfig;
use crate::nn::ParamStore;

pub const FORMAT: &str = "swinv2dnet-checkpoint";
pub const VERSION: &str = "1";

/// Where a run stands; stored with the optimizer state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    /// First epoch not yet trained.
    pub next_epoch: usize,
    pub step: usize,
    pub best_f1: Option<f64>,
}

/// Parameters, buffers, optional optimizer state and run state from a file.
pub struct Checkpoint {
    pub model: ModelConfig,
    pub run: Option<RunState>,
    tensors: HashMap<String, Tensor>,
    adam_steps: usize,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Version(msg.into())
}

/// Writes a safetensors file: `param/<name>`, `buffer/<name>` and, with an
/// optimizer, `adam.m/<name>` and `adam.v/<name>`. The metadata carries the
/// format tag, version, model config and run state as JSON.
pub fn save_checkpoint(
    path: &Path,
    store: &ParamStore,
    model: &ModelConfig,
    optimizer: Option<&Adam>,
    run: Option<RunState>,
) -> Result<()> {
    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    for (n, v) in store.params() {
        tensors.push((format!("param/{n}"), v.as_tensor().clone()));
    }
    for (n, v) in store.buffers() {
        tensors.push((format!("buffer/{n}"), v.as_tensor().clone()));
    }
    let mut meta = HashMap::new();
    meta.insert("format".to_string(), FORMAT.to_string());
    meta.insert("version".to_string(), VERSION.to_string());
    meta.insert(
        "model_config".to_string(),
        serde_json::to_string(model).map_err(|e| Error::Parse(e.to_string()))?,
    );
    if let Some(opt) = optimizer {
        for (n, m, v) in opt.moments() {
            tensors.push((format!("adam.m/{n}"), m.clone()));
            tensors.push((format!("adam.v/{n}"), v.clone()));
        }
        meta.insert("adam_steps".to_string(), opt.steps().to_string());
    }
    if let Some(run) = run {
        meta.insert(
            "run_state".to_string(),
            serde_json::to_string(&run).map_err(|e| Error::Parse(e.to_string()))?,
        );
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let tensors: Vec<(String, Tensor)> = tensors
        .into_iter()
        .map(|(n, t)| Ok((n, t.contiguous()?)))
        .collect::<Result<_>>()?;
    safetensors::serialize_to_file(tensors, Some(meta), path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

impl Checkpoint {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let (_, header) = SafeTensors::read_metadata(&bytes)
            .map_err(|e| bad(format!("{}: not a checkpoint ({e})", path.display())))?;
        let meta = header.metadata().clone().unwrap_or_default();
        let get = |k: &str| meta.get(k).cloned();
        if get("format").as_deref() != Some(FORMAT) {
            return Err(bad(format!("{}: unknown checkpoint format", path.display())));
        }
        match get("version") {
            Some(v) if v == VERSION => {}
            v => {
                return Err(bad(format!(
                    "{}: checkpoint version {:?}, expected {VERSION}",
                    path.display(),
                    v.unwrap_or_default()
                )))
            }
        }
        let model: ModelConfig = get("model_config")
            .ok_or_else(|| bad("checkpoint has no model config"))
            .and_then(|s| serde_json::from_str(&s).map_err(|e| bad(format!("model config: {e}"))))?;
        let run = get("run_state")
            .map(|s| serde_json::from_str(&s).map_err(|e| bad(format!("run state: {e}"))))
            .transpose()?;
        let adam_steps = get("adam_steps").and_then(|s| s.parse().ok()).unwrap_or(0);
        let st = SafeTensors::deserialize(&bytes).map_err(|e| bad(e.to_string()))?;
        let mut tensors = HashMap::new();
        for (name, view) in st.tensors() {
            tensors.insert(name, view.load(&candle_core::Device::Cpu)?);
        }
        Ok(Self {
            model,
            run,
            tensors,
            adam_steps,
        })
    }

    /// Fails with a version error unless the stored model config equals
    /// `expected`.
    pub fn ensure_model(&self, expected: &ModelConfig) -> Result<()> {
        if &self.model != expected {
            return Err(bad(format!(
                "checkpoint was written for a different model: {}",
                serde_json::to_string(&self.model).unwrap_or_default()
            )));
        }
        Ok(())
    }

    /// Copies every parameter and buffer of `store` from the checkpoint.
    pub fn restore_model(&self, store: &ParamStore) -> Result<()> {
        let expected = store.params().len() + store.buffers().len();
        let stored = self
            .tensors
            .keys()
            .filter(|k| k.starts_with("param/") || k.starts_with("buffer/"))
            .count();
        if stored != expected {
            return Err(bad(format!(
                "checkpoint holds {stored} model tensors, the network has {expected}"
            )));
        }
        for (kind, list) in [("param", store.params()), ("buffer", store.buffers())] {
            for (name, _) in list {
                let t = self
                    .tensors
                    .get(&format!("{kind}/{name}"))
                    .ok_or_else(|| bad(format!("checkpoint is missing {kind} `{name}`")))?;
                store.assign(&name, t).map_err(|e| bad(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn has_optimizer(&self) -> bool {
        self.tensors.keys().any(|k| k.starts_with("adam.m/"))
    }

    pub fn restore_optimizer(&self, opt: &mut Adam) -> Result<()> {
        opt.restore(self.adam_steps, |name| {
            let m = self.tensors.get(&format!("adam.m/{name}"))?;
            let v = self.tensors.get(&format!("adam.v/{name}"))?;
            Some((m.clone(), v.clone()))
        })
    }
}
