use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validation summary of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValRecord {
    pub f1: f64,
    pub iou: f64,
    pub oa: f64,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub steps: usize,
    /// Mean total loss over the epoch's steps.
    pub loss: f64,
    /// Mean of every loss term over the epoch's steps.
    pub terms: BTreeMap<String, f64>,
    pub val: Option<ValRecord>,
}

/// Append-only per-epoch log, persisted as JSON lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    path: Option<PathBuf>,
}

impl TrainingLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Log that also appends each record to `path`. Existing records in the
    /// file are kept (resumed runs continue the same file).
    pub fn at(path: &Path) -> Result<Self> {
        let records = if path.is_file() {
            Self::read(path)?.records
        } else {
            Vec::new()
        };
        Ok(Self {
            records,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn push(&mut self, rec: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if rec.epoch <= last.epoch {
                return Err(Error::Validation(format!(
                    "log epoch {} does not follow {}",
                    rec.epoch, last.epoch
                )));
            }
        }
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            let line = serde_json::to_string(&rec).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(k, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), k + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            records,
            path: None,
        })
    }
}
