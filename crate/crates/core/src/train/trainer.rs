use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use candle_core::DType;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{save_checkpoint, Checkpoint, RunState};
use super::config::{lr_schedule, RunConfig};
use super::eval::{evaluate, EvalReport};
use super::log::{EpochRecord, TrainingLog, ValRecord};
use super::optim::Adam;
use crate::data::{augment, Batch, BitemporalPair, DatasetLayout};
use crate::error::{Error, Result};
use crate::loss::total_loss;
use crate::network::SwinV2DNet;
use crate::nn::{Ctx, ParamStore};

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// Generator for one purpose and index, independent of everything else.
fn rng_for(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// Model, optimizer and progress of one training run.
pub struct Trainer {
    cfg: RunConfig,
    store: ParamStore,
    model: SwinV2DNet,
    opt: Adam,
    state: RunState,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let store = ParamStore::new(DType::F32, cfg.seed);
        let model = SwinV2DNet::new(&store, cfg.model.clone())?;
        let opt = Adam::new(store.params(), cfg.optimizer)?;
        Ok(Self {
            cfg,
            store,
            model,
            opt,
            state: RunState {
                next_epoch: 0,
                step: 0,
                best_f1: None,
            },
        })
    }

    /// Continues a run from a checkpoint written by [`Trainer::save`].
    pub fn resume(cfg: RunConfig, path: &Path) -> Result<Self> {
        let ckpt = Checkpoint::read(path)?;
        ckpt.ensure_model(&cfg.model)?;
        let mut t = Self::new(cfg)?;
        ckpt.restore_model(&t.store)?;
        if !ckpt.has_optimizer() {
            return Err(Error::Version(format!(
                "{} has no optimizer state to resume from",
                path.display()
            )));
        }
        ckpt.restore_optimizer(&mut t.opt)?;
        t.state = ckpt
            .run
            .ok_or_else(|| Error::Version("checkpoint has no run state".into()))?;
        Ok(t)
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn model(&self) -> &SwinV2DNet {
        &self.model
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn state(&self) -> RunState {
        self.state
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.store, &self.cfg.model, Some(&self.opt), Some(self.state))
    }

    fn done(&self) -> bool {
        self.state.next_epoch >= self.cfg.epochs
            || self.cfg.max_steps.is_some_and(|m| self.state.step >= m)
    }

    /// One optimizer step; returns every loss term by name.
    pub fn train_step(&mut self, batch: &Batch, lr: f64) -> Result<Vec<(String, f64)>> {
        let label = batch
            .label
            .as_ref()
            .ok_or_else(|| Error::Validation("training batch has no labels".into()))?;
        let mut rng = rng_for(self.cfg.seed, DROPOUT_STREAM, self.state.step as u64);
        let ctx = Ctx::train(rng.random());
        let out = self.model.forward(&batch.i1, &batch.i2, &ctx)?;
        let loss = total_loss(&out, label, &self.cfg.loss, self.cfg.model.branch_mode)?;
        let values = loss.values()?;
        if let Some((_, v)) = values.iter().find(|(n, _)| n == "total") {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite loss at step {}",
                    self.state.step
                )));
            }
        }
        let grads = loss.total.backward()?;
        self.opt.step(&grads, lr)?;
        self.state.step += 1;
        Ok(values)
    }

    /// Batches of the next epoch: shuffled and augmented from `(seed, epoch)`.
    pub fn epoch_batches(&self, pairs: &[BitemporalPair], epoch: usize) -> Result<Vec<Batch>> {
        let mut rng = rng_for(self.cfg.seed, SHUFFLE_STREAM, epoch as u64);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut rng);
        let ops = &self.cfg.data.augment;
        let samples: Vec<BitemporalPair> = order
            .iter()
            .map(|&k| {
                if ops.is_empty() {
                    pairs[k].clone()
                } else {
                    augment(&pairs[k], ops[rng.random_range(0..ops.len())])
                }
            })
            .collect();
        samples
            .chunks(self.cfg.batch_size)
            .map(|c| {
                let refs: Vec<&BitemporalPair> = c.iter().collect();
                Batch::from_pairs(&refs, self.store.dtype(), self.store.device())
            })
            .collect()
    }

    /// Trains one epoch (or until `max_steps`) and returns its log record
    /// without validation.
    pub fn train_epoch(&mut self, pairs: &[BitemporalPair]) -> Result<EpochRecord> {
        let epoch = self.state.next_epoch;
        let lr = lr_schedule(epoch, &self.cfg)?;
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        let mut steps = 0usize;
        for batch in self.epoch_batches(pairs, epoch)? {
            if self.cfg.max_steps.is_some_and(|m| self.state.step >= m) {
                break;
            }
            for (name, v) in self.train_step(&batch, lr)? {
                *sums.entry(name).or_default() += v;
            }
            steps += 1;
        }
        self.state.next_epoch += 1;
        let mut terms: BTreeMap<String, f64> =
            sums.into_iter().map(|(k, v)| (k, v / steps.max(1) as f64)).collect();
        let loss = terms.remove("total").unwrap_or(f64::NAN);
        Ok(EpochRecord {
            epoch,
            lr,
            steps,
            loss,
            terms,
            val: None,
        })
    }

    pub fn evaluate(&self, pairs: &[BitemporalPair]) -> Result<EvalReport> {
        evaluate(
            &self.model,
            &self.store,
            pairs,
            self.cfg.eval_threshold,
            self.cfg.batch_size,
        )
    }

    /// Runs the remaining epochs, validating every `val_every` epochs and on
    /// the last one. With an output directory, `last.safetensors` is written
    /// after every epoch and `best.safetensors` whenever validation F1
    /// improves.
    pub fn fit(
        &mut self,
        train: &[BitemporalPair],
        val: &[BitemporalPair],
        log: &mut TrainingLog,
        output_dir: Option<&Path>,
    ) -> Result<()> {
        if train.is_empty() {
            return Err(Error::Validation("training split is empty".into()));
        }
        while !self.done() {
            let start = std::time::Instant::now();
            let mut rec = self.train_epoch(train)?;
            let last = self.done();
            if !val.is_empty() && (last || self.state.next_epoch % self.cfg.val_every == 0) {
                let r = self.evaluate(val)?.report;
                rec.val = Some(ValRecord {
                    f1: r.f1,
                    iou: r.iou,
                    oa: r.oa,
                });
                if self.state.best_f1.is_none_or(|b| r.f1 > b) {
                    self.state.best_f1 = Some(r.f1);
                    if let Some(dir) = output_dir {
                        self.save(&dir.join("best.safetensors"))?;
                    }
                }
            }
            log::info!(
                "epoch {} lr {:.3e} loss {:.5} val f1 {} ({:.1}s)",
                rec.epoch,
                rec.lr,
                rec.loss,
                rec.val.as_ref().map_or("-".to_string(), |v| format!("{:.4}", v.f1)),
                start.elapsed().as_secs_f64()
            );
            log.push(rec)?;
            if let Some(dir) = output_dir {
                self.save(&dir.join("last.safetensors"))?;
            }
        }
        Ok(())
    }
}

/// Outcome of [`train`].
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub output_dir: PathBuf,
    pub log: TrainingLog,
    pub state: RunState,
}

/// Loads the configured dataset, then trains, logging to
/// `<output_dir>/log.jsonl`. The dataset is read before any step, so a
/// missing dataset fails early.
pub fn train(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = DatasetLayout::open(&cfg.data.root)?;
    let parallel = !cfg.deterministic;
    let train_pairs = layout.load_split(&cfg.data.train_split, parallel)?;
    let val_pairs = layout.load_split(&cfg.data.val_split, parallel)?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let cfg_path = out.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;
    let mut trainer = match resume {
        Some(p) => Trainer::resume(cfg.clone(), p)?,
        None => Trainer::new(cfg.clone())?,
    };
    let log_path = out.join("log.jsonl");
    if resume.is_none() && log_path.exists() {
        std::fs::remove_file(&log_path).map_err(|e| Error::io(&log_path, e))?;
    }
    let mut log = TrainingLog::at(&log_path)?;
    trainer.fit(&train_pairs, &val_pairs, &mut log, Some(&out))?;
    Ok(TrainSummary {
        output_dir: out,
        log,
        state: trainer.state(),
    })
}
