//! SGD training and LGV weight collection.
//!
//! Both entry points share one sequential SGD engine, so collecting weight
//! snapshots along a constant-learning-rate run is byte-equivalent to plain
//! training with the same seed. The LGV collection performs `n_epochs` of
//! additional training from a pretrained model and snapshots the weights
//! after each of `K` equal slices of the total step budget; the momentum
//! buffer is carried across snapshot boundaries (one continuous
//! trajectory).

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::model::{self, Model, ModelSpec, WeightVector};
use crate::rng;

/// Learning-rate schedule, per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant(f64),
    /// `initial * factor^(epoch / every)`
    StepDecay {
        initial: f64,
        factor: f64,
        every: usize,
    },
}

impl LrSchedule {
    pub fn rate(&self, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant(lr) => lr,
            LrSchedule::StepDecay {
                initial,
                factor,
                every,
            } => initial * libm::pow(factor, (epoch / every) as f64),
        }
    }

    pub fn initial_rate(&self) -> f64 {
        self.rate(0)
    }
}

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub schedule: LrSchedule,
    pub momentum: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must be in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be >= 1"));
        }
        if self.weight_decay < 0.0 {
            return Err(invalid("weight_decay must be >= 0"));
        }
        Ok(())
    }
}

/// Hyperparameters for [`collect_lgv`].
#[derive(Debug, Clone, PartialEq)]
pub struct LgvConfig {
    pub n_epochs: usize,
    pub k: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl LgvConfig {
    fn validate(&self) -> Result<()> {
        if self.n_epochs == 0 {
            return Err(invalid("n_epochs must be >= 1"));
        }
        if self.k == 0 {
            return Err(invalid("K must be >= 1"));
        }
        if !(self.lr > 0.0) {
            return Err(invalid("learning rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must be in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// One line of the per-epoch training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStat {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Final weights plus the training log.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: WeightVector,
    pub log: Vec<EpochStat>,
    pub steps: usize,
}

/// Metadata describing how a collection was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionMeta {
    pub lr: f64,
    pub epochs: f64,
    pub samples_per_epoch: f64,
    pub source_hash: u64,
}

impl CollectionMeta {
    /// Metadata for collections built synthetically (noise vicinities,
    /// subspace samples, projections) rather than by training.
    pub fn synthetic(source_hash: u64) -> Self {
        CollectionMeta {
            lr: 0.0,
            epochs: 0.0,
            samples_per_epoch: 0.0,
            source_hash,
        }
    }
}

/// Ordered set of weight vectors sharing one model spec.
#[derive(Debug, Clone)]
pub struct WeightCollection {
    weights: Vec<WeightVector>,
    meta: CollectionMeta,
}

impl WeightCollection {
    pub fn new(weights: Vec<WeightVector>, meta: CollectionMeta) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| invalid("a weight collection needs at least one member"))?;
        let hash = first.spec_hash();
        if let Some(w) = weights.iter().find(|w| w.spec_hash() != hash) {
            return Err(Error::SpecMismatch {
                expected: hash,
                found: w.spec_hash(),
            });
        }
        if weights.iter().any(|w| w.len() != first.len()) {
            return Err(invalid("collection members differ in length"));
        }
        Ok(WeightCollection { weights, meta })
    }

    /// Collection holding a single weight vector.
    pub fn single(w: WeightVector) -> Self {
        let hash = w.content_hash();
        WeightCollection {
            weights: vec![w],
            meta: CollectionMeta::synthetic(hash),
        }
    }

    pub fn weights(&self) -> &[WeightVector] {
        &self.weights
    }

    pub fn meta(&self) -> &CollectionMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn spec_hash(&self) -> u64 {
        self.weights[0].spec_hash()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }
}

impl WeightVector {
    /// FNV-1a over the raw value bits; identifies weight provenance in
    /// collection metadata.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.values() {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Coordinate-wise mean of the collection (stochastic weight averaging).
pub fn swa(coll: &WeightCollection) -> Result<WeightVector> {
    let p = coll.dim();
    let mut mean = vec![0.0f64; p];
    for w in coll.weights() {
        crate::linalg::axpy(&mut mean, w.values(), 1.0);
    }
    crate::linalg::scale(&mut mean, 1.0 / coll.len() as f64);
    coll.weights()[0].with_values(mean)
}

impl WeightVector {
    /// Same spec binding, new values (must keep the length).
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<WeightVector> {
        if values.len() != self.len() {
            return Err(invalid("replacement values change the weight dimension"));
        }
        Ok(WeightVector::from_parts(values, self.spec_hash()))
    }
}

struct SgdRun {
    final_weights: WeightVector,
    snapshots: Vec<WeightVector>,
    log: Vec<EpochStat>,
    steps: usize,
}

/// The sequential SGD engine. `snapshot_steps` are 1-based global step
/// indices (ascending, possibly repeated) at which the current weights are
/// recorded. RNG is consumed only by the per-epoch shuffle, so runs with
/// and without snapshots follow identical trajectories.
fn run_sgd(
    spec: &ModelSpec,
    data: &Dataset,
    w_init: WeightVector,
    epochs: usize,
    schedule: LrSchedule,
    momentum: f64,
    batch_size: usize,
    weight_decay: f64,
    seed: u64,
    snapshot_steps: &[usize],
) -> Result<SgdRun> {
    let n_train = data.train.len();
    let mut rng = rng::rng_from(seed);

    let mut w = w_init;
    let mut velocity = vec![0.0f64; w.len()];
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    let mut next_snapshot = 0;
    let mut log = Vec::with_capacity(epochs);
    let mut step = 0usize;

    let mut indices: Vec<usize> = (0..n_train).collect();
    for epoch in 0..epochs {
        let lr = schedule.rate(epoch);
        indices.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for chunk in indices.chunks(batch_size) {
            let batch = data.train.select(chunk)?;
            let (batch_loss, grad) = model::loss_and_grad_weights(spec, &w, &batch)?;
            loss_sum += batch_loss * chunk.len() as f64;

            let values = w.values_mut();
            for ((v, g), wi) in velocity.iter_mut().zip(grad.values()).zip(values.iter_mut()) {
                *v = momentum * *v + g;
                *wi -= lr * (*v + weight_decay * *wi);
            }

            step += 1;
            while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot] == step {
                snapshots.push(w.clone());
                next_snapshot += 1;
            }
        }

        let train_loss = loss_sum / n_train as f64;
        if !train_loss.is_finite() || w.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        let val_accuracy = Model::new(spec.clone(), w.clone())?.accuracy(&data.val)?;
        log.push(EpochStat {
            epoch,
            train_loss,
            val_accuracy,
        });
    }

    Ok(SgdRun {
        final_weights: w,
        snapshots,
        log,
        steps: step,
    })
}

/// Train a model with SGD + momentum + weight decay. Starts from `w_init`
/// when given, otherwise from a fresh seeded initialisation.
pub fn train(
    spec: &ModelSpec,
    data: &Dataset,
    cfg: &TrainConfig,
    w_init: Option<&WeightVector>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let w0 = match w_init {
        Some(w) => w.clone(),
        None => spec.init_weights(rng::derive(cfg.seed, 0x1d17)),
    };
    if w0.spec_hash() != spec.hash() {
        return Err(Error::SpecMismatch {
            expected: spec.hash(),
            found: w0.spec_hash(),
        });
    }
    let run = run_sgd(
        spec,
        data,
        w0,
        cfg.epochs,
        cfg.schedule,
        cfg.momentum,
        cfg.batch_size,
        cfg.weight_decay,
        cfg.seed,
        &[],
    )?;
    Ok(TrainOutcome {
        weights: run.final_weights,
        log: run.log,
        steps: run.steps,
    })
}

/// Collect `K` weight snapshots along a constant-learning-rate SGD
/// trajectory started from `w0`, one after each equal slice of the
/// `n_epochs * ceil(n_train / batch_size)` step budget.
pub fn collect_lgv(
    spec: &ModelSpec,
    data: &Dataset,
    w0: &WeightVector,
    cfg: &LgvConfig,
) -> Result<(WeightCollection, Vec<EpochStat>)> {
    cfg.validate()?;
    if w0.spec_hash() != spec.hash() {
        return Err(Error::SpecMismatch {
            expected: spec.hash(),
            found: w0.spec_hash(),
        });
    }
    let steps_per_epoch = data.train.len().div_ceil(cfg.batch_size);
    let total = cfg.n_epochs * steps_per_epoch;
    // snapshot after ceil(s * total / K) steps, s = 1..=K
    let snapshot_steps: Vec<usize> = (1..=cfg.k)
        .map(|s| (s * total).div_ceil(cfg.k).max(1))
        .collect();

    let run = run_sgd(
        spec,
        data,
        w0.clone(),
        cfg.n_epochs,
        LrSchedule::Constant(cfg.lr),
        cfg.momentum,
        cfg.batch_size,
        cfg.weight_decay,
        cfg.seed,
        &snapshot_steps,
    )?;
    debug_assert_eq!(run.snapshots.len(), cfg.k);
    debug_assert_eq!(run.steps, total);

    let coll = WeightCollection::new(
        run.snapshots,
        CollectionMeta {
            lr: cfg.lr,
            epochs: cfg.n_epochs as f64,
            samples_per_epoch: cfg.k as f64 / cfg.n_epochs as f64,
            source_hash: w0.content_hash(),
        },
    )?;
    Ok((coll, run.log))
}
