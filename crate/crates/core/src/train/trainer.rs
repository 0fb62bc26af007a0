use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fom::SnapshotSet;
use crate::nn::Parametric;

use super::adam::{Adam, LrSchedule};
use super::batch::{Batch, BatchPlan};
use super::losses::{loss_and_gradient, JacobianVariant, LossOptions, LossValues, LossWeights};
use super::model::LatentModel;

/// Optimization settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSpec {
    pub iterations: usize,
    pub batch: BatchPlan,
    pub lr: LrSchedule,
    pub loss: LossOptions,
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            iterations: 1000,
            batch: BatchPlan::Full,
            lr: LrSchedule { initial: 1e-4, decay: 0.01, period: 1000, floor: 1e-5 },
            loss: LossOptions::default(),
            checkpoint_every: 1000,
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        self.batch.validate()?;
        self.lr.validate()?;
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint interval must be positive".into()));
        }
        if self.loss.substeps == 0 {
            return Err(Error::Config("integration substeps must be positive".into()));
        }
        Ok(())
    }
}

/// One recorded point of the training run.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub wall_seconds: f64,
    pub loss: LossValues,
    pub lr: f64,
    pub validation: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "iteration",
            "wall_seconds",
            "loss_total",
            "loss_int",
            "loss_rec",
            "loss_jac",
            "loss_mod",
            "loss_deg",
            "lr",
            "validation",
        ])?;
        for r in &self.rows {
            let l = &r.loss;
            let mut rec = vec![r.iteration.to_string(), format!("{:.3}", r.wall_seconds)];
            rec.extend([l.total, l.int, l.rec, l.jac, l.model, l.deg, r.lr].iter().map(|v| format!("{v:e}")));
            rec.push(r.validation.map(|v| format!("{v:e}")).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Joint Adam training of autoencoder and dynamics. Keeps optimizer state, iteration count
/// and the batch stream across [`Trainer::run`] calls so training can be paused and resumed.
pub struct Trainer {
    pub spec: TrainSpec,
    pub weights: LossWeights,
    adam: Adam,
    rng: ChaCha8Rng,
    iteration: usize,
    queue: Vec<Batch>,
    started: Instant,
    pub history: TrainHistory,
}

/// What the checkpoint hook sees.
pub struct CheckpointEvent<'a> {
    pub iteration: usize,
    pub model: &'a LatentModel,
    pub row: &'a HistoryRow,
}

impl Trainer {
    pub fn new(model: &LatentModel, weights: LossWeights, spec: TrainSpec) -> Result<Self> {
        spec.validate()?;
        weights.validate()?;
        Ok(Trainer {
            adam: Adam::new(model.num_params()),
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            iteration: 0,
            queue: Vec::new(),
            started: Instant::now(),
            history: TrainHistory::default(),
            spec,
            weights,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Drops queued mini-batches, e.g. after the training set changed.
    pub fn reset_batches(&mut self) {
        self.queue.clear();
    }

    fn check_data(&self, data: &[SnapshotSet]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Config("no training data".into()));
        }
        let needs = self.weights.model > 0.0 && self.spec.loss.jacobian != JacobianVariant::Auto
            || self.weights.jac > 0.0 && self.spec.loss.jacobian == JacobianVariant::Derivative;
        if needs && data.iter().any(|d| d.derivatives.is_none()) {
            return Err(Error::MissingDerivatives("training data"));
        }
        Ok(())
    }

    fn next_batch(&mut self, data: &[SnapshotSet]) -> Batch {
        if self.queue.is_empty() {
            let mut b = self.spec.batch.epoch(data, &mut self.rng);
            b.reverse();
            self.queue = b;
        }
        self.queue.pop().expect("epoch yields at least one batch")
    }

    /// Runs `iterations` Adam steps. The hook fires every `checkpoint_every` iterations and
    /// after the last one. A non-finite loss restores the last checkpointed parameters.
    pub fn run(
        &mut self,
        model: &mut LatentModel,
        data: &[SnapshotSet],
        iterations: usize,
        hook: &mut dyn FnMut(CheckpointEvent<'_>) -> Result<()>,
    ) -> Result<()> {
        self.check_data(data)?;
        let mut params = model.flat_params();
        let mut good = params.clone();
        let end = self.iteration + iterations;
        while self.iteration < end {
            let batch = self.next_batch(data);
            let lr = self.spec.lr.at(self.iteration);
            let step = loss_and_gradient(model, data, &batch, &self.weights, &self.spec.loss);
            let (loss, grad) = match step {
                Ok((l, g)) if l.total.is_finite() && g.iter().all(|v| v.is_finite()) => (l, g),
                Ok(_) | Err(Error::NonFinite { .. }) => {
                    model.read_params(&good)?;
                    return Err(Error::NonFiniteLoss { iteration: self.iteration });
                }
                Err(e) => {
                    model.read_params(&good)?;
                    return Err(e);
                }
            };
            self.adam.step(&mut params, &grad, lr)?;
            model.read_params(&params)?;
            self.iteration += 1;
            if self.iteration % self.spec.checkpoint_every == 0 || self.iteration == end {
                let row = HistoryRow {
                    iteration: self.iteration,
                    wall_seconds: self.started.elapsed().as_secs_f64(),
                    loss,
                    lr,
                    validation: None,
                };
                self.history.rows.push(row.clone());
                good.clone_from(&params);
                hook(CheckpointEvent { iteration: self.iteration, model, row: &row })?;
            }
        }
        Ok(())
    }
}

/// One-shot training: `spec.iterations` steps from a fresh optimizer.
pub fn train(model: &mut LatentModel, data: &[SnapshotSet], weights: &LossWeights, spec: &TrainSpec) -> Result<TrainHistory> {
    let mut t = Trainer::new(model, *weights, spec.clone())?;
    t.run(model, data, spec.iterations, &mut |_| Ok(()))?;
    Ok(t.history)
}
