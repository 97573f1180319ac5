//! Mini-batch Adam training with reduce-on-plateau learning rate and early
//! stopping on validation loss.

mod adam;

pub use adam::Adam;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{make_batches, Cascade, DatasetSplit, DEFAULT_MAX_LEN};
use crate::error::{invalid, Error, Result};
use crate::model::{
    cascade_gradients, forward_cascade, Dropout, GumbelConfig, Mode, ModelGrads, ModelParams,
};
use crate::numerics::{ParameterSet, RngState, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Non-improving epochs before stopping.
    pub patience: usize,
    pub lr_decay_factor: f64,
    /// Non-improving epochs before the learning rate is decayed.
    pub lr_patience: usize,
    pub dropout_rate: f64,
    pub tau: f64,
    pub gumbel_enabled: bool,
    pub seed: u64,
    pub factors: usize,
    pub dim: usize,
    pub max_len: usize,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_init: 5e-3,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            lr_decay_factor: 0.5,
            lr_patience: 2,
            dropout_rate: 1e-4,
            tau: 1.0,
            gumbel_enabled: true,
            seed: 0,
            factors: 4,
            dim: 64,
            max_len: DEFAULT_MAX_LEN,
            grad_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_init > 0.0) {
            return Err(invalid(format!("learning rate must be > 0, got {}", self.lr_init)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be >= 1"));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return Err(invalid(format!(
                "lr decay factor must be in (0, 1), got {}",
                self.lr_decay_factor
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid(format!("dropout must be in [0, 1), got {}", self.dropout_rate)));
        }
        if !(self.tau > 0.0) {
            return Err(invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.factors == 0 || self.dim < 2 {
            return Err(invalid(format!("need K >= 1 and D >= 2, got K={} D={}", self.factors, self.dim)));
        }
        if self.max_len < 2 {
            return Err(invalid("max_len must be >= 2"));
        }
        if !(self.grad_clip > 0.0) {
            return Err(invalid("gradient clip must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-step training loss over the epoch.
    pub train_loss: f64,
    pub valid_loss: f64,
    pub lr: f64,
    pub wall_time_secs: f64,
}

pub fn write_log_csv<W: Write>(log: &[EpochLog], mut w: W) -> Result<()> {
    writeln!(w, "epoch,train_loss,valid_loss,lr,wall_time_s")?;
    for e in log {
        writeln!(
            w,
            "{},{},{},{},{:.3}",
            e.epoch, e.train_loss, e.valid_loss, e.lr, e.wall_time_secs
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxEpochs,
    EarlyStopped,
    /// Validation loss became NaN; the best earlier checkpoint is kept.
    Diverged { epoch: usize },
    /// An update was refused because of a non-finite gradient.
    NonFiniteGradient { epoch: usize, parameter: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss seen (initial ones included).
    pub best: ModelParams,
    pub best_valid_loss: Option<f64>,
    /// 0 when no epoch improved on the initial parameters.
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    pub stop_reason: StopReason,
}

/// Mean per-step loss in evaluation mode.
pub fn mean_step_loss(params: &ModelParams, cascades: &[Cascade]) -> Result<f64> {
    let sums: Vec<(f64, usize)> = cascades
        .par_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| {
            let out = forward_cascade(params, c.as_slice(), &mut GumbelConfig::disabled(), false)?;
            Ok((out.total_loss, out.step_losses.len()))
        })
        .collect::<Result<_>>()?;
    let points: usize = sums.iter().map(|s| s.1).sum();
    if points == 0 {
        return Err(invalid("no prediction points"));
    }
    Ok(sums.iter().map(|s| s.0).sum::<f64>() / points as f64)
}

fn all_finite(params: &ModelParams) -> bool {
    params.parameters().iter().all(|p| p.value.is_finite())
}

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<P: ParameterSet + ?Sized>(params: &mut P, max_norm: f64) -> f64 {
    let norm = params
        .parameters()
        .iter()
        .map(|p| p.gradient.squared_norm())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        params.parameters_mut().into_iter().for_each(|p| p.gradient.scale(s));
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub loss_sum: f64,
    pub points: usize,
}

/// Owns the parameters and optimizer state across batches.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    params: ModelParams,
    optimizer: Adam,
    lr: f64,
    /// Cascades processed so far; indexes the per-cascade noise substreams.
    processed: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig, num_nodes: usize) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(num_nodes, config.dim, config.factors, config.seed)?;
        Self::from_params(config, params)
    }

    pub fn from_params(config: TrainConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        let optimizer = Adam::new(&params, config.lr_init);
        Ok(Self {
            lr: config.lr_init,
            config,
            params,
            optimizer,
            processed: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// One optimizer step on the mean per-step loss of `cascades`.
    ///
    /// Per-cascade gradients are computed in parallel and summed in input
    /// order, and each cascade draws its Gumbel and dropout noise from its
    /// own substream, so the result does not depend on thread scheduling.
    pub fn train_batch<'a, I>(&mut self, cascades: I) -> Result<BatchStats>
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        let items: Vec<(u64, &[usize])> = cascades
            .into_iter()
            .filter(|c| c.len() >= 2)
            .enumerate()
            .map(|(j, c)| (self.processed + j as u64, c))
            .collect();
        self.processed += items.len() as u64;
        if items.is_empty() {
            return Ok(BatchStats {
                loss_sum: 0.0,
                points: 0,
            });
        }
        let cfg = &self.config;
        let params = &self.params;
        let results: Vec<(f64, usize, ModelGrads)> = items
            .par_iter()
            .map(|&(index, cascade)| {
                let mut gumbel = GumbelConfig::new(
                    cfg.tau,
                    cfg.gumbel_enabled,
                    RngState::substream(cfg.seed, Stream::Gumbel, index),
                )?;
                let mut dropout = Dropout::new(
                    cfg.dropout_rate,
                    RngState::substream(cfg.seed, Stream::Dropout, index),
                )?;
                let mut mode = Mode::Train {
                    gumbel: &mut gumbel,
                    dropout: Some(&mut dropout),
                };
                let (out, grads) = cascade_gradients(params, cascade, &mut mode)?;
                Ok((out.total_loss, out.step_losses.len(), grads))
            })
            .collect::<Result<_>>()?;

        let mut iter = results.into_iter();
        let (mut loss_sum, mut points, mut total) = iter.next().expect("non-empty");
        for (loss, n, grads) in iter {
            loss_sum += loss;
            points += n;
            total.add_assign(&grads)?;
        }
        total.scale(1.0 / points as f64);
        self.params.zero_grad();
        self.params.accumulate(&total)?;
        clip_global_norm(&mut self.params, self.config.grad_clip);
        if let Err(e) = self.optimizer.step(&mut self.params, self.lr) {
            self.params.zero_grad();
            return Err(e);
        }
        Ok(BatchStats { loss_sum, points })
    }
}

/// Trains from a fresh initialisation and returns the best checkpoint by
/// validation loss.
pub fn train(config: &TrainConfig, split: &DatasetSplit, num_nodes: usize) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone(), num_nodes)?;
    if config.max_epochs == 0 {
        return Ok(TrainOutcome {
            best: trainer.into_params(),
            best_valid_loss: None,
            best_epoch: 0,
            log: Vec::new(),
            stop_reason: StopReason::MaxEpochs,
        });
    }
    if split.train.is_empty() || split.valid.is_empty() {
        return Err(invalid("training and validation sets must be non-empty"));
    }

    let started = Instant::now();
    let mut best = trainer.params().clone();
    let mut best_valid = mean_step_loss(&best, &split.valid)?;
    let mut best_epoch = 0;
    let mut log = Vec::new();
    let (mut stale, mut lr_stale) = (0, 0);
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let mut order: Vec<&Cascade> = split.train.iter().collect();
        {
            use rand::seq::SliceRandom;
            order.shuffle(&mut RngState::substream(config.seed, Stream::Shuffle, epoch as u64));
        }
        let shuffled: Vec<Cascade> = order.into_iter().cloned().collect();
        let batches = make_batches(&shuffled, config.batch_size, config.max_len, num_nodes)?;

        let (mut loss_sum, mut points) = (0.0, 0);
        for batch in &batches {
            match trainer.train_batch(batch.rows()) {
                Ok(stats) => {
                    loss_sum += stats.loss_sum;
                    points += stats.points;
                }
                Err(Error::NonFiniteGradient { parameter }) => {
                    log::error!("epoch {epoch}: non-finite gradient in `{parameter}`, stopping");
                    stop_reason = StopReason::NonFiniteGradient { epoch, parameter };
                    break;
                }
                Err(_) if !all_finite(trainer.params()) => {
                    stop_reason = StopReason::Diverged { epoch };
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if stop_reason != StopReason::MaxEpochs {
            break;
        }

        // The forward pass rejects non-finite logits, so a model that has
        // blown up shows as an error here rather than as a NaN loss.
        let valid_loss = match mean_step_loss(trainer.params(), &split.valid) {
            Ok(l) => l,
            Err(_) if !all_finite(trainer.params()) => f64::NAN,
            Err(e) => return Err(e),
        };
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / points.max(1) as f64,
            valid_loss,
            lr: trainer.lr(),
            wall_time_secs: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train {:.5} valid {:.5} lr {:.2e}",
            entry.train_loss,
            entry.valid_loss,
            entry.lr
        );
        log.push(entry);

        if valid_loss.is_nan() {
            log::error!("epoch {epoch}: validation loss is NaN, keeping epoch {best_epoch}");
            stop_reason = StopReason::Diverged { epoch };
            break;
        }
        if valid_loss < best_valid {
            best_valid = valid_loss;
            best = trainer.params().clone();
            best_epoch = epoch;
            stale = 0;
            lr_stale = 0;
        } else {
            stale += 1;
            lr_stale += 1;
            if lr_stale >= config.lr_patience {
                trainer.set_lr(trainer.lr() * config.lr_decay_factor);
                lr_stale = 0;
            }
            if stale >= config.patience {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        best,
        best_valid_loss: Some(best_valid),
        best_epoch,
        log,
        stop_reason,
    })
}
