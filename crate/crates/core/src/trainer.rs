//! Plain SGD on the directional triplet loss with a divide-on-plateau
//! learning-rate schedule.
//!
//! Every step draws `batch_size` triplets on the fly, averages their
//! gradients through the encoder and applies `θ ← θ − lr·∇`. Training loss is
//! averaged over windows of `plateau_window` steps; when `plateau_patience`
//! consecutive full windows fail to beat the best window mean by a relative
//! `plateau_min_rel_improvement`, the learning rate is divided by
//! `lr_decay_factor`. Training stops once a decay takes the rate below
//! `lr_floor`.
//!
//! The encoder is initialised with seed `derive_seed(seed, 1)` and the
//! sampler stream with `derive_seed(seed, 2)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Score};
use crate::encoder::{EncoderParams, Gradients};
use crate::error::{Error, Result};
use crate::loss::{directional_triplet_loss, LossConfig};
use crate::rng::derive_seed;
use crate::sampler::{Sampler, SamplerConfig, SamplerStats, Triplet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub lr_init: f64,
    pub lr_decay_factor: f64,
    pub lr_floor: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub plateau_window: usize,
    pub plateau_patience: usize,
    pub plateau_min_rel_improvement: f64,
    pub seed: u64,
    pub loss: LossConfig,
    pub sampler: SamplerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 32],
            embed_dim: 16,
            lr_init: 1e-3,
            lr_decay_factor: 10.0,
            lr_floor: 1e-6,
            batch_size: 64,
            max_steps: 30_000,
            plateau_window: 500,
            plateau_patience: 3,
            plateau_min_rel_improvement: 1e-3,
            seed: 0,
            loss: LossConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.lr_init.is_finite() && self.lr_init >= 0.0) {
            return bad("learning rate must be finite and >= 0");
        }
        if !(self.lr_decay_factor.is_finite() && self.lr_decay_factor > 1.0) {
            return bad("learning-rate decay factor must be > 1");
        }
        if !(self.lr_floor.is_finite() && self.lr_floor > 0.0) {
            return bad("learning-rate floor must be > 0");
        }
        if self.batch_size == 0 || self.plateau_window == 0 || self.plateau_patience == 0 {
            return bad("batch size, plateau window and patience must be positive");
        }
        if !(self.plateau_min_rel_improvement.is_finite()
            && self.plateau_min_rel_improvement >= 0.0)
        {
            return bad("plateau improvement threshold must be >= 0");
        }
        if self.embed_dim == 0 || self.hidden.contains(&0) {
            return bad("layer sizes must be positive");
        }
        self.loss.validate()?;
        self.sampler.validate()
    }

    pub fn layer_dims(&self, d_in: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(d_in);
        dims.extend(&self.hidden);
        dims.push(self.embed_dim);
        dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    /// Steps completed at the end of the window.
    pub step: usize,
    pub mean_loss: f64,
    pub mean_le: f64,
    pub mean_ld: f64,
    /// Learning rate in effect during the window.
    pub lr: f64,
    /// Sampler acceptance rate within the window.
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub windows: Vec<WindowRecord>,
    pub steps_run: usize,
    pub sampler: SamplerStats,
    pub final_lr: f64,
}

impl TrainLog {
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "step,mean_loss,mean_le,mean_ld,lr,acceptance_rate")?;
        for r in &self.windows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.step, r.mean_loss, r.mean_le, r.mean_ld, r.lr, r.acceptance_rate
            )?;
        }
        Ok(())
    }
}

/// Summed loss components over a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchLoss {
    pub total: f64,
    pub l_e: f64,
    pub l_d: f64,
}

/// Mean gradient and mean loss of a batch of triplets, accumulated in
/// triplet order.
pub fn batch_gradient(
    params: &EncoderParams,
    dataset: &Dataset,
    scores: &[Score],
    triplets: &[Triplet],
    loss: &LossConfig,
) -> Result<(Gradients, BatchLoss)> {
    if triplets.is_empty() {
        return Err(Error::EmptyInput("gradient of an empty batch"));
    }
    let records = dataset.records();
    let mut grads = Gradients::zeros_like(params);
    let mut sum = BatchLoss::default();
    for t in triplets {
        let ta = params.forward_trace(&records[t.a].features)?;
        let tp = params.forward_trace(&records[t.p].features)?;
        let tn = params.forward_trace(&records[t.n].features)?;
        let r = directional_triplet_loss(
            ta.output(),
            tp.output(),
            tn.output(),
            scores[t.a],
            scores[t.n],
            loss,
        )?;
        sum.total += r.total;
        sum.l_e += r.l_e;
        sum.l_d += r.l_d;
        params.backward_into(&ta, &r.grad_a, &mut grads);
        params.backward_into(&tp, &r.grad_p, &mut grads);
        params.backward_into(&tn, &r.grad_n, &mut grads);
    }
    let k = triplets.len() as f64;
    grads.scale(1.0 / k);
    Ok((
        grads,
        BatchLoss {
            total: sum.total / k,
            l_e: sum.l_e / k,
            l_d: sum.l_d / k,
        },
    ))
}

struct Plateau {
    best: f64,
    stale_windows: usize,
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(EncoderParams, TrainLog)> {
    config.validate()?;
    let d_in = dataset
        .d_in()
        .ok_or(Error::EmptyInput("training on an empty dataset"))?;
    if dataset.len() < 3 {
        return Err(Error::Input(format!(
            "training needs at least 3 records, got {}",
            dataset.len()
        )));
    }
    let scores = dataset.scores();
    let mut params = EncoderParams::init(&config.layer_dims(d_in), derive_seed(config.seed, 1))?;
    let mut sampler = Sampler::new(SamplerConfig {
        seed: derive_seed(config.seed, 2),
        ..config.sampler
    })?;

    let mut log = TrainLog {
        final_lr: config.lr_init,
        ..Default::default()
    };
    let mut lr = config.lr_init;
    let mut plateau = Plateau {
        best: f64::INFINITY,
        stale_windows: 0,
    };
    let mut window = BatchLoss::default();
    let mut window_steps = 0usize;
    let mut window_stats = sampler.stats();
    let mut batch = Vec::with_capacity(config.batch_size);

    for step in 0..config.max_steps {
        batch.clear();
        for _ in 0..config.batch_size {
            batch.push(sampler.sample(&scores)?);
        }
        let (grads, loss) = batch_gradient(&params, dataset, &scores, &batch, &config.loss)?;
        if !loss.total.is_finite() {
            return Err(Error::Divergence {
                step,
                lr,
                what: "loss",
            });
        }
        if !grads.all_finite() {
            return Err(Error::Divergence {
                step,
                lr,
                what: "gradient",
            });
        }
        params.apply_update(&grads, lr);
        log.steps_run = step + 1;

        window.total += loss.total;
        window.l_e += loss.l_e;
        window.l_d += loss.l_d;
        window_steps += 1;
        let window_full = window_steps == config.plateau_window;
        if window_full || step + 1 == config.max_steps {
            let now = sampler.stats();
            let proposed = now.proposed - window_stats.proposed;
            let accepted = now.accepted - window_stats.accepted;
            let n = window_steps as f64;
            let mean_loss = window.total / n;
            log.windows.push(WindowRecord {
                step: step + 1,
                mean_loss,
                mean_le: window.l_e / n,
                mean_ld: window.l_d / n,
                lr,
                acceptance_rate: accepted as f64 / proposed as f64,
            });
            window = BatchLoss::default();
            window_steps = 0;
            window_stats = now;

            if window_full {
                if plateau.best.is_infinite()
                    || mean_loss < plateau.best * (1.0 - config.plateau_min_rel_improvement)
                {
                    plateau.best = mean_loss;
                    plateau.stale_windows = 0;
                } else {
                    plateau.stale_windows += 1;
                }
                if plateau.stale_windows >= config.plateau_patience {
                    lr /= config.lr_decay_factor;
                    plateau.stale_windows = 0;
                    if lr < config.lr_floor {
                        break;
                    }
                }
            }
        }
    }
    log.final_lr = lr;
    log.sampler = sampler.stats();
    Ok((params, log))
}
