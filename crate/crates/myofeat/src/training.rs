//! Training loops for the convolutional classifier.
//!
//! Two regimes share one optimizer and schedule:
//!
//! * [`train_adann`] — adversarial multi-domain training. Every step pairs a
//!   batch from one participant (the source, which also provides the gesture
//!   labels) with a batch from another participant (the target). A 2-way
//!   domain head tries to tell the two apart while the trunk receives the
//!   *negated* domain gradient, pushing per-participant evidence out of the
//!   shared representation. Normalization statistics stay per-participant.
//! * [`train_standard`] — plain supervised training over the pooled windows
//!   with one shared set of normalization statistics.
//!
//! [`estimate_domain_stats`] re-targets a trained network to an unseen
//! participant from unlabeled windows alone, by re-estimating normalization
//! statistics in a single statistics-only pass.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convnet::{
    softmax_cross_entropy, windows_to_input, Adam, BnStats, ConvNet, DomainStatsMap, Params,
    DOMAIN_OUT, GESTURE_OUT,
};
use crate::dataio::{sub_rng, Dataset, Window};

/// Domain key under which [`train_standard`] keeps its single set of
/// normalization statistics; evaluation falls back to it for participants
/// without their own entry.
pub const SHARED_DOMAIN: u32 = u32::MAX;

/// Most windows used for a statistics re-estimation pass.
pub const ADABN_MAX_WINDOWS: usize = 256;

/// Windows per forward pass during evaluation.
const EVAL_CHUNK: usize = 64;

/// Hyper-parameters shared by both training loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    /// Weight of the adversarial domain loss.
    pub lambda: f64,
    pub dropout: f64,
    pub batch_size: usize,
    /// Cap on optimization steps per epoch; 0 means one natural sweep
    /// (one pair per participant, or one pass over the pooled windows).
    pub steps_per_epoch: usize,
    pub max_epochs: usize,
    /// Stale validation epochs before the learning rate anneals.
    pub patience: usize,
    /// Learning-rate divisor applied on each anneal.
    pub anneal_factor: f64,
    /// Momentum of the running normalization statistics.
    pub bn_momentum: f64,
    pub shuffle: bool,
    /// Apply separate optimizer steps for the source and target passes
    /// instead of one combined step per pair.
    pub split_steps: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.040_470_9,
            lambda: 0.1,
            dropout: 0.35,
            batch_size: 16,
            steps_per_epoch: 0,
            max_epochs: 120,
            patience: 15,
            anneal_factor: 5.0,
            bn_momentum: 0.1,
            shuffle: true,
            split_steps: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrain,
    #[error("adversarial training needs at least two participants, found {0}")]
    NeedTwoDomains(usize),
    #[error("no normalization statistics for participant {0}")]
    MissingStats(u32),
}

/// What the learning-rate schedule asks for after seeing a validation loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleAction {
    Continue,
    Anneal,
    Stop,
}

/// Plateau schedule: after `patience` consecutive epochs without improvement
/// the rate anneals once; if a whole second patience period then passes with
/// still no improvement, training stops.
#[derive(Debug, Clone)]
pub struct Schedule {
    patience: usize,
    best: f64,
    stale: usize,
    annealed_since_improve: bool,
}

impl Schedule {
    pub fn new(patience: usize) -> Self {
        Schedule {
            patience,
            best: f64::INFINITY,
            stale: 0,
            annealed_since_improve: false,
        }
    }

    pub fn observe(&mut self, loss: f64) -> ScheduleAction {
        if loss < self.best {
            self.best = loss;
            self.stale = 0;
            self.annealed_since_improve = false;
            return ScheduleAction::Continue;
        }
        self.stale += 1;
        if self.stale < self.patience {
            return ScheduleAction::Continue;
        }
        self.stale = 0;
        if self.annealed_since_improve {
            ScheduleAction::Stop
        } else {
            self.annealed_since_improve = true;
            ScheduleAction::Anneal
        }
    }
}

/// One epoch of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean source-pass gesture loss over the epoch's steps.
    pub gesture_loss: f64,
    /// Mean domain loss (both passes); zero in standard training.
    pub domain_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub per_participant_accuracy: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    Plateau,
}

/// Final state and log of one training run.
pub struct TrainOutcome {
    pub params: Params<f32>,
    pub stats: DomainStatsMap,
    pub epochs: Vec<EpochRecord>,
    pub stop: StopReason,
    /// Source-pass gesture loss of every optimization step, in order; used
    /// by exact-equivalence tests between the two loops.
    pub step_losses: Vec<f64>,
}

/// Per-participant slice of an evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct ParticipantEval {
    pub loss: f64,
    pub accuracy: f64,
    pub windows: usize,
}

/// Gesture loss/accuracy of a whole set.
#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub loss: f64,
    pub accuracy: f64,
    pub per_participant: BTreeMap<u32, ParticipantEval>,
}

/// Statistics lookup used everywhere: a participant's own entry when
/// present, else the shared entry.
pub fn stats_for(stats: &DomainStatsMap, participant: u32) -> Result<&BnStats, TrainError> {
    stats
        .get(&participant)
        .or_else(|| stats.get(&SHARED_DOMAIN))
        .ok_or(TrainError::MissingStats(participant))
}

/// Gesture cross-entropy and accuracy under per-domain statistics.
pub fn evaluate(
    net: &ConvNet,
    params: &Params<f32>,
    stats: &DomainStatsMap,
    data: &Dataset,
) -> Result<EvalSummary, TrainError> {
    let mut by_part: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, w) in data.windows.iter().enumerate() {
        by_part.entry(w.participant.0).or_default().push(i);
    }
    let mut per_participant = BTreeMap::new();
    let mut loss_sum = 0.0;
    let mut hit_sum = 0usize;
    let mut n_total = 0usize;
    for (&p, indices) in &by_part {
        let s = stats_for(stats, p)?;
        let mut p_loss = 0.0;
        let mut p_hits = 0usize;
        for chunk in indices.chunks(EVAL_CHUNK) {
            let refs: Vec<&Window> = chunk.iter().map(|&i| &data.windows[i]).collect();
            let labels: Vec<usize> = chunk
                .iter()
                .map(|&i| data.windows[i].gesture.0 as usize)
                .collect();
            let input: Vec<f32> = windows_to_input(&refs);
            let (gesture, _) = net.forward_eval(params, &input, s);
            let mut scratch = vec![0f32; gesture.len()];
            let ce = softmax_cross_entropy(&gesture, &labels, GESTURE_OUT, &mut scratch);
            p_loss += ce as f64 * chunk.len() as f64;
            for (row, &label) in gesture.chunks(GESTURE_OUT).zip(&labels) {
                let pred = argmax(row);
                if pred == label {
                    p_hits += 1;
                }
            }
        }
        let n = indices.len();
        per_participant.insert(
            p,
            ParticipantEval {
                loss: p_loss / n as f64,
                accuracy: p_hits as f64 / n as f64,
                windows: n,
            },
        );
        loss_sum += p_loss;
        hit_sum += p_hits;
        n_total += n;
    }
    Ok(EvalSummary {
        loss: loss_sum / n_total.max(1) as f64,
        accuracy: hit_sum as f64 / n_total.max(1) as f64,
        per_participant,
    })
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Re-estimates normalization statistics for one domain from raw windows:
/// a single statistics-only forward over at most [`ADABN_MAX_WINDOWS`]
/// subsampled windows. Labels are never consulted.
pub fn estimate_domain_stats(
    net: &ConvNet,
    params: &Params<f32>,
    windows: &[&Window],
    seed: u64,
) -> BnStats {
    assert!(!windows.is_empty(), "statistics need at least one window");
    let chosen: Vec<&Window> = if windows.len() > ADABN_MAX_WINDOWS {
        let mut rng = sub_rng(seed, &[0xab]);
        let mut idx = rand::seq::index::sample(&mut rng, windows.len(), ADABN_MAX_WINDOWS)
            .into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| windows[i]).collect()
    } else {
        windows.to_vec()
    };
    let input: Vec<f32> = windows_to_input(&chosen);
    let cache = net.forward_train(params, input, 0.0, 0);
    let mut stats = BnStats::new();
    net.accumulate_stats(&cache, &mut stats, 1.0);
    stats
}

/// Source batch selection: a without-replacement sample when shuffling,
/// otherwise the first windows in dataset order.
fn pick_batch<R: Rng>(pool: &[usize], size: usize, shuffled: bool, rng: &mut R) -> Vec<usize> {
    let take = size.min(pool.len());
    if shuffled {
        rand::seq::index::sample(rng, pool.len(), take)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    } else {
        pool[..take].to_vec()
    }
}

struct StepData<'a> {
    refs: Vec<&'a Window>,
    gesture: Vec<usize>,
}

fn gather<'a>(data: &'a Dataset, indices: &[usize]) -> StepData<'a> {
    StepData {
        refs: indices.iter().map(|&i| &data.windows[i]).collect(),
        gesture: indices
            .iter()
            .map(|&i| data.windows[i].gesture.0 as usize)
            .collect(),
    }
}

/// Adversarial multi-domain training.
///
/// Per epoch, every participant acts once as the source of a batch pair
/// (subject to `steps_per_epoch`); the target participant is drawn uniformly
/// from the others. The gesture loss is computed on the source pass only;
/// the 2-way domain loss averages both passes, feeding the heads with weight
/// `lambda` and the trunk with `-lambda`. Running statistics update only for
/// the source participant on its own pass. `on_epoch` observes each epoch
/// record as it is produced.
pub fn train_adann(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let participants = train.participants();
    if participants.len() < 2 {
        return Err(TrainError::NeedTwoDomains(participants.len()));
    }
    let net = ConvNet::new();
    let mut params: Params<f32> = Params::init(&net.layout, cfg.seed);
    let mut adam = Adam::new(&params, cfg.lr);
    let mut stats = DomainStatsMap::new();
    let mut rng = sub_rng(cfg.seed, &[0x5e]);
    let mut seed_rng = sub_rng(cfg.seed, &[0xd0]);
    let by_part: BTreeMap<u32, Vec<usize>> = participants
        .iter()
        .map(|p| (p.0, train.indices_of(*p)))
        .collect();
    let ids: Vec<u32> = by_part.keys().copied().collect();
    let mut schedule = Schedule::new(cfg.patience);
    let mut epochs = Vec::new();
    let mut step_losses = Vec::new();
    let mut stop = StopReason::MaxEpochs;

    for epoch in 0..cfg.max_epochs {
        let mut order = ids.clone();
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let steps = if cfg.steps_per_epoch > 0 {
            order.len().min(cfg.steps_per_epoch)
        } else {
            order.len()
        };
        let mut gesture_loss = 0.0;
        let mut domain_loss = 0.0;
        for &p in order.iter().take(steps) {
            let src = gather(train, &pick_batch(&by_part[&p], cfg.batch_size, cfg.shuffle, &mut rng));
            let q = {
                let others: Vec<u32> = ids.iter().copied().filter(|&q| q != p).collect();
                others[rng.gen_range(0..others.len())]
            };
            let tgt = gather(train, &pick_batch(&by_part[&q], cfg.batch_size, true, &mut rng));
            let half = 0.5 * cfg.lambda;

            // Source pass: gesture loss + its half of the domain loss.
            let input: Vec<f32> = windows_to_input(&src.refs);
            let cache = net.forward_train(&params, input, cfg.dropout, seed_rng.gen());
            let mut dg = vec![0f32; cache.gesture_logits.len()];
            let ly = softmax_cross_entropy(&cache.gesture_logits, &src.gesture, GESTURE_OUT, &mut dg);
            let src_domain = vec![0usize; src.refs.len()];
            let mut dd = vec![0f32; cache.domain_logits.len()];
            let ld_src =
                softmax_cross_entropy(&cache.domain_logits, &src_domain, DOMAIN_OUT, &mut dd);
            let dd_head: Vec<f32> = dd.iter().map(|&v| v * half as f32).collect();
            let dd_trunk: Vec<f32> = dd.iter().map(|&v| -v * half as f32).collect();
            let mut grads = net.backward(&params, &cache, &dg, &dd_head, &dd_trunk);
            net.accumulate_stats(
                &cache,
                stats.entry(p).or_insert_with(BnStats::new),
                cfg.bn_momentum,
            );

            // Target pass: domain loss only; no statistics are kept.
            let input: Vec<f32> = windows_to_input(&tgt.refs);
            let cache = net.forward_train(&params, input, cfg.dropout, seed_rng.gen());
            let dg0 = vec![0f32; cache.gesture_logits.len()];
            let tgt_domain = vec![1usize; tgt.refs.len()];
            let mut dd = vec![0f32; cache.domain_logits.len()];
            let ld_tgt =
                softmax_cross_entropy(&cache.domain_logits, &tgt_domain, DOMAIN_OUT, &mut dd);
            let dd_head: Vec<f32> = dd.iter().map(|&v| v * half as f32).collect();
            let dd_trunk: Vec<f32> = dd.iter().map(|&v| -v * half as f32).collect();
            let tgt_grads = net.backward(&params, &cache, &dg0, &dd_head, &dd_trunk);

            if cfg.split_steps {
                adam.step(&mut params, &grads);
                adam.step(&mut params, &tgt_grads);
            } else {
                for (g, t) in grads.data.iter_mut().zip(&tgt_grads.data) {
                    *g += *t;
                }
                adam.step(&mut params, &grads);
            }
            step_losses.push(ly as f64);
            gesture_loss += ly as f64;
            domain_loss += 0.5 * (ld_src as f64 + ld_tgt as f64);
        }

        let summary = evaluate(&net, &params, &stats, val)?;
        let record = EpochRecord {
            epoch,
            lr: adam.lr(),
            gesture_loss: gesture_loss / steps.max(1) as f64,
            domain_loss: domain_loss / steps.max(1) as f64,
            val_loss: summary.loss,
            val_accuracy: summary.accuracy,
            per_participant_accuracy: summary
                .per_participant
                .iter()
                .map(|(&p, e)| (p, e.accuracy))
                .collect(),
        };
        on_epoch(&record);
        epochs.push(record);
        match schedule.observe(summary.loss) {
            ScheduleAction::Continue => {}
            ScheduleAction::Anneal => adam.anneal(cfg.anneal_factor),
            ScheduleAction::Stop => {
                stop = StopReason::Plateau;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        params,
        stats,
        epochs,
        stop,
        step_losses,
    })
}

/// Plain supervised training over the pooled windows. Normalization
/// statistics are shared across participants under [`SHARED_DOMAIN`]; the
/// domain head receives no gradient and stays at its initialization.
pub fn train_standard(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let net = ConvNet::new();
    let mut params: Params<f32> = Params::init(&net.layout, cfg.seed);
    let mut adam = Adam::new(&params, cfg.lr);
    let mut stats = DomainStatsMap::new();
    let mut rng = sub_rng(cfg.seed, &[0x5e]);
    let mut seed_rng = sub_rng(cfg.seed, &[0xd0]);
    let mut schedule = Schedule::new(cfg.patience);
    let mut epochs = Vec::new();
    let mut step_losses = Vec::new();
    let mut stop = StopReason::MaxEpochs;

    let mut pool: Vec<usize> = (0..train.len()).collect();
    let batch = cfg.batch_size.min(pool.len());
    for epoch in 0..cfg.max_epochs {
        if cfg.shuffle {
            pool.shuffle(&mut rng);
        }
        let natural = (pool.len() / batch).max(1);
        let steps = if cfg.steps_per_epoch > 0 {
            natural.min(cfg.steps_per_epoch)
        } else {
            natural
        };
        let mut gesture_loss = 0.0;
        for step in 0..steps {
            let indices = &pool[step * batch..(step * batch + batch).min(pool.len())];
            let data = gather(train, indices);
            let input: Vec<f32> = windows_to_input(&data.refs);
            let cache = net.forward_train(&params, input, cfg.dropout, seed_rng.gen());
            let mut dg = vec![0f32; cache.gesture_logits.len()];
            let ly =
                softmax_cross_entropy(&cache.gesture_logits, &data.gesture, GESTURE_OUT, &mut dg);
            let zeros = vec![0f32; cache.domain_logits.len()];
            let grads = net.backward(&params, &cache, &dg, &zeros, &zeros);
            net.accumulate_stats(
                &cache,
                stats.entry(SHARED_DOMAIN).or_insert_with(BnStats::new),
                cfg.bn_momentum,
            );
            adam.step(&mut params, &grads);
            step_losses.push(ly as f64);
            gesture_loss += ly as f64;
        }

        let summary = evaluate(&net, &params, &stats, val)?;
        let record = EpochRecord {
            epoch,
            lr: adam.lr(),
            gesture_loss: gesture_loss / steps.max(1) as f64,
            domain_loss: 0.0,
            val_loss: summary.loss,
            val_accuracy: summary.accuracy,
            per_participant_accuracy: summary
                .per_participant
                .iter()
                .map(|(&p, e)| (p, e.accuracy))
                .collect(),
        };
        on_epoch(&record);
        epochs.push(record);
        match schedule.observe(summary.loss) {
            ScheduleAction::Continue => {}
            ScheduleAction::Anneal => adam.anneal(cfg.anneal_factor),
            ScheduleAction::Stop => {
                stop = StopReason::Plateau;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        params,
        stats,
        epochs,
        stop,
        step_losses,
    })
}
