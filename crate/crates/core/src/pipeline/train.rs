//! Two-stage training loops.
//!
//! Stage 1 optimizes the magnitude network on spectral MSE. Stage 2 freezes
//! it and optimizes the refinement network on the hybrid loss, with ratio
//! mask targets computed from the frozen stage-1 output at training start
//! (the frozen network is deterministic, so per-batch recomputation would
//! reproduce the same values). Batch items run in parallel; gradients are
//! reduced in item order, so runs are reproducible for a fixed seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use fdfnet_dsp::{stdct, stft, Waveform};
use fdfnet_nn::graph::Graph;
use fdfnet_nn::ops::norm::{update_running_stats, BnStats};
use fdfnet_nn::params::{ParamGrads, ParamId, ParamStore};
use fdfnet_nn::real::Real;
use fdfnet_nn::tensor::Tensor;
use fdfnet_nn::Rmsprop;

use crate::error::CoreError;
use crate::models::{BnUpdate, Mode};
use crate::pipeline::bridge::{mag_to_tensor, real_spec_to_tensor, waveform_to_tensor};
use crate::pipeline::enhance::stage1_enhance;
use crate::pipeline::loss::{dsr_loss_node, fme_loss_node, IstdctOp};
use crate::pipeline::mask::compute_dctirm;
use crate::pipeline::model::FdfNet;
use crate::pipeline::schedule::{LrScheduler, TrainSchedule};

/// Batch-norm running-statistics momentum.
const BN_MOMENTUM: f64 = 0.1;

/// One training utterance: the clean source and its noisy mixture.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub clean: Waveform,
    pub mixture: Waveform,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<TrainItem>,
    pub val: Vec<TrainItem>,
}

#[derive(Debug, Clone, Copy)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub learning_rate: f64,
}

pub struct TrainOutcome<R: Real> {
    pub logs: Vec<EpochLog>,
    pub best_val: f64,
    pub best_epoch: usize,
    /// Parameter snapshot at the best validation epoch.
    pub best_params: ParamStore<R>,
    pub optimizer: Rmsprop<R>,
}

struct ItemResult<R: Real> {
    loss: f64,
    grads: ParamGrads<R>,
    bn: Vec<(ParamId, ParamId, Tensor<R>, Tensor<R>)>,
}

fn capture_bn<R: Real>(g: &Graph<R>, updates: &[BnUpdate]) -> Vec<(ParamId, ParamId, Tensor<R>, Tensor<R>)> {
    updates
        .iter()
        .map(|u| {
            let stats = g.bn_stats(u.node).expect("train-mode batch norm node");
            (u.mean_buf, u.var_buf, stats.mean.clone(), stats.var.clone())
        })
        .collect()
}

/// Averages per-item batch statistics and folds them into the running
/// buffers, in a fixed order.
fn apply_bn_updates<R: Real>(params: &mut ParamStore<R>, results: &[ItemResult<R>]) {
    if results.is_empty() || results[0].bn.is_empty() {
        return;
    }
    let n = R::from_f64(1.0 / results.len() as f64);
    let per_layer = results[0].bn.len();
    for layer in 0..per_layer {
        let (mean_buf, var_buf, first_mean, first_var) = {
            let r = &results[0].bn[layer];
            (r.0, r.1, r.2.clone(), r.3.clone())
        };
        let mut mean = first_mean;
        let mut var = first_var;
        for r in &results[1..] {
            for (a, b) in mean.data_mut().iter_mut().zip(r.bn[layer].2.data()) {
                *a += *b;
            }
            for (a, b) in var.data_mut().iter_mut().zip(r.bn[layer].3.data()) {
                *a += *b;
            }
        }
        for v in mean.data_mut() {
            *v *= n;
        }
        for v in var.data_mut() {
            *v *= n;
        }
        let stats = BnStats { mean, var };
        let mut rm = params.value(mean_buf).clone();
        let mut rv = params.value(var_buf).clone();
        update_running_stats(&mut rm, &mut rv, &stats, BN_MOMENTUM);
        *params.value_mut(mean_buf) = rm;
        *params.value_mut(var_buf) = rv;
    }
}

fn reduce_batch<R: Real>(
    model: &mut FdfNet<R>,
    optimizer: &mut Rmsprop<R>,
    results: Vec<ItemResult<R>>,
) -> f64 {
    let n = results.len();
    let mut total = ParamGrads { grads: (0..model.params.len()).map(|_| None).collect() };
    let mut loss_sum = 0.0f64;
    for r in &results {
        total.accumulate(&r.grads);
        loss_sum += r.loss;
    }
    total.scale(R::from_f64(1.0 / n as f64));
    apply_bn_updates(&mut model.params, &results);
    optimizer.step(&mut model.params, &total);
    loss_sum / n as f64
}

/// Precomputed stage-1 tensors for one item.
struct Stage1Item<R: Real> {
    noisy_mag: Tensor<R>,
    clean_mag: Tensor<R>,
}

fn prepare_stage1<R: Real>(model: &FdfNet<R>, item: &TrainItem) -> Result<Stage1Item<R>, CoreError> {
    let (noisy_mag, _, _) = stft(&item.mixture, &model.frame)?;
    let (clean_mag, _, _) = stft(&item.clean, &model.frame)?;
    Ok(Stage1Item {
        noisy_mag: mag_to_tensor(&noisy_mag, model.mag_scale),
        clean_mag: mag_to_tensor(&clean_mag, model.mag_scale),
    })
}

fn stage1_item_loss<R: Real>(
    model: &FdfNet<R>,
    item: &Stage1Item<R>,
    mode: Mode,
) -> Result<(f64, Option<ItemResult<R>>), CoreError> {
    let mut g = Graph::new();
    let x = g.input(item.noisy_mag.clone());
    let target = g.input(item.clean_mag.clone());
    let mut updates = Vec::new();
    let out = model.fme.forward(&mut g, &model.params, x, mode, &mut updates)?;
    let loss = fme_loss_node(&mut g, out, target)?;
    let loss_val = g.value(loss).item().to_f64();
    if mode == Mode::Eval {
        return Ok((loss_val, None));
    }
    let bn = capture_bn(&g, &updates);
    let grads = g.backward(loss, &model.params)?;
    Ok((loss_val, Some(ItemResult { loss: loss_val, grads, bn })))
}

/// Trains the stage-1 magnitude network. Deterministic for a fixed seed.
pub fn train_stage1<R: Real>(
    model: &mut FdfNet<R>,
    data: &Dataset,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<TrainOutcome<R>, CoreError> {
    schedule.validate()?;
    if data.train.is_empty() {
        return Err(CoreError::Usage("training set is empty".into()));
    }
    let train_items: Vec<Stage1Item<R>> = data
        .train
        .iter()
        .map(|it| prepare_stage1(model, it))
        .collect::<Result<_, _>>()?;
    let val_items: Vec<Stage1Item<R>> = data
        .val
        .iter()
        .map(|it| prepare_stage1(model, it))
        .collect::<Result<_, _>>()?;

    let mut optimizer = Rmsprop::new(schedule.learning_rate);
    let mut scheduler = LrScheduler::new(schedule.halve_patience);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5747_3031);
    let mut logs = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = model.params.clone();

    let mut order: Vec<usize> = (0..train_items.len()).collect();
    for epoch in 1..=schedule.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(schedule.batch_size) {
            let results: Vec<ItemResult<R>> = batch
                .par_iter()
                .map(|&i| {
                    stage1_item_loss(model, &train_items[i], Mode::Train)
                        .map(|(_, r)| r.expect("train mode yields gradients"))
                })
                .collect::<Result<_, _>>()?;
            epoch_loss += reduce_batch(model, &mut optimizer, results);
            batches += 1;
        }
        let train_loss = epoch_loss / batches as f64;
        let val_loss = if val_items.is_empty() {
            train_loss
        } else {
            let sum: f64 = val_items
                .par_iter()
                .map(|it| stage1_item_loss(model, it, Mode::Eval).map(|(l, _)| l))
                .collect::<Result<Vec<_>, _>>()?
                .iter()
                .sum();
            sum / val_items.len() as f64
        };
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = model.params.clone();
        }
        if scheduler.observe(val_loss) {
            optimizer.set_learning_rate(optimizer.learning_rate() / 2.0);
        }
        logs.push(EpochLog { epoch, train_loss, val_loss, learning_rate: optimizer.learning_rate() });
    }
    Ok(TrainOutcome { logs, best_val, best_epoch, best_params, optimizer })
}

/// Precomputed stage-2 tensors for one item.
struct Stage2Item<R: Real> {
    noisy_scaled: Tensor<R>,
    pre_scaled: Tensor<R>,
    pre_raw: Tensor<R>,
    mask_target: Tensor<R>,
    clean_wave: Tensor<R>,
    synth: IstdctOp<R>,
}

fn prepare_stage2<R: Real>(
    model: &FdfNet<R>,
    item: &TrainItem,
    clip_bound: f64,
) -> Result<Stage2Item<R>, CoreError> {
    let (_, intermediate) = stage1_enhance(model, &item.mixture)?;
    let pre_dct = stdct(&intermediate, &model.frame)?;
    let noisy_dct = stdct(&item.mixture, &model.frame)?;
    let clean_dct = stdct(&item.clean, &model.frame)?;
    let mask = compute_dctirm(&clean_dct, &pre_dct, clip_bound)?;
    // The mask grid is frame-major; tensors are bin-major.
    let (bins, t) = (mask.bins(), mask.n_frames());
    let mut mask_target = Tensor::zeros(&[bins, t]);
    for frame in 0..t {
        for k in 0..bins {
            mask_target.data_mut()[k * t + frame] = R::from_f64(mask.frame(frame)[k]);
        }
    }
    Ok(Stage2Item {
        noisy_scaled: real_spec_to_tensor(&noisy_dct, model.dct_scale),
        pre_scaled: real_spec_to_tensor(&pre_dct, model.dct_scale),
        pre_raw: real_spec_to_tensor(&pre_dct, 1.0),
        mask_target,
        clean_wave: waveform_to_tensor(&item.clean),
        synth: IstdctOp::new(&pre_dct)?,
    })
}

fn stage2_item_loss<R: Real>(
    model: &FdfNet<R>,
    item: &Stage2Item<R>,
    mode: Mode,
) -> Result<(f64, Option<ItemResult<R>>), CoreError> {
    let mut g = Graph::new();
    let noisy = g.input(item.noisy_scaled.clone());
    let pre = g.input(item.pre_scaled.clone());
    let pre_raw = g.input(item.pre_raw.clone());
    let target_mask = g.input(item.mask_target.clone());
    let clean = g.input(item.clean_wave.clone());
    let mut updates = Vec::new();
    let mask = model.dsr.forward(&mut g, &model.params, noisy, pre, mode, &mut updates)?;
    let refined = g.mul(mask, pre_raw)?;
    let s_hat = item.synth.clone().apply(&mut g, refined);
    let loss = dsr_loss_node(&mut g, s_hat, clean, mask, target_mask)?;
    let loss_val = g.value(loss).item().to_f64();
    if mode == Mode::Eval {
        return Ok((loss_val, None));
    }
    let bn = capture_bn(&g, &updates);
    let grads = g.backward(loss, &model.params)?;
    Ok((loss_val, Some(ItemResult { loss: loss_val, grads, bn })))
}

/// Trains the stage-2 refinement network against the frozen stage-1 model.
/// Stage-1 parameters receive no gradients and no optimizer state.
pub fn train_stage2<R: Real>(
    model: &mut FdfNet<R>,
    data: &Dataset,
    schedule: &TrainSchedule,
    seed: u64,
    clip_bound: f64,
) -> Result<TrainOutcome<R>, CoreError> {
    schedule.validate()?;
    if data.train.is_empty() {
        return Err(CoreError::Usage("training set is empty".into()));
    }
    model.params.freeze_prefix("fme.");

    let train_items: Vec<Stage2Item<R>> = data
        .train
        .iter()
        .map(|it| prepare_stage2(model, it, clip_bound))
        .collect::<Result<_, _>>()?;
    let val_items: Vec<Stage2Item<R>> = data
        .val
        .iter()
        .map(|it| prepare_stage2(model, it, clip_bound))
        .collect::<Result<_, _>>()?;

    let mut optimizer = Rmsprop::new(schedule.learning_rate);
    let mut scheduler = LrScheduler::new(schedule.halve_patience);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5747_3032);
    let mut logs = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = model.params.clone();

    let mut order: Vec<usize> = (0..train_items.len()).collect();
    for epoch in 1..=schedule.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(schedule.batch_size) {
            let results: Vec<ItemResult<R>> = batch
                .par_iter()
                .map(|&i| {
                    stage2_item_loss(model, &train_items[i], Mode::Train)
                        .map(|(_, r)| r.expect("train mode yields gradients"))
                })
                .collect::<Result<_, _>>()?;
            epoch_loss += reduce_batch(model, &mut optimizer, results);
            batches += 1;
        }
        let train_loss = epoch_loss / batches as f64;
        let val_loss = if val_items.is_empty() {
            train_loss
        } else {
            let sum: f64 = val_items
                .par_iter()
                .map(|it| stage2_item_loss(model, it, Mode::Eval).map(|(l, _)| l))
                .collect::<Result<Vec<_>, _>>()?
                .iter()
                .sum();
            sum / val_items.len() as f64
        };
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = model.params.clone();
        }
        if scheduler.observe(val_loss) {
            optimizer.set_learning_rate(optimizer.learning_rate() / 2.0);
        }
        logs.push(EpochLog { epoch, train_loss, val_loss, learning_rate: optimizer.learning_rate() });
    }
    Ok(TrainOutcome { logs, best_val, best_epoch, best_params, optimizer })
}
