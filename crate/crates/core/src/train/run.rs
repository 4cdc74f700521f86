use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_update, AdamMoments, AdamParams};
use super::checkpoint::{Checkpoint, CheckpointMeta};
use super::config::{resolve_freeze, TrainConfig};
use super::early_stop::{EarlyStopping, StopDecision};
use super::split::{check_disjoint, split_site, SiteSplit};
use super::TrainError;
use crate::data::BagRecord;
use crate::eval::{auc_roc, RecordScore};
use crate::model::{bce_loss, forward_bag, init_params, predict_bag, BoundParams, ModelConfig, ModelState};
use crate::numerics::{Element, Graph};
use crate::synth::derive_seed;

const STREAM_INIT: u64 = 11;
const STREAM_ORDER: u64 = 12;
const STREAM_SPLIT: u64 = 13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub steps: u64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights from the best validation epoch.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochLog>,
    pub stopped_early: bool,
}

#[derive(Clone, Debug)]
pub struct FinetuneOutcome {
    pub outcome: TrainOutcome,
    pub split: SiteSplit,
}

/// Adds the loss gradient of one bag into `acc` (skipping `frozen`) and
/// returns the loss.
pub fn bag_loss_and_grads(
    state: &ModelState<f64>,
    cfg: &ModelConfig,
    record: &BagRecord,
    swap: Option<&[bool]>,
    acc: &mut ModelState<f64>,
    frozen: &BTreeSet<String>,
) -> Result<f64, TrainError> {
    let mut g = Graph::new();
    let p = BoundParams::bind(&mut g, state)?;
    let out = forward_bag(&mut g, &p, record, cfg, swap)?;
    let loss = g.bce(out.y_hat, f64::from(record.label)).map_err(crate::model::ModelError::from)?;
    let grads = g.backward(loss).map_err(crate::model::ModelError::from)?;
    for (name, id) in p.iter() {
        if frozen.contains(name) {
            continue;
        }
        let dst = acc.get_mut(name).expect("accumulator mirrors the state");
        grads.accumulate_into(id, dst);
    }
    Ok(g.value(loss).data()[0])
}

/// Scores every record with the model in the precision of `state`.
pub fn evaluate_bags<T: Element>(
    state: &ModelState<T>,
    cfg: &ModelConfig,
    records: &[BagRecord],
) -> Result<Vec<RecordScore>, TrainError> {
    records
        .iter()
        .map(|r| {
            Ok(RecordScore {
                record_id: r.record_id.clone(),
                score: predict_bag(r, state, cfg)?.y_hat,
                label: r.label,
            })
        })
        .collect()
}

fn validation(state: &ModelState<f64>, cfg: &ModelConfig, val: &[BagRecord]) -> Result<(f64, Option<f64>), TrainError> {
    let scores = evaluate_bags(state, cfg, val)?;
    let loss = scores.iter().map(|s| bce_loss(s.score, s.label)).sum::<f64>() / scores.len() as f64;
    let s: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let l: Vec<u8> = scores.iter().map(|s| s.label).collect();
    Ok((loss, auc_roc(&s, &l).ok()))
}

/// Mini-batch Adam from `state` with early stopping on validation AUC
/// (negative validation loss when the validation set has a single class).
pub fn train(
    mut state: ModelState<f64>,
    cfg: &ModelConfig,
    train: &[BagRecord],
    val: &[BagRecord],
    tcfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    tcfg.validate()?;
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset("no training bags".into()));
    }
    if val.is_empty() {
        return Err(TrainError::EmptyDataset("no validation bags".into()));
    }
    check_disjoint(train, val)?;
    let frozen = resolve_freeze(&state, &tcfg.freeze_set)?;
    let hp = AdamParams::with_lr(tcfg.lr);
    let mut moments = AdamMoments::zeros_like(&state);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(tcfg.seed, STREAM_ORDER));
    let mut stopper = EarlyStopping::new(tcfg.patience, tcfg.min_delta);
    let single_class_val = val.iter().all(|r| r.label == val[0].label);
    let monitor = if single_class_val { "neg_val_loss" } else { "val_auc" };

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<Checkpoint> = None;
    let mut stopped_early = false;
    'epochs: for epoch in 1..=tcfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        let mut out_of_steps = false;
        for batch in order.chunks(tcfg.batch_size) {
            let mut acc = state.zeros_like();
            for idx in batch {
                let record = &train[*idx];
                let swap: Option<Vec<bool>> =
                    tcfg.swap_augment.then(|| (0..record.m()).map(|_| rng.gen_bool(0.5)).collect());
                loss_sum += bag_loss_and_grads(&state, cfg, record, swap.as_deref(), &mut acc, &frozen)?;
            }
            seen += batch.len();
            let inv = 1.0 / batch.len() as f64;
            for (_, t) in acc.iter_mut() {
                t.data_mut().iter_mut().for_each(|v| *v *= inv);
            }
            adam_update(&mut state, &acc, &mut moments, &hp, &frozen)?;
            if tcfg.max_steps.is_some_and(|n| moments.t >= n as u64) {
                out_of_steps = true;
                break;
            }
        }
        let (val_loss, val_auc) = validation(&state, cfg, val)?;
        let log = EpochLog {
            epoch,
            steps: moments.t,
            train_loss: loss_sum / seen as f64,
            val_loss,
            val_auc,
        };
        log::info!(
            "epoch {epoch}: train loss {:.4}, val loss {:.4}, val auc {}",
            log.train_loss,
            log.val_loss,
            val_auc.map_or("n/a".into(), |a| format!("{a:.4}"))
        );
        history.push(log);
        let metric = if single_class_val { -val_loss } else { val_auc.unwrap_or(0.5) };
        match stopper.update(epoch, metric) {
            StopDecision::Improved => {
                best = Some(Checkpoint::new(
                    cfg.clone(),
                    &state,
                    Some(&moments),
                    CheckpointMeta {
                        epoch,
                        step: moments.t,
                        best_metric: Some(metric),
                        monitor: monitor.into(),
                        seed: tcfg.seed,
                    },
                ));
            }
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break 'epochs;
            }
        }
        if out_of_steps {
            break;
        }
    }
    Ok(TrainOutcome {
        checkpoint: best.expect("the first epoch always improves"),
        history,
        stopped_early,
    })
}

/// Trains a freshly initialized model.
pub fn pretrain(
    train_records: &[BagRecord],
    val_records: &[BagRecord],
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let state = init_params(cfg, derive_seed(tcfg.seed, STREAM_INIT))?;
    train(state, cfg, train_records, val_records, tcfg)
}

/// Adapts a checkpoint to one site: subject-disjoint split, frozen prefixes,
/// fresh optimizer moments.
pub fn finetune(ckpt: &Checkpoint, site_records: &[BagRecord], tcfg: &TrainConfig) -> Result<FinetuneOutcome, TrainError> {
    if let Some(r) = site_records.iter().find(|r| r.d() != Some(ckpt.config.d)) {
        return Err(TrainError::DataMismatch(format!(
            "record {} has d = {:?}, checkpoint expects {}",
            r.record_id,
            r.d(),
            ckpt.config.d
        )));
    }
    let split = split_site(site_records, derive_seed(tcfg.seed, STREAM_SPLIT))?;
    let outcome = train(ckpt.state.cast(), &ckpt.config, &split.train, &split.val, tcfg)?;
    Ok(FinetuneOutcome { outcome, split })
}
