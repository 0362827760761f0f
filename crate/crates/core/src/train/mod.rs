//! Fine-tuning of the weight head on human-ranked pairs.
//!
//! Only the per-channel (or, with `per_layer`, per-layer) combination weights
//! are updated. Each epoch shuffles the training tuples with a generator
//! seeded by `seed + epoch`, takes projected Adam steps on mini-batches of the
//! margin ranking loss, and then scores the validation sets by merged Spearman
//! rho. Training stops after `patience` epochs without improvement and the
//! head from the best epoch is returned.

mod adam;
mod loss;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{batch_loss_and_grad, hinge_loss};
pub(crate) use loss::FeatureTable;

use crate::dataset::{build_pairs, PairScheme, RankedSet, SplitPlan};
use crate::distx::DistanceArchive;
use crate::error::{Error, Result};
use crate::model::WeightHead;
use crate::rng::SplitMix64;
use crate::stats::{merged_rho, score_set, MetricScores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub scheme: PairScheme,
    /// Tie all channels of a layer to one shared weight.
    pub per_layer: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.03,
            learning_rate: 4e-4,
            batch_size: 256,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            scheme: PairScheme::AllPairs,
            per_layer: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be >= 0, got {}", self.margin));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.patience == 0 {
            return bad("patience must be positive".into());
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("adam {name} must lie in (0, 1), got {b}"));
            }
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad(format!("adam epsilon must be > 0, got {}", self.adam_epsilon));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_rho: Option<f64>,
    pub weight_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub config: TrainConfig,
    pub train_pairs: usize,
    pub initial_train_loss: f64,
    pub initial_val_rho: Option<f64>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose head is returned; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
    #[serde(skip)]
    pub head: Option<WeightHead>,
}

impl TrainTrace {
    pub fn head(&self) -> &WeightHead {
        self.head.as_ref().expect("fit always sets the head")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Maps between the flattened head and the optimizer's parameter vector.
struct Parameterization {
    /// `(offset, channel_count)` per layer when weights are tied per layer.
    tied: Option<Vec<(usize, usize)>>,
}

impl Parameterization {
    fn new(head: &WeightHead, per_layer: bool) -> Self {
        let tied = per_layer.then(|| {
            head.schema()
                .offsets()
                .into_iter()
                .zip(head.schema().layers().iter().map(|l| l.channel_count))
                .collect()
        });
        Self { tied }
    }

    fn params_from(&self, flat: &[f64]) -> Vec<f64> {
        match &self.tied {
            None => flat.to_vec(),
            Some(layers) => layers
                .iter()
                .map(|&(o, c)| flat[o..o + c].iter().sum::<f64>() / c as f64)
                .collect(),
        }
    }

    fn expand(&self, params: &[f64], flat: &mut [f64]) {
        match &self.tied {
            None => flat.copy_from_slice(params),
            Some(layers) => {
                for (&(o, c), &p) in layers.iter().zip(params) {
                    flat[o..o + c].fill(p);
                }
            }
        }
    }

    fn collapse(&self, grad: Vec<f64>) -> Vec<f64> {
        match &self.tied {
            None => grad,
            Some(layers) => layers.iter().map(|&(o, c)| grad[o..o + c].iter().sum()).collect(),
        }
    }
}

fn validation_rho(head: &WeightHead, archive: &DistanceArchive, val: &[&RankedSet]) -> Result<Option<f64>> {
    let scored = val
        .iter()
        .map(|s| score_set(head, archive, s))
        .collect::<Result<Vec<_>>>()?;
    match merged_rho(&scored, MetricScores::WithinSetRanks) {
        Ok((rho, _)) => Ok(Some(rho)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn better(candidate: Option<f64>, best: Option<f64>) -> bool {
    match (candidate, best) {
        (Some(c), Some(b)) => c > b,
        (Some(_), None) => true,
        (None, _) => false,
    }
}

/// Trains from `init` on the split's training sets.
pub fn fit(
    archive: &DistanceArchive,
    sets: &[RankedSet],
    split: &SplitPlan,
    config: &TrainConfig,
    init: &WeightHead,
) -> Result<TrainTrace> {
    config.validate()?;
    init.schema().check_same(archive.schema())?;
    let train_sets = split.select(sets, &split.train_set_ids)?;
    let val_sets = split.select(sets, &split.val_set_ids)?;
    if train_sets.is_empty() {
        return Err(Error::InvalidArgument("training partition is empty".into()));
    }
    if val_sets.is_empty() {
        return Err(Error::InvalidArgument("validation partition is empty".into()));
    }
    let tuples: Vec<_> = train_sets
        .iter()
        .flat_map(|s| build_pairs(s, config.scheme))
        .collect();
    if tuples.is_empty() {
        return Err(Error::InvalidArgument("training partition yields no pairs".into()));
    }
    let (table, mut pairs) = FeatureTable::build(archive, &train_sets, &tuples)?;

    let schema = init.schema().clone();
    let param_map = Parameterization::new(init, config.per_layer);
    let mut flat = init.flatten();
    let mut params = param_map.params_from(&flat);
    param_map.expand(&params, &mut flat);
    let start_head = WeightHead::from_flat(schema.clone(), &flat)?;

    let (initial_train_loss, _) = table.loss_and_grad(&flat, &pairs, config.margin);
    let initial_val_rho = validation_rho(&start_head, archive, &val_sets)?;

    let adam = config.adam();
    let mut state = AdamState::new(params.len());
    let mut epochs = Vec::new();
    let mut best: Option<(usize, Option<f64>, WeightHead)> = None;
    let mut stale = 0;

    for epoch in 1..=config.max_epochs {
        SplitMix64::new(config.seed.wrapping_add(epoch as u64)).shuffle(&mut pairs);
        let mut loss_sum = 0.0;
        for batch in pairs.chunks(config.batch_size) {
            let (loss, grad) = table.loss_and_grad(&flat, batch, config.margin);
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("loss became {loss} in epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut params, &mut state, &param_map.collapse(grad), &adam)?;
            param_map.expand(&params, &mut flat);
        }
        if let Some(i) = flat.iter().position(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Numerical(format!("weight {i} left the feasible set: {}", flat[i])));
        }
        let head = WeightHead::from_flat(schema.clone(), &flat)?;
        let val_rho = validation_rho(&head, archive, &val_sets)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / pairs.len() as f64,
            val_rho,
            weight_l1: head.l1_norm(),
        });
        if best.as_ref().is_none_or(|(_, b, _)| better(val_rho, *b)) {
            best = Some((epoch, val_rho, head));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let (best_epoch, head) = match best {
        Some((e, _, h)) => (Some(e), h),
        None => (None, start_head),
    };
    Ok(TrainTrace {
        config: config.clone(),
        train_pairs: tuples.len(),
        initial_train_loss,
        initial_val_rho,
        epochs,
        best_epoch,
        head: Some(head),
    })
}

/// Mean hinge loss of `head` over the tuples of `sets`.
pub fn training_loss(
    head: &WeightHead,
    archive: &DistanceArchive,
    sets: &[&RankedSet],
    scheme: PairScheme,
    margin: f64,
) -> Result<f64> {
    let tuples: Vec<_> = sets.iter().flat_map(|s| build_pairs(s, scheme)).collect();
    let (table, pairs) = FeatureTable::build(archive, sets, &tuples)?;
    Ok(table.loss_and_grad(&head.flatten(), &pairs, margin).0)
}
