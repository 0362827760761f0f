//! Planted-model synthetic data.
//!
//! A hidden head with weights uniform on `[0, 1)` scores tensors drawn
//! uniformly on `[0, value_scale)`. Each set's "human" ordering is the hidden
//! head's ascending-distance order, perturbed by `noise_swaps` adjacent
//! transpositions at uniformly chosen positions.

use serde::{Deserialize, Serialize};

use crate::dataset::RankedSet;
use crate::distx::DistanceArchive;
use crate::error::{Error, Result};
use crate::model::{DistanceTensor, LayerSchema, WeightHead};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub set_count: usize,
    pub images_per_set: usize,
    pub schema: LayerSchema,
    pub noise_swaps: usize,
    pub seed: u64,
    pub value_scale: f64,
}

impl SynthConfig {
    pub fn new(set_count: usize, channel_counts: &[usize], seed: u64) -> Result<Self> {
        Ok(Self {
            set_count,
            images_per_set: 10,
            schema: LayerSchema::from_channel_counts(channel_counts)?,
            noise_swaps: 0,
            seed,
            value_scale: 0.1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.images_per_set < 2 {
            return Err(Error::InvalidArgument(format!(
                "images_per_set must be at least 2, got {}",
                self.images_per_set
            )));
        }
        if !(self.value_scale > 0.0 && self.value_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "value_scale must be positive, got {}",
                self.value_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub hidden: WeightHead,
    pub archive: DistanceArchive,
    pub sets: Vec<RankedSet>,
}

pub fn set_id(i: usize) -> String {
    format!("set{i:04}")
}

pub fn image_id(j: usize) -> String {
    format!("img{j:02}")
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut rng = SplitMix64::new(config.seed);
    let schema = config.schema.clone();
    let dim = schema.parameter_count();
    let hidden_flat: Vec<f64> = (0..dim).map(|_| rng.next_f64()).collect();
    let hidden = WeightHead::from_flat(schema.clone(), &hidden_flat)?;

    let mut archive = DistanceArchive::new(schema.clone());
    let mut sets = Vec::with_capacity(config.set_count);
    for s in 0..config.set_count {
        let sid = set_id(s);
        let images: Vec<String> = (0..config.images_per_set).map(image_id).collect();
        let mut distances = Vec::with_capacity(images.len());
        for img in &images {
            let values = schema
                .layers()
                .iter()
                .map(|l| {
                    (0..l.channel_count)
                        .map(|_| (rng.next_f64() * config.value_scale) as f32)
                        .collect()
                })
                .collect();
            let tensor = DistanceTensor::new(sid.clone(), img.clone(), values)?;
            distances.push(hidden.distance(&tensor)?);
            archive.insert(tensor)?;
        }
        let mut order: Vec<usize> = (0..images.len()).collect();
        order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
        for _ in 0..config.noise_swaps {
            let i = rng.below(images.len() - 1);
            order.swap(i, i + 1);
        }
        let human_order = order.iter().map(|&i| images[i].clone()).collect();
        sets.push(RankedSet::new(sid, format!("target{s:04}"), images, human_order)?);
    }
    Ok(SynthData { hidden, archive, sets })
}

/// Copy of `head` with its flattened weights permuted by a seeded shuffle.
pub fn permuted_head(head: &WeightHead, seed: u64) -> Result<WeightHead> {
    let mut flat = head.flatten();
    SplitMix64::new(seed).shuffle(&mut flat);
    WeightHead::from_flat(head.schema().clone(), &flat)
}
