use std::collections::HashMap;

use crate::dataset::{PairTuple, RankedSet};
use crate::distx::DistanceArchive;
use crate::error::{Error, Result};
use crate::model::WeightHead;

/// Margin ranking loss `max(0, d_pos - d_neg + m)`.
pub fn hinge_loss(d_pos: f64, d_neg: f64, margin: f64) -> f64 {
    (d_pos - d_neg + margin).max(0.0)
}

/// Mean hinge loss over `tuples` and its gradient with respect to the
/// flattened weights.
///
/// The gradient is the exact gradient of the mean: active tuples (strictly
/// positive hinge) contribute `tensor_pos - tensor_neg`, the sum is divided
/// by the number of tuples. At the hinge corner the subgradient is zero.
pub fn batch_loss_and_grad(
    head: &WeightHead,
    archive: &DistanceArchive,
    tuples: &[PairTuple],
    margin: f64,
) -> Result<(f64, Vec<f64>)> {
    head.schema().check_same(archive.schema())?;
    let dim = head.schema().parameter_count();
    let weights = head.flatten();
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim];
    for t in tuples {
        let pos = archive.require(&t.set_id, &t.pos_id)?.flatten();
        let neg = archive.require(&t.set_id, &t.neg_id)?.flatten();
        accumulate(&weights, &pos, &neg, margin, &mut loss, &mut grad);
    }
    Ok(finish(loss, grad, tuples.len()))
}

fn accumulate(weights: &[f64], pos: &[f64], neg: &[f64], margin: f64, loss: &mut f64, grad: &mut [f64]) {
    let d_pos: f64 = weights.iter().zip(pos).map(|(w, x)| w * x).sum();
    let d_neg: f64 = weights.iter().zip(neg).map(|(w, x)| w * x).sum();
    let l = hinge_loss(d_pos, d_neg, margin);
    if l > 0.0 {
        *loss += l;
        for ((g, p), n) in grad.iter_mut().zip(pos).zip(neg) {
            *g += p - n;
        }
    }
}

fn finish(loss: f64, mut grad: Vec<f64>, count: usize) -> (f64, Vec<f64>) {
    if count == 0 {
        return (0.0, grad);
    }
    let scale = 1.0 / count as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

/// Dense row-major copy of the archive tensors referenced by a training run,
/// with tuples resolved to row indices.
#[derive(Debug, Clone)]
pub(crate) struct FeatureTable {
    dim: usize,
    rows: Vec<f64>,
}

impl FeatureTable {
    pub(crate) fn build(
        archive: &DistanceArchive,
        sets: &[&RankedSet],
        tuples: &[PairTuple],
    ) -> Result<(Self, Vec<(usize, usize)>)> {
        let dim = archive.schema().parameter_count();
        let mut rows = Vec::new();
        let mut index: HashMap<(&str, &str), usize> = HashMap::new();
        for set in sets {
            for img in &set.images {
                let t = archive.require(&set.set_id, img)?;
                index.insert((set.set_id.as_str(), img.as_str()), index.len());
                rows.extend(t.flatten());
            }
        }
        let lookup = |set_id: &str, image_id: &str| {
            index.get(&(set_id, image_id)).copied().ok_or_else(|| Error::MissingTensor {
                set_id: set_id.to_owned(),
                image_id: image_id.to_owned(),
            })
        };
        let pairs = tuples
            .iter()
            .map(|t| Ok((lookup(&t.set_id, &t.pos_id)?, lookup(&t.set_id, &t.neg_id)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok((Self { dim, rows }, pairs))
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn loss_and_grad(&self, weights: &[f64], pairs: &[(usize, usize)], margin: f64) -> (f64, Vec<f64>) {
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim];
        for &(p, n) in pairs {
            accumulate(weights, self.row(p), self.row(n), margin, &mut loss, &mut grad);
        }
        finish(loss, grad, pairs.len())
    }
}
