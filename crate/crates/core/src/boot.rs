//! Paired bootstrap over target image sets for the difference in pooled
//! ICC(2,k) between two weight heads.
//!
//! Every resample draws `|sets|` sets with replacement and scores both heads on
//! that same multiset. Resample `i` uses its own [`SplitMix64::stream`] derived
//! from `(seed, i)`, so results do not depend on how resamples are scheduled
//! across threads.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::RankedSet;
use crate::distx::DistanceArchive;
use crate::error::{Error, Result};
use crate::model::WeightHead;
use crate::rng::SplitMix64;
use crate::stats::{pooled_icc, score_sets, SetScores};

pub const MIN_RESAMPLES: usize = 100;

/// Redraws allowed per resample before the run is declared degenerate.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Pooled ICC difference (a minus b) on the full data.
    pub observed_delta_icc: f64,
    pub delta_icc_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    /// Two-sided: `2 * min(P(delta <= 0), P(delta >= 0))`, clamped to `[2/B, 1]`.
    pub p_value: f64,
    pub resamples: usize,
    pub seed: u64,
    pub redraws: usize,
    #[serde(skip)]
    pub per_resample_delta: Vec<f64>,
}

impl BootstrapResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bootstrap result serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn deltas_csv(&self) -> String {
        let mut out = String::from("resample,delta_icc\n");
        for (i, d) in self.per_resample_delta.iter().enumerate() {
            out.push_str(&format!("{i},{d}\n"));
        }
        out
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn paired_bootstrap(
    archive: &DistanceArchive,
    sets: &[RankedSet],
    head_a: &WeightHead,
    head_b: &WeightHead,
    resamples: usize,
    seed: u64,
    confidence: f64,
) -> Result<BootstrapResult> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_RESAMPLES} resamples are required, got {resamples}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    if sets.is_empty() {
        return Err(Error::InvalidArgument("no sets to resample".into()));
    }
    head_a.schema().check_same(head_b.schema())?;
    // Within-set ranks do not change under resampling of whole sets.
    let scores_a = score_sets(head_a, archive, sets)?;
    let scores_b = score_sets(head_b, archive, sets)?;
    let observed_delta_icc = pooled_icc(&scores_a)? - pooled_icc(&scores_b)?;

    let outcomes = (0..resamples)
        .into_par_iter()
        .map(|i| one_resample(&scores_a, &scores_b, seed, i as u64))
        .collect::<Result<Vec<(f64, usize)>>>()?;

    let per_resample_delta: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let redraws = outcomes.iter().map(|o| o.1).sum();
    let b = resamples as f64;
    let mean = per_resample_delta.iter().sum::<f64>() / b;
    let mut sorted = per_resample_delta.clone();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - confidence;
    let le = per_resample_delta.iter().filter(|&&d| d <= 0.0).count() as f64 / b;
    let ge = per_resample_delta.iter().filter(|&&d| d >= 0.0).count() as f64 / b;
    let p_value = (2.0 * le.min(ge)).clamp(2.0 / b, 1.0);

    Ok(BootstrapResult {
        observed_delta_icc,
        delta_icc_mean: mean,
        ci_low: percentile(&sorted, alpha / 2.0),
        ci_high: percentile(&sorted, 1.0 - alpha / 2.0),
        confidence,
        p_value,
        resamples,
        seed,
        redraws,
        per_resample_delta,
    })
}

fn one_resample(a: &[SetScores], b: &[SetScores], seed: u64, index: u64) -> Result<(f64, usize)> {
    let mut rng = SplitMix64::stream(seed, index);
    let n = a.len();
    let mut picks = Vec::with_capacity(n);
    for redraw in 0..=MAX_REDRAWS {
        picks.clear();
        picks.extend((0..n).map(|_| rng.below(n)));
        let icc_a = pooled_icc(picks.iter().map(|&i| &a[i]));
        let icc_b = pooled_icc(picks.iter().map(|&i| &b[i]));
        match (icc_a, icc_b) {
            (Ok(x), Ok(y)) => return Ok((x - y, redraw)),
            (Err(Error::Undefined(_)), _) | (_, Err(Error::Undefined(_))) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Err(Error::Undefined(format!(
        "resample {index} produced an undefined ICC after {MAX_REDRAWS} redraws"
    )))
}
