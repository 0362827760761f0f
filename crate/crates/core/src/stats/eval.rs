//! Metric/human alignment over ranked sets.
//!
//! Within each set the head's distances are turned into ranks (smallest
//! distance = rank 1, ties averaged) and compared with the human ranks. The
//! merged aggregate concatenates every `(human rank, metric rank)` pair across
//! sets; the pooled ICC stacks every `(set, image)` as one item rated by two
//! raters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::anova::{anova_two_raters, icc2k, icc2k_interval, icc_p_value, interpret_icc, AnovaTable, Guideline};
use super::dist::spearman_p;
use super::rank::{average_ranks, spearman_rho};
use crate::dataset::RankedSet;
use crate::distx::DistanceArchive;
use crate::error::{Error, Result};
use crate::model::WeightHead;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Merged,
    PerSetMean,
}

impl std::str::FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merged" => Ok(Aggregate::Merged),
            "per-set" | "per_set" | "per_set_mean" | "per-set-mean" => Ok(Aggregate::PerSetMean),
            other => Err(Error::InvalidArgument(format!(
                "unknown aggregate `{other}` (expected merged or per-set)"
            ))),
        }
    }
}

/// What the merged Spearman correlates human ranks against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricScores {
    /// Ranks of the distances within each set.
    #[default]
    WithinSetRanks,
    /// Raw distances pooled across sets.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub aggregate: Aggregate,
    pub scores: MetricScores,
    pub confidence: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            aggregate: Aggregate::Merged,
            scores: MetricScores::WithinSetRanks,
            confidence: 0.95,
        }
    }
}

/// Human and metric ranks for one set, in the set's `images` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SetScores {
    pub set_id: String,
    pub human_ranks: Vec<f64>,
    pub metric_ranks: Vec<f64>,
    pub distances: Vec<f64>,
}

impl SetScores {
    pub fn rho(&self) -> Result<f64> {
        spearman_rho(&self.human_ranks, &self.metric_ranks)
    }

    pub fn icc(&self) -> Result<f64> {
        icc2k(&anova_two_raters(&self.human_ranks, &self.metric_ranks)?)
    }
}

pub fn score_set(head: &WeightHead, archive: &DistanceArchive, set: &RankedSet) -> Result<SetScores> {
    if set.len() < 2 {
        return Err(Error::Validation(format!("set `{}` has fewer than 2 images", set.set_id)));
    }
    let distances = set
        .images
        .iter()
        .map(|img| head.distance(archive.require(&set.set_id, img)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SetScores {
        set_id: set.set_id.clone(),
        human_ranks: set.human_ranks(),
        metric_ranks: average_ranks(&distances),
        distances,
    })
}

pub fn score_sets(head: &WeightHead, archive: &DistanceArchive, sets: &[RankedSet]) -> Result<Vec<SetScores>> {
    head.schema().check_same(archive.schema())?;
    sets.iter().map(|s| score_set(head, archive, s)).collect()
}

/// Spearman over the concatenated `(human rank, metric score)` pairs.
pub fn merged_rho<'a>(sets: impl IntoIterator<Item = &'a SetScores>, scores: MetricScores) -> Result<(f64, usize)> {
    let mut human = Vec::new();
    let mut metric = Vec::new();
    for s in sets {
        human.extend_from_slice(&s.human_ranks);
        metric.extend_from_slice(match scores {
            MetricScores::WithinSetRanks => &s.metric_ranks,
            MetricScores::Raw => &s.distances,
        });
    }
    let n = human.len();
    Ok((spearman_rho(&human, &metric)?, n))
}

/// ANOVA table with every `(set, image)` stacked as one item and the human
/// and the metric as the two raters.
pub fn pooled_table<'a>(sets: impl IntoIterator<Item = &'a SetScores>) -> Result<AnovaTable> {
    let mut human = Vec::new();
    let mut metric = Vec::new();
    for s in sets {
        human.extend_from_slice(&s.human_ranks);
        metric.extend_from_slice(&s.metric_ranks);
    }
    anova_two_raters(&human, &metric)
}

pub fn pooled_icc<'a>(sets: impl IntoIterator<Item = &'a SetScores>) -> Result<f64> {
    icc2k(&pooled_table(sets)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub aggregate: Aggregate,
    pub metric_scores: MetricScores,
    pub set_count: usize,
    pub item_count: usize,
    /// Headline Spearman: merged or mean of per-set values, per `aggregate`.
    pub spearman_rho: f64,
    pub spearman_p: Option<f64>,
    /// Headline ICC(2,k): pooled or mean of per-set values, per `aggregate`.
    pub icc2k: f64,
    pub icc_p: f64,
    pub confidence: f64,
    /// `None` when the interval is unbounded below (very few items).
    pub icc_ci_low: Option<f64>,
    pub icc_ci_high: f64,
    pub merged_rho: f64,
    pub mean_set_rho: Option<f64>,
    pub pooled_icc2k: f64,
    pub mean_set_icc2k: Option<f64>,
    pub pooled_anova: AnovaTable,
    pub per_set_rho: BTreeMap<String, Option<f64>>,
    pub per_set_icc: BTreeMap<String, Option<f64>>,
    pub koo_li_band: String,
    pub cicchetti_band: String,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = values.flatten().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn evaluate(
    head: &WeightHead,
    archive: &DistanceArchive,
    sets: &[RankedSet],
    options: &EvalOptions,
) -> Result<AlignmentReport> {
    if sets.is_empty() {
        return Err(Error::InvalidArgument("no sets to evaluate".into()));
    }
    let scored = score_sets(head, archive, sets)?;
    report_from_scores(&scored, options)
}

/// p-values and the ICC interval always come from the pooled analysis; the
/// per-set mean only changes the headline `spearman_rho` and `icc2k`.
pub fn report_from_scores(scored: &[SetScores], options: &EvalOptions) -> Result<AlignmentReport> {
    let per_set_rho: BTreeMap<String, Option<f64>> =
        scored.iter().map(|s| (s.set_id.clone(), s.rho().ok())).collect();
    let per_set_icc: BTreeMap<String, Option<f64>> =
        scored.iter().map(|s| (s.set_id.clone(), s.icc().ok())).collect();
    let mean_set_rho = mean_defined(scored.iter().map(|s| per_set_rho[&s.set_id]));
    let mean_set_icc2k = mean_defined(scored.iter().map(|s| per_set_icc[&s.set_id]));

    let (merged, item_count) = merged_rho(scored, options.scores)?;
    let table = pooled_table(scored)?;
    let pooled = icc2k(&table)?;
    let (icc_ci_low, icc_ci_high) = icc2k_interval(&table, options.confidence)?;

    let (rho, icc) = match options.aggregate {
        Aggregate::Merged => (merged, pooled),
        Aggregate::PerSetMean => (
            mean_set_rho.ok_or_else(|| Error::Undefined("no set has a defined Spearman rho".into()))?,
            mean_set_icc2k.ok_or_else(|| Error::Undefined("no set has a defined ICC".into()))?,
        ),
    };

    Ok(AlignmentReport {
        aggregate: options.aggregate,
        metric_scores: options.scores,
        set_count: scored.len(),
        item_count,
        spearman_rho: rho,
        spearman_p: spearman_p(merged, item_count).ok(),
        icc2k: icc,
        icc_p: icc_p_value(&table)?,
        confidence: options.confidence,
        icc_ci_low: icc_ci_low.is_finite().then_some(icc_ci_low),
        icc_ci_high,
        merged_rho: merged,
        mean_set_rho,
        pooled_icc2k: pooled,
        mean_set_icc2k,
        pooled_anova: table,
        per_set_rho,
        per_set_icc,
        koo_li_band: interpret_icc(icc, Guideline::KooLi).to_owned(),
        cicchetti_band: interpret_icc(icc, Guideline::Cicchetti).to_owned(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl AlignmentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per set plus a trailing `summary` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,set_id,spearman_rho,icc2k,spearman_p,icc_p,icc_ci_low,icc_ci_high,koo_li_band,cicchetti_band\n");
        for (id, rho) in &self.per_set_rho {
            let icc = self.per_set_icc.get(id).copied().flatten();
            let _ = writeln!(out, "set,{},{},{},,,,,,", csv_field(id), opt(*rho), opt(icc));
        }
        let _ = writeln!(
            out,
            "summary,,{},{},{},{},{},{},{},{}",
            self.spearman_rho,
            self.icc2k,
            opt(self.spearman_p),
            self.icc_p,
            opt(self.icc_ci_low),
            self.icc_ci_high,
            self.koo_li_band,
            self.cicchetti_band
        );
        out
    }

    pub fn save(&self, json_path: impl AsRef<Path>, csv_path: impl AsRef<Path>) -> Result<()> {
        let (j, c) = (json_path.as_ref(), csv_path.as_ref());
        fs::write(j, self.to_json()).map_err(|e| Error::io(j, e))?;
        fs::write(c, self.to_csv()).map_err(|e| Error::io(c, e))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
