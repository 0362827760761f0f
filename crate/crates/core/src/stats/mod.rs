//! Agreement statistics between a metric's rankings and human rankings:
//! Spearman's rho with fractional-rank tie handling, the two-way ANOVA behind
//! ICC(2,k), their p-values, and interpretation bands.

mod anova;
mod dist;
mod eval;
mod rank;

pub use anova::{
    anova_two_raters, anova_two_way, icc21, icc2k, icc2k_interval, icc_p_value, interpret_icc, AnovaTable,
    Guideline,
};
pub use dist::{f_cdf, f_quantile, f_sf, spearman_p, t_cdf, t_two_sided};
pub use eval::{
    evaluate, merged_rho, pooled_icc, pooled_table, report_from_scores, score_set, score_sets, Aggregate,
    AlignmentReport, EvalOptions, MetricScores, SetScores,
};
pub use rank::{average_ranks, spearman_rho};
