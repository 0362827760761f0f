//! Two-way ANOVA without replication and the ICC(2,k) agreement coefficient.

use serde::{Deserialize, Serialize};

use super::dist::{f_quantile, f_sf};
use crate::error::{Error, Result};

/// Mean squares of an `n` items x `k` raters decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub n: usize,
    pub k: usize,
    pub ss_rows: f64,
    pub ss_cols: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    /// Between-item mean square.
    pub ms_r: f64,
    /// Between-rater mean square.
    pub ms_c: f64,
    /// Residual mean square.
    pub ms_e: f64,
}

impl AnovaTable {
    pub fn df_rows(&self) -> f64 {
        (self.n - 1) as f64
    }

    pub fn df_cols(&self) -> f64 {
        (self.k - 1) as f64
    }

    pub fn df_error(&self) -> f64 {
        ((self.n - 1) * (self.k - 1)) as f64
    }
}

/// Decomposes a row-major `n x k` matrix (items in rows, raters in columns).
pub fn anova_two_way(ratings: &[Vec<f64>]) -> Result<AnovaTable> {
    let n = ratings.len();
    let k = ratings.first().map_or(0, Vec::len);
    if let Some(i) = ratings.iter().position(|r| r.len() != k) {
        return Err(Error::InvalidArgument(format!("row {i} has {} columns, expected {k}", ratings[i].len())));
    }
    decompose(n, k, |i, j| ratings[i][j])
}

/// Two raters scoring the same items: `a[i]` and `b[i]` form row `i`.
pub fn anova_two_raters(a: &[f64], b: &[f64]) -> Result<AnovaTable> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!("rater lengths differ: {} vs {}", a.len(), b.len())));
    }
    decompose(a.len(), 2, |i, j| if j == 0 { a[i] } else { b[i] })
}

fn decompose(n: usize, k: usize, at: impl Fn(usize, usize) -> f64) -> Result<AnovaTable> {
    if n < 2 || k < 2 {
        return Err(Error::InvalidArgument(format!(
            "two-way ANOVA needs at least 2 items and 2 raters, got {n} x {k}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    let mut row_means = vec![0.0; n];
    let mut col_means = vec![0.0; k];
    let mut total = 0.0;
    for (i, rm) in row_means.iter_mut().enumerate() {
        for (j, cm) in col_means.iter_mut().enumerate() {
            let x = at(i, j);
            if !x.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite rating at ({i}, {j})")));
            }
            *rm += x;
            *cm += x;
            total += x;
        }
    }
    row_means.iter_mut().for_each(|m| *m /= kf);
    col_means.iter_mut().for_each(|m| *m /= nf);
    let grand = total / (nf * kf);

    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_error = 0.0;
    let mut ss_total = 0.0;
    for (i, rm) in row_means.iter().enumerate() {
        for (j, cm) in col_means.iter().enumerate() {
            let x = at(i, j);
            ss_error += (x - rm - cm + grand).powi(2);
            ss_total += (x - grand).powi(2);
        }
    }

    Ok(AnovaTable {
        n,
        k,
        ss_rows,
        ss_cols,
        ss_error,
        ss_total,
        ms_r: ss_rows / (nf - 1.0),
        ms_c: ss_cols / (kf - 1.0),
        ms_e: ss_error / ((nf - 1.0) * (kf - 1.0)),
    })
}

/// ICC(2,k): two-way random effects, absolute agreement, average of k raters.
///
/// `(MS_R - MS_E) / (MS_R + (MS_C - MS_E) / n)`; may be negative.
pub fn icc2k(table: &AnovaTable) -> Result<f64> {
    let denom = table.ms_r + (table.ms_c - table.ms_e) / table.n as f64;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Undefined("ICC(2,k) denominator is zero".into()));
    }
    Ok((table.ms_r - table.ms_e) / denom)
}

/// ICC(2,1), the single-rater form used to derive the interval for ICC(2,k).
pub fn icc21(table: &AnovaTable) -> Result<f64> {
    let (n, k) = (table.n as f64, table.k as f64);
    let denom = table.ms_r + (k - 1.0) * table.ms_e + k * (table.ms_c - table.ms_e) / n;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Undefined("ICC(2,1) denominator is zero".into()));
    }
    Ok((table.ms_r - table.ms_e) / denom)
}

/// One-sided p-value of `F = MS_R / MS_E` on `(n-1, (n-1)(k-1))` degrees of
/// freedom. Zero residual gives `p = 0`.
pub fn icc_p_value(table: &AnovaTable) -> Result<f64> {
    if table.ms_e == 0.0 {
        return Ok(0.0);
    }
    f_sf(table.ms_r / table.ms_e, table.df_rows(), table.df_error())
}

/// Confidence interval for ICC(2,k) following McGraw & Wong (1996): an
/// interval for ICC(2,1) with Satterthwaite degrees of freedom, stepped up to
/// k raters by Spearman-Brown.
///
/// Degenerate tables (no residual or between-rater variance, or a perfect
/// single-rater ICC) collapse to the point estimate. The step-up has a pole at
/// `-1/(k-1)`: a single-rater bound at or below it means the k-rater bound is
/// unbounded, returned as negative infinity.
pub fn icc2k_interval(table: &AnovaTable, confidence: f64) -> Result<(f64, f64)> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let point = icc2k(table)?;
    let single = icc21(table)?;
    let (n, k) = (table.n as f64, table.k as f64);
    let (msr, msc, mse) = (table.ms_r, table.ms_c, table.ms_e);
    if mse == 0.0 || single >= 1.0 {
        return Ok((point, point));
    }
    let a = k * single / (n * (1.0 - single));
    let b = 1.0 + k * single * (n - 1.0) / (n * (1.0 - single));
    let num = (a * msc + b * mse).powi(2);
    let den = (a * msc).powi(2) / (k - 1.0) + (b * mse).powi(2) / ((n - 1.0) * (k - 1.0));
    let v = num / den;
    if !(v.is_finite() && v > 0.0) {
        return Ok((point, point));
    }
    let upper_p = 1.0 - (1.0 - confidence) / 2.0;
    let f_lo = f_quantile(upper_p, n - 1.0, v)?;
    let f_hi = f_quantile(upper_p, v, n - 1.0)?;
    let common = k * msc + (k * n - k - n) * mse;
    let l1 = n * (msr - f_lo * mse) / (f_lo * common + n * msr);
    let u1 = n * (f_hi * msr - mse) / (common + n * f_hi * msr);
    let step_up = |r: f64| {
        if 1.0 + (k - 1.0) * r <= 0.0 {
            f64::NEG_INFINITY
        } else {
            k * r / (1.0 + (k - 1.0) * r)
        }
    };
    Ok((step_up(l1), step_up(u1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guideline {
    KooLi,
    Cicchetti,
}

/// Qualitative band for an ICC value.
///
/// Every band is closed at its upper threshold: `(lo, hi]`. Under Koo & Li,
/// exactly 0.75 is "Moderate"; under Cicchetti, exactly 0.60 is "Fair".
pub fn interpret_icc(value: f64, guideline: Guideline) -> &'static str {
    let (thresholds, labels): (&[f64], &[&str]) = match guideline {
        Guideline::KooLi => (&[0.50, 0.75, 0.90], &["Poor", "Moderate", "Good", "Excellent"]),
        Guideline::Cicchetti => (&[0.40, 0.60, 0.75], &["Poor", "Fair", "Good", "Excellent"]),
    };
    let band = thresholds.iter().take_while(|&&t| value > t).count();
    labels[band]
}
