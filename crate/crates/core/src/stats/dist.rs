//! Student t and Fisher F distribution functions on top of the regularized
//! incomplete beta function.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

fn check_df(df: f64) -> Result<()> {
    if df.is_finite() && df > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("degrees of freedom must be positive, got {df}")))
    }
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if t.is_nan() {
        return Err(Error::InvalidArgument("t is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// Two-sided tail probability `P(|T| >= |t|)`.
pub fn t_two_sided(t: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if t.is_infinite() {
        return Ok(0.0);
    }
    Ok(beta_reg(df / 2.0, 0.5, df / (df + t * t)))
}

/// CDF of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    check_df(d1)?;
    check_df(d2)?;
    if x.is_nan() {
        return Err(Error::InvalidArgument("x is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(beta_reg(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2)))
}

/// Upper tail `1 - F(x)`, evaluated without cancellation.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    check_df(d1)?;
    check_df(d2)?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x)))
}

/// Quantile of the F distribution by bracketing and bisection on [`f_cdf`].
pub fn f_quantile(p: f64, d1: f64, d2: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability must lie in (0, 1), got {p}")));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f_cdf(hi, d1, d2)? < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Numerical("F quantile did not bracket".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, d1, d2)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-sided p-value for `rho = 0` from the t approximation
/// `t = rho * sqrt((n - 2) / (1 - rho^2))` with `n - 2` degrees of freedom.
pub fn spearman_p(rho: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("spearman p-value needs n >= 4, got {n}")));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho {rho} outside [-1, 1]")));
    }
    if rho.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    t_two_sided(t, df)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_cdf_at_zero_is_half() {
        for df in [1.0, 2.5, 10.0, 100.0] {
            assert!((t_cdf(0.0, df).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn t_cdf_cauchy_closed_form() {
        // df = 1 is the Cauchy distribution: 1/2 + atan(t)/pi.
        for t in [-3.0, -0.5, 0.7, 2.0, 10.0] {
            let expected = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert!((t_cdf(t, 1.0).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn f_cdf_limits() {
        assert_eq!(f_cdf(0.0, 3.0, 4.0).unwrap(), 0.0);
        assert_eq!(f_cdf(f64::INFINITY, 3.0, 4.0).unwrap(), 1.0);
        assert!(f_cdf(1e12, 3.0, 4.0).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn f_quantile_inverts_cdf() {
        for (p, d1, d2) in [(0.975, 3.0, 10.0), (0.5, 1.0, 1.0), (0.9, 20.0, 7.3)] {
            let q = f_quantile(p, d1, d2).unwrap();
            assert!((f_cdf(q, d1, d2).unwrap() - p).abs() < 1e-10);
        }
    }

    #[test]
    fn spearman_p_edges() {
        assert!((spearman_p(0.0, 10).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(spearman_p(1.0, 10).unwrap(), 0.0);
        assert_eq!(spearman_p(-1.0, 10).unwrap(), 0.0);
        assert!(spearman_p(0.5, 3).is_err());
    }
}
