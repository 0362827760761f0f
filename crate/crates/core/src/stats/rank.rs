use crate::error::{Error, Result};

/// Average (fractional) ranks, 1-based. Tied values share the mean of the
/// positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean(i+1 ..= j)
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn has_ties(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Spearman's rank correlation.
///
/// Inputs are ranked with [`average_ranks`]. Without ties the closed form
/// `1 - 6 sum(d^2) / (n (n^2 - 1))` is evaluated directly; with ties the
/// Pearson correlation of the fractional ranks is returned.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("spearman needs at least 2 observations".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    if !has_ties(a) && !has_ties(b) {
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
        let nf = n as f64;
        return Ok(1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0)));
    }
    pearson(&ra, &rb)
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a constant vector".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_one() {
        let br = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman_rho(&br, &[1.0, 3.0, 4.0, 2.0]).unwrap() - 0.4).abs() < 1e-12);
        assert!((spearman_rho(&br, &[3.0, 2.0, 4.0, 1.0]).unwrap() + 0.4).abs() < 1e-12);
        assert_eq!(spearman_rho(&br, &br).unwrap(), 1.0);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn tied_input_matches_pearson_on_fractional_ranks() {
        // Oracle computed by hand: ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4).
        // mean 2.5 both; sxy = 2.25 + 0 + 0 + 2.25 = 4.5; sxx = 2.25+0+0+2.25 = 4.5; syy = 5
        let expected = 4.5 / (4.5f64 * 5.0).sqrt();
        let got = spearman_rho(&[1.0, 2.0, 2.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn constant_vector_is_undefined() {
        assert!(matches!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn length_mismatch() {
        assert!(spearman_rho(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
