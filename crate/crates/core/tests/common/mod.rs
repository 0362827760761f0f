//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's statistics code.

#![allow(dead_code)]

/// Closed-form Spearman for tie-free rank vectors: 1 - 6 sum(d^2) / (n (n^2 - 1)).
pub fn closed_form_rho(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// All permutations of `1..=n` as rank vectors (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<f64>> {
    fn heap(k: usize, v: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if k <= 1 {
            out.push(v.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, v, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            v.swap(j, k - 1);
        }
    }
    let mut v: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let mut out = Vec::new();
    heap(n, &mut v, &mut out);
    out
}

/// Mean squares from the textbook computational formulas
/// (sums of squared totals minus the correction term).
pub struct BruteAnova {
    pub ss_rows: f64,
    pub ss_cols: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    pub ms_r: f64,
    pub ms_c: f64,
    pub ms_e: f64,
}

pub fn brute_anova(m: &[Vec<f64>]) -> BruteAnova {
    let n = m.len();
    let k = m[0].len();
    let mut grand_total = 0.0;
    let mut sum_sq = 0.0;
    let mut row_totals = vec![0.0; n];
    let mut col_totals = vec![0.0; k];
    for i in 0..n {
        for j in 0..k {
            let x = m[i][j];
            grand_total += x;
            sum_sq += x * x;
            row_totals[i] += x;
            col_totals[j] += x;
        }
    }
    let correction = grand_total * grand_total / (n * k) as f64;
    let ss_total = sum_sq - correction;
    let ss_rows = row_totals.iter().map(|t| t * t).sum::<f64>() / k as f64 - correction;
    let ss_cols = col_totals.iter().map(|t| t * t).sum::<f64>() / n as f64 - correction;
    let ss_error = ss_total - ss_rows - ss_cols;
    BruteAnova {
        ss_rows,
        ss_cols,
        ss_error,
        ss_total,
        ms_r: ss_rows / (n - 1) as f64,
        ms_c: ss_cols / (k - 1) as f64,
        ms_e: ss_error / ((n - 1) * (k - 1)) as f64,
    }
}

/// Lanczos approximation (g = 7, n = 9) of ln Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn t_pdf(x: f64, df: f64) -> f64 {
    let ln_norm = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

pub fn f_pdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return if d1 == 2.0 { 1.0 } else { 0.0 };
    }
    let ln_beta = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    let ln = 0.5 * d1 * (d1 / d2).ln() + (0.5 * d1 - 1.0) * x.ln() - 0.5 * (d1 + d2) * (1.0 + d1 * x / d2).ln() - ln_beta;
    ln.exp()
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, whole: f64, m: f64, fm: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        // Stop once the tolerance is below what the integrand's rounding noise allows.
        if depth == 0 || delta.abs() <= 15.0 * tol || tol < 1e-17 * whole.abs().max(1e-300) {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 40)
}

/// Student t CDF by quadrature of the density from 0.
pub fn t_cdf_quadrature(t: f64, df: f64) -> f64 {
    let half = integrate(&|x| t_pdf(x, df), 0.0, t.abs(), 1e-13);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// F CDF by quadrature of the density from 0.
pub fn f_cdf_quadrature(x: f64, d1: f64, d2: f64) -> f64 {
    integrate(&|u| f_pdf(u, d1, d2), 0.0, x, 1e-13)
}

/// SplitMix64, transcribed independently for seeding test fixtures.
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn permutation(&mut self, n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            v.swap(i, j);
        }
        v
    }
}
