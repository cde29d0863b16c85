//! Shared numerical statistics.
//!
//! Percentiles use linear interpolation between the closest order statistics:
//! for `n` sorted values the `q`-th percentile sits at fractional rank
//! `q / 100 * (n - 1)`. Standard deviations are population (ddof = 0).

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Arithmetic mean. `None` on empty input.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Population variance. `None` on empty input.
pub fn variance(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some(ss / values.len() as f64)
}

/// Population standard deviation. `None` on empty input.
pub fn std_dev(values: &[f64]) -> Option<f64> {
    variance(values).map(libm::sqrt)
}

/// Linear-interpolation percentile of `values`, `q` in `[0, 100]`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile"));
    }
    let mut scratch = values.to_vec();
    percentile_in_place(&mut scratch, q)
}

/// Same as [`percentile`] but reorders `values` instead of copying.
pub fn percentile_in_place(values: &mut [f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile"));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::Invalid(alloc::format!("percentile rank {q} outside [0, 100]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("percentile input"));
    }
    let n = values.len();
    let rank = q / 100.0 * (n - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let frac = rank - lo as f64;
    let (_, lo_val, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_val = *lo_val;
    if frac == 0.0 || upper.is_empty() {
        return Ok(lo_val);
    }
    let hi_val = upper.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(lo_val + frac * (hi_val - lo_val))
}

/// Percentile of an already ascending-sorted slice.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// 50th percentile under the same convention.
pub fn median(values: &[f64]) -> Result<f64> {
    percentile(values, 50.0)
}

/// Interquartile range (75th minus 25th percentile), reordering `values`.
pub fn iqr_in_place(values: &mut [f64]) -> Result<f64> {
    let q1 = percentile_in_place(values, 25.0)?;
    let q3 = percentile_in_place(values, 75.0)?;
    Ok(q3 - q1)
}

/// Location, spread and quartile range of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub iqr: f64,
}

/// Mean, population std and IQR; reorders `values`.
pub fn summarize_in_place(values: &mut [f64]) -> Result<Summary> {
    let mean = mean(values).ok_or(Error::Empty("summary"))?;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    let iqr = iqr_in_place(values)?;
    Ok(Summary { mean, std: libm::sqrt(var), iqr })
}

/// Product-moment correlation with its two-tailed p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Pearson correlation; the p-value comes from
/// `t = rho * sqrt((n - 2) / (1 - rho^2))` against Student's t with `n - 2`
/// degrees of freedom, two-tailed.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pearson input"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::ConstantInput);
    }
    let rho = (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0);
    Ok(CorrelationResult { rho, p_value: correlation_p_value(rho, n), n })
}

/// Two-tailed p-value of a sample correlation `rho` over `n` pairs.
pub fn correlation_p_value(rho: f64, n: usize) -> f64 {
    debug_assert!(n >= 3);
    let df = (n - 2) as f64;
    let r2 = rho * rho;
    if r2 >= 1.0 {
        return 0.0;
    }
    let t2 = r2 * df / (1.0 - r2);
    student_t_two_tailed(t2, df)
}

/// Two-tailed tail probability `P(|T| >= t)` for `T ~ t(df)`, given `t^2`.
pub fn student_t_two_tailed(t_squared: f64, df: f64) -> f64 {
    if t_squared <= 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df / (df + t_squared), 0.5 * df, 0.5).clamp(0.0, 1.0)
}

/// Regularized incomplete beta `I_x(a, b)` via the modified-Lentz continued
/// fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Per-column mean and population std of a row-major matrix with `dim`
/// columns. Zero-spread columns report a std of 1 so that scaling leaves them
/// centred rather than dividing by zero.
pub fn column_moments(rows: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len().checked_div(dim).unwrap_or(0);
    let mut means = alloc::vec![0.0; dim];
    let mut stds = alloc::vec![1.0; dim];
    if n == 0 {
        return (means, stds);
    }
    for row in rows.chunks_exact(dim) {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut ss = alloc::vec![0.0; dim];
    for row in rows.chunks_exact(dim) {
        for ((s, v), m) in ss.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for (sd, s) in stds.iter_mut().zip(ss) {
        let v = libm::sqrt(s / n as f64);
        *sd = if v > 0.0 && v.is_finite() { v } else { 1.0 };
    }
    (means, stds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 25.0).unwrap(), 1.75);
        assert_eq!(percentile(&[100.0, 200.0, 300.0, 400.0], 75.0).unwrap(), 325.0);
        assert_eq!(percentile(&[100.0, 200.0, 300.0, 400.0], 25.0).unwrap(), 175.0);
        for q in [0.0, 13.0, 50.0, 100.0] {
            assert_eq!(percentile(&[7.5], q).unwrap(), 7.5);
        }
        assert!(matches!(percentile(&[], 50.0), Err(Error::Empty(_))));
    }

    #[test]
    fn percentile_matches_sorted_variant() {
        let v = [5.0, -1.0, 3.5, 3.5, 10.0, 0.25, 8.0];
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        for q in [0.0, 10.0, 33.3333, 50.0, 66.6667, 90.0, 100.0] {
            assert_eq!(percentile(&v, q).unwrap(), percentile_sorted(&sorted, q));
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[0.1]).unwrap(), 0.1);
        assert_eq!(median(&[0.1, 0.2, 0.4]).unwrap(), 0.2);
        assert!(close(median(&[0.1, 0.2, 0.4, 1.0]).unwrap(), 0.3, 1e-15));
    }

    #[test]
    fn pearson_identity() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 1.3 - 2.0).collect();
        let r = pearson(&x, &x).unwrap();
        assert!(close(r.rho, 1.0, 1e-12));
        assert!(r.p_value < 1e-12);
        assert_eq!(r.n, 10);
    }

    #[test]
    fn pearson_small_example() {
        let r = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!(close(r.rho, 0.8, 1e-12));
        // scipy.stats.pearsonr
        assert!(close(r.p_value, 0.104_088_038_661_827_99, 1e-10));
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]), Err(Error::LengthMismatch { left: 2, right: 3 }));
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ConstantInput));
        assert!(matches!(pearson(&[1.0, 2.0], &[2.0, 1.0]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn t_tail_against_reference_values() {
        // scipy.stats.t.sf(t, df) * 2
        let cases = [
            (2.0, 10.0, 0.073_388_034_770_740_39),
            (0.5, 3.0, 0.651_447_964_848_151),
            (10.0, 50.0, 1.607_733_468_833_539e-13),
            (1.0, 1.0, 0.5),
        ];
        for (t, df, want) in cases {
            let got = student_t_two_tailed(t * t, df);
            assert!((got - want).abs() <= 1e-10 * want.max(1e-3), "t={t} df={df}: {got} vs {want}");
        }
    }

    #[test]
    fn reported_correlation_pairs_are_two_tailed() {
        let p28 = correlation_p_value(-0.28, 118);
        let p33 = correlation_p_value(-0.33, 118);
        assert!(close(p28, 0.002_134_355_642_800_774_5, 1e-10));
        assert!(close(p33, 0.000_262_916_722_489_923_06, 1e-10));
    }

    #[test]
    fn column_moments_flags_constant_columns() {
        let rows = [1.0, 5.0, 3.0, 5.0, 5.0, 5.0];
        let (m, s) = column_moments(&rows, 2);
        assert_eq!(m, alloc::vec![3.0, 5.0]);
        assert!(close(s[0], libm::sqrt(8.0 / 3.0), 1e-12));
        assert_eq!(s[1], 1.0);
    }
}
