//! Small sample-statistics helpers.

/// Nearest-rank quantile of `sorted` (ascending) at probability `p`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// `(p01, p50, p99)` by nearest rank.
pub fn quantiles(values: &[f64]) -> [f64; 3] {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    [nearest_rank(&v, 0.01), nearest_rank(&v, 0.5), nearest_rank(&v, 0.99)]
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    nearest_rank(&v, 0.5)
}

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `||r||_q` for finite `q >= 1`.
pub fn lq_norm(r: &[f64], q: f64) -> f64 {
    if q == 1.0 {
        r.iter().map(|x| x.abs()).sum()
    } else if q == 2.0 {
        r.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        let max = r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if max == 0.0 {
            return 0.0;
        }
        max * r.iter().map(|x| (x.abs() / max).powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantiles(&v), [1.0, 50.0, 99.0]);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(nearest_rank(&[5.0], 0.0), 5.0);
    }

    #[test]
    fn lq_norms() {
        let r = [3.0, -4.0];
        assert_eq!(lq_norm(&r, 1.0), 7.0);
        assert_eq!(lq_norm(&r, 2.0), 5.0);
        assert!((lq_norm(&r, 3.0) - 91f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(lq_norm(&[0.0, 0.0], 3.0), 0.0);
    }
}
