//! Sample statistics shared by the Monte Carlo and surrogate pipelines.

use serde::{Deserialize, Serialize};

/// Mean, unbiased variance, and standardized third and fourth central
/// moments (kurtosis is not excess: a normal sample gives about 3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Moments of a sample. Degenerate samples (zero spread or a single value)
/// report skewness and kurtosis as 0.
pub fn moments(xs: &[f64]) -> Moments {
    let m = xs.len();
    if m == 0 {
        return Moments {
            mean: f64::NAN,
            variance: f64::NAN,
            skewness: f64::NAN,
            kurtosis: f64::NAN,
        };
    }
    let mf = m as f64;
    if xs.iter().all(|x| *x == xs[0]) {
        return Moments {
            mean: xs[0],
            variance: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
        };
    }
    let mean = xs.iter().sum::<f64>() / mf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = if m > 1 { m2 / (mf - 1.0) } else { 0.0 };
    let (m2, m3, m4) = (m2 / mf, m3 / mf, m4 / mf);
    let (skewness, kurtosis) = if m2 > 0.0 && m2 > 1e-28 * mean * mean {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    Moments {
        mean,
        variance,
        skewness,
        kurtosis,
    }
}

/// Linear-interpolation quantile of an ascending sample, `q ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Central percentile interval holding `level` of the sample.
pub fn confidence_interval(sorted: &[f64], level: f64) -> ConfidenceInterval {
    let tail = 0.5 * (1.0 - level);
    ConfidenceInterval {
        level,
        lower: percentile(sorted, tail),
        upper: percentile(sorted, 1.0 - tail),
    }
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Empirical CDF `F(x) = #{xᵢ ≤ x} / M` of an ascending sample.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

/// Empirical CDF sampled at `points` evenly spaced abscissae spanning the
/// sample range.
pub fn cdf_grid(sorted: &[f64], points: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if points < 2 || hi == lo {
        return vec![(lo, 1.0)];
    }
    (0..points)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            (x, ecdf(sorted, x))
        })
        .collect()
}

/// Two-sample Kolmogorov–Smirnov distance between ascending samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_moments() {
        let m = moments(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m.mean, 5.0);
        assert!((m.variance - 32.0 / 7.0).abs() < 1e-12);
        // population m2 = 4, m3 = 5.25, m4 = 44.5
        assert!((m.skewness - 5.25 / 8.0).abs() < 1e-12);
        assert!((m.kurtosis - 44.5 / 16.0).abs() < 1e-12);
        let d = moments(&[3.0; 5]);
        assert_eq!((d.variance, d.skewness, d.kurtosis), (0.0, 0.0, 0.0));
    }

    #[test]
    fn percentiles_and_ks() {
        let s = sorted(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(percentile(&s, 0.0), 1.0);
        assert_eq!(percentile(&s, 0.5), 2.5);
        assert_eq!(percentile(&s, 1.0), 4.0);
        assert_eq!(ks_distance(&s, &s), 0.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        assert_eq!(ks_distance(&[1.0, 2.0], &[2.0, 3.0]), 0.5);
        let grid = cdf_grid(&s, 4);
        assert_eq!(grid.first().unwrap().1, 0.25);
        assert_eq!(grid.last().unwrap().1, 1.0);
    }
}
