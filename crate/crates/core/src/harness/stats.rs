//! Small statistics toolbox: binomial intervals, quantiles, KS distance,
//! chi-square p-values, total variation and log-log regression.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Standard normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A binomial proportion with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub count: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Proportion {
    pub fn new(count: u64, trials: u64) -> Self {
        let (lo, hi) = wilson(count, trials, Z95);
        let estimate = if trials == 0 {
            0.0
        } else {
            count as f64 / trials as f64
        };
        Proportion {
            count,
            trials,
            estimate,
            lo,
            hi,
        }
    }

    /// Binomial standard deviation of the estimate.
    pub fn sd(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval; `(0, 1)` when there are no trials.
pub fn wilson(count: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if count == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if count == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Linear-interpolation quantile of sorted data (the usual "type 7").
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorts a copy with NaN last.
pub fn sorted(data: &[f64]) -> Vec<f64> {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(data: &[f64]) -> f64 {
    quantile_sorted(&sorted(data), 0.5)
}

/// Exact two-sided Kolmogorov–Smirnov distance between the empirical CDF of
/// `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let xs = sorted(samples);
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / m).max((i + 1) as f64 / m - f);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Fréchet distribution function `exp(-x^-alpha)` for `x > 0`, 0 otherwise.
pub fn frechet_cdf(alpha: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        if x <= 0.0 {
            0.0
        } else {
            (-x.powf(-alpha)).exp()
        }
    }
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(stat: f64, df: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_ur(df / 2.0, stat / 2.0)
}

/// Pearson goodness of fit; returns `(statistic, p-value)`.
pub fn chi_square_test(observed: &[u64], probs: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    (stat, chi_square_sf(stat, (observed.len() - 1) as f64))
}

/// Two-sample chi-square homogeneity test on counts over the same cells;
/// cells empty in both samples are dropped. Returns `(statistic, p-value)`.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let na = a.iter().sum::<u64>() as f64;
    let nb = b.iter().sum::<u64>() as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let pooled = (x + y) as f64 / (na + nb);
        if pooled == 0.0 {
            continue;
        }
        cells += 1;
        let (ea, eb) = (pooled * na, pooled * nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if cells < 2 {
        return (0.0, 1.0);
    }
    (stat, chi_square_sf(stat, (cells - 1) as f64))
}

/// Total variation between two empirical distributions given as counts over
/// the same cells.
pub fn total_variation(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    0.5 * a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 / na as f64 - y as f64 / nb as f64).abs())
        .sum::<f64>()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_examples() {
        let d = ks_statistic(&[1.0], frechet_cdf(3.0)).unwrap();
        assert!((d - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((ks_statistic(&[0.0; 5], frechet_cdf(3.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(ks_statistic(&[], frechet_cdf(3.0)).is_err());
    }

    #[test]
    fn ks_on_own_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 0.02);
    }

    #[test]
    fn ks_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * 3.0).collect();
        let cdf = frechet_cdf(2.0);
        // sup over both sides of every jump
        let m = xs.len() as f64;
        let mut brute: f64 = 0.0;
        for &x in &xs {
            let below = xs.iter().filter(|&&y| y < x).count() as f64 / m;
            let upto = xs.iter().filter(|&&y| y <= x).count() as f64 / m;
            brute = brute.max((cdf(x) - below).abs()).max((upto - cdf(x)).abs());
        }
        assert!((ks_statistic(&xs, &cdf).unwrap() - brute).abs() < 1e-15);
    }

    #[test]
    fn wilson_properties() {
        let (lo, hi) = wilson(50, 100, Z95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        assert_eq!(wilson(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn chi_square_reference_values() {
        // P(chi2_1 > 3.841) = 0.05, P(chi2_4 > 9.488) = 0.05
        assert!((chi_square_sf(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-9);
        assert!((chi_square_sf(9.487_729_036_781_154, 4.0) - 0.05).abs() < 1e-9);
        let (stat, p) = chi_square_test(&[25, 25, 25, 25], &[0.25; 4]);
        assert_eq!(stat, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn quantiles_and_slopes() {
        let v = sorted(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        let xs = [1.0, 10.0, 100.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 2.0 * x.powf(-0.75)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.75).abs() < 1e-12);
        assert!((total_variation(&[1, 1], &[2, 0]) - 0.5).abs() < 1e-15);
        assert_eq!(
            chi_square_homogeneity(&[10, 20, 0], &[20, 40, 0]),
            (0.0, 1.0)
        );
        // 2x2 table [[10, 20], [20, 10]]: statistic 20/3
        let (stat, p) = chi_square_homogeneity(&[10, 20], &[20, 10]);
        assert!((stat - 20.0 / 3.0).abs() < 1e-12);
        assert!((p - 0.009_823_274_507_519_247).abs() < 1e-9);
    }
}
