//! Streaming moments, Kolmogorov-Smirnov tests, histograms and least-squares
//! line fits.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Welford accumulator for mean and variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `std / √n`.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.std_dev() / (self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Outcome of a one-sample Kolmogorov-Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub level: f64,
    pub accepted: bool,
}

/// Upper 1% point of the Kolmogorov distribution.
const KS_C_001: f64 = 1.627_623_611_518_950;

/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS distance of `samples` from `Exp(mean)`, decided at level
/// 0.01 against the asymptotic critical value `1.6276/√n`.
pub fn ks_exponential(samples: &[f64], mean: f64) -> Result<KsResult> {
    if samples.len() < 100 {
        return Err(Error::InsufficientData(format!("KS test needs at least 100 samples, got {}", samples.len())));
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::InvalidArgument(format!("hypothesized mean must be positive, got {mean}")));
    }
    if let Some(bad) = samples.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument(format!("sample {bad} is not a nonnegative number")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = -(-x / mean).exp_m1();
        d = d.max((i + 1) as f64 / nf - cdf).max(cdf - i as f64 / nf);
    }
    let sqrt_n = nf.sqrt();
    let critical = KS_C_001 / sqrt_n;
    Ok(KsResult {
        n,
        statistic: d,
        critical_value: critical,
        p_value: kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d),
        level: 0.01,
        accepted: d < critical,
    })
}

/// Equal-width histogram bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    /// `count / (n · width)`, comparable with a probability density.
    pub density: f64,
}

/// Histogram over `[0, upper)`; samples outside the range are dropped from
/// the counts but not from the density normalization.
pub fn histogram(samples: &[f64], bins: usize, upper: f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 || !(upper > 0.0) {
        return Err(Error::InvalidArgument("histogram needs at least one bin and a positive range".into()));
    }
    let width = upper / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in samples {
        if (0.0..upper).contains(&x) {
            counts[((x / width) as usize).min(bins - 1)] += 1;
        }
    }
    let n = samples.len().max(1) as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lower: i as f64 * width,
            upper: (i + 1) as f64 * width,
            count,
            density: count as f64 / (n * width),
        })
        .collect())
}

/// Ordinary least-squares line `y = intercept + slope · x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// Root-mean-square residual.
    pub residual_rms: f64,
    pub r_squared: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("x and y differ in length".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("line fit needs at least 2 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = n.saturating_sub(2);
    let s2 = if dof > 0 { ss_res / dof as f64 } else { 0.0 };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr: (s2 / sxx).sqrt(),
        intercept_stderr: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        residual_rms: (ss_res / nf).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 },
    })
}

/// Line fit of `ln y` against `ln x`; both must be positive.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if let Some(v) = x.iter().chain(y).find(|v| !(**v > 0.0)) {
        return Err(Error::Fit(format!("log-log fit needs positive data, got {v}")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn welford_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..10_000).map(|_| 1e3 + rng.random::<f64>()).collect();
        let s: RunningStats = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!(((s.mean() - mean) / mean).abs() < 1e-12);
        assert!(((s.variance() - var) / var).abs() < 1e-9);
        assert_eq!(RunningStats::new().stderr(), 0.0);
        let one: RunningStats = [3.0].into_iter().collect();
        assert_eq!((one.mean(), one.variance()), (3.0, 0.0));
    }

    #[test]
    fn ks_accepts_and_rejects() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let exp = Exp::new(100.0).unwrap();
        let good: Vec<f64> = (0..10_000).map(|_| exp.sample(&mut rng)).collect();
        let r = ks_exponential(&good, 0.01).unwrap();
        assert!(r.accepted && r.p_value > 0.01, "{r:?}");
        let flat: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>() * 0.02).collect();
        let r = ks_exponential(&flat, 0.01).unwrap();
        assert!(!r.accepted && r.p_value < 0.01, "{r:?}");
    }

    #[test]
    fn ks_errors() {
        assert!(ks_exponential(&[1.0; 10], 1.0).is_err());
        assert!(ks_exponential(&[1.0; 200], 0.0).is_err());
        let mut v = vec![1.0; 200];
        v[7] = -1.0;
        assert!(ks_exponential(&v, 1.0).is_err());
    }

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_survival(KS_C_001) - 0.01).abs() < 1e-6);
        assert!((kolmogorov_survival(1.358_098_8) - 0.05).abs() < 1e-6);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn histogram_counts() {
        let h = histogram(&[0.05, 0.15, 0.15, 0.95, 1.5], 10, 1.0).unwrap();
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 2, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert!((h[1].density - 2.0 / (5.0 * 0.1)).abs() < 1e-12);
        assert!(histogram(&[], 0, 1.0).is_err());
    }

    #[test]
    fn exact_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-12);
        assert!(loglog_fit(&[1.0, -1.0], &[1.0, 1.0]).is_err());
        assert!(line_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn slope_stderr_matches_scatter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut slopes = RunningStats::new();
        let mut reported = RunningStats::new();
        for _ in 0..2000 {
            let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
            let y: Vec<f64> = x.iter().map(|v| 2.0 * v + rng.random::<f64>() - 0.5).collect();
            let f = line_fit(&x, &y).unwrap();
            slopes.push(f.slope);
            reported.push(f.slope_stderr);
        }
        assert!((slopes.mean() - 2.0).abs() < 0.005);
        assert!((reported.mean() / slopes.std_dev() - 1.0).abs() < 0.1);
    }
}
