//! Distributional statistics over confidence-bound estimates.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub d_statistic: f64,
    pub p_value: f64,
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact sup-distance between the two empirical CDFs, by a merged scan.
/// Tied values are consumed together on both sides before comparing. The
/// gap is kept as the integer `|i n_b - j n_a|` and divided once at the end.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as u128, b.len() as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut gap = 0u128;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        gap = gap.max((i as u128 * nb).abs_diff(j as u128 * na));
    }
    Ok(gap as f64 / (na * nb) as f64)
}

/// Asymptotic two-sided Kolmogorov survival function
/// `Q(l) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2)`, series cut once a term
/// drops below 1e-12.
///
/// Below `l = 1.18` the alternating series converges slowly and its partial
/// sums wobble around 1, so the equivalent theta-function form
/// `1 - sqrt(2 pi) / l * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 l^2))` is used.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let scale = -std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=100u32 {
            let odd = f64::from(2 * k - 1);
            let term = (odd * odd * scale).exp();
            sum += term;
            if term < 1e-16 * sum || term == 0.0 {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=1000u32 {
        let term = (-2.0 * f64::from(k * k) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value, using the
/// effective size `ne = n_a n_b / (n_a + n_b)` and the
/// `(sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) d` small-sample correction.
pub fn ks_2samp(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let d = ks_statistic(a, b)?;
    if d == 0.0 {
        return Ok(KsResult { d_statistic: 0.0, p_value: 1.0 });
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    Ok(KsResult { d_statistic: d, p_value: kolmogorov_q(lambda) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionSummary {
    pub user_id: String,
    pub mean: f64,
    pub std_dev: f64,
    /// Population variance over mean; `None` when the mean is 0.
    pub fano: Option<f64>,
    pub n_obs: usize,
}

/// Mean and population variance (divisor n).
fn mean_var(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

pub fn dispersion(user_id: &str, series: &[f64]) -> Result<DispersionSummary> {
    if series.len() < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: series.len() });
    }
    let (mean, var) = mean_var(series);
    Ok(DispersionSummary {
        user_id: user_id.to_string(),
        mean,
        std_dev: var.sqrt(),
        fano: (mean > 0.0).then(|| var / mean),
        n_obs: series.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `n_bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Values outside `[lo, hi]` (and NaNs).
    pub overflow: u64,
}

impl Histogram {
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.edges.windows(2).zip(&self.counts).map(|(e, c)| (e[0], e[1], *c))
    }
}

/// Equal-width bins, each half-open `[lo_i, hi_i)` except the last, which is closed.
pub fn histogram(values: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if n_bins == 0 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::BadRange);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    let mut counts = vec![0u64; n_bins];
    let mut overflow = 0;
    for &v in values {
        if !(lo..=hi).contains(&v) {
            overflow += 1;
            continue;
        }
        let mut idx = (((v - lo) / width) as usize).min(n_bins - 1);
        // settle against the stored edges so bin membership matches bin_lo/bin_hi exactly
        while idx > 0 && v < edges[idx] {
            idx -= 1;
        }
        while idx + 1 < n_bins && v >= edges[idx + 1] {
            idx += 1;
        }
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts, overflow })
}

/// Fisher–Pearson moment coefficient `g1 = m3 / m2^(3/2)` (population moments).
pub fn skewness(values: &[f64]) -> Result<f64> {
    if values.len() < 3 {
        return Err(Error::TooFewObservations { needed: 3, got: values.len() });
    }
    let first = values[0];
    if values.iter().all(|v| *v == first) {
        return Err(Error::ConstantSample);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    Ok(m3 / m2.powf(1.5))
}
